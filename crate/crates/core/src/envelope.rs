//! Conditional plurisubharmonic envelopes of bounded obstacles.
//!
//! P(u, f, Ω) is the largest bounded function below the obstacle u that is
//! discretely plurisubharmonic with Monge–Ampère density ≥ f. Two routes:
//!
//! * obstacle iteration — sweep w ← min(u, local density-f inversion); the
//!   iterates decrease from u to the largest discrete fixed point;
//! * exponential penalization — solve (dd^c u_j)ⁿ = max{e^{j(u_j−u)}·g, f} dλ
//!   for an increasing schedule of j; when u is a discrete subsolution of
//!   density g, the solutions u_j increase with j and stay below u.
//!
//! Both deliver the same function up to discretization error; the obstacle
//! route is the reference, the penalized route the independent cross-check.
//! The module also provides the inf-convolution regularizer and the
//! idempotence / maximality self-checks.

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSet};
use crate::ma::{is_discretely_psh, ma_density};
use crate::solver::{solve, Rhs, SolveParams, SolveReport};
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Obstacle,
    Berman,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Obstacle => write!(f, "obstacle"),
            Method::Berman => write!(f, "berman"),
        }
    }
}

/// (contact_tol, ma_tol) for a run: contact_tol = 10·tol, and
/// ma_tol = max(1e-6, 10·tol/h²) — second differences of a tol-converged
/// iterate carry noise of order tol/h².
pub fn tolerances(h: f64, tol: f64) -> (f64, f64) {
    (10.0 * tol, (10.0 * tol / (h * h)).max(1e-6))
}

/// Constraint-membership diagnostics of a computed envelope: P ≤ u,
/// discrete plurisubharmonicity, and density ≥ f.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    /// max over interior of P − u (admissibility: ≤ 0 up to solver noise).
    pub max_over_obstacle: f64,
    /// min over interior nodes and directions of the line Laplacian of P.
    pub psh_worst: f64,
    /// min over interior of ma_density(P) − f.
    pub density_slack_worst: f64,
    pub contact_tol: f64,
    pub ma_tol: f64,
    pub psh_ok: bool,
    pub density_ok: bool,
}

/// A computed envelope with its solve report and diagnostic node sets.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub p: GridFunction,
    pub method: Method,
    pub report: SolveReport,
    /// Nodes with |P − u| ≤ contact_tol (the envelope touches the obstacle).
    pub contact: GridSet,
    /// Nodes with ma_density(P) ≥ f − ma_tol (the density constraint binds).
    pub active: GridSet,
    pub constraint: ConstraintReport,
}

fn finish(
    p: GridFunction,
    method: Method,
    report: SolveReport,
    u: &GridFunction,
    f: &DensityField,
    params: &SolveParams,
) -> EnvelopeResult {
    let g = p.grid.clone();
    let (contact_tol, ma_tol) = tolerances(g.h, params.tol);
    let dens = ma_density(&p);
    let mut contact = GridSet::empty(&g);
    let mut active = GridSet::empty(&g);
    let mut max_over = f64::NEG_INFINITY;
    let mut slack = f64::INFINITY;
    for (t, &id) in g.interior.iter().enumerate() {
        let id = id as usize;
        let d = p.vals[id] - u.vals[id];
        if d > max_over {
            max_over = d;
        }
        contact.mask[t] = d.abs() <= contact_tol;
        let s = dens.vals[id] - f.vals.vals[id];
        if s < slack {
            slack = s;
        }
        active.mask[t] = s >= -ma_tol;
    }
    let psh = is_discretely_psh(&p, ma_tol);
    let constraint = ConstraintReport {
        max_over_obstacle: max_over,
        psh_worst: psh.worst,
        density_slack_worst: slack,
        contact_tol,
        ma_tol,
        psh_ok: psh.ok,
        density_ok: slack >= -ma_tol,
    };
    EnvelopeResult {
        p,
        method,
        report,
        contact,
        active,
        constraint,
    }
}

/// Largest discretely psh function ≤ u with Monge–Ampère density ≥ f,
/// by obstacle-clamped sweeps started from u itself. Band values of u act
/// as the Dirichlet trace.
pub fn envelope_obstacle(
    u: &GridFunction,
    f: &DensityField,
    params: &SolveParams,
) -> Result<EnvelopeResult> {
    u.same_grid(&f.vals)?;
    let (w, report) = solve(u, &Rhs::Constant(f), Some(u), params)?;
    Ok(finish(w, Method::Obstacle, report, u, f, params))
}

/// Largest-fixed-point self-check: re-solving from the constant sup(u)
/// initial guess must land on the same envelope within 2·tol.
#[derive(Debug, Clone, Serialize)]
pub struct MaximalityCheck {
    pub gap: f64,
    pub ok: bool,
}

pub fn maximality_check(
    u: &GridFunction,
    f: &DensityField,
    reference: &GridFunction,
    params: &SolveParams,
) -> Result<MaximalityCheck> {
    u.same_grid(reference)?;
    let top = u.vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut init = u.clone();
    for &id in &u.grid.interior {
        init.vals[id as usize] = top;
    }
    let (w, _) = solve(&init, &Rhs::Constant(f), Some(u), params)?;
    let gap = w.sup_diff(reference)?;
    Ok(MaximalityCheck {
        gap,
        ok: gap <= 2.0 * params.tol,
    })
}

/// The obstacle's own Monge–Ampère density clamped to ≥ 0 — the natural
/// penalization density g when u is declared a max of subsolutions: u is
/// then an exact discrete subsolution of (dd^c w)ⁿ = g dλ by construction.
pub fn subsolution_density(u: &GridFunction, p: f64) -> Result<DensityField> {
    let mut d = ma_density(u);
    for v in &mut d.vals {
        *v = v.max(0.0);
    }
    DensityField::new(d, p)
}

/// Per-stage diagnostics of the penalization run.
#[derive(Debug, Clone, Serialize)]
pub struct BermanStage {
    pub j: f64,
    pub iterations: u64,
    pub sup_update: f64,
    pub residual_sup: f64,
    /// max over interior of u_j − u: stays ≤ 0 up to solver noise.
    pub sup_over_obstacle: f64,
    /// min over interior of u_j − (previous stage). From the second stage on
    /// this is ≥ 0 up to solver noise (the stages increase with j); the first
    /// stage instead measures the drop from the initial obstacle.
    pub min_rise: f64,
    /// sup |u_j − previous stage|.
    pub sup_move: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BermanTrace {
    pub stages: Vec<BermanStage>,
    /// u was declared a max of subsolutions; the pointwise density check
    /// is informational only.
    pub declared_max_of_subsolutions: bool,
    /// min over interior of ma_density(u) − g.
    pub subsolution_worst: f64,
    /// The discrete subsolution hypothesis holds (or was declared).
    pub subsolution_ok: bool,
}

/// Options of the penalization run.
#[derive(Debug, Clone)]
pub struct BermanOptions {
    /// Strictly increasing positive penalization exponents.
    pub schedule: Vec<f64>,
    pub declared_max_of_subsolutions: bool,
    /// Solve the stages at this tighter tolerance (the run's reported
    /// tolerance stays params.tol). Stage-to-stage comparisons at slack
    /// 2·tol need the stages resolved well below tol.
    pub stage_tol: Option<f64>,
}

impl BermanOptions {
    pub fn with_max(j_max: f64) -> BermanOptions {
        BermanOptions {
            schedule: geometric_schedule(j_max),
            declared_max_of_subsolutions: false,
            stage_tol: None,
        }
    }
}

/// Doubling schedule 1, 2, 4, … capped by (and ending at) j_max.
pub fn geometric_schedule(j_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 1.0;
    while j <= j_max {
        out.push(j);
        j *= 2.0;
    }
    match out.last() {
        Some(&last) if last < j_max => out.push(j_max),
        None => out.push(j_max),
        _ => {}
    }
    out
}

/// Envelope by exponential penalization: for each j in the schedule, solve
/// (dd^c w)ⁿ = max{e^{j(w−u)}·g, f} dλ with boundary u, warm-starting from
/// the previous stage. Returns the final stage as P plus the per-stage trace.
pub fn envelope_berman(
    u: &GridFunction,
    f: &DensityField,
    g: &DensityField,
    opts: &BermanOptions,
    params: &SolveParams,
) -> Result<(EnvelopeResult, BermanTrace)> {
    u.same_grid(&f.vals)?;
    u.same_grid(&g.vals)?;
    if opts.schedule.is_empty() {
        return Err(Error::Validation("empty penalization schedule".into()));
    }
    for w in opts.schedule.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Validation(format!(
                "penalization schedule must increase strictly: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(opts.schedule[0] > 0.0) || !opts.schedule.iter().all(|j| j.is_finite()) {
        return Err(Error::Validation(
            "penalization exponents must be finite and positive".into(),
        ));
    }

    let grid = u.grid.clone();
    let (_, ma_tol) = tolerances(grid.h, params.tol);
    let du = ma_density(u);
    let mut subsolution_worst = f64::INFINITY;
    for &id in &grid.interior {
        let s = du.vals[id as usize] - g.vals.vals[id as usize];
        if s < subsolution_worst {
            subsolution_worst = s;
        }
    }
    let subsolution_ok = opts.declared_max_of_subsolutions || subsolution_worst >= -ma_tol;

    let stage_params = SolveParams {
        tol: opts.stage_tol.unwrap_or(params.tol),
        ..params.clone()
    };
    let mut w = u.clone();
    let mut stages = Vec::with_capacity(opts.schedule.len());
    let mut last_report = None;
    for &j in &opts.schedule {
        let rhs = Rhs::Penalized { f, g, u0: u, j };
        let (next, report) = solve(&w, &rhs, None, &stage_params)?;
        let mut over = f64::NEG_INFINITY;
        let mut rise = f64::INFINITY;
        let mut mv = 0.0f64;
        for &id in &grid.interior {
            let id = id as usize;
            let d = next.vals[id] - u.vals[id];
            if d > over {
                over = d;
            }
            let r = next.vals[id] - w.vals[id];
            if r < rise {
                rise = r;
            }
            if r.abs() > mv {
                mv = r.abs();
            }
        }
        stages.push(BermanStage {
            j,
            iterations: report.iterations,
            sup_update: report.sup_update,
            residual_sup: report.residual_sup,
            sup_over_obstacle: over,
            min_rise: rise,
            sup_move: mv,
        });
        w = next;
        last_report = Some(report);
    }
    let mut report = last_report.expect("schedule is nonempty");
    report.tol = params.tol;
    let result = finish(w, Method::Berman, report, u, f, params);
    let trace = BermanTrace {
        stages,
        declared_max_of_subsolutions: opts.declared_max_of_subsolutions,
        subsolution_worst,
        subsolution_ok,
    };
    Ok((result, trace))
}

/// Both sides of P(u, f) = P(P(u, 0), f), computed with the obstacle method
/// on one grid.
#[derive(Debug, Clone)]
pub struct IdempotenceReport {
    pub sup_diff: f64,
    pub direct: EnvelopeResult,
    pub composed: EnvelopeResult,
}

pub fn envelope_idempotence_check(
    u: &GridFunction,
    f: &DensityField,
    params: &SolveParams,
) -> Result<IdempotenceReport> {
    let zero = DensityField::constant(&u.grid, 0.0, f.p)?;
    let hull = envelope_obstacle(u, &zero, params)?;
    let direct = envelope_obstacle(u, f, params)?;
    let composed = envelope_obstacle(&hull.p, f, params)?;
    let sup_diff = composed.p.sup_diff(&direct.p)?;
    Ok(IdempotenceReport {
        sup_diff,
        direct,
        composed,
    })
}

/// Inf-convolution regularizer u_m(z) = min over lattice offsets |ξ| < r of
/// u(z+ξ) + m|ξ|. Values are replaced on the inner set of nodes whose whole
/// offset window stays inside interior ∪ band (and left at u elsewhere);
/// the returned set marks that inner region.
pub fn inf_convolution(u: &GridFunction, m: f64, r: f64) -> Result<(GridFunction, GridSet)> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::Validation(format!("slope m = {m} must be ≥ 0")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Validation(format!("radius r = {r} must be > 0")));
    }
    let g = u.grid.clone();
    let axes = 2 * g.n;
    let kr = r / g.h;
    let kmax: i64 = g
        .counts
        .iter()
        .map(|&c| c as i64)
        .max()
        .unwrap()
        .min(kr.ceil() as i64);
    // lattice offsets d ≠ 0 with |d| < r/h, paired with their cost m·h·|d|
    let mut offsets: Vec<(Vec<i32>, f64)> = vec![(Vec::new(), 0.0)];
    for _ in 0..axes {
        let mut next = Vec::new();
        for (base, _) in &offsets {
            let used: f64 = base.iter().map(|&o| (o as f64) * (o as f64)).sum();
            for o in -kmax..=kmax {
                let d2 = used + (o as f64) * (o as f64);
                if d2.sqrt() < kr {
                    let mut v = base.clone();
                    v.push(o as i32);
                    next.push((v, d2));
                }
            }
        }
        offsets = next;
    }
    for (_, d2) in &mut offsets {
        *d2 = m * g.h * d2.sqrt();
    }
    offsets.retain(|(d, _)| d.iter().any(|&o| o != 0));

    let mut out = u.clone();
    let mut inner = GridSet::empty(&g);
    for (t, &id) in g.interior.iter().enumerate() {
        let lat = g.nodes[id as usize];
        let mut best = u.vals[id as usize];
        let mut full = true;
        for (d, cost) in &offsets {
            let mut target = [0i32; 4];
            for i in 0..axes {
                target[i] = lat[i] + d[i];
            }
            let Some(cell) = g.cell_index(&target[..axes]) else {
                full = false;
                break;
            };
            let nb = g.node_of_cell[cell];
            if nb == crate::grid::NO_NODE {
                full = false;
                break;
            }
            let candidate = u.vals[nb as usize] + cost;
            if candidate < best {
                best = candidate;
            }
        }
        if full {
            inner.mask[t] = true;
            out.vals[id as usize] = best;
        }
    }
    if inner.is_empty() {
        return Err(Error::OffsetLeavesDomain { r });
    }
    Ok((out, inner))
}
