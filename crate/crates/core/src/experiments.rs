//! Quantitative experiments on the envelope operator: convergence against
//! closed forms, two-method agreement, the density bound, L^p stability,
//! monotone limits, domain exhaustion, the shrunk-domain comparison, the
//! capacity inequality, and Lipschitz moduli. Every study returns a typed
//! report with a pass flag; identical inputs produce bit-identical numbers.

use crate::capacity::capacity;
use crate::density::DensityField;
use crate::domain::DomainSpec;
use crate::envelope::{
    envelope_berman, envelope_obstacle, tolerances, BermanOptions, BermanStage,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{build_grid, Grid, GridFunction, GridSet, INTERIOR};
use crate::ma::{lipschitz_constant, lp_norm, ma_density};
use crate::solver::SolveParams;
use crate::stencil::StencilSet;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

fn grid_for(spec: &DomainSpec, h: f64) -> Result<Arc<Grid>> {
    build_grid(spec, h, StencilSet::default_for(spec.n()))
}

fn factorial(n: usize) -> f64 {
    match n {
        1 => 1.0,
        2 => 2.0,
        _ => unreachable!("only n = 1, 2 are supported"),
    }
}

/// Interior nodes of `from` located on the lattice of `to` (which must hold
/// them as interior nodes): the containment map between nested grids.
fn node_map(from: &Arc<Grid>, to: &Arc<Grid>) -> Result<Vec<(u32, u32)>> {
    let mut out = Vec::with_capacity(from.interior_count());
    for &id in &from.interior {
        let p = from.point_of(id);
        let tid = to.locate(&p).ok_or_else(|| Error::NonNested {
            detail: format!("inner node at {p:?} has no counterpart on the outer lattice"),
        })?;
        if to.node_class[tid as usize] != INTERIOR {
            return Err(Error::NonNested {
                detail: format!("inner node at {p:?} is not interior to the outer domain"),
            });
        }
        out.push((id, tid));
    }
    Ok(out)
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceCase {
    pub h: f64,
    pub interior_nodes: usize,
    pub sup_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub cases: Vec<ConvergenceCase>,
    pub nonincreasing: bool,
    pub pass: bool,
    pub seconds: f64,
}

/// Envelope vs a closed form over a refinement list: sup-error ≤ factor·h at
/// every h and nonincreasing under refinement.
pub fn convergence_study(
    spec: &DomainSpec,
    obstacle: &Expr,
    f: &Expr,
    exact: &Expr,
    hs: &[f64],
    bound_factor: f64,
    params: &SolveParams,
) -> Result<ConvergenceReport> {
    let t0 = Instant::now();
    let mut cases = Vec::with_capacity(hs.len());
    for &h in hs {
        let g = grid_for(spec, h)?;
        let u = GridFunction::sample(&g, obstacle)?;
        let fd = DensityField::sample(&g, f, 2.0)?;
        let r = envelope_obstacle(&u, &fd, params)?;
        let reference = GridFunction::sample(&g, exact)?;
        cases.push(ConvergenceCase {
            h,
            interior_nodes: g.interior_count(),
            sup_error: r.p.sup_diff(&reference)?,
            bound: bound_factor * h,
        });
    }
    let nonincreasing = cases.windows(2).all(|w| w[1].sup_error <= w[0].sup_error);
    let pass = nonincreasing && cases.iter().all(|c| c.sup_error <= c.bound);
    Ok(ConvergenceReport {
        cases,
        nonincreasing,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --------------------------------------------------------------- cross-method

#[derive(Debug, Clone, Serialize)]
pub struct CrossMethodReport {
    pub gap: f64,
    pub threshold: f64,
    pub obstacle_iterations: u64,
    pub stages: Vec<BermanStage>,
    pub subsolution_ok: bool,
    pub pass: bool,
    pub seconds: f64,
}

/// Sup gap between the obstacle and penalization envelopes of one problem.
pub fn cross_method_study(
    u: &GridFunction,
    f: &DensityField,
    g: &DensityField,
    opts: &BermanOptions,
    threshold: f64,
    params: &SolveParams,
) -> Result<CrossMethodReport> {
    let t0 = Instant::now();
    let obst = envelope_obstacle(u, f, params)?;
    let (ber, trace) = envelope_berman(u, f, g, opts, params)?;
    let gap = ber.p.sup_diff(&obst.p)?;
    Ok(CrossMethodReport {
        gap,
        threshold,
        obstacle_iterations: obst.report.iterations,
        stages: trace.stages,
        subsolution_ok: trace.subsolution_ok,
        pass: gap <= threshold,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// ------------------------------------------------------------ density bound

#[derive(Debug, Clone, Serialize)]
pub struct MaBoundCase {
    pub method: crate::envelope::Method,
    /// max over checked nodes of ma_density(P) − (max{f, g}·1.05 + ma_tol).
    pub worst_excess: f64,
    pub worst_node: Vec<i64>,
    pub checked_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaBoundReport {
    pub cases: Vec<MaBoundCase>,
    pub cross_gap: f64,
    pub ma_tol: f64,
    pub pass: bool,
    pub seconds: f64,
}

/// Density bound ma_density(P) ≤ max{f, g}·1.05 + ma_tol at interior nodes
/// at lattice distance ≥ 2h from the band, for both methods.
pub fn ma_bound_check(
    u: &GridFunction,
    f: &DensityField,
    g: &DensityField,
    opts: &BermanOptions,
    params: &SolveParams,
) -> Result<MaBoundReport> {
    let t0 = Instant::now();
    let grid = u.grid.clone();
    let (_, ma_tol) = tolerances(grid.h, params.tol);
    let deep = grid.deep_interior(2.0);
    if deep.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let obst = envelope_obstacle(u, f, params)?;
    let (ber, _) = envelope_berman(u, f, g, opts, params)?;
    let cross_gap = ber.p.sup_diff(&obst.p)?;
    let mut cases = Vec::new();
    for r in [&obst, &ber] {
        let dens = ma_density(&r.p);
        let mut worst = f64::NEG_INFINITY;
        let mut worst_id = grid.interior[0];
        let mut checked = 0usize;
        for (t, &id) in grid.interior.iter().enumerate() {
            if !deep.mask[t] {
                continue;
            }
            checked += 1;
            let idx = id as usize;
            let limit = f.vals.vals[idx].max(g.vals.vals[idx]) * 1.05 + ma_tol;
            let excess = dens.vals[idx] - limit;
            if excess > worst {
                worst = excess;
                worst_id = id;
            }
        }
        cases.push(MaBoundCase {
            method: r.method,
            worst_excess: worst,
            worst_node: grid.lattice_of(worst_id),
            checked_nodes: checked,
        });
    }
    let pass = cases.iter().all(|c| c.worst_excess <= 0.0);
    Ok(MaBoundReport {
        cases,
        cross_gap,
        ma_tol,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// ------------------------------------------------------------------ stability

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCase {
    /// ‖f₀ − g‖_{L^p}.
    pub norm: f64,
    /// sup |P(u, f₀) − P(u, g)|.
    pub sup_diff: f64,
    /// sup_diff / norm^{1/n}.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub cases: Vec<StabilityCase>,
    pub ratio_spread: f64,
    pub slope: f64,
    pub spread_limit: f64,
    pub slope_floor: f64,
    pub pass: bool,
    pub seconds: f64,
}

/// Envelope response to density perturbations: ratios D/N^{1/n} bounded
/// (spread ≤ 4 by default) and least-squares slope of log D against log N
/// at least 1/n − 0.15.
pub fn stability_study(
    u: &GridFunction,
    f0: &DensityField,
    perturbations: &[DensityField],
    params: &SolveParams,
) -> Result<StabilityReport> {
    let t0 = Instant::now();
    if perturbations.len() < 3 {
        return Err(Error::DegenerateFit {
            detail: format!(
                "{} perturbations (at least 3 required)",
                perturbations.len()
            ),
        });
    }
    let n = u.grid.n;
    let base = envelope_obstacle(u, f0, params)?;
    let mut cases = Vec::with_capacity(perturbations.len());
    for g in perturbations {
        let pg = envelope_obstacle(u, g, params)?;
        let mut diff = GridFunction::constant(&u.grid, 0.0);
        for &id in &u.grid.interior {
            let idx = id as usize;
            diff.vals[idx] = f0.vals.vals[idx] - g.vals.vals[idx];
        }
        let norm = lp_norm(&diff, f0.p);
        let sup_diff = pg.p.sup_diff(&base.p)?;
        let ratio = if norm > 0.0 {
            sup_diff / norm.powf(1.0 / n as f64)
        } else {
            0.0
        };
        cases.push(StabilityCase { norm, sup_diff, ratio });
    }
    // the identical perturbation (D = N = 0) is excluded from the fit
    let usable: Vec<&StabilityCase> = cases
        .iter()
        .filter(|c| c.norm > 0.0 && c.sup_diff > 0.0)
        .collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateFit {
            detail: format!("{} usable perturbations after exclusions", usable.len()),
        });
    }
    let spread = {
        let hi = usable.iter().map(|c| c.ratio).fold(f64::NEG_INFINITY, f64::max);
        let lo = usable.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let slope = {
        let pts: Vec<(f64, f64)> = usable
            .iter()
            .map(|c| (c.norm.ln(), c.sup_diff.ln()))
            .collect();
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    };
    let spread_limit = 4.0;
    let slope_floor = 1.0 / n as f64 - 0.15;
    let pass = spread <= spread_limit && slope >= slope_floor;
    Ok(StabilityReport {
        cases,
        ratio_spread: spread,
        slope,
        spread_limit,
        slope_floor,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// ------------------------------------------------------------ monotone limits

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneLimitCase {
    pub c: f64,
    /// sup |P(u + c, f) − P(u, f)|; converges like c.
    pub gap_upper: f64,
    /// sup |P(u − c, f) − P(u, f)|.
    pub gap_lower: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneLimitReport {
    pub cases: Vec<MonotoneLimitCase>,
    /// worst nodewise violation of the expected orderings (≤ 0 when clean).
    pub worst_order_violation: f64,
    pub ordered: bool,
    pub converges: bool,
    pub pass: bool,
    pub seconds: f64,
}

/// Envelopes of the shifted obstacles u ± c for a decreasing list of c:
/// the sequences stay ordered and approach P(u, f) within c + 2·tol.
pub fn monotone_limit_study(
    u: &GridFunction,
    f: &DensityField,
    cs: &[f64],
    params: &SolveParams,
) -> Result<MonotoneLimitReport> {
    let t0 = Instant::now();
    if cs.is_empty() || cs.windows(2).any(|w| w[0] <= w[1]) || cs.iter().any(|&c| c <= 0.0) {
        return Err(Error::Validation(
            "offsets must be positive and strictly decreasing".into(),
        ));
    }
    let grid = u.grid.clone();
    let base = envelope_obstacle(u, f, params)?;
    let shifted = |c: f64| -> GridFunction {
        let mut v = u.clone();
        for x in &mut v.vals {
            *x += c;
        }
        v
    };
    let slack = 2.0 * params.tol;
    let mut uppers = Vec::new();
    let mut lowers = Vec::new();
    let mut cases = Vec::new();
    for &c in cs {
        let up = envelope_obstacle(&shifted(c), f, params)?;
        let lo = envelope_obstacle(&shifted(-c), f, params)?;
        cases.push(MonotoneLimitCase {
            c,
            gap_upper: up.p.sup_diff(&base.p)?,
            gap_lower: lo.p.sup_diff(&base.p)?,
        });
        uppers.push(up.p);
        lowers.push(lo.p);
    }
    let mut violation = f64::NEG_INFINITY;
    for k in 0..cs.len() {
        for &id in &grid.interior {
            let idx = id as usize;
            // decreasing family stays above the limit, increasing below
            violation = violation.max(base.p.vals[idx] - uppers[k].vals[idx]);
            violation = violation.max(lowers[k].vals[idx] - base.p.vals[idx]);
            if k + 1 < cs.len() {
                violation = violation.max(uppers[k + 1].vals[idx] - uppers[k].vals[idx]);
                violation = violation.max(lowers[k].vals[idx] - lowers[k + 1].vals[idx]);
            }
        }
    }
    let ordered = violation <= slack;
    let converges = cases
        .iter()
        .all(|c| c.gap_upper <= c.c + slack && c.gap_lower <= c.c + slack);
    Ok(MonotoneLimitReport {
        cases,
        worst_order_violation: violation,
        ordered,
        converges,
        pass: ordered && converges,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// ----------------------------------------------------------------- exhaustion

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionCase {
    pub interior_nodes: usize,
    /// sup over the inner domain of |P(Ω_j) − P(Ω)|.
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionReport {
    pub cases: Vec<ExhaustionCase>,
    pub nodewise_ok: bool,
    pub decreasing: bool,
    pub final_gap: f64,
    pub bound: f64,
    pub pass: bool,
    pub seconds: f64,
}

/// Envelopes on an increasing family of inner domains decrease to the
/// envelope on Ω; the sup gaps shrink below `bound`.
pub fn exhaustion_study(
    outer: &DomainSpec,
    inners: &[DomainSpec],
    u: &Expr,
    f: &Expr,
    h: f64,
    bound: f64,
    params: &SolveParams,
) -> Result<ExhaustionReport> {
    let t0 = Instant::now();
    if inners.is_empty() {
        return Err(Error::Validation("no inner domains given".into()));
    }
    let og = grid_for(outer, h)?;
    let ou = GridFunction::sample(&og, u)?;
    let of = DensityField::sample(&og, f, 2.0)?;
    let op = envelope_obstacle(&ou, &of, params)?;

    let slack = 2.0 * params.tol;
    let mut cases = Vec::new();
    let mut prev: Option<(Arc<Grid>, GridFunction)> = None;
    let mut nodewise_ok = true;
    for spec in inners {
        let g = grid_for(spec, h)?;
        let gu = GridFunction::sample(&g, u)?;
        let gf = DensityField::sample(&g, f, 2.0)?;
        let p = envelope_obstacle(&gu, &gf, params)?;
        // gap against the outer envelope on this inner domain
        let to_outer = node_map(&g, &og)?;
        let mut gap = 0.0f64;
        for &(iid, oid) in &to_outer {
            let d = (p.p.vals[iid as usize] - op.p.vals[oid as usize]).abs();
            if d > gap {
                gap = d;
            }
        }
        // nesting and monotone decrease against the previous inner domain
        if let Some((pg, pp)) = &prev {
            let forward = node_map(pg, &g)?;
            for &(pid, cid) in &forward {
                if p.p.vals[cid as usize] > pp.vals[pid as usize] + slack {
                    nodewise_ok = false;
                }
            }
        }
        cases.push(ExhaustionCase {
            interior_nodes: g.interior_count(),
            gap,
        });
        prev = Some((g, p.p));
    }
    let decreasing = cases.windows(2).all(|w| w[1].gap <= w[0].gap + slack);
    let final_gap = cases.last().unwrap().gap;
    let pass = nodewise_ok && decreasing && final_gap <= bound;
    Ok(ExhaustionReport {
        cases,
        nodewise_ok,
        decreasing,
        final_gap,
        bound,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --------------------------------------------------------------------- shrink

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkCase {
    pub delta: f64,
    /// sup over Ω_δ of (P_δ − P).
    pub sup_gap: f64,
    /// sup_gap / δ.
    pub c_delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkReport {
    pub cases: Vec<ShrinkCase>,
    /// smallest constant with P_δ ≤ P + C·δ at every tested δ (max of c_delta).
    pub c_fit: f64,
    /// max/min of the per-δ constants.
    pub stability_factor: f64,
    pub nodewise_ok: bool,
    pub pass: bool,
    pub seconds: f64,
}

/// Shrunk-domain comparison P(u, f, Ω_δ) ≤ P(u, f, Ω) + C·δ with the fitted
/// constant stable (within a factor 2) across δ-halvings.
pub fn shrink_comparison(
    spec: &DomainSpec,
    u: &Expr,
    f: &Expr,
    h: f64,
    deltas: &[f64],
    params: &SolveParams,
) -> Result<ShrinkReport> {
    let t0 = Instant::now();
    if deltas.is_empty() {
        return Err(Error::Validation("no shrink distances given".into()));
    }
    let og = grid_for(spec, h)?;
    let ou = GridFunction::sample(&og, u)?;
    let of = DensityField::sample(&og, f, 2.0)?;
    let op = envelope_obstacle(&ou, &of, params)?;

    let slack = 2.0 * params.tol;
    let mut cases = Vec::new();
    for &delta in deltas {
        let inner = spec.shrink(delta).map_err(|e| match e {
            Error::Validation(_) => Error::EmptyInterior,
            other => other,
        })?;
        let g = match grid_for(&inner, h) {
            Err(Error::Validation(_)) => return Err(Error::EmptyInterior),
            other => other?,
        };
        let gu = GridFunction::sample(&g, u)?;
        let gf = DensityField::sample(&g, f, 2.0)?;
        let p = envelope_obstacle(&gu, &gf, params)?;
        let map = node_map(&g, &og)?;
        let mut gap = f64::NEG_INFINITY;
        for &(iid, oid) in &map {
            let d = p.p.vals[iid as usize] - op.p.vals[oid as usize];
            if d > gap {
                gap = d;
            }
        }
        cases.push(ShrinkCase {
            delta,
            sup_gap: gap,
            c_delta: gap / delta,
        });
    }
    let c_fit = cases.iter().map(|c| c.c_delta).fold(f64::NEG_INFINITY, f64::max);
    let nodewise_ok = cases.iter().all(|c| c.sup_gap <= c_fit * c.delta + slack);
    let cs: Vec<f64> = cases.iter().map(|c| c.c_delta).collect();
    let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    // a flat family (psh obstacle, no forcing) has every c ≈ 0: call it stable
    let stability_factor = if hi <= 1e-9 { 1.0 } else if lo <= 0.0 { f64::INFINITY } else { hi / lo };
    let pass = nodewise_ok && stability_factor <= 2.0;
    Ok(ShrinkReport {
        cases,
        c_fit,
        stability_factor,
        nodewise_ok,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// -------------------------------------------------------- capacity inequality

#[derive(Debug, Clone, Serialize)]
pub struct CapacityIneqCase {
    pub eps: f64,
    /// Cap of {|P(u,f,W) − P(v,f,W)| ≥ M·ε} in Ω.
    pub l_cap: f64,
    /// (2(n!)²/εⁿ) · Cap of {|u − v| ≥ ε} ∩ W̄ in Ω.
    pub r_scaled: f64,
    pub l_count: usize,
    pub r_count: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityInequalityReport {
    /// sup over W of |u − v|.
    pub m: f64,
    pub cases: Vec<CapacityIneqCase>,
    pub cap_tol: f64,
    pub pass: bool,
    pub seconds: f64,
}

/// Capacity estimate of the envelope's level sets: for each ε the capacity
/// of {|P(u,f,W) − P(v,f,W)| ≥ Mε} is dominated by (2(n!)²/εⁿ) times the
/// capacity of {|u − v| ≥ ε} ∩ W̄ (within 10% plus cap_tol).
pub fn capacity_inequality_check(
    outer: &DomainSpec,
    w: &DomainSpec,
    u: &Expr,
    v: &Expr,
    f: &Expr,
    h: f64,
    eps_list: &[f64],
    cap_tol: f64,
    params: &SolveParams,
) -> Result<CapacityInequalityReport> {
    let t0 = Instant::now();
    let og = grid_for(outer, h)?;
    let wg = grid_for(w, h)?;
    let n = og.n;
    let wu = GridFunction::sample(&wg, u)?;
    let wv = GridFunction::sample(&wg, v)?;
    let wf = DensityField::sample(&wg, f, 2.0)?;
    let pu = envelope_obstacle(&wu, &wf, params)?;
    let pv = envelope_obstacle(&wv, &wf, params)?;
    let mut m = 0.0f64;
    for &id in &wg.interior {
        let d = (wu.vals[id as usize] - wv.vals[id as usize]).abs();
        if d > m {
            m = d;
        }
    }
    // ordinal lookup on the outer grid
    let mut ord = vec![u32::MAX; og.nodes.len()];
    for (t, &id) in og.interior.iter().enumerate() {
        ord[id as usize] = t as u32;
    }
    // W-closure nodes (interior and band of the W grid) seen from Ω
    let ou = GridFunction::sample(&og, u)?;
    let ov = GridFunction::sample(&og, v)?;
    let interior_map = node_map(&wg, &og)?;
    let mut closure_ids: Vec<u32> = Vec::new();
    for id in 0..wg.nodes.len() as u32 {
        let p = wg.point_of(id);
        if let Some(oid) = og.locate(&p) {
            if og.node_class[oid as usize] == INTERIOR {
                closure_ids.push(oid);
            }
        }
    }
    let scale = 2.0 * factorial(n) * factorial(n);
    let mut cases = Vec::new();
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::Validation(format!("ε = {eps} must be > 0")));
        }
        let mut l_set = GridSet::empty(&og);
        if m > 0.0 {
            for &(wid, oid) in &interior_map {
                let d = (pu.p.vals[wid as usize] - pv.p.vals[wid as usize]).abs();
                if d >= m * eps {
                    l_set.mask[ord[oid as usize] as usize] = true;
                }
            }
        }
        let mut r_set = GridSet::empty(&og);
        for &oid in &closure_ids {
            if (ou.vals[oid as usize] - ov.vals[oid as usize]).abs() >= eps {
                r_set.mask[ord[oid as usize] as usize] = true;
            }
        }
        let l_cap = if l_set.is_empty() {
            0.0
        } else {
            capacity(&l_set, params)?.value
        };
        let r_cap = if r_set.is_empty() {
            0.0
        } else {
            capacity(&r_set, params)?.value
        };
        let r_scaled = scale / eps.powi(n as i32) * r_cap;
        cases.push(CapacityIneqCase {
            eps,
            l_cap,
            r_scaled,
            l_count: l_set.count(),
            r_count: r_set.count(),
            pass: l_cap <= 1.1 * r_scaled + cap_tol,
        });
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(CapacityInequalityReport {
        m,
        cases,
        cap_tol,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// ----------------------------------------------------------------- continuity

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityCase {
    pub h: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub cases: Vec<ContinuityCase>,
    /// max ratio of consecutive constants under refinement.
    pub max_growth: f64,
    pub pass: bool,
    pub seconds: f64,
}

/// Discrete Lipschitz constants of the envelope across a refinement list:
/// bounded, growing no more than 20% per refinement.
pub fn continuity_modulus(
    spec: &DomainSpec,
    u: &Expr,
    f: &Expr,
    hs: &[f64],
    params: &SolveParams,
) -> Result<ContinuityReport> {
    let t0 = Instant::now();
    let mut cases = Vec::with_capacity(hs.len());
    for &h in hs {
        let g = grid_for(spec, h)?;
        let gu = GridFunction::sample(&g, u)?;
        let gf = DensityField::sample(&g, f, 2.0)?;
        let p = envelope_obstacle(&gu, &gf, params)?;
        cases.push(ContinuityCase {
            h,
            lipschitz: lipschitz_constant(&p.p),
        });
    }
    let max_growth = cases
        .windows(2)
        .map(|w| w[1].lipschitz / w[0].lipschitz)
        .fold(0.0f64, f64::max);
    let pass = cases.iter().all(|c| c.lipschitz.is_finite()) && max_growth <= 1.2;
    Ok(ContinuityReport {
        cases,
        max_growth,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc() -> DomainSpec {
        DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: 1.0 }
    }

    fn e(src: &str) -> Expr {
        Expr::parse(src).unwrap()
    }

    #[test]
    fn convergence_on_disc_benchmark() {
        let r = convergence_study(
            &disc(),
            &e("0"),
            &e("4"),
            &e("x ^ 2 + y ^ 2 - 1"),
            &[1.0 / 8.0, 1.0 / 16.0],
            2.0,
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        assert!(r.cases[0].sup_error > 1e-4, "error suspiciously small");
    }

    #[test]
    fn cross_method_on_disc_benchmark() {
        let g = grid_for(&disc(), 1.0 / 16.0).unwrap();
        let u = GridFunction::constant(&g, 0.0);
        let f = DensityField::constant(&g, 4.0, 2.0).unwrap();
        let zero = DensityField::constant(&g, 0.0, 2.0).unwrap();
        let r = cross_method_study(
            &u,
            &f,
            &zero,
            &BermanOptions::with_max(16.0),
            0.02,
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "gap {}", r.gap);
        assert!(r.gap <= 1e-6, "g ≡ 0 stages are plain Dirichlet solves");
    }

    #[test]
    fn ma_bound_on_exact_solution() {
        // u = |z|²−1 with g ≡ 4 ≥ f ≡ 0: P = u and the density bound binds
        // with equality at g
        let g = grid_for(&disc(), 0.125).unwrap();
        let u = GridFunction::sample(&g, &e("x ^ 2 + y ^ 2 - 1")).unwrap();
        let f = DensityField::constant(&g, 0.0, 2.0).unwrap();
        let pen = DensityField::constant(&g, 4.0, 2.0).unwrap();
        let r = ma_bound_check(
            &u,
            &f,
            &pen,
            &BermanOptions::with_max(16.0),
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        assert!(r.cross_gap <= 1e-6);
        for c in &r.cases {
            // density 4 vs limit 4·1.05 + ma_tol: slack ≈ −0.2
            assert!(c.worst_excess < -0.1, "excess {}", c.worst_excess);
        }
    }

    #[test]
    fn stability_reproduces_exact_gaps() {
        let h = 1.0 / 16.0;
        let g = grid_for(&disc(), h).unwrap();
        let u = GridFunction::constant(&g, 0.0);
        let f0 = DensityField::constant(&g, 4.0, 2.0).unwrap();
        let perts: Vec<DensityField> = [0.5, 1.0, 2.0]
            .iter()
            .map(|t| DensityField::constant(&g, 4.0 + t, 2.0).unwrap())
            .collect();
        let r = stability_study(&u, &f0, &perts, &SolveParams::default_for(1)).unwrap();
        assert!(r.pass, "report: {r:?}");
        // exact envelopes differ by t/4·(1−|z|²), sup = t/4
        for (c, t) in r.cases.iter().zip([0.5, 1.0, 2.0]) {
            assert!(
                (c.sup_diff - t / 4.0).abs() <= 2.0 * h,
                "gap {} vs exact {}",
                c.sup_diff,
                t / 4.0
            );
        }
        assert!(r.slope >= 0.85);

        let two = perts[..2].to_vec();
        match stability_study(&u, &f0, &two, &SolveParams::default_for(1)) {
            Err(Error::DegenerateFit { .. }) => {}
            other => panic!("expected DegenerateFit, got {other:?}"),
        }
    }

    #[test]
    fn monotone_limits_on_double_well() {
        let g = grid_for(&disc(), 0.125).unwrap();
        let u = GridFunction::sample(
            &g,
            &e("min((x - 0.3) ^ 2 + y ^ 2, (x + 0.3) ^ 2 + y ^ 2)"),
        )
        .unwrap();
        let f = DensityField::constant(&g, 1.0, 2.0).unwrap();
        let r = monotone_limit_study(
            &u,
            &f,
            &[1.0, 0.5, 0.25, 0.125],
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        // shifting the obstacle by a constant shifts the envelope by it
        for c in &r.cases {
            assert!((c.gap_upper - c.c).abs() <= 1e-9);
            assert!((c.gap_lower - c.c).abs() <= 1e-9);
        }
    }

    #[test]
    fn exhaustion_gaps_shrink() {
        let radii = [2.0 / 3.0, 3.0 / 4.0, 4.0 / 5.0, 5.0 / 6.0];
        let inners: Vec<DomainSpec> = radii
            .iter()
            .map(|&r| DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: r })
            .collect();
        let h = 1.0 / 8.0;
        let r = exhaustion_study(
            &disc(),
            &inners,
            &e("0"),
            &e("4"),
            h,
            1.0 - radii.last().unwrap() * radii.last().unwrap() + 2.0 * h,
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        // closed forms: gap_j ≈ 1 − r_j²
        for (c, &rad) in r.cases.iter().zip(&radii) {
            assert!((c.gap - (1.0 - rad * rad)).abs() <= 2.0 * h);
        }

        let swapped: Vec<DomainSpec> = radii
            .iter()
            .rev()
            .map(|&r| DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: r })
            .collect();
        match exhaustion_study(
            &disc(),
            &swapped,
            &e("0"),
            &e("4"),
            h,
            1.0,
            &SolveParams::default_for(1),
        ) {
            Err(Error::NonNested { .. }) => {}
            other => panic!("expected NonNested, got {other:?}"),
        }
    }

    #[test]
    fn shrink_constant_near_two_on_disc() {
        let r = shrink_comparison(
            &disc(),
            &e("0"),
            &e("4"),
            1.0 / 32.0,
            &[1.0 / 8.0, 1.0 / 16.0],
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        assert!(r.c_fit > 1.0 && r.c_fit < 3.0, "C = {}", r.c_fit);

        // a psh obstacle with no forcing gives a flat family
        let flat = shrink_comparison(
            &disc(),
            &e("x ^ 2 + y ^ 2 - 1"),
            &e("0"),
            1.0 / 16.0,
            &[1.0 / 8.0, 1.0 / 16.0],
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(flat.pass);
        assert!(flat.c_fit.abs() < 1e-6);

        match shrink_comparison(
            &disc(),
            &e("0"),
            &e("4"),
            1.0 / 16.0,
            &[2.0],
            &SolveParams::default_for(1),
        ) {
            Err(Error::EmptyInterior) => {}
            other => panic!("expected EmptyInterior, got {other:?}"),
        }
    }

    #[test]
    fn capacity_inequality_on_bump() {
        let w = DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: 0.5 };
        // v is a 2ε-high tent over a small central ball, ε = 0.2
        let v = "0.4 * max(0, 1 - 8 * sqrt(x ^ 2 + y ^ 2))";
        let r = capacity_inequality_check(
            &disc(),
            &w,
            &e("0"),
            &e(v),
            &e("0"),
            1.0 / 16.0,
            &[0.2],
            1e-6,
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        assert!((r.m - 0.4).abs() < 1e-12);
        let c = &r.cases[0];
        assert!(c.r_count > 0, "the bump exceeds ε on a nonempty set");
        assert!(c.l_cap <= 1.1 * c.r_scaled + 1e-6);

        // u = v: M = 0 and both sides vanish
        let same = capacity_inequality_check(
            &disc(),
            &w,
            &e("0"),
            &e("0"),
            &e("0"),
            1.0 / 16.0,
            &[0.2],
            1e-6,
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert_eq!(same.m, 0.0);
        assert_eq!(same.cases[0].l_cap, 0.0);
        assert_eq!(same.cases[0].r_scaled, 0.0);
        assert!(same.pass);
    }

    #[test]
    fn continuity_constants_stay_near_gradient_bound() {
        let r = continuity_modulus(
            &disc(),
            &e("0"),
            &e("4"),
            &[1.0 / 8.0, 1.0 / 16.0],
            &SolveParams::default_for(1),
        )
        .unwrap();
        assert!(r.pass, "report: {r:?}");
        for c in &r.cases {
            assert!(c.lipschitz > 1.5 && c.lipschitz < 2.5, "L = {}", c.lipschitz);
        }
    }
}
