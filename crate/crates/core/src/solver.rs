//! Nonlinear Gauss–Seidel solver for discrete Monge–Ampère right-hand sides.
//!
//! Each visit of an interior node replaces its value by the unique s solving
//! the local one-node equation
//!
//!   MA_h(s; neighbors) = F(z, s),
//!
//! optionally clamped from above by an obstacle. F is either a fixed density
//! f(z) (closed-form roots) or the penalized right-hand side
//! max{ e^{j(s−u₀(z))} g(z), f(z) }, solved by bisection on a verified
//! bracket. F is nondecreasing in s and MA_h(s) is strictly decreasing, so
//! the local root is unique.
//!
//! Closed-form roots. n = 1: (S − 4s)/h² = f gives s = (S − h²f)/4 with S the
//! neighbor sum — evaluated with a fixed association so the update is a
//! monotone f64 map (round-to-nearest preserves ≤ per operation). n = 2: per
//! frame, 2(S₁−4s)(S₂−4s)/(h⁴ν₁ν₂) = f gives the lower quadratic root
//! s_F = [(S₁+S₂) − √((S₁−S₂)² + 4q)]/8, q = f h⁴ν₁ν₂/2, and the update is
//! min over frames (the smallest frame root is where the frame minimum of the
//! operator meets f). At f = 0 this reduces to min_d S_d/4 — the tightest
//! value that keeps every line Laplacian nonnegative.
//!
//! Sweep orders. `seq` visits interior nodes in ascending row-major order
//! in place. `redblack` partitions nodes by lattice parity and runs two
//! half-sweeps; each half-sweep reads a snapshot taken at its start, so the
//! result is independent of any ordering (or parallel execution) within a
//! phase. One iteration = both phases.
//!
//! Stopping. An iteration with sup-update exactly 0.0 has reached a bitwise
//! fixed point and stops unconditionally; otherwise the solver stops when the
//! sup-update is ≤ tol, the fixed-point residual sup|T(u) − u| (a Jacobi
//! recomputation, checked only once the sup-update is small) is also ≤ tol,
//! and ma_density of the iterate sits above f − ma_tol at every interior
//! node. A value-residual of tol leaves density noise of order
//! tol·√(f·c)/h² — larger than ma_tol when f is big — so whenever the first
//! two conditions hold but the density floor does not, the local root
//! tolerance is tightened and sweeping continues.

use crate::density::DensityField;
use crate::envelope::tolerances;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::ma::{ma_density, pairwise_sum};
use crate::stencil::MAX_DIRECTIONS;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Seq,
    RedBlack,
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, w: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepMode::Seq => write!(w, "seq"),
            SweepMode::RedBlack => write!(w, "redblack"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    pub tol: f64,
    pub max_iter: u64,
    pub mode: SweepMode,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tol: 1e-8,
            max_iter: 400_000,
            mode: SweepMode::Seq,
        }
    }
}

impl SolveParams {
    /// Default tolerance per dimension: 1e-8 for n = 1, 1e-7 for n = 2.
    pub fn default_for(n: usize) -> SolveParams {
        SolveParams {
            tol: if n == 1 { 1e-8 } else { 1e-7 },
            ..Default::default()
        }
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: u64,
    /// sup-update of the last iteration.
    pub sup_update: f64,
    /// sup |T(u) − u| at the final iterate (Jacobi recomputation).
    pub residual_sup: f64,
    /// Σ |T(u) − u| · h^{2n}.
    pub residual_l1: f64,
    pub converged: bool,
    /// Largest single-node increase observed over the whole run.
    pub max_increase: f64,
    /// max_increase ≤ tol — sweeps behaved monotonically (expected whenever
    /// the start iterate dominates the fixed point).
    pub monotone_sweeps_ok: bool,
    pub mode: SweepMode,
    pub tol: f64,
}

/// Right-hand side of the local equation.
pub enum Rhs<'a> {
    /// F(z, s) = f(z).
    Constant(&'a DensityField),
    /// F(z, s) = max{ e^{j(s−u₀(z))} g(z), f(z) }.
    Penalized {
        f: &'a DensityField,
        g: &'a DensityField,
        u0: &'a GridFunction,
        j: f64,
    },
}

/// Solve the discrete problem. Band values of `init` are the Dirichlet data;
/// interior values are the starting iterate. An obstacle clamps every local
/// root by min(obstacle, root).
pub fn solve(
    init: &GridFunction,
    rhs: &Rhs,
    obstacle: Option<&GridFunction>,
    params: &SolveParams,
) -> Result<(GridFunction, SolveReport)> {
    let grid = init.grid.clone();
    if !(params.tol > 0.0) {
        return Err(Error::Validation(format!("tol = {} must be > 0", params.tol)));
    }
    if params.max_iter == 0 {
        return Err(Error::Validation("max_iter must be ≥ 1".into()));
    }
    match rhs {
        Rhs::Constant(f) => init.same_grid(&f.vals)?,
        Rhs::Penalized { f, g, u0, j } => {
            init.same_grid(&f.vals)?;
            init.same_grid(&g.vals)?;
            init.same_grid(u0)?;
            if !(*j > 0.0) || !j.is_finite() {
                return Err(Error::NonMonotoneRhs {
                    detail: format!(
                        "penalization slope j = {j} must be finite and > 0 for e^{{j(s-u0)}}g to be nondecreasing in s"
                    ),
                });
            }
        }
    }
    if let Some(obs) = obstacle {
        init.same_grid(obs)?;
    }

    let mut kernel = Kernel::new(&grid, rhs, params.tol / 10.0);
    let mut u = init.clone();
    let m = grid.interior_count();
    // density floor for the stop test: the penalized RHS is ≥ f everywhere
    let f_floor: &[f64] = match rhs {
        Rhs::Constant(f) => &f.vals.vals,
        Rhs::Penalized { f, .. } => &f.vals.vals,
    };
    let (_, ma_tol) = tolerances(grid.h, params.tol);

    // red-black phases by parity of the lattice coordinate sum
    let (phase_even, phase_odd): (Vec<u32>, Vec<u32>) = {
        let mut even = Vec::new();
        let mut odd = Vec::new();
        for (t, &id) in grid.interior.iter().enumerate() {
            let lat = grid.nodes[id as usize];
            let s: i32 = lat.iter().sum();
            if s % 2 == 0 {
                even.push(t as u32);
            } else {
                odd.push(t as u32);
            }
        }
        (even, odd)
    };
    let mut snap = vec![0.0f64; u.vals.len()];

    let mut max_increase = 0.0f64;
    let mut prev_sup = f64::INFINITY;
    let mut iterations = 0u64;

    loop {
        iterations += 1;
        let hint = if prev_sup.is_finite() {
            Some((4.0 * prev_sup).max(16.0 * kernel.tol_local))
        } else {
            None
        };
        let mut sup_update = 0.0f64;

        match params.mode {
            SweepMode::Seq => {
                for t in 0..m {
                    let id = grid.interior[t] as usize;
                    let old = u.vals[id];
                    let mut s = kernel.local_solve(t, &u.vals, old, hint)?;
                    if let Some(obs) = obstacle {
                        s = s.min(obs.vals[id]);
                    }
                    let d = s - old;
                    if d > max_increase {
                        max_increase = d;
                    }
                    let ad = d.abs();
                    if ad > sup_update {
                        sup_update = ad;
                    }
                    u.vals[id] = s;
                }
            }
            SweepMode::RedBlack => {
                for phase in [&phase_even, &phase_odd] {
                    snap.copy_from_slice(&u.vals);
                    for &t32 in phase.iter() {
                        let t = t32 as usize;
                        let id = grid.interior[t] as usize;
                        let old = snap[id];
                        let mut s = kernel.local_solve(t, &snap, old, hint)?;
                        if let Some(obs) = obstacle {
                            s = s.min(obs.vals[id]);
                        }
                        let d = s - old;
                        if d > max_increase {
                            max_increase = d;
                        }
                        let ad = d.abs();
                        if ad > sup_update {
                            sup_update = ad;
                        }
                        u.vals[id] = s;
                    }
                }
            }
        }

        let exact_stop = sup_update == 0.0;
        if exact_stop || sup_update <= params.tol {
            let (rs, rl1) = residual(&kernel, &grid, &u, obstacle, hint)?;
            let value_converged = rs <= params.tol;
            if exact_stop || (value_converged && density_floor_met(&u, f_floor, ma_tol)) {
                let report = SolveReport {
                    iterations,
                    sup_update,
                    residual_sup: rs,
                    residual_l1: rl1,
                    converged: true,
                    max_increase,
                    monotone_sweeps_ok: max_increase <= params.tol,
                    mode: params.mode,
                    tol: params.tol,
                };
                return Ok((u, report));
            }
            if value_converged && kernel.tol_local > f64::MIN_POSITIVE {
                kernel.tol_local /= 10.0;
            }
        }

        if iterations >= params.max_iter {
            let (rs, rl1) = residual(&kernel, &grid, &u, obstacle, hint)?;
            let report = SolveReport {
                iterations,
                sup_update,
                residual_sup: rs,
                residual_l1: rl1,
                converged: false,
                max_increase,
                monotone_sweeps_ok: max_increase <= params.tol,
                mode: params.mode,
                tol: params.tol,
            };
            return Err(Error::MaxIterExceeded {
                max_iter: params.max_iter,
                sup_update,
                residual: rs,
                report: Box::new(report),
            });
        }
        prev_sup = sup_update;
    }
}

/// ma_density(u) ≥ floor − ma_tol at every interior node.
fn density_floor_met(u: &GridFunction, floor: &[f64], ma_tol: f64) -> bool {
    let dens = ma_density(u);
    u.grid
        .interior
        .iter()
        .all(|&id| dens.vals[id as usize] - floor[id as usize] >= -ma_tol)
}

/// Fixed-point residual sup and (cell-weighted) L1 via one Jacobi pass.
fn residual(
    kernel: &Kernel,
    grid: &Grid,
    u: &GridFunction,
    obstacle: Option<&GridFunction>,
    hint: Option<f64>,
) -> Result<(f64, f64)> {
    let mut sup = 0.0f64;
    let mut terms = Vec::with_capacity(grid.interior_count());
    for t in 0..grid.interior_count() {
        let id = grid.interior[t] as usize;
        let old = u.vals[id];
        let mut s = kernel.local_solve(t, &u.vals, old, hint)?;
        if let Some(obs) = obstacle {
            s = s.min(obs.vals[id]);
        }
        let r = (s - old).abs();
        if r > sup {
            sup = r;
        }
        terms.push(r);
    }
    let cell = grid.h.powi(2 * grid.n as i32);
    Ok((sup, pairwise_sum(&terms) * cell))
}

/// Per-solve precomputed tables and the local root finder.
struct Kernel<'a> {
    grid: &'a Grid,
    n: usize,
    h2: f64,
    /// frames as direction-index pairs (second = first for n = 1)
    frames: Vec<[usize; 2]>,
    /// per frame: h⁴ ν₁ ν₂ / 2 (the q coefficient; n = 2 only)
    qcoef: Vec<f64>,
    /// per direction: 1/(h² ν)
    inv_h2nu: Vec<f64>,
    f_vals: &'a [f64],
    penal: Option<Penal<'a>>,
    tol_local: f64,
}

struct Penal<'a> {
    g: &'a [f64],
    u0: &'a [f64],
    j: f64,
    /// 10 × (max − min) of u₀, for the coarse lower bracket.
    drop: f64,
}

impl<'a> Kernel<'a> {
    fn new(grid: &'a Grid, rhs: &Rhs<'a>, tol_local: f64) -> Kernel<'a> {
        let n = grid.n;
        let h2 = grid.h * grid.h;
        let frames: Vec<[usize; 2]> = grid
            .stencil
            .frames
            .iter()
            .map(|f| if n == 1 { [f[0], f[0]] } else { [f[0], f[1]] })
            .collect();
        let qcoef = frames
            .iter()
            .map(|fr| {
                let nu1 = grid.stencil.directions[fr[0]].norm2 as f64;
                let nu2 = grid.stencil.directions[fr[1]].norm2 as f64;
                h2 * h2 * nu1 * nu2 / 2.0
            })
            .collect();
        let inv_h2nu = grid
            .stencil
            .directions
            .iter()
            .map(|d| 1.0 / (h2 * d.norm2 as f64))
            .collect();
        let (f_vals, penal) = match rhs {
            Rhs::Constant(f) => (&f.vals.vals[..], None),
            Rhs::Penalized { f, g, u0, j } => (
                &f.vals.vals[..],
                Some(Penal {
                    g: &g.vals.vals[..],
                    u0: &u0.vals[..],
                    j: *j,
                    drop: 10.0 * u0.range().max(1e-12),
                }),
            ),
        };
        Kernel {
            grid,
            n,
            h2,
            frames,
            qcoef,
            inv_h2nu,
            f_vals,
            penal,
            tol_local,
        }
    }

    /// Neighbor sums per direction into `sums`; returns the count used.
    #[inline]
    fn direction_sums(&self, t: usize, read: &[f64], sums: &mut [f64; MAX_DIRECTIONS]) -> usize {
        let slots = self.grid.neighbor_slots(t);
        let dirs = self.grid.stencil.directions.len();
        for d in 0..dirs {
            let b = 4 * d;
            sums[d] = ((read[slots[b] as usize] + read[slots[b + 1] as usize])
                + read[slots[b + 2] as usize])
                + read[slots[b + 3] as usize];
        }
        dirs
    }

    /// Root of MA_h(s) = f with the cached sums.
    #[inline]
    fn constant_root(&self, f: f64, sums: &[f64; MAX_DIRECTIONS]) -> f64 {
        if self.n == 1 {
            return (sums[0] - self.h2 * f) * 0.25;
        }
        let mut best = f64::INFINITY;
        for (fi, fr) in self.frames.iter().enumerate() {
            let s1 = sums[fr[0]];
            let s2 = sums[fr[1]];
            let root = if f == 0.0 {
                s1.min(s2) * 0.25
            } else {
                let q = f * self.qcoef[fi];
                let d = s1 - s2;
                ((s1 + s2) - (d * d + 4.0 * q).sqrt()) * 0.125
            };
            if root < best {
                best = root;
            }
        }
        best
    }

    /// MA_h(s) with the cached sums.
    #[inline]
    fn density_at(&self, s: f64, sums: &[f64; MAX_DIRECTIONS]) -> f64 {
        if self.n == 1 {
            return (sums[0] - 4.0 * s) / self.h2;
        }
        let mut best = f64::INFINITY;
        for fr in &self.frames {
            let l1 = ((sums[fr[0]] - 4.0 * s) * self.inv_h2nu[fr[0]] * 0.25).max(0.0);
            let l2 = ((sums[fr[1]] - 4.0 * s) * self.inv_h2nu[fr[1]] * 0.25).max(0.0);
            let prod = l1 * l2;
            if prod < best {
                best = prod;
            }
        }
        32.0 * best
    }

    /// Local root at interior ordinal t reading neighbor values from `read`.
    fn local_solve(
        &self,
        t: usize,
        read: &[f64],
        old: f64,
        hint: Option<f64>,
    ) -> Result<f64> {
        let id = self.grid.interior[t] as usize;
        let mut sums = [0.0f64; MAX_DIRECTIONS];
        self.direction_sums(t, read, &mut sums);
        let f = self.f_vals[id];
        let sc = self.constant_root(f, &sums);
        let Some(p) = &self.penal else {
            return Ok(sc);
        };
        let g = p.g[id];
        if g == 0.0 {
            return Ok(sc); // F ≡ f
        }
        let j = p.j;
        let u0 = p.u0[id];
        let e_sc = exp_rhs(g, j, sc - u0);
        if e_sc <= f {
            return Ok(sc); // constant branch already active at the MA = f root
        }

        let phi = |s: f64| self.density_at(s, &sums) - exp_rhs(g, j, s - u0).max(f);

        // n = 1: [sc − w, sc] with w = h²(E − f)/4 is a guaranteed bracket,
        // since the density gains exactly 4w/h² = E − f going down by w while
        // the exponential branch only shrinks.
        if self.n == 1 {
            let w = self.h2 * (e_sc - f) * 0.25;
            if w.is_finite() {
                if w <= self.tol_local {
                    return Ok(sc - 0.5 * w);
                }
                if w <= 64.0 * self.tol_local {
                    return Ok(self.bisect(&phi, sc - w, sc));
                }
            }
            if let Some(b) = hint {
                // near convergence the root sits within the last update size
                let lo = old - b;
                let hi = (old + b).min(sc);
                if lo < hi && phi(lo) >= 0.0 && phi(hi) <= 0.0 {
                    return Ok(self.bisect(&phi, lo, hi));
                }
            }
            if w.is_finite() {
                let coarse = self.coarse_floor(&sums, p);
                if sc - coarse >= w {
                    return Ok(self.bisect(&phi, sc - w, sc));
                }
            }
        } else if let Some(b) = hint {
            let lo = old - b;
            let hi = (old + b).min(sc);
            if lo < hi && phi(lo) >= 0.0 && phi(hi) <= 0.0 {
                return Ok(self.bisect(&phi, lo, hi));
            }
        }

        // coarse lower end: min neighbor − 10·range(u₀), widened downward
        let mut lo = self.coarse_floor(&sums, p).min(sc - self.tol_local);
        let mut attempts = 0u32;
        while phi(lo) < 0.0 {
            attempts += 1;
            if attempts > 60 {
                return Err(Error::BracketFailure {
                    node: self.grid.lattice_of(self.grid.interior[t]),
                    attempts,
                });
            }
            lo = sc - 2.0 * (sc - lo);
        }
        Ok(self.bisect(&phi, lo, sc))
    }

    /// Starting guess for the lower bracket end.
    fn coarse_floor(&self, sums: &[f64; MAX_DIRECTIONS], p: &Penal) -> f64 {
        // min over direction averages is ≤ every neighbor mean
        let dirs = self.grid.stencil.directions.len();
        let mut m = f64::INFINITY;
        for &s in sums.iter().take(dirs) {
            m = m.min(s * 0.25);
        }
        m - p.drop
    }

    fn bisect(&self, phi: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut guard = 0;
        while hi - lo > self.tol_local {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break; // interval at floating-point resolution
            }
            let v = phi(mid);
            if v == 0.0 {
                return mid;
            } else if v > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            guard += 1;
            if guard > 300 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// g·e^{j·d} with overflow clamped to +∞ (sign test still correct).
#[inline]
fn exp_rhs(g: f64, j: f64, d: f64) -> f64 {
    let a = j * d;
    if a > 705.0 {
        f64::INFINITY
    } else {
        g * a.exp()
    }
}
