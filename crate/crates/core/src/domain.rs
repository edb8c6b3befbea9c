//! Bounded domain descriptions in ℂⁿ (n = 1, 2).
//!
//! A domain is given by a defining function ρ with Ω = {ρ < 0}: balls and
//! polydiscs use exact signed distances, boxes use the max of per-axis
//! half-space gaps, and general domains use a sublevel set of an expression
//! together with a bounding box that must strictly contain Ω.

use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone)]
pub enum DomainSpec {
    /// Euclidean ball { |z - center| < radius }; center has flat layout (2n).
    Ball { n: usize, center: Vec<f64>, radius: f64 },
    /// Polydisc { |z_k - c_k| < r_k for all k }; radii has length n.
    Polydisc { n: usize, center: Vec<f64>, radii: Vec<f64> },
    /// Axis-aligned box in the flat coordinates.
    Box { n: usize, lo: Vec<f64>, hi: Vec<f64> },
    /// { rho < 0 } clipped to [bbox_lo, bbox_hi].
    Sublevel { n: usize, rho: Expr, bbox_lo: Vec<f64>, bbox_hi: Vec<f64> },
}

impl DomainSpec {
    pub fn n(&self) -> usize {
        match self {
            DomainSpec::Ball { n, .. }
            | DomainSpec::Polydisc { n, .. }
            | DomainSpec::Box { n, .. }
            | DomainSpec::Sublevel { n, .. } => *n,
        }
    }

    /// Sanity-check dimensions and positivity.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n != 1 && n != 2 {
            return Err(Error::Validation(format!("n = {n} (supported: 1, 2)")));
        }
        let want = 2 * n;
        match self {
            DomainSpec::Ball { center, radius, .. } => {
                if center.len() != want {
                    return Err(Error::Validation(format!(
                        "ball center has {} coordinates, expected {want}",
                        center.len()
                    )));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Validation(format!("ball radius {radius} must be positive")));
                }
            }
            DomainSpec::Polydisc { center, radii, .. } => {
                if center.len() != want || radii.len() != n {
                    return Err(Error::Validation(
                        "polydisc center needs 2n coordinates and radii needs n entries".into(),
                    ));
                }
                if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                    return Err(Error::Validation("polydisc radii must be positive".into()));
                }
            }
            DomainSpec::Box { lo, hi, .. } => {
                if lo.len() != want || hi.len() != want {
                    return Err(Error::Validation("box corners need 2n coordinates".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Validation("box needs lo < hi on every axis".into()));
                }
            }
            DomainSpec::Sublevel { rho, bbox_lo, bbox_hi, .. } => {
                if bbox_lo.len() != want || bbox_hi.len() != want {
                    return Err(Error::Validation("bounding box corners need 2n coordinates".into()));
                }
                if bbox_lo.iter().zip(bbox_hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Validation("bounding box needs lo < hi on every axis".into()));
                }
                if rho.max_coord() > n {
                    return Err(Error::Validation(format!(
                        "defining function mentions coordinate {} but n = {n}",
                        rho.max_coord()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Defining function; negative strictly inside.
    pub fn rho(&self, p: &[f64]) -> f64 {
        match self {
            DomainSpec::Ball { center, radius, .. } => {
                let mut s = 0.0;
                for (x, c) in p.iter().zip(center) {
                    let d = x - c;
                    s += d * d;
                }
                s.sqrt() - radius
            }
            DomainSpec::Polydisc { center, radii, .. } => {
                let mut worst = f64::NEG_INFINITY;
                for (k, r) in radii.iter().enumerate() {
                    let dx = p[2 * k] - center[2 * k];
                    let dy = p[2 * k + 1] - center[2 * k + 1];
                    worst = worst.max((dx * dx + dy * dy).sqrt() - r);
                }
                worst
            }
            DomainSpec::Box { lo, hi, .. } => {
                let mut worst = f64::NEG_INFINITY;
                for i in 0..p.len() {
                    worst = worst.max(lo[i] - p[i]).max(p[i] - hi[i]);
                }
                worst
            }
            DomainSpec::Sublevel { rho, bbox_lo, bbox_hi, .. } => {
                let mut worst = rho.eval(p);
                for i in 0..p.len() {
                    worst = worst.max(bbox_lo[i] - p[i]).max(p[i] - bbox_hi[i]);
                }
                worst
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.rho(p) < 0.0
    }

    /// Outer box guaranteed to contain Ω̄.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Ball { center, radius, .. } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            DomainSpec::Polydisc { center, radii, .. } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for (k, r) in radii.iter().enumerate() {
                    for ax in [2 * k, 2 * k + 1] {
                        lo.push(center[ax] - r);
                        hi.push(center[ax] + r);
                    }
                }
                (lo, hi)
            }
            DomainSpec::Box { lo, hi, .. } => (lo.clone(), hi.clone()),
            DomainSpec::Sublevel { bbox_lo, bbox_hi, .. } => (bbox_lo.clone(), bbox_hi.clone()),
        }
    }

    /// Lattice layout for spacing h and halo width w (nodes per axis).
    ///
    /// Balls and polydiscs center the lattice on the domain center with
    /// K = ⌈r/h⌉ + w nodes on each side, so a translated copy of the domain
    /// (by a lattice vector) yields an exactly translated lattice. Boxes and
    /// sublevel sets anchor at the lower corner minus the halo.
    pub fn lattice_layout(&self, h: f64, w: i64) -> Result<(Vec<f64>, Vec<u32>)> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Validation(format!("grid spacing h = {h} must be positive")));
        }
        let wf = w as f64;
        let mut origin = Vec::new();
        let mut counts = Vec::new();
        let mut centered = |center: &[f64], per_axis_r: &dyn Fn(usize) -> f64| {
            for (ax, c) in center.iter().enumerate() {
                let k = (per_axis_r(ax) / h).ceil() as i64 + w;
                origin.push(c - (k as f64) * h);
                counts.push((2 * k + 1) as u32);
            }
        };
        match self {
            DomainSpec::Ball { center, radius, .. } => {
                centered(center, &|_| *radius);
            }
            DomainSpec::Polydisc { center, radii, .. } => {
                centered(center, &|ax| radii[ax / 2]);
            }
            DomainSpec::Box { lo, hi, .. } | DomainSpec::Sublevel { bbox_lo: lo, bbox_hi: hi, .. } => {
                for i in 0..lo.len() {
                    // tiny slack keeps exact multiples of h from gaining a node
                    let inner = ((hi[i] - lo[i]) / h - 1e-9).ceil().max(1.0) as i64;
                    origin.push(lo[i] - wf * h);
                    counts.push((inner + 1 + 2 * w) as u32);
                }
            }
        }
        for (ax, &c) in counts.iter().enumerate() {
            if c as usize > 4096 {
                return Err(Error::Validation(format!(
                    "axis {ax} needs {c} nodes at h = {h}; refusing grids beyond 4096 per axis"
                )));
            }
        }
        Ok((origin, counts))
    }

    /// Translate the domain by a (flat layout).
    pub fn translate(&self, a: &[f64]) -> DomainSpec {
        let add = |v: &[f64]| -> Vec<f64> { v.iter().zip(a).map(|(x, d)| x + d).collect() };
        match self {
            DomainSpec::Ball { n, center, radius } => DomainSpec::Ball {
                n: *n,
                center: add(center),
                radius: *radius,
            },
            DomainSpec::Polydisc { n, center, radii } => DomainSpec::Polydisc {
                n: *n,
                center: add(center),
                radii: radii.clone(),
            },
            DomainSpec::Box { n, lo, hi } => DomainSpec::Box {
                n: *n,
                lo: add(lo),
                hi: add(hi),
            },
            DomainSpec::Sublevel { n, rho, bbox_lo, bbox_hi } => DomainSpec::Sublevel {
                n: *n,
                // ρ'(z) = ρ(z - a) keeps { ρ' < 0 } = a + Ω
                rho: rho.shift(a, *n),
                bbox_lo: add(bbox_lo),
                bbox_hi: add(bbox_hi),
            },
        }
    }

    /// Inner domain at distance δ from the boundary.
    ///
    /// Exact for balls, polydiscs, and boxes. For sublevel sets the boundary
    /// is pushed to { ρ < -δ·m } where m estimates |∇ρ| near ∂Ω by sampling;
    /// this is first-order accurate in δ.
    pub fn shrink(&self, delta: f64) -> Result<DomainSpec> {
        if !(delta > 0.0) {
            return Err(Error::Validation(format!("shrink distance {delta} must be positive")));
        }
        match self {
            DomainSpec::Ball { n, center, radius } => {
                if *radius - delta <= 0.0 {
                    return Err(Error::Validation(format!(
                        "shrink by {delta} empties ball of radius {radius}"
                    )));
                }
                Ok(DomainSpec::Ball { n: *n, center: center.clone(), radius: radius - delta })
            }
            DomainSpec::Polydisc { n, center, radii } => {
                if radii.iter().any(|r| r - delta <= 0.0) {
                    return Err(Error::Validation(format!("shrink by {delta} empties polydisc")));
                }
                Ok(DomainSpec::Polydisc {
                    n: *n,
                    center: center.clone(),
                    radii: radii.iter().map(|r| r - delta).collect(),
                })
            }
            DomainSpec::Box { n, lo, hi } => {
                if lo.iter().zip(hi).any(|(a, b)| b - a <= 2.0 * delta) {
                    return Err(Error::Validation(format!("shrink by {delta} empties box")));
                }
                Ok(DomainSpec::Box {
                    n: *n,
                    lo: lo.iter().map(|a| a + delta).collect(),
                    hi: hi.iter().map(|b| b - delta).collect(),
                })
            }
            DomainSpec::Sublevel { n, rho, bbox_lo, bbox_hi } => {
                let m = estimate_boundary_gradient(self)?;
                Ok(DomainSpec::Sublevel {
                    n: *n,
                    rho: rho.plus_const(delta * m),
                    bbox_lo: bbox_lo.clone(),
                    bbox_hi: bbox_hi.clone(),
                })
            }
        }
    }
}

/// Smallest |∇ρ| among sample points near { ρ = 0 }, by central differences
/// on a coarse scan of the bounding box.
fn estimate_boundary_gradient(spec: &DomainSpec) -> Result<f64> {
    let (lo, hi) = spec.bounding_box();
    let dims = lo.len();
    let per_axis: usize = if dims == 2 { 96 } else { 20 };
    let steps: Vec<f64> = (0..dims).map(|i| (hi[i] - lo[i]) / per_axis as f64).collect();
    let fd: Vec<f64> = steps.iter().map(|s| s * 1e-3).collect();

    let mut idx = vec![0usize; dims];
    let mut p = vec![0.0f64; dims];
    let mut near: Vec<f64> = Vec::new(); // |∇ρ| at near-boundary samples
    let band = steps.iter().cloned().fold(0.0f64, f64::max); // |ρ| ≲ one cell
    loop {
        for i in 0..dims {
            p[i] = lo[i] + (idx[i] as f64 + 0.5) * steps[i];
        }
        let r = spec.rho(&p);
        if r.is_finite() && r.abs() <= band {
            let mut g2 = 0.0;
            let mut ok = true;
            for i in 0..dims {
                let keep = p[i];
                p[i] = keep + fd[i];
                let rp = spec.rho(&p);
                p[i] = keep - fd[i];
                let rm = spec.rho(&p);
                p[i] = keep;
                if !rp.is_finite() || !rm.is_finite() {
                    ok = false;
                    break;
                }
                let d = (rp - rm) / (2.0 * fd[i]);
                g2 += d * d;
            }
            if ok {
                near.push(g2.sqrt());
            }
        }
        // odometer
        let mut ax = dims;
        while ax > 0 {
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < per_axis {
                break;
            }
            idx[ax] = 0;
            if ax == 0 {
                let m = near.iter().cloned().filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
                if !m.is_finite() || near.is_empty() {
                    return Err(Error::Validation(
                        "could not estimate |∇ρ| near the boundary; shrink needs a nondegenerate defining function".into(),
                    ));
                }
                return Ok(m);
            }
        }
    }
}
