//! Bedford–Taylor relative capacity via the relative extremal function.
//!
//! For a compact set E inside Ω, the relative extremal function h_E is the
//! largest nonpositive psh function that is ≤ −1 on E; the capacity is its
//! total Monge–Ampère mass, Cap(E, Ω) = ∫_Ω (dd^c h_E)ⁿ. Discretely h_E is
//! the conditional envelope with obstacle −1 on E and 0 elsewhere and f ≡ 0.
//! Closed form on concentric balls: Cap(B̄_r, B₁) = (2π / log(1/r))ⁿ.

use crate::density::DensityField;
use crate::envelope::{envelope_obstacle, EnvelopeResult};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, GridSet};
use crate::ma::ma_integral;
use crate::solver::SolveParams;
use std::sync::Arc;

/// Interior nodes of the closed ball |z − c| ≤ r (the natural discrete
/// carrier of B̄_r).
pub fn closed_ball_set(grid: &Arc<Grid>, center: &[f64], r: f64) -> GridSet {
    let axes = 2 * grid.n;
    GridSet::from_points(grid, |p| {
        let d2: f64 = (0..axes).map(|i| (p[i] - center[i]) * (p[i] - center[i])).sum();
        d2 <= r * r
    })
}

/// Relative extremal function of E in the grid's domain: the largest
/// discretely psh function with h ≤ −1 on E and h ≤ 0 elsewhere (boundary
/// trace 0). The output lies in [−1, 0] and equals −1 exactly on E.
pub fn relative_extremal(e: &GridSet, params: &SolveParams) -> Result<EnvelopeResult> {
    if e.is_empty() {
        return Err(Error::EmptySet);
    }
    let grid = &e.grid;
    let mut u = GridFunction::constant(grid, 0.0);
    for (t, &id) in grid.interior.iter().enumerate() {
        if e.mask[t] {
            u.vals[id as usize] = -1.0;
        }
    }
    let f = DensityField::constant(grid, 0.0, 2.0)?;
    envelope_obstacle(&u, &f, params)
}

/// Capacity of E with its extremal function.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: f64,
    pub extremal: EnvelopeResult,
}

/// Cap(E, Ω) = total Monge–Ampère mass of the relative extremal function
/// over the interior.
pub fn capacity(e: &GridSet, params: &SolveParams) -> Result<CapacityResult> {
    let extremal = relative_extremal(e, params)?;
    let value = ma_integral(&extremal.p, None)?;
    Ok(CapacityResult { value, extremal })
}

/// Closed-form Cap(B̄_r, B₁) = (2π / log(1/r))ⁿ on concentric unit balls.
pub fn ball_capacity_exact(n: usize, r: f64) -> f64 {
    (2.0 * std::f64::consts::PI / (1.0 / r).ln()).powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::grid::build_grid;
    use crate::stencil::StencilSet;

    fn disc_grid(radius: f64, h: f64) -> Arc<Grid> {
        let d = DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius };
        build_grid(&d, h, StencilSet::default_for(1)).unwrap()
    }

    #[test]
    fn extremal_is_minus_one_on_e_and_in_range() {
        let g = disc_grid(1.0, 0.125);
        let e = closed_ball_set(&g, &[0.0, 0.0], 0.5);
        let r = relative_extremal(&e, &SolveParams::default_for(1)).unwrap();
        for (t, &id) in g.interior.iter().enumerate() {
            let v = r.p.vals[id as usize];
            assert!((-1.0..=0.0).contains(&v), "value {v} outside [-1, 0]");
            if e.mask[t] {
                assert_eq!(v, -1.0);
            } else {
                assert!(v > -1.0);
            }
        }
        assert!(r.constraint.psh_ok);
    }

    #[test]
    fn full_interior_set_pins_everything() {
        let g = disc_grid(1.0, 0.25);
        let all = GridSet::from_points(&g, |_| true);
        let r = relative_extremal(&all, &SolveParams::default_for(1)).unwrap();
        assert_eq!(r.report.iterations, 1);
        for &id in &g.interior {
            assert_eq!(r.p.vals[id as usize], -1.0);
        }
    }

    #[test]
    fn empty_set_is_rejected() {
        let g = disc_grid(1.0, 0.25);
        let e = GridSet::empty(&g);
        match relative_extremal(&e, &SolveParams::default_for(1)) {
            Err(Error::EmptySet) => {}
            other => panic!("expected EmptySet, got {other:?}"),
        }
    }

    #[test]
    fn disc_capacity_matches_log_formula() {
        // Cap(B̄_½, B₁) = 2π/log 2; the set radius is quantized by h, so the
        // discrete value runs a few percent low
        let g = disc_grid(1.0, 1.0 / 32.0);
        let e = closed_ball_set(&g, &[0.0, 0.0], 0.5);
        let cap = capacity(&e, &SolveParams::default_for(1)).unwrap().value;
        let exact = ball_capacity_exact(1, 0.5);
        let rel = (cap - exact).abs() / exact;
        assert!(rel <= 0.15, "capacity {cap} vs exact {exact}: rel err {rel}");
    }

    #[test]
    fn capacity_monotone_in_set_and_antitone_in_domain() {
        let h = 1.0 / 16.0;
        let params = SolveParams::default_for(1);
        let g1 = disc_grid(1.0, h);
        let small = closed_ball_set(&g1, &[0.0, 0.0], 0.4);
        let large = closed_ball_set(&g1, &[0.0, 0.0], 0.6);
        let c_small = capacity(&small, &params).unwrap().value;
        let c_large = capacity(&large, &params).unwrap().value;
        assert!(c_small < c_large, "{c_small} vs {c_large}");

        // same E inside the radius-2 disc: Cap drops from 2π/log 2 to 2π/log 4
        let g2 = disc_grid(2.0, h);
        let e2 = closed_ball_set(&g2, &[0.0, 0.0], 0.5);
        let e1 = closed_ball_set(&g1, &[0.0, 0.0], 0.5);
        let c1 = capacity(&e1, &params).unwrap().value;
        let c2 = capacity(&e2, &params).unwrap().value;
        assert!(c2 < c1, "{c2} vs {c1}");
        let ratio = c1 / c2;
        assert!((ratio - 2.0).abs() < 0.2, "log-law ratio {ratio} should be ≈ 2");
    }

    #[test]
    fn ball_capacity_n2_reproduces_square_of_log_law() {
        // coarse four-dimensional run: the radius quantization bias is large
        // at h = 1/10, but the squared-log scale (≈ 82.2) must be reproduced
        let d = DomainSpec::Ball { n: 2, center: vec![0.0; 4], radius: 1.0 };
        let g = build_grid(&d, 0.1, StencilSet::default_for(2)).unwrap();
        let e = closed_ball_set(&g, &[0.0; 4], 0.5);
        let cap = capacity(&e, &SolveParams::default_for(2)).unwrap().value;
        let exact = ball_capacity_exact(2, 0.5);
        let rel = (cap - exact).abs() / exact;
        assert!(rel <= 0.35, "capacity {cap} vs exact {exact}: rel err {rel}");
    }
}
