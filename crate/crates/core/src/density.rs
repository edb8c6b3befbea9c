//! Nonnegative densities with a declared L^p exponent.
//!
//! The right-hand sides μ = f dλ carry their integrability exponent p > 1
//! alongside the node values; the L^p norm over the interior is computed once
//! at construction and reused by stability experiments.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Grid, GridFunction};
use crate::ma::lp_norm;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct DensityField {
    pub vals: GridFunction,
    /// Declared integrability exponent, > 1.
    pub p: f64,
    /// ‖f‖_{L^p} over the interior (discrete cell measure).
    pub norm: f64,
}

impl DensityField {
    pub fn new(vals: GridFunction, p: f64) -> Result<DensityField> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Validation(format!(
                "density exponent p = {p} must be finite and > 1"
            )));
        }
        for (id, &v) in vals.vals.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "density must be finite and ≥ 0; found {v} at node {:?}",
                    vals.grid.lattice_of(id as u32)
                )));
            }
        }
        let norm = lp_norm(&vals, p);
        Ok(DensityField { vals, p, norm })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64, p: f64) -> Result<DensityField> {
        DensityField::new(GridFunction::constant(grid, c), p)
    }

    pub fn sample(grid: &Arc<Grid>, e: &Expr, p: f64) -> Result<DensityField> {
        DensityField::new(GridFunction::sample(grid, e)?, p)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.vals.grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::stencil::StencilSet;

    #[test]
    fn validates_exponent_and_sign() {
        let d = DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: 1.0 };
        let g = crate::grid::build_grid(&d, 0.25, StencilSet::default_for(1)).unwrap();
        assert!(DensityField::constant(&g, 4.0, 2.0).is_ok());
        assert!(DensityField::constant(&g, 4.0, 1.0).is_err());
        assert!(DensityField::constant(&g, -1.0, 2.0).is_err());
        let f = DensityField::constant(&g, 2.0, 2.0).unwrap();
        let vol = g.interior_count() as f64 * g.h * g.h;
        assert!((f.norm - 2.0 * vol.sqrt()).abs() < 1e-12);
    }
}
