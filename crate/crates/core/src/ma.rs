//! Discrete complex Monge–Ampère operator on complex-line stencils.
//!
//! With the convention (dd^c u)ⁿ = cₙ det(∂²u/∂z_j∂z̄_k) dλ, cₙ = 4ⁿ·n!
//! (so that (dd^c|z|²)ⁿ = cₙ dλ), the operator is discretized through line
//! Laplacians: for a direction ξ,
//!
//!   ℓ_ξ(u, z) = [u(z+hξ) + u(z−hξ) + u(z+ihξ) + u(z−ihξ) − 4u(z)] / (h²|ξ|²),
//!
//! which is exact on quadratics (ℓ_ξ = 4·ξ*Hξ/|ξ|² for complex Hessian H).
//!
//! n = 1: the density is ℓ itself (the 5-point Laplacian; c₁ = 4 matches
//! Δ|z|² = 4).
//!
//! n = 2: det H = min over Hermitian-orthonormal frames of Π_j e_j*He_j, so
//! the density is c₂ · min over the stencil's frames of Π_j max(ℓ_j/4, 0) —
//! a wide-stencil minimum that overestimates det by the gap between the frame
//! subset and the full frame manifold, and is exact on quadratics whose
//! eigenframe is listed.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSet, INTERIOR, NO_NODE};

/// cₙ = 4ⁿ·n! — the density of (dd^c|z|²)ⁿ.
pub fn ma_constant(n: usize) -> f64 {
    match n {
        1 => 4.0,
        2 => 32.0,
        _ => unreachable!("only n = 1, 2 are supported"),
    }
}

/// Line Laplacian of u along direction d at interior ordinal t.
#[inline]
pub fn line_laplacian(u: &GridFunction, t: usize, d: usize) -> f64 {
    let g = &u.grid;
    let slots = g.neighbor_slots(t);
    let id = g.interior[t] as usize;
    let s = u.vals[slots[4 * d] as usize]
        + u.vals[slots[4 * d + 1] as usize]
        + u.vals[slots[4 * d + 2] as usize]
        + u.vals[slots[4 * d + 3] as usize];
    let norm2 = g.stencil.directions[d].norm2 as f64;
    (s - 4.0 * u.vals[id]) / (g.h * g.h * norm2)
}

/// Monge–Ampère density at interior ordinal t.
#[inline]
pub fn ma_density_at(u: &GridFunction, t: usize) -> f64 {
    let g = &u.grid;
    if g.n == 1 {
        return line_laplacian(u, t, 0);
    }
    let mut best = f64::INFINITY;
    for frame in &g.stencil.frames {
        let mut prod = 1.0;
        for &d in frame {
            prod *= (line_laplacian(u, t, d) / 4.0).max(0.0);
        }
        if prod < best {
            best = prod;
        }
    }
    ma_constant(g.n) * best
}

/// Monge–Ampère density as a grid function (zero on the band).
pub fn ma_density(u: &GridFunction) -> GridFunction {
    let g = &u.grid;
    let mut out = GridFunction::constant(&u.grid, 0.0);
    for t in 0..g.interior_count() {
        out.vals[g.interior[t] as usize] = ma_density_at(u, t);
    }
    out
}

/// Result of the discrete plurisubharmonicity check.
#[derive(Debug, Clone)]
pub struct PshReport {
    /// min over interior nodes and directions of the line Laplacian.
    pub worst: f64,
    /// Lattice coordinates of the minimizing node.
    pub worst_node: Vec<i64>,
    /// worst ≥ -tol.
    pub ok: bool,
}

/// u is discretely plurisubharmonic when every line Laplacian is ≥ -tol.
pub fn is_discretely_psh(u: &GridFunction, tol: f64) -> PshReport {
    let g = &u.grid;
    let mut worst = f64::INFINITY;
    let mut worst_node = 0u32;
    for t in 0..g.interior_count() {
        for d in 0..g.stencil.directions.len() {
            let l = line_laplacian(u, t, d);
            if l < worst {
                worst = l;
                worst_node = g.interior[t];
            }
        }
    }
    if !worst.is_finite() {
        worst = 0.0; // no interior directions — vacuously psh
    }
    PshReport {
        worst,
        worst_node: g.lattice_of(worst_node),
        ok: worst >= -tol,
    }
}

/// Deterministic pairwise sum (fixed association independent of chunking).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        s
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Total Monge–Ampère mass Σ ma_density · h^{2n} of u over a region
/// (all interior nodes when `region` is None).
pub fn ma_integral(u: &GridFunction, region: Option<&GridSet>) -> Result<f64> {
    let g = &u.grid;
    if let Some(set) = region {
        set.same_grid_as(g)?;
    }
    let cell = g.h.powi(2 * g.n as i32);
    let terms: Vec<f64> = (0..g.interior_count())
        .filter(|&t| region.map_or(true, |s| s.mask[t]))
        .map(|t| ma_density_at(u, t))
        .collect();
    if region.is_some() && terms.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(pairwise_sum(&terms) * cell)
}

/// L^p norm of a node-valued density over the interior:
/// (Σ |v|^p h^{2n})^{1/p}.
pub fn lp_norm(u: &GridFunction, p: f64) -> f64 {
    let g = &u.grid;
    let cell = g.h.powi(2 * g.n as i32);
    let terms: Vec<f64> = g
        .interior
        .iter()
        .map(|&id| u.vals[id as usize].abs().powf(p))
        .collect();
    (pairwise_sum(&terms) * cell).powf(1.0 / p)
}

/// Discrete Lipschitz constant: max of |u(a) - u(b)| / h over pairs of
/// axis-adjacent interior nodes.
pub fn lipschitz_constant(u: &GridFunction) -> f64 {
    let g = &u.grid;
    let axes = 2 * g.n;
    let mut worst = 0.0f64;
    for t in 0..g.interior_count() {
        let id = g.interior[t];
        let lat = g.nodes[id as usize];
        for i in 0..axes {
            let mut nb = lat;
            nb[i] += 1;
            let Some(cell) = g.cell_index(&nb[..axes]) else {
                continue;
            };
            let other = g.node_of_cell[cell];
            if other == NO_NODE || g.node_class[other as usize] != INTERIOR {
                continue;
            }
            let d = (u.vals[id as usize] - u.vals[other as usize]).abs() / g.h;
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::expr::Expr;
    use crate::grid::build_grid;
    use crate::stencil::StencilSet;
    use std::sync::Arc;

    fn disc_grid(h: f64) -> Arc<crate::grid::Grid> {
        let d = DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: 1.0 };
        build_grid(&d, h, StencilSet::default_for(1)).unwrap()
    }

    fn ball2_grid(h: f64) -> Arc<crate::grid::Grid> {
        let d = DomainSpec::Ball { n: 2, center: vec![0.0; 4], radius: 1.0 };
        build_grid(&d, h, StencilSet::default_for(2)).unwrap()
    }

    fn sample(g: &Arc<crate::grid::Grid>, src: &str) -> GridFunction {
        GridFunction::sample(g, &Expr::parse(src).unwrap()).unwrap()
    }

    #[test]
    fn laplacian_exact_on_quadratics_n1() {
        let g = disc_grid(0.25);
        let sq = sample(&g, "x ^ 2 + y ^ 2");
        let harm = sample(&g, "x ^ 2 - y ^ 2");
        let xx = sample(&g, "x ^ 2");
        for t in 0..g.interior_count() {
            assert_eq!(ma_density_at(&sq, t), 4.0); // Δ|z|² = 4, exact on dyadics
            assert_eq!(ma_density_at(&harm, t), 0.0);
            assert_eq!(ma_density_at(&xx, t), 2.0);
        }
    }

    #[test]
    fn density_exact_on_kahler_quadratic_n2() {
        let g = ball2_grid(0.25);
        let sq = sample(&g, "re1 ^ 2 + im1 ^ 2 + re2 ^ 2 + im2 ^ 2");
        for t in 0..g.interior_count() {
            for d in 0..6 {
                assert_eq!(line_laplacian(&sq, t, d), 4.0);
            }
            assert_eq!(ma_density_at(&sq, t), 32.0);
        }
    }

    #[test]
    fn density_exact_on_eigenframe_quadratic_n2() {
        // q = 0.25|z₁+z₂|² + 0.5|z₁−z₂|²: complex Hessian has eigenpairs
        // (1,1)/√2 ↦ 0.5 and (1,−1)/√2 ↦ 1.0, det = 0.5, density = 32·0.5 = 16.
        // The minimizing frame {(1,1),(1,−1)} is in the default stencil, so the
        // discrete density is exact; the axis frame gives 32·0.75² = 18.
        let g = ball2_grid(0.25);
        let q = sample(
            &g,
            "0.25 * ((re1 + re2) ^ 2 + (im1 + im2) ^ 2) + 0.5 * ((re1 - re2) ^ 2 + (im1 - im2) ^ 2)",
        );
        for t in 0..g.interior_count() {
            assert_eq!(ma_density_at(&q, t), 16.0);
        }
    }

    #[test]
    fn frame_minimum_dominates_determinant() {
        // For psd quadratics the frame-subset minimum can only overestimate:
        // density ≥ 32·det H. Random Hessians H = A*A (seeded).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = ball2_grid(0.5);
        for _ in 0..25 {
            // random complex 2x2 A; H = A^* A is psd Hermitian
            let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (ar, ai) = (
                [[a[0], a[1]], [a[2], a[3]]],
                [[a[4], a[5]], [a[6], a[7]]],
            );
            // H_jk = Σ_m conj(A_mj) A_mk
            let mut hr = [[0.0; 2]; 2];
            let mut hi = [[0.0; 2]; 2];
            for j in 0..2 {
                for k in 0..2 {
                    for m in 0..2 {
                        hr[j][k] += ar[m][j] * ar[m][k] + ai[m][j] * ai[m][k];
                        hi[j][k] += ar[m][j] * ai[m][k] - ai[m][j] * ar[m][k];
                    }
                }
            }
            let det = hr[0][0] * hr[1][1] - (hr[0][1] * hr[0][1] + hi[0][1] * hi[0][1]);
            // quadratic with this Hessian: u = Σ H_jk z̄_j z_k (real-valued)
            let u = GridFunction::sample_with(&g, |p| {
                let z = [(p[0], p[1]), (p[2], p[3])];
                let mut s = 0.0;
                for j in 0..2 {
                    for k in 0..2 {
                        // Re( conj(z_j) z_k (H_jk)) with H Hermitian sums real
                        let (rr, ri) = (
                            z[j].0 * z[k].0 + z[j].1 * z[k].1,
                            z[j].0 * z[k].1 - z[j].1 * z[k].0,
                        );
                        s += hr[j][k] * rr - hi[j][k] * ri;
                    }
                }
                s
            })
            .unwrap();
            for t in 0..g.interior_count() {
                let dens = ma_density_at(&u, t);
                assert!(
                    dens >= 32.0 * det - 1e-9,
                    "density {dens} < 32·det {}",
                    32.0 * det
                );
            }
        }
    }

    #[test]
    fn psh_check_flags_concavity() {
        let g = disc_grid(0.25);
        let sq = sample(&g, "x ^ 2 + y ^ 2");
        assert!(is_discretely_psh(&sq, 1e-12).ok);
        let cap = sample(&g, "0 - x ^ 2 - y ^ 2");
        let rep = is_discretely_psh(&cap, 1e-12);
        assert!(!rep.ok);
        assert_eq!(rep.worst, -4.0);
    }

    #[test]
    fn integral_counts_cells_exactly() {
        let g = disc_grid(0.125);
        let sq = sample(&g, "x ^ 2 + y ^ 2");
        let expect = 4.0 * g.interior_count() as f64 * g.h * g.h;
        let got = ma_integral(&sq, None).unwrap();
        assert!((got - expect).abs() < 1e-12);

        // region restriction
        let e = GridSet::from_points(&g, |p| p[0] > 0.0);
        let cnt = e.count() as f64;
        let got_e = ma_integral(&sq, Some(&e)).unwrap();
        assert!((got_e - 4.0 * cnt * g.h * g.h).abs() < 1e-12);

        let empty = GridSet::empty(&g);
        assert!(ma_integral(&sq, Some(&empty)).is_err());
    }

    #[test]
    fn harmonic_function_has_small_density() {
        // log|z - 2| is harmonic away from 2; discretization error is O(h²)
        let g = disc_grid(0.125);
        let u = sample(&g, "log(sqrt((x - 2) ^ 2 + y ^ 2))");
        for t in 0..g.interior_count() {
            assert!(ma_density_at(&u, t).abs() < 1e-2);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.001 - 0.05).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
        assert_eq!(pairwise_sum(&v), pairwise_sum(&v));
    }

    #[test]
    fn lp_norm_on_constant() {
        let g = disc_grid(0.25);
        let c = GridFunction::constant(&g, 3.0);
        let vol = g.interior_count() as f64 * g.h * g.h;
        let got = lp_norm(&c, 2.0);
        assert!((got - 3.0 * vol.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn deep_interior_shrinks_by_radius() {
        let g = disc_grid(0.25);
        let deep = g.deep_interior(2.0);
        // every member must have all |o| ≤ 2 lattice neighbors interior
        assert!(deep.count() > 0);
        assert!(deep.count() < g.interior_count());
        for (t, &id) in g.interior.iter().enumerate() {
            if deep.mask[t] {
                let p = g.point_of(id);
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                // among the Σo² ≤ 4 offsets the best radial one gains at least
                // 2h·cos(22.5°) ≈ 1.85h of radius, and must stay interior
                assert!(r < 1.0 - 1.8 * g.h + 1e-12, "node at radius {r} too close to band");
            }
        }
    }

    #[test]
    fn lipschitz_constant_of_linear_slopes() {
        let g = disc_grid(0.125);
        // u = 2x: adjacent-node differences are exactly 2h along x, 0 along y
        let u = sample(&g, "2 * x");
        assert_eq!(lipschitz_constant(&u), 2.0);
        let c = GridFunction::constant(&g, 7.0);
        assert_eq!(lipschitz_constant(&c), 0.0);
    }
}
