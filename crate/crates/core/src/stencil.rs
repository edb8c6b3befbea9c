//! Complex-line stencils.
//!
//! A direction is a Gaussian-integer vector ξ ∈ ℤ[i]ⁿ \ {0}. Each direction
//! contributes four lattice offsets — ±ξ and ±iξ — embedded into ℝ^{2n} via
//! (a₁+ib₁, a₂+ib₂) ↦ (a₁, b₁, a₂, b₂), so that the four samples
//! u(z ± hξ), u(z ± ihξ) discretize the Laplacian of u restricted to the
//! complex line z + ℂξ.
//!
//! For n = 2 the directions are grouped into frames: pairs (ξ₁, ξ₂) that are
//! Hermitian-orthogonal (⟨ξ₁, ξ₂⟩ = Σ_k ξ₁ₖ·conj(ξ₂ₖ) = 0, checked exactly in
//! integer arithmetic). The determinant-type Monge–Ampère operator minimizes a
//! product of line Laplacians over the listed frames; richer stencils narrow
//! the gap between this minimum and the true determinant.

use crate::error::{Error, Result};

/// Upper bound on directions per stencil (sizes the solver's stack buffers).
pub const MAX_DIRECTIONS: usize = 24;

/// One complex-line direction ξ with its squared Hermitian norm |ξ|².
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Direction {
    /// (re, im) of each complex component; length n.
    pub xi: Vec<(i64, i64)>,
    /// |ξ|² = Σ (a² + b²), precomputed.
    pub norm2: i64,
}

impl Direction {
    pub fn new(xi: Vec<(i64, i64)>) -> Direction {
        let norm2 = xi.iter().map(|&(a, b)| a * a + b * b).sum();
        Direction { xi, norm2 }
    }

    /// Lattice offsets of the four stencil arms, in slot order
    /// +ξ, −ξ, +iξ, −iξ. Each offset has flat layout (length 2n).
    pub fn offsets(&self) -> [Vec<i64>; 4] {
        let n = self.xi.len();
        let mut plus = Vec::with_capacity(2 * n);
        let mut iplus = Vec::with_capacity(2 * n);
        for &(a, b) in &self.xi {
            plus.extend_from_slice(&[a, b]);
            // i·(a+ib) = -b + ia
            iplus.extend_from_slice(&[-b, a]);
        }
        let minus: Vec<i64> = plus.iter().map(|c| -c).collect();
        let iminus: Vec<i64> = iplus.iter().map(|c| -c).collect();
        [plus, minus, iplus, iminus]
    }
}

/// A full stencil: directions plus the frame grouping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StencilSet {
    pub n: usize,
    pub directions: Vec<Direction>,
    /// Indices into `directions`; each frame has exactly n entries.
    pub frames: Vec<Vec<usize>>,
}

impl StencilSet {
    /// Default stencil.
    ///
    /// n = 1: the single direction ξ = 1 (classical 5-point Laplacian).
    ///
    /// n = 2: three orthogonal frames
    /// {(1,0),(0,1)}, {(1,1),(1,−1)}, {(1,i),(1,−i)} — six directions,
    /// 24 lattice offsets, every offset component in {−1,0,1}.
    pub fn default_for(n: usize) -> StencilSet {
        match n {
            1 => StencilSet {
                n,
                directions: vec![Direction::new(vec![(1, 0)])],
                frames: vec![vec![0]],
            },
            2 => {
                let dirs = vec![
                    Direction::new(vec![(1, 0), (0, 0)]),
                    Direction::new(vec![(0, 0), (1, 0)]),
                    Direction::new(vec![(1, 0), (1, 0)]),
                    Direction::new(vec![(1, 0), (-1, 0)]),
                    Direction::new(vec![(1, 0), (0, 1)]),
                    Direction::new(vec![(1, 0), (0, -1)]),
                ];
                StencilSet {
                    n,
                    directions: dirs,
                    frames: vec![vec![0, 1], vec![2, 3], vec![4, 5]],
                }
            }
            _ => unreachable!("only n = 1, 2 are supported"),
        }
    }

    /// Validate component lengths, nonzero directions, frame arity, and
    /// exact Hermitian orthogonality within each frame.
    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return Err(Error::Validation(format!(
                "stencil dimension n = {} (supported: 1, 2)",
                self.n
            )));
        }
        if self.directions.is_empty() || self.frames.is_empty() {
            return Err(Error::Validation(
                "stencil needs at least one direction and one frame".into(),
            ));
        }
        if self.directions.len() > MAX_DIRECTIONS {
            return Err(Error::Validation(format!(
                "stencil has {} directions (limit {MAX_DIRECTIONS})",
                self.directions.len()
            )));
        }
        for (i, d) in self.directions.iter().enumerate() {
            if d.xi.len() != self.n {
                return Err(Error::Validation(format!(
                    "direction {i} has {} components, expected n = {}",
                    d.xi.len(),
                    self.n
                )));
            }
            if d.norm2 == 0 {
                return Err(Error::Validation(format!("direction {i} is zero")));
            }
        }
        for (fi, frame) in self.frames.iter().enumerate() {
            if frame.len() != self.n {
                return Err(Error::Validation(format!(
                    "frame {fi} has {} directions, expected n = {}",
                    frame.len(),
                    self.n
                )));
            }
            for &d in frame {
                if d >= self.directions.len() {
                    return Err(Error::Validation(format!(
                        "frame {fi} references direction {d}, but only {} exist",
                        self.directions.len()
                    )));
                }
            }
            if self.n == 2 {
                let (a, b) = (&self.directions[frame[0]], &self.directions[frame[1]]);
                // ⟨ξa, ξb⟩ = Σ_k ξa_k · conj(ξb_k), exact in i64
                let mut re = 0i64;
                let mut im = 0i64;
                for k in 0..2 {
                    let (p, q) = a.xi[k];
                    let (r, s) = b.xi[k];
                    re += p * r + q * s;
                    im += q * r - p * s;
                }
                if re != 0 || im != 0 {
                    return Err(Error::Validation(format!(
                        "frame {fi} is not Hermitian-orthogonal: ⟨ξ{}, ξ{}⟩ = {re} + {im}i",
                        frame[0], frame[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute lattice component over all offsets — the halo width
    /// (in nodes, per axis) the band must provide around the interior.
    pub fn width(&self) -> i64 {
        self.directions
            .iter()
            .flat_map(|d| d.xi.iter().flat_map(|&(a, b)| [a.abs(), b.abs()]))
            .max()
            .unwrap_or(1)
            .max(1)
    }
}
