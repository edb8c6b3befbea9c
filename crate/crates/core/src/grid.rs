//! Lattice discretization of a bounded domain.
//!
//! The bounding box of Ω is covered by a uniform lattice of spacing h in all
//! 2n real coordinates. Cells are classified as
//!
//!   interior  ρ(z) < 0 (strictly),
//!   band      ρ(z) ≥ 0 but reachable from an interior node by one stencil
//!             offset — these carry Dirichlet boundary data,
//!   exterior  everything else.
//!
//! Interior and band cells are packed into a compact node list (row-major
//! order, last axis fastest); per-node values live in flat `Vec<f64>` arrays
//! indexed by compact node id. For every interior node the compact ids of all
//! its stencil neighbors are precomputed in slot order (+ξ, −ξ, +iξ, −iξ per
//! direction), so sweep kernels never touch lattice arithmetic.
//!
//! A grid carries a fingerprint (FNV-1a over shape, spacing, stencil, and
//! classification); functions on different grids refuse to mix.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::stencil::StencilSet;
use std::sync::Arc;

pub const INTERIOR: u8 = 0;
pub const BAND: u8 = 1;
pub const EXTERIOR: u8 = 2;

/// Sentinel for "no compact node" in the full-box index.
pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    /// Coordinate of lattice index 0 on each axis (flat layout, length 2n).
    pub origin: Vec<f64>,
    /// Nodes per axis.
    pub counts: Vec<u32>,
    pub stencil: StencilSet,
    /// Full-box classification, row-major.
    pub class: Vec<u8>,
    /// Full-box cell -> compact node id (NO_NODE for exterior).
    pub node_of_cell: Vec<u32>,
    /// Compact node id -> lattice coordinates (trailing axes zero for n = 1).
    pub nodes: Vec<[i32; 4]>,
    /// Compact node id -> INTERIOR or BAND.
    pub node_class: Vec<u8>,
    /// Compact ids of interior nodes, ascending (defines the sweep order).
    pub interior: Vec<u32>,
    /// Interior ordinal t -> compact neighbor ids, direction-major:
    /// slot (d, s) at index t*(4*dirs) + 4*d + s with s over +ξ, −ξ, +iξ, −iξ.
    pub neighbors: Vec<u32>,
    pub fingerprint: u64,
}

impl Grid {
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    pub fn slots_per_node(&self) -> usize {
        4 * self.stencil.directions.len()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Real coordinates of a compact node.
    pub fn point_of(&self, node: u32) -> Vec<f64> {
        let lat = &self.nodes[node as usize];
        (0..self.axes())
            .map(|i| self.origin[i] + lat[i] as f64 * self.h)
            .collect()
    }

    /// Lattice coordinates of a compact node as i64 (for error reports).
    pub fn lattice_of(&self, node: u32) -> Vec<i64> {
        self.nodes[node as usize][..self.axes()]
            .iter()
            .map(|&c| c as i64)
            .collect()
    }

    /// Full-box row-major cell index, or None when outside the box.
    pub fn cell_index(&self, lat: &[i32]) -> Option<usize> {
        let mut idx = 0usize;
        for (i, &l) in lat.iter().enumerate().take(self.axes()) {
            if l < 0 || l as u32 >= self.counts[i] {
                return None;
            }
            idx = idx * self.counts[i] as usize + l as usize;
        }
        Some(idx)
    }

    /// Neighbor slots of interior ordinal t.
    #[inline]
    pub fn neighbor_slots(&self, t: usize) -> &[u32] {
        let spd = self.slots_per_node();
        &self.neighbors[t * spd..(t + 1) * spd]
    }

    /// Interior nodes whose whole lattice neighborhood of Euclidean radius
    /// `r_cells` (in units of h) is interior — i.e. nodes at distance
    /// > r_cells·h from the band.
    pub fn deep_interior(self: &Arc<Grid>, r_cells: f64) -> GridSet {
        let axes = self.axes();
        let r = r_cells.floor() as i64;
        let r2 = (r_cells * r_cells).floor() as i64;
        // all integer offsets with Σ o² ≤ r²
        let mut offsets: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..axes {
            let mut next = Vec::new();
            for base in &offsets {
                let used: i64 = base.iter().map(|o| o * o).sum();
                for o in -r..=r {
                    if used + o * o <= r2 {
                        let mut v = base.clone();
                        v.push(o);
                        next.push(v);
                    }
                }
            }
            offsets = next;
        }
        let mask = self
            .interior
            .iter()
            .map(|&id| {
                let lat = self.nodes[id as usize];
                offsets.iter().all(|off| {
                    let target: Vec<i32> = (0..axes).map(|i| lat[i] + off[i] as i32).collect();
                    match self.cell_index(&target) {
                        Some(cell) => self.class[cell] == INTERIOR,
                        None => false,
                    }
                })
            })
            .collect();
        GridSet { grid: self.clone(), mask }
    }

    /// True when `other` is the same discretization translated by a lattice
    /// vector: identical n, h, stencil, counts, and classification, with the
    /// origin shifted by an exact multiple of h on every axis.
    pub fn is_translate_of(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.h == other.h
            && self.counts == other.counts
            && self.stencil == other.stencil
            && self.class == other.class
    }

    /// Node id of the lattice point at coordinates p, or None when p is not
    /// a lattice point of this grid (within 1e-9 relative slack) or carries
    /// no node.
    pub fn locate(&self, p: &[f64]) -> Option<u32> {
        if p.len() != 2 * self.n {
            return None;
        }
        let mut lat = [0i32; 4];
        for i in 0..2 * self.n {
            let t = (p[i] - self.origin[i]) / self.h;
            let k = t.round();
            if (t - k).abs() > 1e-9 * (1.0 + t.abs()) {
                return None;
            }
            if k < 0.0 || k >= self.counts[i] as f64 {
                return None;
            }
            lat[i] = k as i32;
        }
        let cell = self.cell_index(&lat[..2 * self.n])?;
        match self.node_of_cell[cell] {
            NO_NODE => None,
            id => Some(id),
        }
    }
}

/// Build the grid for a domain at spacing h with the given stencil.
pub fn build_grid(spec: &DomainSpec, h: f64, stencil: StencilSet) -> Result<Arc<Grid>> {
    spec.validate()?;
    stencil.validate()?;
    if stencil.n != spec.n() {
        return Err(Error::Validation(format!(
            "stencil dimension {} does not match domain dimension {}",
            stencil.n,
            spec.n()
        )));
    }
    let n = spec.n();
    let axes = 2 * n;
    let w = stencil.width();
    let (origin, counts) = spec.lattice_layout(h, w)?;

    let total: usize = counts.iter().map(|&c| c as usize).product();
    let mut class = vec![EXTERIOR; total];

    // classification pass
    {
        let mut lat = vec![0u32; axes];
        let mut p = vec![0.0f64; axes];
        let mut interior_seen = false;
        for (cell, slot) in class.iter_mut().enumerate() {
            for i in 0..axes {
                p[i] = origin[i] + lat[i] as f64 * h;
            }
            let r = spec.rho(&p);
            if !r.is_finite() {
                return Err(Error::Evaluation(format!(
                    "defining function is not finite at {p:?} (value {r})"
                )));
            }
            if r < 0.0 {
                *slot = INTERIOR;
                interior_seen = true;
            }
            // odometer, last axis fastest
            let mut ax = axes;
            while ax > 0 {
                ax -= 1;
                lat[ax] += 1;
                if lat[ax] < counts[ax] {
                    break;
                }
                lat[ax] = 0;
                if ax == 0 {
                    debug_assert_eq!(cell + 1, total);
                }
            }
        }
        if !interior_seen {
            return Err(Error::EmptyInterior);
        }
    }

    // offsets of all stencil arms, flattened
    let offsets: Vec<Vec<i64>> = stencil
        .directions
        .iter()
        .flat_map(|d| d.offsets().into_iter())
        .collect();

    // band pass: every offset target of an interior cell must exist in the box
    {
        let strides = row_strides(&counts);
        let mut lat = vec![0i64; axes];
        for cell in 0..total {
            if class[cell] != INTERIOR {
                continue;
            }
            unravel(cell, &counts, &mut lat);
            for off in &offsets {
                let mut target = 0usize;
                for i in 0..axes {
                    let l = lat[i] + off[i];
                    if l < 0 || l >= counts[i] as i64 {
                        return Err(Error::UnboundedDomain {
                            axis: i,
                            detail: format!(
                                "interior node at lattice {lat:?} reaches outside the bounding box; \
                                 the domain is not strictly inside it"
                            ),
                        });
                    }
                    target += l as usize * strides[i];
                }
                if class[target] == EXTERIOR {
                    class[target] = BAND;
                }
            }
        }
    }

    assemble_grid(n, h, origin, counts, stencil, class)
}

/// Pack a ready classification array into a grid: compact node list, neighbor
/// table, fingerprint. Shared by `build_grid` and the file reader; rejects
/// classifications whose band does not cover every stencil arm.
pub(crate) fn assemble_grid(
    n: usize,
    h: f64,
    origin: Vec<f64>,
    counts: Vec<u32>,
    stencil: StencilSet,
    class: Vec<u8>,
) -> Result<Arc<Grid>> {
    let axes = 2 * n;
    if origin.len() != axes || counts.len() != axes {
        return Err(Error::Validation(format!(
            "layout arrays have lengths {} and {}, expected {axes}",
            origin.len(),
            counts.len()
        )));
    }
    let total: usize = counts.iter().map(|&c| c as usize).product();
    if class.len() != total {
        return Err(Error::Validation(format!(
            "classification has {} cells, lattice has {total}",
            class.len()
        )));
    }
    let offsets: Vec<Vec<i64>> = stencil
        .directions
        .iter()
        .flat_map(|d| d.offsets().into_iter())
        .collect();

    // compact pass
    let mut node_of_cell = vec![NO_NODE; total];
    let mut nodes: Vec<[i32; 4]> = Vec::new();
    let mut node_class: Vec<u8> = Vec::new();
    let mut interior: Vec<u32> = Vec::new();
    {
        let mut lat = vec![0i64; axes];
        for cell in 0..total {
            if class[cell] == EXTERIOR {
                continue;
            }
            unravel(cell, &counts, &mut lat);
            let id = nodes.len() as u32;
            node_of_cell[cell] = id;
            let mut rec = [0i32; 4];
            for i in 0..axes {
                rec[i] = lat[i] as i32;
            }
            nodes.push(rec);
            node_class.push(class[cell]);
            if class[cell] == INTERIOR {
                interior.push(id);
            }
        }
    }
    if interior.is_empty() {
        return Err(Error::EmptyInterior);
    }

    // neighbor table
    let spd = 4 * stencil.directions.len();
    let mut neighbors = vec![NO_NODE; interior.len() * spd];
    {
        let strides = row_strides(&counts);
        for (t, &id) in interior.iter().enumerate() {
            let lat = nodes[id as usize];
            for (k, off) in offsets.iter().enumerate() {
                let mut target = 0usize;
                let mut inside = true;
                for i in 0..axes {
                    let l = lat[i] as i64 + off[i];
                    if l < 0 || l >= counts[i] as i64 {
                        inside = false;
                        break;
                    }
                    target += l as usize * strides[i];
                }
                let nb = if inside { node_of_cell[target] } else { NO_NODE };
                if nb == NO_NODE {
                    return Err(Error::MissingNeighbor {
                        node: lat[..axes].iter().map(|&c| c as i64).collect(),
                    });
                }
                neighbors[t * spd + k] = nb;
            }
        }
    }

    let fingerprint = fingerprint(n, h, &origin, &counts, &stencil, &class);
    Ok(Arc::new(Grid {
        n,
        h,
        origin,
        counts,
        stencil,
        class,
        node_of_cell,
        nodes,
        node_class,
        interior,
        neighbors,
        fingerprint,
    }))
}

fn row_strides(counts: &[u32]) -> Vec<usize> {
    let axes = counts.len();
    let mut s = vec![1usize; axes];
    for i in (0..axes.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * counts[i + 1] as usize;
    }
    s
}

fn unravel(cell: usize, counts: &[u32], lat: &mut [i64]) {
    let mut rem = cell;
    for i in (0..counts.len()).rev() {
        let c = counts[i] as usize;
        lat[i] = (rem % c) as i64;
        rem /= c;
    }
}

fn fingerprint(
    n: usize,
    h: f64,
    origin: &[f64],
    counts: &[u32],
    stencil: &StencilSet,
    class: &[u8],
) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    eat(b"PSHG");
    eat(&(n as u64).to_le_bytes());
    eat(&h.to_bits().to_le_bytes());
    for o in origin {
        eat(&o.to_bits().to_le_bytes());
    }
    for c in counts {
        eat(&c.to_le_bytes());
    }
    for d in &stencil.directions {
        for &(a, b) in &d.xi {
            eat(&a.to_le_bytes());
            eat(&b.to_le_bytes());
        }
    }
    for f in &stencil.frames {
        for &d in f {
            eat(&(d as u64).to_le_bytes());
        }
    }
    eat(class);
    hash
}

/// A scalar function stored on the compact nodes of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    /// Indexed by compact node id.
    pub vals: Vec<f64>,
}

impl GridFunction {
    pub fn constant(grid: &Arc<Grid>, c: f64) -> GridFunction {
        GridFunction {
            grid: grid.clone(),
            vals: vec![c; grid.node_count()],
        }
    }

    /// Evaluate an expression at every node (interior and band).
    pub fn sample(grid: &Arc<Grid>, e: &Expr) -> Result<GridFunction> {
        if e.max_coord() > grid.n {
            return Err(Error::Evaluation(format!(
                "expression `{e}` mentions coordinate {} but the grid has n = {}",
                e.max_coord(),
                grid.n
            )));
        }
        Self::sample_with(grid, |p| e.eval(p)).map_err(|err| match err {
            Error::Evaluation(msg) => Error::Evaluation(format!("{msg} while sampling `{e}`")),
            other => other,
        })
    }

    /// Evaluate a closure at every node; values must be finite.
    pub fn sample_with(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<GridFunction> {
        let mut vals = Vec::with_capacity(grid.node_count());
        for id in 0..grid.node_count() as u32 {
            let p = grid.point_of(id);
            let v = f(&p);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "non-finite value {v} at node {:?} (point {p:?})",
                    grid.lattice_of(id)
                )));
            }
            vals.push(v);
        }
        Ok(GridFunction { grid: grid.clone(), vals })
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid.fingerprint == other.grid.fingerprint {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                a: self.grid.fingerprint,
                b: other.grid.fingerprint,
            })
        }
    }

    /// sup |self - other| over interior nodes.
    pub fn sup_diff(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        let mut worst = 0.0f64;
        for &id in &self.grid.interior {
            let d = (self.vals[id as usize] - other.vals[id as usize]).abs();
            if d > worst {
                worst = d;
            }
        }
        Ok(worst)
    }

    /// sup |self - other| over a set of interior nodes.
    pub fn sup_diff_on(&self, other: &GridFunction, set: &GridSet) -> Result<f64> {
        self.same_grid(other)?;
        set.same_grid_as(&self.grid)?;
        let mut worst = 0.0f64;
        let mut seen = false;
        for (t, &id) in self.grid.interior.iter().enumerate() {
            if set.mask[t] {
                seen = true;
                let d = (self.vals[id as usize] - other.vals[id as usize]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        if !seen {
            return Err(Error::EmptyRegion);
        }
        Ok(worst)
    }

    /// Minimum over interior nodes.
    pub fn min_interior(&self) -> f64 {
        let mut m = f64::INFINITY;
        for &id in &self.grid.interior {
            m = m.min(self.vals[id as usize]);
        }
        m
    }

    /// Maximum over interior nodes.
    pub fn max_interior(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for &id in &self.grid.interior {
            m = m.max(self.vals[id as usize]);
        }
        m
    }

    /// Range max - min over all nodes (interior and band).
    pub fn range(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.vals {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }
}

/// Transport u to the grid of the translated domain: the result v satisfies
/// v(z) = u(z - a) at every node of `target`. The offset must be an exact
/// lattice vector and `target` must be the source grid translated by it;
/// values are then relabelled bit-for-bit, no interpolation.
pub fn translate_function(u: &GridFunction, a: &[f64], target: &Arc<Grid>) -> Result<GridFunction> {
    let src = &u.grid;
    if a.len() != 2 * src.n {
        return Err(Error::Validation(format!(
            "offset has {} coordinates, grid has {}",
            a.len(),
            2 * src.n
        )));
    }
    for &c in a {
        let k = (c / src.h).round();
        if (c - k * src.h).abs() > 1e-9 * (1.0 + c.abs()) {
            return Err(Error::NonLatticeOffset {
                offset: a.to_vec(),
                h: src.h,
            });
        }
    }
    if !src.is_translate_of(target) {
        return Err(Error::GridMismatch {
            a: src.fingerprint,
            b: target.fingerprint,
        });
    }
    for i in 0..2 * src.n {
        let want = src.origin[i] + a[i];
        if (target.origin[i] - want).abs() > 1e-9 * (1.0 + want.abs()) {
            return Err(Error::Validation(format!(
                "target origin {:?} is not the source origin {:?} shifted by {:?}",
                target.origin, src.origin, a
            )));
        }
    }
    Ok(GridFunction {
        grid: target.clone(),
        vals: u.vals.clone(),
    })
}

/// A set of interior nodes, stored as a mask over interior ordinals.
#[derive(Debug, Clone)]
pub struct GridSet {
    pub grid: Arc<Grid>,
    /// mask[t] refers to interior ordinal t (compact id grid.interior[t]).
    pub mask: Vec<bool>,
}

impl GridSet {
    pub fn empty(grid: &Arc<Grid>) -> GridSet {
        GridSet {
            grid: grid.clone(),
            mask: vec![false; grid.interior_count()],
        }
    }

    /// Select interior nodes by a predicate on their real coordinates.
    pub fn from_points(grid: &Arc<Grid>, pred: impl Fn(&[f64]) -> bool) -> GridSet {
        let mask = grid
            .interior
            .iter()
            .map(|&id| pred(&grid.point_of(id)))
            .collect();
        GridSet { grid: grid.clone(), mask }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn same_grid_as(&self, grid: &Arc<Grid>) -> Result<()> {
        if self.grid.fingerprint == grid.fingerprint {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                a: self.grid.fingerprint,
                b: grid.fingerprint,
            })
        }
    }

    /// Compact node ids of the members, ascending.
    pub fn node_ids(&self) -> Vec<u32> {
        self.grid
            .interior
            .iter()
            .enumerate()
            .filter_map(|(t, &id)| if self.mask[t] { Some(id) } else { None })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(r: f64) -> DomainSpec {
        DomainSpec::Ball { n: 1, center: vec![0.0, 0.0], radius: r }
    }

    #[test]
    fn unit_disc_h_half_has_nine_interior_nodes() {
        // lattice points of 0.5·Z² with x² + y² < 1:
        // (0,0), (±.5,0), (0,±.5), (±.5,±.5)
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        assert_eq!(g.interior_count(), 9);
        // band: offset targets of interior nodes that are not interior:
        // (±1,0), (0,±1) from the axis nodes and (±1,±.5), (±.5,±1) from the
        // diagonal nodes — 12 in total
        let band = g.node_class.iter().filter(|&&c| c == BAND).count();
        assert_eq!(band, 12);
    }

    #[test]
    fn coarse_disc_has_single_interior_node() {
        let g = build_grid(&disc(1.0), 2.0, StencilSet::default_for(1)).unwrap();
        assert_eq!(g.interior_count(), 1);
        assert_eq!(g.node_class.iter().filter(|&&c| c == BAND).count(), 4);
    }

    #[test]
    fn unit_ball_c2_h_half_has_65_interior_nodes() {
        // #{ m ∈ Z⁴ : Σ m² ≤ 3 } at spacing 0.5 inside |z| < 1:
        // 1 + 8 + 24 + 32 = 65
        let b = DomainSpec::Ball { n: 2, center: vec![0.0; 4], radius: 1.0 };
        let g = build_grid(&b, 0.5, StencilSet::default_for(2)).unwrap();
        assert_eq!(g.interior_count(), 65);
    }

    #[test]
    fn every_interior_neighbor_is_compact() {
        let g = build_grid(&disc(1.0), 0.25, StencilSet::default_for(1)).unwrap();
        let spd = g.slots_per_node();
        for t in 0..g.interior_count() {
            let slots = g.neighbor_slots(t);
            assert_eq!(slots.len(), spd);
            for &nb in slots {
                assert!(nb != NO_NODE);
                assert!((nb as usize) < g.node_count());
            }
        }
    }

    #[test]
    fn neighbor_slot_order_matches_offsets() {
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        // find interior ordinal of the origin
        let t0 = g
            .interior
            .iter()
            .position(|&id| g.point_of(id).iter().all(|&c| c == 0.0))
            .unwrap();
        let slots = g.neighbor_slots(t0);
        let pts: Vec<Vec<f64>> = slots.iter().map(|&nb| g.point_of(nb)).collect();
        assert_eq!(pts[0], vec![0.5, 0.0]); // +ξ
        assert_eq!(pts[1], vec![-0.5, 0.0]); // −ξ
        assert_eq!(pts[2], vec![0.0, 0.5]); // +iξ
        assert_eq!(pts[3], vec![0.0, -0.5]); // −iξ
    }

    #[test]
    fn empty_interior_is_an_error() {
        let b = DomainSpec::Box { n: 1, lo: vec![0.2, 0.2], hi: vec![0.3, 0.3] };
        match build_grid(&b, 0.5, StencilSet::default_for(1)) {
            Err(Error::EmptyInterior) => {}
            other => panic!("expected EmptyInterior, got {other:?}"),
        }
    }

    #[test]
    fn sublevel_bbox_clips_the_domain() {
        // ρ = |z| - 2 is negative on all of [-1,1]², so the bounding box does
        // the clipping: the domain becomes the open box itself.
        let d = DomainSpec::Sublevel {
            n: 1,
            rho: Expr::parse("absz - 2").unwrap(),
            bbox_lo: vec![-1.0, -1.0],
            bbox_hi: vec![1.0, 1.0],
        };
        let g = build_grid(&d, 0.25, StencilSet::default_for(1)).unwrap();
        // open box: lattice points -0.75..0.75 per axis = 7×7
        assert_eq!(g.interior_count(), 49);
        for &id in &g.interior {
            let p = g.point_of(id);
            assert!(p.iter().all(|c| c.abs() < 1.0));
        }
    }

    #[test]
    fn sup_diff_oracle_on_unit_disc() {
        // max |z|² over the nine interior nodes is 0.5, attained at (±.5,±.5)
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        let sq = GridFunction::sample(&g, &Expr::parse("x ^ 2 + y ^ 2").unwrap()).unwrap();
        let zero = GridFunction::constant(&g, 0.0);
        assert_eq!(zero.sup_diff(&sq).unwrap(), 0.5);
    }

    #[test]
    fn sampling_nonfinite_reports_node() {
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        let e = Expr::parse("log(x)").unwrap();
        match GridFunction::sample(&g, &e) {
            Err(Error::Evaluation(msg)) => assert!(msg.contains("log"), "message: {msg}"),
            other => panic!("expected Evaluation error, got {other:?}"),
        }
        // dimension mismatch
        let e2 = Expr::parse("re2").unwrap();
        assert!(GridFunction::sample(&g, &e2).is_err());
    }

    #[test]
    fn fingerprints_distinguish_grids() {
        let a = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        let b = build_grid(&disc(1.0), 0.25, StencilSet::default_for(1)).unwrap();
        // radius 0.6 drops the diagonal nodes (|(±.5,±.5)|² = 0.5 > 0.36)
        let c = build_grid(&disc(0.6), 0.5, StencilSet::default_for(1)).unwrap();
        assert_ne!(a.fingerprint, b.fingerprint);
        assert_ne!(a.fingerprint, c.fingerprint);
        let fa = GridFunction::constant(&a, 0.0);
        let fb = GridFunction::constant(&b, 0.0);
        assert!(fa.sup_diff(&fb).is_err());
    }

    #[test]
    fn translated_grid_is_recognized() {
        let h = 1.0 / 16.0;
        let a = build_grid(&disc(1.0), h, StencilSet::default_for(1)).unwrap();
        let moved = disc(1.0).translate(&[0.5, 0.25]);
        let b = build_grid(&moved, h, StencilSet::default_for(1)).unwrap();
        assert!(a.is_translate_of(&b));
        assert_eq!(a.interior_count(), b.interior_count());
        for i in 0..2 {
            assert_eq!(b.origin[i], a.origin[i] + [0.5, 0.25][i]);
        }
    }

    #[test]
    fn locate_finds_lattice_points_only() {
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        let id = g.locate(&[0.5, -0.5]).unwrap();
        assert_eq!(g.point_of(id), vec![0.5, -0.5]);
        assert_eq!(g.locate(&[0.3, 0.0]), None); // off-lattice
        assert_eq!(g.locate(&[8.0, 0.0]), None); // outside the layout
    }

    #[test]
    fn translate_function_relabels_bit_for_bit() {
        let h = 0.25;
        let a = [1.0, -0.5];
        let src = build_grid(&disc(1.0), h, StencilSet::default_for(1)).unwrap();
        let dst = build_grid(&disc(1.0).translate(&a), h, StencilSet::default_for(1)).unwrap();
        let u = GridFunction::sample(&src, &Expr::parse("x ^ 2 + y ^ 2").unwrap()).unwrap();
        let v = translate_function(&u, &a, &dst).unwrap();
        // v(z) = u(z - a) = (x-1)² + (y+0.5)², exact at dyadic nodes
        let shifted = Expr::parse("(x - 1) ^ 2 + (y + 0.5) ^ 2").unwrap();
        let w = GridFunction::sample(&dst, &shifted).unwrap();
        assert_eq!(v.vals, w.vals);
        // off-lattice offsets are rejected
        match translate_function(&u, &[h / 2.0, 0.0], &dst) {
            Err(Error::NonLatticeOffset { .. }) => {}
            other => panic!("expected NonLatticeOffset, got {other:?}"),
        }
    }

    #[test]
    fn grid_sets_select_interior_nodes() {
        let g = build_grid(&disc(1.0), 0.5, StencilSet::default_for(1)).unwrap();
        let e = GridSet::from_points(&g, |p| p[0] * p[0] + p[1] * p[1] <= 0.26);
        // (0,0), (±.5,0), (0,±.5) have |z|² ∈ {0, 0.25}
        assert_eq!(e.count(), 5);
        assert!(!e.is_empty());
        assert_eq!(e.node_ids().len(), 5);
        assert!(GridSet::empty(&g).is_empty());
    }
}
