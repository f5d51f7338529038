//! Compactly supported fractal probability measures.
//!
//! Measures are finite-depth approximations of self-similar attractors: each
//! depth-`n` cell of an equicontractive iterated function system carries one
//! atom of equal weight at its center.

mod frostman;
mod io;

pub use frostman::{
    estimate_frostman_constant, geometric_radii, renormalize, FrostmanReport, Renormalized,
    DEFAULT_CEILING, DEFAULT_TAU,
};
pub use io::{read_measure_csv, write_measure_csv};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist2, Point};

/// Default cap on the number of atoms a construction may produce.
pub const DEFAULT_ATOM_CAP: usize = 10_000_000;

/// Equicontractive self-similar system x ↦ ratio·x + t_i acting on [0,1]^k.
#[derive(Clone, Debug, PartialEq)]
pub struct IteratedFunctionSystem {
    ambient_dim: usize,
    ratio: f64,
    translations: Vec<Point>,
    depth: usize,
}

impl IteratedFunctionSystem {
    pub fn new(ambient_dim: usize, ratio: f64, translations: Vec<Point>, depth: usize) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(invalid("ambient dimension must be positive"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid(format!("contraction ratio {ratio} not in (0,1)")));
        }
        if depth == 0 {
            return Err(invalid("depth must be positive"));
        }
        if translations.is_empty() {
            return Err(invalid("at least one cell is required"));
        }
        for t in &translations {
            if t.len() != ambient_dim || t.iter().any(|x| !x.is_finite()) {
                return Err(invalid("translation has wrong dimension or is not finite"));
            }
            if t.iter().any(|&x| x < -1e-12 || x + ratio > 1.0 + 1e-12) {
                return Err(invalid("cell image leaves the unit cube"));
            }
        }
        let ifs = IteratedFunctionSystem {
            ambient_dim,
            ratio,
            translations,
            depth,
        };
        ifs.check_open_set_condition()?;
        let s = ifs.similarity_dimension();
        if !(s > 0.0 && s <= ambient_dim as f64 + 1e-12) {
            return Err(invalid(format!("similarity dimension {s} not in (0, {ambient_dim}]")));
        }
        Ok(ifs)
    }

    /// Builds from (ratio, translation) cells; all ratios must agree.
    pub fn from_cells(ambient_dim: usize, cells: Vec<(f64, Point)>, depth: usize) -> Result<Self> {
        let ratio = cells.first().map(|c| c.0).ok_or_else(|| invalid("no cells"))?;
        if cells.iter().any(|c| (c.0 - ratio).abs() > 1e-15) {
            return Err(invalid("cells must share one contraction ratio"));
        }
        Self::new(ambient_dim, ratio, cells.into_iter().map(|c| c.1).collect(), depth)
    }

    /// Middle-thirds Cantor set on [0,1].
    pub fn cantor_1d(depth: usize) -> Self {
        Self::new(1, 1.0 / 3.0, vec![vec![0.0], vec![2.0 / 3.0]], depth).unwrap()
    }

    /// Three of the four half-scale quadrants of [0,1]²; s = log 3 / log 2.
    pub fn sierpinski_2d(depth: usize) -> Self {
        Self::new(
            2,
            0.5,
            vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]],
            depth,
        )
        .unwrap()
    }

    /// All 2^k half-scale subcubes: the uniform dyadic measure on [0,1]^k.
    pub fn full_grid(k: usize, depth: usize) -> Self {
        let translations = (0..1usize << k)
            .map(|m| (0..k).map(|i| if m >> i & 1 == 1 { 0.5 } else { 0.0 }).collect())
            .collect();
        Self::new(k, 0.5, translations, depth).unwrap()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn cells(&self) -> &[Point] {
        &self.translations
    }

    pub fn similarity_dimension(&self) -> f64 {
        (self.translations.len() as f64).ln() / (1.0 / self.ratio).ln()
    }

    /// Pairwise open-box overlap test on the first-level images of the unit cube.
    fn check_open_set_condition(&self) -> Result<()> {
        let r = self.ratio;
        let tol = 1e-12;
        for i in 0..self.translations.len() {
            for j in (i + 1)..self.translations.len() {
                let (a, b) = (&self.translations[i], &self.translations[j]);
                let overlap = a
                    .iter()
                    .zip(b)
                    .all(|(x, y)| x < &(y + r - tol) && y < &(x + r - tol));
                if overlap {
                    return Err(Error::OverlapViolation(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn atom_count(&self) -> u128 {
        (self.translations.len() as u128).saturating_pow(self.depth as u32)
    }
}

/// Probability measure given by weighted atoms in ℝ^k.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMassMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    dimension_s: f64,
    resolution: Option<f64>,
}

impl PointMassMeasure {
    /// Atoms with weights summing to one (within 1e-9; rescaled exactly).
    pub fn new(dim: usize, points: &[Point], weights: Vec<f64>, dimension_s: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Self::normalized(dim, points, weights, dimension_s)
    }

    /// Atoms with arbitrary nonnegative weights, normalized to total mass one.
    pub fn normalized(dim: usize, points: &[Point], weights: Vec<f64>, dimension_s: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if points.len() != weights.len() || points.is_empty() {
            return Err(invalid("need one weight per atom and at least one atom"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if !(dimension_s > 0.0 && dimension_s <= dim as f64 + 1e-12) && dimension_s != 0.0 {
            return Err(invalid(format!("dimension {dimension_s} not in (0, {dim}]")));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim || p.iter().any(|x| !x.is_finite()) {
                return Err(invalid("atom has wrong dimension or is not finite"));
            }
            coords.extend_from_slice(p);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("total mass is zero"));
        }
        Ok(PointMassMeasure {
            dim,
            coords,
            weights: weights.iter().map(|w| w / total).collect(),
            dimension_s,
            resolution: None,
        })
    }

    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>, weights: Vec<f64>, dimension_s: f64, resolution: Option<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        PointMassMeasure {
            dim,
            coords,
            weights: weights.iter().map(|w| w / total).collect(),
            dimension_s,
            resolution,
        }
    }

    /// Same atoms with unit weights; not a probability measure.
    pub(crate) fn counting(&self) -> PointMassMeasure {
        PointMassMeasure {
            weights: vec![1.0; self.len()],
            ..self.clone()
        }
    }

    /// Single unit atom at `p`.
    pub fn dirac(p: Point) -> Self {
        let dim = p.len();
        PointMassMeasure {
            dim,
            coords: p,
            weights: vec![1.0],
            dimension_s: 0.0,
            resolution: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn dimension_s(&self) -> f64 {
        self.dimension_s
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
    #[inline]
    pub fn atom(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }
    pub fn with_dimension(mut self, s: f64) -> Self {
        self.dimension_s = s;
        self
    }

    /// Atom spacing: the generating cell size for IFS measures, otherwise the
    /// minimum distance between distinct atoms.
    pub fn resolution(&self) -> f64 {
        self.resolution.unwrap_or_else(|| min_pairwise_distance(self))
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sum of weights of atoms with |atom − center| ≤ r.
    pub fn measure_ball(&self, center: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        self.atoms()
            .filter(|(a, _)| dist2(a, center) <= r2)
            .map(|(_, w)| w)
            .sum()
    }

    /// Convex combination α·self + (1−α)·other (same ambient dimension).
    pub fn mix(&self, other: &PointMassMeasure, alpha: f64) -> Result<Self> {
        if self.dim != other.dim || !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("mix needs equal dimensions and alpha in [0,1]"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights: Vec<f64> = self.weights.iter().map(|w| alpha * w).collect();
        weights.extend(other.weights.iter().map(|w| (1.0 - alpha) * w));
        Ok(PointMassMeasure::from_raw(self.dim, coords, weights, self.dimension_s.min(other.dimension_s), None))
    }

    /// Bounding box (lo, hi) of the atoms.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (a, _) in self.atoms() {
            for i in 0..self.dim {
                lo[i] = lo[i].min(a[i]);
                hi[i] = hi[i].max(a[i]);
            }
        }
        (lo, hi)
    }

    /// Max |atom|_∞ over atoms.
    pub fn sup_abs_coordinate(&self) -> f64 {
        self.coords.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Apply x ↦ a·x + b to every atom.
    pub fn affine_image(&self, a: f64, b: &[f64]) -> Self {
        let coords = self
            .coords
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(b).map(|(x, t)| a * x + t).collect::<Vec<_>>())
            .collect();
        PointMassMeasure {
            dim: self.dim,
            coords,
            weights: self.weights.clone(),
            dimension_s: self.dimension_s,
            resolution: self.resolution.map(|r| r * a.abs()),
        }
    }
}

/// Equal-weight atoms at the centers of the depth-level cells.
pub fn build_cantor_dust(ifs: &IteratedFunctionSystem) -> Result<PointMassMeasure> {
    build_cantor_dust_capped(ifs, DEFAULT_ATOM_CAP)
}

pub fn build_cantor_dust_capped(ifs: &IteratedFunctionSystem, cap: usize) -> Result<PointMassMeasure> {
    let count = ifs.atom_count();
    if count > cap as u128 {
        return Err(Error::TooManyAtoms { atoms: count, cap });
    }
    let k = ifs.ambient_dim;
    // corners of the level-j cells; cell side ratio^j
    let mut corners: Vec<f64> = vec![0.0; k];
    let mut side = 1.0;
    for _ in 0..ifs.depth {
        let mut next = Vec::with_capacity(corners.len() * ifs.translations.len());
        for c in corners.chunks_exact(k) {
            for t in &ifs.translations {
                next.extend(c.iter().zip(t).map(|(x, ti)| x + side * ti));
            }
        }
        corners = next;
        side *= ifs.ratio;
    }
    let half = 0.5 * side;
    corners.iter_mut().for_each(|x| *x += half);
    let n = corners.len() / k;
    Ok(PointMassMeasure {
        dim: k,
        coords: corners,
        weights: vec![1.0 / n as f64; n],
        dimension_s: ifs.similarity_dimension(),
        resolution: Some(side),
    })
}

fn min_pairwise_distance(mu: &PointMassMeasure) -> f64 {
    let n = mu.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| mu.atom(a)[0].partial_cmp(&mu.atom(b)[0]).unwrap());
    let mut best2 = f64::INFINITY;
    for i in 0..n {
        let a = mu.atom(idx[i]);
        for &j in &idx[i + 1..] {
            let b = mu.atom(j);
            let dx = b[0] - a[0];
            if dx * dx >= best2 {
                break;
            }
            let d2 = dist2(a, b);
            if d2 > 0.0 && d2 < best2 {
                best2 = d2;
            }
        }
    }
    best2.sqrt()
}
