//! Direct search for approximate similar copies x + λU(V) of a simplex or
//! distance graph among the atoms of a point cloud.
//!
//! Seeds are atom pairs matched to the first edge of an elimination order,
//! which fixes λ. Every further vertex is looked up near the sphere slice
//! cut out by its already placed neighbors. The search is budgeted and so
//! incomplete in general; every reported match is re-verified.

use crate::error::{invalid, Result};
use crate::euclid_config::{intersect_spheres, Simplex};
use crate::graph_config::DistanceGraph;
use crate::linalg::{dist, rows_matrix, smallest_singular_value, sub, Point};
use crate::measure_forge::PointMassMeasure;
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::Write;

/// Anchors processed per parallel batch before the budget is rechecked.
const ANCHOR_BATCH: usize = 64;

/// Points to search, with the atom spacing used for the tolerance check.
#[derive(Clone, Debug)]
pub struct Cloud {
    points: Vec<Point>,
    resolution: f64,
}

impl Cloud {
    /// Resolution defaults to the smallest distance between distinct points.
    pub fn new(points: Vec<Point>) -> Result<Cloud> {
        if let Some(d) = points.first().map(|p| p.len()) {
            if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
                return Err(invalid("cloud points must be finite and share one positive dimension"));
            }
        }
        let resolution = min_distance(&points);
        Ok(Cloud { points, resolution })
    }

    /// Atoms of a measure; keeps the generating cell size as resolution.
    pub fn from_measure(mu: &PointMassMeasure) -> Cloud {
        Cloud {
            points: mu.atoms().map(|(a, _)| a.to_vec()).collect(),
            resolution: mu.resolution(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
}

fn min_distance(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = dist(a, b);
            if d > 0.0 && d < best {
                best = d;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanParams {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Allowed deviation of every matched distance from λ times its target.
    pub tolerance: f64,
    /// Largest number of matches returned.
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    /// Image of vertex 0.
    pub anchor: Point,
    pub lambda: f64,
    /// Images of all vertices, in vertex order.
    pub vertices: Vec<Point>,
    /// Cloud indices of the images.
    pub atoms: Vec<usize>,
    /// max over edges of | |y_i − y_j| − λ|v_i − v_j| |.
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanOutcome {
    /// Sorted by residual, then λ.
    pub matches: Vec<MatchResult>,
    /// Tolerance below twice the cloud resolution; near-misses may be lost.
    pub below_resolution: bool,
    /// True when the budget stopped the search early.
    pub truncated: bool,
}

impl ScanOutcome {
    /// CSV with header `lambda,residual,y0_1,…` (vertex coordinates flattened).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(first) = self.matches.first() {
            let mut header = vec!["lambda".to_string(), "residual".to_string()];
            for (i, v) in first.vertices.iter().enumerate() {
                header.extend((1..=v.len()).map(|a| format!("y{i}_{a}")));
            }
            w.write_record(&header)?;
        } else {
            w.write_record(["lambda", "residual"])?;
        }
        for m in &self.matches {
            let mut row = vec![m.lambda.to_string(), m.residual.to_string()];
            row.extend(m.vertices.iter().flatten().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct HashGrid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl HashGrid {
    fn new(points: &[Point], cell: f64) -> HashGrid {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        HashGrid { cell, cells }
    }

    fn key(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|x| (x / cell).floor() as i64).collect()
    }

    /// Indices in every cell meeting the ball B(center, r).
    fn ball(&self, center: &[f64], r: f64, out: &mut Vec<usize>) {
        let lo: Vec<i64> = center.iter().map(|x| ((x - r) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = center.iter().map(|x| ((x + r) / self.cell).floor() as i64).collect();
        let mut key = lo.clone();
        loop {
            if let Some(v) = self.cells.get(&key) {
                out.extend_from_slice(v);
            }
            let mut a = 0;
            loop {
                if a == key.len() {
                    return;
                }
                if key[a] < hi[a] {
                    key[a] += 1;
                    break;
                }
                key[a] = lo[a];
                a += 1;
            }
        }
    }

    fn cells_per_ball(&self, r: f64, dim: usize) -> f64 {
        (2.0 * (r / self.cell).ceil() + 2.0).powi(dim as i32)
    }
}

/// Entries of a sorted distance ring within `tol` of radius `r`.
fn shell(ring: &[(f64, usize)], r: f64, tol: f64) -> &[(f64, usize)] {
    let lo = ring.partition_point(|&(d, _)| d < r - tol);
    let hi = ring.partition_point(|&(d, _)| d <= r + tol);
    &ring[lo..hi.max(lo)]
}

/// One step of the search: place `vertex` using its earlier neighbors.
struct Step {
    vertex: usize,
    /// (order position of the neighbor, target distance at λ = 1)
    back: Vec<(usize, f64)>,
}

struct Search<'a> {
    cloud: &'a Cloud,
    grid: HashGrid,
    graph: &'a DistanceGraph,
    steps: Vec<Step>,
    tol: f64,
    root: usize,
}

impl Search<'_> {
    fn satisfies(&self, z: usize, placed: &[usize], step: &Step, lambda: f64) -> bool {
        let p = &self.cloud.points[z];
        !placed.contains(&z)
            && step
                .back
                .iter()
                .all(|&(pos, l)| (dist(p, &self.cloud.points[placed[pos]]) - lambda * l).abs() <= self.tol)
    }

    /// Atoms meeting every constraint of `step`. Steps adjacent to the anchor
    /// read a shell of the anchor's distance ring; others look near the
    /// predicted slice when that is cheaper than a scan of the whole cloud.
    fn candidates(&self, ring: &[(f64, usize)], placed: &[usize], step: &Step, lambda: f64, out: &mut Vec<usize>) {
        out.clear();
        if let Some(&(_, l)) = step.back.iter().find(|&&(pos, _)| pos == 0) {
            out.extend(shell(ring, lambda * l, self.tol).iter().map(|&(_, z)| z));
            out.retain(|&z| self.satisfies(z, placed, step, lambda));
            return;
        }
        let n = self.cloud.len() as f64;
        let dim = self.graph.ambient_dim();
        let centers: Vec<Point> = step.back.iter().map(|&(pos, _)| self.cloud.points[placed[pos]].clone()).collect();
        let radii2: Vec<f64> = step.back.iter().map(|&(_, l)| (lambda * l).powi(2)).collect();
        let mut probes: Option<Vec<Point>> = None;
        let mut radius = 0.0;
        if let Ok(slice) = intersect_spheres(&centers, &radii2) {
            // distance from an admissible atom to the slice, to first order,
            // is at most √m·tol/σ_min of the unit normals
            let mut u = vec![0.0; slice.sphere_dim() + 1];
            u[0] = 1.0;
            let x = slice.point(&u);
            let normals: Vec<Point> = centers
                .iter()
                .map(|c| {
                    let u = sub(&x, c);
                    let l = dist(&x, c);
                    u.iter().map(|v| v / l).collect()
                })
                .collect();
            let sigma = smallest_singular_value(&rows_matrix(&normals));
            if sigma > 1e-6 {
                radius = (2.0 * (centers.len() as f64).sqrt() / sigma + 1.0) * self.tol;
                let per = self.grid.cells_per_ball(radius, dim);
                match slice.sphere_dim() {
                    0 if 2.0 * per < n => probes = Some(vec![slice.point(&[1.0]), slice.point(&[-1.0])]),
                    1 => {
                        let count = ((2.0 * std::f64::consts::PI * slice.radius / self.tol).ceil() as usize).max(8);
                        if count as f64 * per < n {
                            probes = Some(
                                (0..count)
                                    .map(|i| {
                                        let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                                        slice.point(&[t.cos(), t.sin()])
                                    })
                                    .collect(),
                            );
                        }
                    }
                    _ => {}
                }
            }
        }
        match probes {
            Some(ps) => {
                for p in &ps {
                    self.grid.ball(p, radius + self.tol, out);
                }
                out.sort_unstable();
                out.dedup();
                out.retain(|&z| self.satisfies(z, placed, step, lambda));
            }
            None => out.extend((0..self.cloud.len()).filter(|&z| self.satisfies(z, placed, step, lambda))),
        }
    }

    fn extend(&self, ring: &[(f64, usize)], placed: &mut Vec<usize>, lambda: f64, cap: usize, found: &mut Vec<MatchResult>) {
        if found.len() >= cap {
            return;
        }
        let pos = placed.len();
        if pos == self.steps.len() + 1 {
            if let Some(m) = self.verify(placed, lambda) {
                found.push(m);
            }
            return;
        }
        let step = &self.steps[pos - 1];
        let mut cands = Vec::new();
        self.candidates(ring, placed, step, lambda, &mut cands);
        for z in cands {
            placed.push(z);
            self.extend(ring, placed, lambda, cap, found);
            placed.pop();
            if found.len() >= cap {
                return;
            }
        }
    }

    /// Residual over all edges with λ re-fitted in minimax sense.
    fn verify(&self, placed: &[usize], seed_lambda: f64) -> Option<MatchResult> {
        let nv = self.graph.num_vertices();
        let mut atoms = vec![0usize; nv];
        atoms[self.order_vertex(0)] = placed[0];
        for (pos, step) in self.steps.iter().enumerate() {
            atoms[step.vertex] = placed[pos + 1];
        }
        let vertices: Vec<Point> = atoms.iter().map(|&a| self.cloud.points[a].clone()).collect();
        let pairs: Vec<(f64, f64)> = self
            .graph
            .edges()
            .iter()
            .zip(self.graph.squared_lengths())
            .map(|(&(i, j), &t)| (dist(&vertices[i], &vertices[j]), t.sqrt()))
            .collect();
        let residual_at = |lam: f64| pairs.iter().fold(0.0f64, |m, &(d, l)| m.max((d - lam * l).abs()));
        let lo = pairs.iter().map(|&(d, l)| d / l).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|&(d, l)| d / l).fold(0.0, f64::max);
        // max_e |d_e − λ l_e| is convex in λ
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if residual_at(m1) <= residual_at(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let fitted = 0.5 * (a + b);
        let lambda = if residual_at(fitted) < residual_at(seed_lambda) { fitted } else { seed_lambda };
        let residual = residual_at(lambda);
        (residual <= self.tol).then(|| MatchResult {
            anchor: vertices[0].clone(),
            lambda,
            vertices,
            atoms,
            residual,
            tolerance: self.tol,
        })
    }

    fn order_vertex(&self, pos: usize) -> usize {
        if pos == 0 {
            self.root
        } else {
            self.steps[pos - 1].vertex
        }
    }
}

/// Searches `cloud` for copies of `pattern` at scales in [λ_min, λ_max].
pub fn find_similar_copy(cloud: &Cloud, pattern: &DistanceGraph, params: &ScanParams) -> Result<ScanOutcome> {
    let ScanParams {
        lambda_min,
        lambda_max,
        tolerance,
        budget,
    } = *params;
    if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
        return Err(invalid(format!("λ range [{lambda_min}, {lambda_max}] is invalid")));
    }
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(invalid("tolerance must be positive"));
    }
    let below_resolution = tolerance < 2.0 * cloud.resolution();
    if below_resolution {
        log::warn!(
            "tolerance {tolerance} is below twice the cloud resolution {}; matches may be missed",
            cloud.resolution()
        );
    }
    if cloud.is_empty() || budget == 0 {
        return Ok(ScanOutcome {
            matches: Vec::new(),
            below_resolution,
            truncated: false,
        });
    }
    if cloud.points()[0].len() != pattern.ambient_dim() {
        return Err(invalid("cloud and pattern live in different dimensions"));
    }
    let elim = pattern.elimination_order();
    let order = elim.order;
    let steps: Vec<Step> = (1..order.len())
        .map(|pos| {
            let v = order[pos];
            let back = (0..pos)
                .filter_map(|q| pattern.squared_length(order[q], v).map(|t| (q, t.sqrt())))
                .collect();
            Step { vertex: v, back }
        })
        .collect();
    let search = Search {
        cloud,
        grid: HashGrid::new(cloud.points(), tolerance),
        graph: pattern,
        steps,
        tol: tolerance,
        root: order[0],
    };
    let first = &search.steps[0];
    let l0 = first.back[0].1;
    let (rmin, rmax) = (lambda_min * l0, lambda_max * l0);
    // radii any anchor-adjacent step can ask for
    let (ring_lo, ring_hi) = search
        .steps
        .iter()
        .flat_map(|st| st.back.iter().filter(|b| b.0 == 0))
        .fold((rmin, rmax), |(lo, hi), &(_, l)| {
            (lo.min(lambda_min * l - tolerance), hi.max(lambda_max * l + tolerance))
        });
    let n = cloud.len();
    let mut matches = Vec::new();
    let mut truncated = false;
    for start in (0..n).step_by(ANCHOR_BATCH) {
        let batch: Vec<Vec<MatchResult>> = (start..(start + ANCHOR_BATCH).min(n))
            .into_par_iter()
            .map(|a| {
                let mut found = Vec::new();
                let pa = &cloud.points()[a];
                let mut ring: Vec<(f64, usize)> = (0..n)
                    .filter(|&b| b != a)
                    .map(|b| (dist(pa, &cloud.points()[b]), b))
                    .filter(|&(r, _)| r >= ring_lo && r <= ring_hi)
                    .collect();
                ring.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                let lo = ring.partition_point(|&(r, _)| r < rmin);
                let hi = ring.partition_point(|&(r, _)| r <= rmax);
                for &(r, b) in &ring[lo..hi] {
                    let mut placed = vec![a, b];
                    search.extend(&ring, &mut placed, r / l0, budget, &mut found);
                    if found.len() >= budget {
                        break;
                    }
                }
                found
            })
            .collect();
        matches.extend(batch.into_iter().flatten());
        if matches.len() >= budget {
            truncated = start + ANCHOR_BATCH < n;
            break;
        }
    }
    matches.sort_by(|x, y| x.residual.total_cmp(&y.residual).then(x.lambda.total_cmp(&y.lambda)));
    if matches.len() > budget {
        truncated = true;
        matches.truncate(budget);
    }
    Ok(ScanOutcome {
        matches,
        below_resolution,
        truncated,
    })
}

/// Simplex version: all pairwise distances are constrained.
pub fn find_similar_simplex(cloud: &Cloud, v: &Simplex, params: &ScanParams) -> Result<ScanOutcome> {
    find_similar_copy(cloud, &DistanceGraph::complete(v), params)
}
