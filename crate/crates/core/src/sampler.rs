//! Sequential sampling of configuration measures.
//!
//! Vertices are placed in an elimination order. Each new vertex is drawn
//! uniformly from the sphere slice fixed by its already placed neighbors, so
//! a draw from the normalized slice measures carries the importance weight
//! Π c(T_j) φ_j(x_j) and the slice-area factor Π |S^{p_j}| ρ_j^{p_j}. Their
//! product integrates against ω_F.

use crate::error::{invalid, Error, Result};
use crate::euclid_config::{intersect_spheres, Simplex, SphereSlice};
use crate::graph_config::{DistanceGraph, EliminationOrder};
use crate::linalg::{apply, dist, dot, Point};
use crate::radial::{unit_bump, unit_sphere_area};
use crate::rng::{chunked, Streams};
use crate::stats::{z_score, Moments};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative squared-radius threshold below which a slice counts as empty.
const EMPTY_TOL: f64 = 1e-10;

/// One placed vertex: its slice and position.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub vertex: usize,
    pub slice: SphereSlice,
}

/// A sampled configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSample {
    /// x₁, …, x_n flattened by vertex index; x₀ = 0 is implicit.
    pub coords: Vec<f64>,
    /// Π c(T_j) φ_j(x_j); identically 1 for simplex chains.
    pub weight: f64,
    /// Π |S^{p_j}| ρ_j^{p_j}, the mass of the unnormalized slice measures.
    pub normalization: f64,
    pub steps: Vec<StepRecord>,
}

impl ChainSample {
    pub fn point(&self, vertex: usize) -> Point {
        let d = self.coords.len() / self.steps.len().max(1);
        if vertex == 0 {
            vec![0.0; d]
        } else {
            self.coords[(vertex - 1) * d..vertex * d].to_vec()
        }
    }
}

/// How a chain is weighted.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Weighting {
    /// Normalized slice measures, weight ≡ 1.
    Normalized,
    /// Gram weight times a bump of the given width around each vertex.
    Gram { eta: f64 },
}

/// Samples configurations of a distance graph along a fixed order.
#[derive(Clone, Debug)]
pub struct ChainSampler {
    graph: DistanceGraph,
    order: Vec<usize>,
    /// Earlier neighbors and squared edge lengths per position (from 1).
    back: Vec<Vec<(usize, f64)>>,
    weighting: Weighting,
}

/// Work buffers for one draw.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    basis: Vec<Vec<f64>>,
    coef: Vec<f64>,
    gauss: Vec<f64>,
}

impl ChainSampler {
    /// The chained spherical measure of a simplex: v₀ fixed, each later
    /// vertex uniform on the slice determined by all earlier ones.
    pub fn simplex(v: &Simplex) -> ChainSampler {
        let graph = DistanceGraph::complete(&v.normalized());
        let order: Vec<usize> = (0..graph.num_vertices()).collect();
        ChainSampler::build(graph, order, Weighting::Normalized).expect("simplex order is valid")
    }

    /// Gram-weighted sampler with bump cutoffs of width `eta` (∞ for none).
    pub fn graph(graph: &DistanceGraph, order: &[usize], eta: f64) -> Result<ChainSampler> {
        if !(eta > 0.0) {
            return Err(invalid("cutoff width must be positive"));
        }
        ChainSampler::build(graph.clone(), order.to_vec(), Weighting::Gram { eta })
    }

    pub fn graph_with_elimination(graph: &DistanceGraph, order: &EliminationOrder, eta: f64) -> Result<ChainSampler> {
        ChainSampler::graph(graph, &order.order, eta)
    }

    fn build(graph: DistanceGraph, order: Vec<usize>, weighting: Weighting) -> Result<ChainSampler> {
        let n = graph.num_vertices();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(invalid("order must be a permutation of the vertices"));
            }
            seen[v] = true;
        }
        if order.len() != n || order[0] != 0 {
            return Err(invalid("order must list every vertex and start at vertex 0"));
        }
        let d = graph.ambient_dim();
        let mut back = Vec::with_capacity(n - 1);
        for pos in 1..n {
            let nb = graph.earlier_neighbors(&order, pos);
            if nb.is_empty() || nb.len() > d {
                return Err(invalid(format!(
                    "vertex {} has {} earlier neighbors; need between 1 and {d}",
                    order[pos],
                    nb.len()
                )));
            }
            back.push(
                nb.into_iter()
                    .map(|u| (u, graph.squared_length(u, order[pos]).expect("adjacent")))
                    .collect(),
            );
        }
        Ok(ChainSampler {
            graph,
            order,
            back,
            weighting,
        })
    }

    pub fn graph_ref(&self) -> &DistanceGraph {
        &self.graph
    }
    pub fn order(&self) -> &[usize] {
        &self.order
    }
    pub fn ambient_dim(&self) -> usize {
        self.graph.ambient_dim()
    }
    /// Length of the flat coordinate vector.
    pub fn coords_len(&self) -> usize {
        self.ambient_dim() * (self.graph.num_vertices() - 1)
    }

    /// Draws positions into `coords` for the vertices at order positions
    /// `from..to`, keeping the others. Returns (weight, normalization) of the
    /// drawn steps. Once the cutoff product is zero the draw stops early with
    /// weight 0 and the undrawn vertices keep stale values.
    pub fn draw_range<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        coords: &mut [f64],
        from: usize,
        to: usize,
        scratch: &mut Scratch,
        mut record: Option<&mut Vec<StepRecord>>,
    ) -> Result<(f64, f64)> {
        let d = self.ambient_dim();
        let mut weight = 1.0;
        let mut normalization = 1.0;
        let to = to.min(self.order.len());
        for pos in from.max(1)..to {
            let v = self.order[pos];
            let step = &self.back[pos - 1];
            let slice = match self.slice(coords, step, scratch) {
                Ok(s) => s,
                Err(e) => {
                    if weight == 0.0 {
                        return Ok((0.0, 0.0));
                    }
                    return Err(e);
                }
            };
            let (center, radius, gram_root) = slice;
            // uniform direction: Gaussian with the normal components removed
            scratch.gauss.clear();
            scratch.gauss.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
            for q in &scratch.basis {
                let c = dot(&scratch.gauss, q);
                scratch.gauss.iter_mut().zip(q).for_each(|(g, qa)| *g -= c * qa);
            }
            let gn = dot(&scratch.gauss, &scratch.gauss).sqrt();
            let target = &mut coords[(v - 1) * d..v * d];
            for a in 0..d {
                target[a] = center[a] + radius * scratch.gauss[a] / gn;
            }
            let m = step.len();
            let p = d - m;
            normalization *= unit_sphere_area(p) * radius.powi(p as i32);
            if let Weighting::Gram { eta } = self.weighting {
                // det T = ρ² · Gram(x_i − x_1) and the Gram determinant of
                // the edges is the squared product of the pivots
                let c_t = 0.5f64.powi(m as i32) / (radius * gram_root);
                let home = &self.graph.vertices()[v];
                weight *= c_t * unit_bump(dist(target, home), eta);
            }
            if let Some(rec) = record.as_deref_mut() {
                let centers: Vec<Point> = step.iter().map(|&(u, _)| vertex_pos(coords, u, d)).collect();
                let radii: Vec<f64> = step.iter().map(|&(_, t)| t).collect();
                rec.push(StepRecord {
                    vertex: v,
                    slice: intersect_spheres(&centers, &radii)?,
                });
            }
            if weight == 0.0 && pos + 1 < to {
                return Ok((0.0, 0.0));
            }
        }
        Ok((weight, normalization))
    }

    /// A full draw into `coords`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, coords: &mut [f64], scratch: &mut Scratch) -> Result<(f64, f64)> {
        self.draw_range(rng, coords, 1, self.order.len(), scratch, None)
    }

    /// Center, radius and √Gram(edges) of the slice for one step; the
    /// orthonormal normal basis is left in `scratch.basis`.
    fn slice(&self, coords: &[f64], step: &[(usize, f64)], scratch: &mut Scratch) -> Result<(Point, f64, f64)> {
        let d = self.ambient_dim();
        let (u0, t0) = step[0];
        let x1 = vertex_pos(coords, u0, d);
        scratch.basis.clear();
        scratch.coef.clear();
        let mut gram_root = 1.0;
        let mut offset = vec![0.0; d];
        for &(u, t) in &step[1..] {
            let xu = vertex_pos(coords, u, d);
            let e: Vec<f64> = xu.iter().zip(&x1).map(|(a, b)| a - b).collect();
            let e_norm = dot(&e, &e).sqrt();
            // e = Σ_k r_k q_k + pivot · q_new
            let r: Vec<f64> = scratch.basis.iter().map(|q| dot(&e, q)).collect();
            let mut w = e.clone();
            for _ in 0..2 {
                for q in &scratch.basis {
                    let c = dot(&w, q);
                    w.iter_mut().zip(q).for_each(|(x, qa)| *x -= c * qa);
                }
            }
            let pivot = dot(&w, &w).sqrt();
            if pivot <= 1e-10 * e_norm.max(f64::MIN_POSITIVE) {
                return Err(Error::DegenerateCenters);
            }
            // e·(x' − x₁) = (t₀ − t + |e|²)/2 solved for the new coefficient
            let b = 0.5 * (t0 - t + dot(&e, &e));
            let known: f64 = r.iter().zip(&scratch.coef).map(|(ri, ai)| ri * ai).sum();
            let a_new = (b - known) / pivot;
            let q: Vec<f64> = w.iter().map(|x| x / pivot).collect();
            for (o, qa) in offset.iter_mut().zip(&q) {
                *o += a_new * qa;
            }
            scratch.coef.push(a_new);
            scratch.basis.push(q);
            gram_root *= pivot;
        }
        let r2 = t0 - dot(&offset, &offset);
        if r2 <= EMPTY_TOL * t0.max(1.0) {
            return Err(if r2 < -EMPTY_TOL * t0.max(1.0) {
                Error::EmptyIntersection(r2)
            } else {
                Error::TangentIntersection(r2)
            });
        }
        let center = x1.iter().zip(&offset).map(|(a, b)| a + b).collect();
        Ok((center, r2.sqrt(), gram_root))
    }

    /// Sample contribution to an integral: the weight alone for normalized
    /// chains, weight times slice mass for ω_F.
    #[inline]
    pub fn mass(&self, weight: f64, normalization: f64) -> f64 {
        match self.weighting {
            Weighting::Normalized => weight,
            Weighting::Gram { .. } => weight * normalization,
        }
    }

    /// One full sample with per-step slice records.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainSample> {
        let mut coords = self.graph.configuration();
        let mut steps = Vec::with_capacity(self.order.len() - 1);
        let (weight, normalization) = self.draw_range(rng, &mut coords, 1, self.order.len(), &mut Scratch::default(), Some(&mut steps))?;
        Ok(ChainSample {
            coords,
            weight,
            normalization,
            steps,
        })
    }
}

fn vertex_pos(coords: &[f64], u: usize, d: usize) -> Point {
    if u == 0 {
        vec![0.0; d]
    } else {
        coords[(u - 1) * d..u * d].to_vec()
    }
}

pub fn sample_simplex_chain<R: Rng + ?Sized>(v: &Simplex, rng: &mut R) -> Result<ChainSample> {
    ChainSampler::simplex(v).sample(rng)
}

pub fn sample_graph_config<R: Rng + ?Sized>(
    graph: &DistanceGraph,
    order: &EliminationOrder,
    eta: f64,
    rng: &mut R,
) -> Result<ChainSample> {
    ChainSampler::graph_with_elimination(graph, order, eta)?.sample(rng)
}

/// Monte Carlo estimate of ∫ g φ dω_F: mean of g · weight · normalization.
pub fn weighted_mean<G>(sampler: &ChainSampler, g: G, n: usize, streams: &Streams) -> Result<Moments>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let parts = chunked(streams, n, |rng, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut coords = sampler.graph.configuration();
        let mut scratch = Scratch::default();
        for _ in 0..count {
            let (w, a) = sampler.draw(rng, &mut coords, &mut scratch)?;
            m.push(if w == 0.0 { 0.0 } else { g(&coords) * sampler.mass(w, a) });
        }
        Ok(m)
    });
    let parts: Vec<Moments> = parts.into_iter().collect::<Result<_>>()?;
    Ok(Moments::merge_all(&parts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FubiniReport {
    pub joint: f64,
    pub joint_se: f64,
    pub nested: f64,
    pub nested_se: f64,
    pub z: f64,
}

/// Vertex order placing the z part (containing 0) before `y_vertices`, with
/// both constraint blocks of full rank at the defining configuration.
pub fn admissible_split(graph: &DistanceGraph, y_vertices: &[usize]) -> Result<Vec<usize>> {
    let n = graph.num_vertices();
    let mut in_y = vec![false; n];
    for &v in y_vertices {
        if v == 0 || v >= n || in_y[v] {
            return Err(Error::InadmissiblePartition(
                "y must list distinct vertices other than 0".into(),
            ));
        }
        in_y[v] = true;
    }
    if y_vertices.is_empty() {
        return Err(Error::InadmissiblePartition("y is empty".into()));
    }
    let preferred = graph.elimination_order().order;
    let mut order = vec![0usize];
    for want_y in [false, true] {
        let mut pending: Vec<usize> = preferred.iter().copied().filter(|&v| v != 0 && in_y[v] == want_y).collect();
        while !pending.is_empty() {
            let pick = pending
                .iter()
                .position(|&v| graph.neighbors(v).iter().any(|u| order.contains(u)))
                .ok_or_else(|| Error::InadmissiblePartition("the z part is not connected to vertex 0".into()))?;
            order.push(pending.remove(pick));
        }
    }
    // rank of ∂F_z/∂z and ∂F_y/∂y
    let x = graph.configuration();
    let grad = graph.variety().gradient(&x);
    let d = graph.ambient_dim();
    let var_cols = |ys: bool| -> Vec<usize> {
        (1..n).filter(|&v| in_y[v] == ys).flat_map(|v| ((v - 1) * d)..(v * d)).collect()
    };
    let touches_y: Vec<bool> = graph.edges().iter().map(|&(i, j)| in_y[i] || in_y[j]).collect();
    for ys in [false, true] {
        let rows: Vec<usize> = (0..touches_y.len()).filter(|&k| touches_y[k] == ys).collect();
        if rows.is_empty() {
            continue;
        }
        let cols = var_cols(ys);
        let block = grad.select_rows(&rows).select_columns(&cols);
        let full = block.nrows() <= block.ncols()
            && crate::linalg::singular_values(&block).last().is_some_and(|&s| s > 1e-8);
        if !full {
            return Err(Error::InadmissiblePartition(format!(
                "the {} constraint gradients are linearly dependent",
                if ys { "y" } else { "z" }
            )));
        }
    }
    Ok(order)
}

/// Joint versus nested estimates of ∫ g φ dω_F for the split of the vertices
/// into z (the rest, containing 0) and y (`y_vertices`).
///
/// The joint side draws whole configurations. The nested side draws the z
/// part once per outer sample and averages `inner` independent completions
/// of the y part, estimating ∫∫ g dω_{F_y}(y | z) dω_{F_z}(z).
pub fn fubini_check<G>(
    graph: &DistanceGraph,
    y_vertices: &[usize],
    eta: f64,
    g: G,
    n: usize,
    inner: usize,
    streams: &Streams,
) -> Result<FubiniReport>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let order = admissible_split(graph, y_vertices)?;
    let sampler = ChainSampler::graph(graph, &order, eta)?;
    let split = order.len() - y_vertices.len();
    let joint = weighted_mean(&sampler, &g, n, &streams.derive(1))?;

    let inner = inner.max(1);
    let outer = n.div_ceil(inner);
    let parts = chunked(&streams.derive(2), outer, |rng, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut coords = graph.configuration();
        let mut scratch = Scratch::default();
        for _ in 0..count {
            let (wz, az) = sampler.draw_range(rng, &mut coords, 1, split, &mut scratch, None)?;
            if wz == 0.0 {
                m.push(0.0);
                continue;
            }
            let mut acc = 0.0;
            for _ in 0..inner {
                let (wy, ay) = sampler.draw_range(rng, &mut coords, split, order.len(), &mut scratch, None)?;
                if wy != 0.0 {
                    acc += g(&coords) * sampler.mass(wy, ay);
                }
            }
            m.push(sampler.mass(wz, az) * acc / inner as f64);
        }
        Ok(m)
    });
    let parts: Vec<Moments> = parts.into_iter().collect::<Result<_>>()?;
    let nested = Moments::merge_all(&parts);
    Ok(FubiniReport {
        joint: joint.mean,
        joint_se: joint.std_error(),
        nested: nested.mean,
        nested_se: nested.std_error(),
        z: z_score(joint.mean, joint.std_error(), nested.mean, nested.std_error()),
    })
}

/// A statistic of a flat configuration.
pub type Statistic<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Clone, Debug, PartialEq)]
pub struct RotationReport {
    /// (mean of g(x), SE, mean of g(Ux), SE) per statistic.
    pub means: Vec<(f64, f64, f64, f64)>,
    pub z_scores: Vec<f64>,
}

impl RotationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()))
    }
}

/// Means of g(x) and g(Ux) over weighted samples on independent streams.
pub fn rotation_invariance_check(
    sampler: &ChainSampler,
    u: &DMatrix<f64>,
    statistics: &[Statistic],
    n: usize,
    streams: &Streams,
) -> Result<RotationReport> {
    let d = sampler.ambient_dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(invalid("rotation has the wrong size"));
    }
    let err = (u.transpose() * u - DMatrix::<f64>::identity(d, d)).amax();
    if err > 1e-10 || u.determinant() < 0.0 {
        return Err(invalid("U must be orthogonal with determinant +1"));
    }
    let k = statistics.len();
    let run = |stream: Streams, rotate: bool| -> Result<Vec<Moments>> {
        let parts = chunked(&stream, n, |rng, count| -> Result<Vec<Moments>> {
            let mut ms = vec![Moments::default(); k];
            let mut coords = sampler.graph.configuration();
            let mut moved = coords.clone();
            let mut scratch = Scratch::default();
            for _ in 0..count {
                let (w, a) = sampler.draw(rng, &mut coords, &mut scratch)?;
                let x: &[f64] = if rotate {
                    for (dst, src) in moved.chunks_mut(d).zip(coords.chunks(d)) {
                        dst.copy_from_slice(&apply(u, src));
                    }
                    &moved
                } else {
                    &coords
                };
                for (m, g) in ms.iter_mut().zip(statistics) {
                    m.push(if w == 0.0 { 0.0 } else { g(x) * sampler.mass(w, a) });
                }
            }
            Ok(ms)
        });
        let parts: Vec<Vec<Moments>> = parts.into_iter().collect::<Result<_>>()?;
        Ok((0..k).map(|i| Moments::merge_all(parts.iter().map(|p| &p[i]))).collect())
    };
    let plain = run(streams.derive(1), false)?;
    let turned = run(streams.derive(2), true)?;
    let means: Vec<(f64, f64, f64, f64)> = plain
        .iter()
        .zip(&turned)
        .map(|(a, b)| (a.mean, a.std_error(), b.mean, b.std_error()))
        .collect();
    let z_scores = means.iter().map(|&(a, sa, b, sb)| z_score(a, sa, b, sb)).collect();
    Ok(RotationReport { means, z_scores })
}
