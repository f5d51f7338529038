//! Distance graphs embedded in ℝ^d, their metric invariants, configuration
//! spaces and the gradient-rank nonsingularity test.
//!
//! Vertex 0 is pinned at the origin; a configuration is the flat vector
//! (x₁, …, x_n) ∈ ℝ^{dn}.

use crate::error::{invalid, Error, Result};
use crate::euclid_config::{Constraint, Endpoint, PolynomialVariety, Simplex};
use crate::linalg::{dist, dist2, distance_to_affine_hull, rows_matrix, singular_values, sub, Point};
use std::collections::BTreeSet;
use std::io::{Read, Write};

/// Singular-value cutoff for general position, relative to the diameter.
const GENERAL_POSITION_TOL: f64 = 1e-8;
/// Largest residual accepted as "on the variety".
const ON_VARIETY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceGraph {
    vertices: Vec<Point>,
    /// Sorted pairs (i, j) with i < j.
    edges: Vec<(usize, usize)>,
    squared_lengths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphInvariants {
    /// max_j |V_j|, where V_j are the neighbors of v_j with smaller index.
    pub degree: usize,
    pub proper: bool,
    pub r: f64,
    pub d: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder {
    /// Starts at vertex 0; every later vertex has an earlier neighbor.
    pub order: Vec<usize>,
    /// Largest number of earlier neighbors.
    pub back_degree: usize,
}

impl DistanceGraph {
    /// Translates so that v₀ = 0. Rejects repeated vertices, zero-length or
    /// duplicate edges and disconnected graphs.
    pub fn new(vertices: Vec<Point>, edges: Vec<(usize, usize)>) -> Result<DistanceGraph> {
        let n = vertices.len();
        if n < 2 {
            return Err(invalid("a distance graph needs at least two vertices"));
        }
        let d = vertices[0].len();
        if d == 0 || vertices.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(invalid("vertices must be finite points of one dimension"));
        }
        let v0 = vertices[0].clone();
        let vertices: Vec<Point> = vertices.iter().map(|v| sub(v, &v0)).collect();
        let diam = crate::euclid_config::diameter(&vertices);
        for i in 0..n {
            for j in (i + 1)..n {
                if dist(&vertices[i], &vertices[j]) <= 1e-12 * diam.max(f64::MIN_POSITIVE) {
                    return Err(Error::DegenerateGraph(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        let mut set = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) refers to a missing vertex")));
            }
            if a == b {
                return Err(Error::DegenerateGraph(format!("loop at vertex {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::DegenerateGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let squared_lengths: Vec<f64> = edges.iter().map(|&(i, j)| dist2(&vertices[i], &vertices[j])).collect();
        let g = DistanceGraph {
            vertices,
            edges,
            squared_lengths,
        };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    /// Complete graph on the simplex vertices.
    pub fn complete(simplex: &Simplex) -> DistanceGraph {
        let n = simplex.len();
        let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        DistanceGraph::new(simplex.vertices().to_vec(), edges).expect("simplex vertices are distinct")
    }

    /// Path v₀ – v₁ – ⋯ – v_n.
    pub fn path(vertices: Vec<Point>) -> Result<DistanceGraph> {
        let edges = (1..vertices.len()).map(|j| (j - 1, j)).collect();
        DistanceGraph::new(vertices, edges)
    }

    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn squared_lengths(&self) -> &[f64] {
        &self.squared_lengths
    }

    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == j { Some(b) } else if b == j { Some(a) } else { None })
            .collect()
    }

    /// Indices of V_j: neighbors of v_j that come earlier in `order`.
    pub fn earlier_neighbors(&self, order: &[usize], position: usize) -> Vec<usize> {
        let v = order[position];
        let before: BTreeSet<usize> = order[..position].iter().copied().collect();
        self.neighbors(v).into_iter().filter(|u| before.contains(u)).collect()
    }

    /// Squared edge length between two adjacent vertices.
    pub fn squared_length(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.edges.iter().position(|&e| e == key).map(|k| self.squared_lengths[k])
    }

    fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Degree, properness, r(Γ), d(Γ) and δ(Γ) for the natural vertex order.
    pub fn invariants(&self) -> GraphInvariants {
        let order: Vec<usize> = (0..self.num_vertices()).collect();
        let scale = crate::euclid_config::diameter(&self.vertices);
        let mut degree = 0;
        let mut proper = true;
        let mut r = f64::INFINITY;
        for pos in 1..order.len() {
            let back = self.earlier_neighbors(&order, pos);
            degree = degree.max(back.len());
            let v = &self.vertices[order[pos]];
            let hull: Vec<Point> = back.iter().map(|&i| self.vertices[i].clone()).collect();
            if !hull.is_empty() {
                r = r.min(distance_to_affine_hull(v, &hull));
                let mut pts = hull;
                pts.push(v.clone());
                proper &= general_position(&pts, scale);
            }
        }
        let d = self.squared_lengths.iter().fold(0.0f64, |m, &t| m.max(t.sqrt()));
        GraphInvariants {
            degree,
            proper,
            r,
            d,
            delta: r / d,
        }
    }

    /// f_ij(x) = |x_i − x_j|² − t_ij for every edge, with x₀ = 0.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok(self.variety().residual(x))
    }

    /// The defining configuration (v₁, …, v_n) flattened.
    pub fn configuration(&self) -> Vec<f64> {
        self.vertices[1..].iter().flatten().copied().collect()
    }

    /// Position of vertex i in a flat configuration.
    pub fn vertex_of<'a>(&self, x: &'a [f64], i: usize, origin: &'a [f64]) -> &'a [f64] {
        let d = self.ambient_dim();
        if i == 0 {
            origin
        } else {
            &x[(i - 1) * d..i * d]
        }
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        let want = self.ambient_dim() * (self.num_vertices() - 1);
        if x.len() != want {
            return Err(invalid(format!("configuration needs {want} coordinates, got {}", x.len())));
        }
        Ok(())
    }

    /// The configuration space S_{Γ₀} as a variety in ℝ^{dn}.
    pub fn variety(&self) -> PolynomialVariety {
        let d = self.ambient_dim();
        let end = |i: usize| if i == 0 { Endpoint::Fixed(vec![0.0; d]) } else { Endpoint::Var(i - 1) };
        let constraints = self
            .edges
            .iter()
            .zip(&self.squared_lengths)
            .map(|(&(i, j), &t)| Constraint {
                a: end(i),
                b: end(j),
                squared_length: t,
            })
            .collect();
        PolynomialVariety::new(d, self.num_vertices() - 1, constraints).expect("validated graph")
    }

    /// Whether the |E| × dn gradient matrix has full row rank at x, with its
    /// smallest singular value.
    pub fn is_nonsingular(&self, x: &[f64]) -> Result<(bool, f64)> {
        let res = self.residual(x)?;
        let off = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if off > ON_VARIETY_TOL {
            return Err(Error::OffVariety(off));
        }
        let g = self.variety().gradient(x);
        if g.nrows() > g.ncols() {
            return Ok((false, 0.0));
        }
        let s = singular_values(&g).last().copied().unwrap_or(0.0);
        let scale = self.squared_lengths.iter().fold(0.0f64, |m, &t| m.max(t.sqrt()));
        Ok((s > GENERAL_POSITION_TOL * scale, s))
    }

    /// Vertex order starting at 0 in which each vertex has few earlier
    /// neighbors: peel a minimum-degree vertex whose removal keeps the rest
    /// connected (highest index on ties), then reverse.
    pub fn elimination_order(&self) -> EliminationOrder {
        let n = self.num_vertices();
        let mut alive = vec![true; n];
        let mut peeled = Vec::with_capacity(n);
        for _ in 1..n {
            let mut best: Option<(usize, usize)> = None;
            for v in 1..n {
                if !alive[v] {
                    continue;
                }
                let deg = self.neighbors(v).iter().filter(|&&u| alive[u]).count();
                if best.is_some_and(|(_, b)| deg > b) {
                    continue;
                }
                alive[v] = false;
                let keeps = self.connected_among(&alive);
                alive[v] = true;
                if keeps {
                    best = Some((v, deg));
                }
            }
            let (v, _) = best.expect("a connected graph has a non-cut vertex besides 0");
            alive[v] = false;
            peeled.push(v);
        }
        peeled.push(0);
        peeled.reverse();
        let back_degree = (1..n).map(|p| self.earlier_neighbors(&peeled, p).len()).max().unwrap_or(0);
        EliminationOrder {
            order: peeled,
            back_degree,
        }
    }

    fn connected_among(&self, alive: &[bool]) -> bool {
        let mut seen = vec![false; alive.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in self.neighbors(v) {
                if alive[u] && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        alive.iter().zip(&seen).all(|(&a, &s)| !a || s)
    }

    /// Rows `vertex,x1..xd` followed by rows `edge,i,j`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        for v in &self.vertices {
            let mut row = vec!["vertex".to_string()];
            row.extend(v.iter().map(|x| format!("{x:.17e}")));
            w.write_record(&row)?;
        }
        for &(i, j) in &self.edges {
            w.write_record([String::from("edge"), i.to_string(), j.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<DistanceGraph> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::Parse(format!("graph row {}: {m}", line + 1));
            match rec.get(0) {
                Some("vertex") => {
                    if !edges.is_empty() {
                        return Err(bad("vertex rows must precede edge rows"));
                    }
                    let p = rec
                        .iter()
                        .skip(1)
                        .map(|s| s.parse::<f64>().map_err(|_| bad("bad coordinate")))
                        .collect::<Result<Vec<f64>>>()?;
                    vertices.push(p);
                }
                Some("edge") => {
                    if rec.len() != 3 {
                        return Err(bad("edge rows are edge,i,j"));
                    }
                    let i = rec[1].parse::<usize>().map_err(|_| bad("bad vertex index"))?;
                    let j = rec[2].parse::<usize>().map_err(|_| bad("bad vertex index"))?;
                    edges.push((i, j));
                }
                _ => return Err(bad("row must start with 'vertex' or 'edge'")),
            }
        }
        DistanceGraph::new(vertices, edges)
    }
}

/// Points affinely independent with singular-value margin relative to `scale`.
pub(crate) fn general_position(points: &[Point], scale: f64) -> bool {
    if points.len() < 2 {
        return true;
    }
    if points.len() > points[0].len() + 1 {
        return false;
    }
    let edges: Vec<Point> = points[1..].iter().map(|p| sub(p, &points[0])).collect();
    let sv = singular_values(&rows_matrix(&edges));
    sv.len() == edges.len() && sv.last().is_some_and(|&s| s > GENERAL_POSITION_TOL * scale)
}

/// Free-function form of [`DistanceGraph::invariants`].
pub fn graph_invariants(g: &DistanceGraph) -> GraphInvariants {
    g.invariants()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{apply, random_rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path3() -> DistanceGraph {
        DistanceGraph::path(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap()
    }

    #[test]
    fn path_invariants() {
        let inv = path3().invariants();
        assert_eq!(inv.degree, 1);
        assert!(inv.proper);
        assert_eq!((inv.r, inv.d, inv.delta), (1.0, 1.0, 1.0));
    }

    #[test]
    fn triangle_is_the_simplex() {
        let s = Simplex::equilateral_triangle(2).unwrap();
        let inv = DistanceGraph::complete(&s).invariants();
        assert_eq!(inv.degree, 2);
        assert!(inv.proper);
        assert!((inv.delta - 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((inv.r - s.invariants().r).abs() < 1e-12);

        let reg = Simplex::regular(4, 3).unwrap();
        assert!((DistanceGraph::complete(&reg).invariants().r - reg.invariants().r).abs() < 1e-12);

        // back-neighbour heights can exceed the minimal simplex height
        let obtuse = Simplex::new(vec![vec![0.0, 0.0], vec![0.3, 0.0], vec![2.0, 0.5]]).unwrap();
        assert!(DistanceGraph::complete(&obtuse).invariants().r > obtuse.invariants().r + 0.1);
    }

    #[test]
    fn coincident_and_collinear_inputs() {
        let e = DistanceGraph::path(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(e, Err(Error::DegenerateGraph(_))));
        let g = DistanceGraph::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![(0, 1), (1, 2), (0, 2)],
        )
        .unwrap();
        assert!(!g.invariants().proper);
        let e = DistanceGraph::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![(0, 1)]);
        assert!(matches!(e, Err(Error::DisconnectedGraph)));
    }

    #[test]
    fn residual_examples() {
        let g = path3();
        assert!(g.residual(&g.configuration()).unwrap().iter().all(|r| *r == 0.0));
        let doubled: Vec<f64> = g.configuration().iter().map(|x| 2.0 * x).collect();
        let r = g.residual(&doubled).unwrap();
        for (ri, t) in r.iter().zip(g.squared_lengths()) {
            assert!((ri - 3.0 * t).abs() < 1e-14);
        }
        let u = random_rotation(2, &mut ChaCha8Rng::seed_from_u64(1));
        let rotated: Vec<f64> = g.vertices()[1..].iter().flat_map(|v| apply(&u, v)).collect();
        assert!(g.residual(&rotated).unwrap().iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn nonsingularity() {
        let s = Simplex::regular(4, 3).unwrap();
        let g = DistanceGraph::complete(&s);
        assert!(g.is_nonsingular(&g.configuration()).unwrap().0);

        let line = DistanceGraph::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![(0, 1), (1, 2), (0, 2)],
        )
        .unwrap();
        assert!(!line.is_nonsingular(&line.configuration()).unwrap().0);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let pts: Vec<Point> = (0..4).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
            let p = DistanceGraph::path(pts).unwrap();
            assert!(p.is_nonsingular(&p.configuration()).unwrap().0);
        }
        let mut off = g.configuration();
        off[0] += 0.1;
        assert!(matches!(g.is_nonsingular(&off), Err(Error::OffVariety(_))));
    }

    #[test]
    fn elimination_orders() {
        let p = DistanceGraph::path(vec![vec![0.0], vec![1.0], vec![3.0], vec![6.0]]).unwrap();
        let o = p.elimination_order();
        assert_eq!(o.order, vec![0, 1, 2, 3]);
        assert_eq!(o.back_degree, 1);

        let s = DistanceGraph::complete(&Simplex::regular(5, 4).unwrap());
        assert_eq!(s.elimination_order().back_degree, 4);

        let star = DistanceGraph::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]],
            vec![(0, 1), (0, 2), (0, 3)],
        )
        .unwrap();
        let o = star.elimination_order();
        assert_eq!(o.order[0], 0);
        assert_eq!(o.back_degree, 1);
    }

    #[test]
    fn every_later_vertex_has_an_earlier_neighbor() {
        // two triangles joined through a degree-2 bridge vertex 3
        let pts: Vec<Point> = (0..7).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let g = DistanceGraph::new(pts, vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)]).unwrap();
        let o = g.elimination_order();
        for p in 1..7 {
            assert!(!g.earlier_neighbors(&o.order, p).is_empty());
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = DistanceGraph::complete(&Simplex::regular(3, 3).unwrap());
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("vertex,"));
        assert_eq!(DistanceGraph::read_csv(buf.as_slice()).unwrap(), g);
    }
}
