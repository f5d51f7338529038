//! Simplices, sphere intersections, Gram weights and chart measures on the
//! varieties cut out by squared-distance constraints.

mod chart;
mod sphere;

pub use chart::{
    admissible_coordinates, chart_integrate, ChartDomain, ChartIntegral, ChartOptions, Constraint, Endpoint, PolynomialVariety,
};
pub use sphere::{gram_weight, intersect_spheres, GramData, SphereSlice};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dist, distance_to_affine_hull, gram, orthonormalize, sub, Point};

/// Vertices v₀..v_{n−1} in ℝ^d, affinely independent.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Vec<Point>,
}

/// Metric invariants of a simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexInvariants {
    /// Distance of each vertex to the affine hull of the others.
    pub heights: Vec<f64>,
    pub r: f64,
    pub d: f64,
    pub delta: f64,
}

impl Simplex {
    pub fn new(vertices: Vec<Point>) -> Result<Simplex> {
        let n = vertices.len();
        if n < 2 {
            return Err(invalid("a simplex needs at least two vertices"));
        }
        let d = vertices[0].len();
        if d == 0 || vertices.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return Err(invalid("vertices must be finite points of one dimension"));
        }
        if n > d + 1 {
            return Err(Error::DegenerateSimplex(0.0));
        }
        let edges: Vec<Point> = vertices[1..].iter().map(|v| sub(v, &vertices[0])).collect();
        let diam = diameter(&vertices);
        if diam == 0.0 {
            return Err(Error::DegenerateSimplex(0.0));
        }
        let scaled: Vec<Point> = edges.iter().map(|e| e.iter().map(|x| x / diam).collect()).collect();
        let det = gram(&scaled).determinant();
        if !(det > 1e-12) {
            return Err(Error::DegenerateSimplex(det));
        }
        Ok(Simplex { vertices })
    }

    /// Regular simplex with `n` vertices and unit side, embedded in ℝ^d, v₀ = 0.
    pub fn regular(n: usize, d: usize) -> Result<Simplex> {
        if n < 2 || d + 1 < n {
            return Err(invalid(format!("a regular {n}-vertex simplex does not fit in dimension {d}")));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let lifted: Vec<Point> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect())
            .collect();
        let edges: Vec<Point> = lifted[1..].iter().map(|v| sub(v, &lifted[0])).collect();
        let (basis, _) = orthonormalize(&edges, 1e-12);
        let vertices = lifted
            .iter()
            .map(|v| {
                let rel = sub(v, &lifted[0]);
                let mut p = vec![0.0; d];
                for (a, b) in basis.iter().enumerate() {
                    p[a] = crate::linalg::dot(&rel, b);
                }
                p
            })
            .collect();
        Simplex::new(vertices)
    }

    /// Equilateral unit triangle in ℝ^d (d ≥ 2), v₀ = 0, v₁ = e₁.
    pub fn equilateral_triangle(d: usize) -> Result<Simplex> {
        Simplex::regular(3, d)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn len(&self) -> usize {
        self.vertices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
    pub fn ambient_dim(&self) -> usize {
        self.vertices[0].len()
    }

    /// Translate so that v₀ = 0.
    pub fn normalized(&self) -> Simplex {
        let v0 = self.vertices[0].clone();
        Simplex {
            vertices: self.vertices.iter().map(|v| sub(v, &v0)).collect(),
        }
    }

    pub fn invariants(&self) -> SimplexInvariants {
        let heights: Vec<f64> = (0..self.len())
            .map(|j| {
                let others: Vec<Point> = (0..self.len()).filter(|&i| i != j).map(|i| self.vertices[i].clone()).collect();
                distance_to_affine_hull(&self.vertices[j], &others)
            })
            .collect();
        let r = heights.iter().cloned().fold(f64::INFINITY, f64::min);
        let d = diameter(&self.vertices);
        SimplexInvariants {
            heights,
            r,
            d,
            delta: r / d,
        }
    }
}

/// r_j, r(V), d(V) and δ(V) = r(V)/d(V).
pub fn simplex_invariants(v: &Simplex) -> SimplexInvariants {
    v.invariants()
}

/// Chart quadrature of ω_F on a sphere intersection against c_T·|slice|.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaCheck {
    pub chart: ChartIntegral,
    pub closed_form: f64,
    pub relative_error: f64,
    /// A second admissible coordinate set, its integral and the relative gap
    /// to the first chart.
    pub alternate: Option<(Vec<usize>, f64, f64)>,
}

pub fn omega_check(centers: &[Point], squared_radii: &[f64], nodes: usize) -> Result<OmegaCheck> {
    let variety = PolynomialVariety::sphere_intersection(centers, squared_radii)?;
    let slice = intersect_spheres(centers, squared_radii)?;
    let mut u = vec![0.0; slice.sphere_dim() + 1];
    u[0] = 1.0;
    let x = slice.point(&u);
    let closed_form = gram_weight(&x, centers)?.weight * slice.surface_area();
    let options = ChartOptions::with_nodes(nodes);
    let chart = chart_integrate(&variety, |_| 1.0, &ChartDomain::WholeSphere, &options)?;
    let relative_error = (chart.value / closed_form - 1.0).abs();
    let alternate = match admissible_coordinates(&variety, &x)?
        .into_iter()
        .find(|(j, _)| *j != chart.coordinates)
    {
        Some((j, _)) => {
            let other = chart_integrate(&variety, |_| 1.0, &ChartDomain::WholeSphere, &options.clone().coordinates(j.clone()))?;
            let gap = (other.value / chart.value - 1.0).abs();
            Some((j, other.value, gap))
        }
        None => None,
    };
    Ok(OmegaCheck {
        chart,
        closed_form,
        relative_error,
        alternate,
    })
}

/// m random centers in ℝ^d and squared radii for which a point at unit
/// scale lies on every sphere. Redraws until the slice is well conditioned:
/// radius at least 0.2, and each edge keeps a fifth of its length after the
/// earlier edges are projected out.
pub fn random_sphere_instance<R: rand::Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<(Vec<Point>, Vec<f64>)> {
    if m == 0 || m >= d {
        return Err(invalid(format!("need 1 ≤ m < d, got m = {m}, d = {d}")));
    }
    loop {
        let x: Point = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let centers: Vec<Point> = (0..m)
            .map(|_| (0..d).map(|a| x[a] + rng.random_range(-1.0..1.0)).collect())
            .collect();
        let edges: Vec<Point> = centers[1..].iter().map(|c| sub(c, &centers[0])).collect();
        let (_, full) = orthonormalize(&edges, 0.2);
        if !full {
            continue;
        }
        let radii: Vec<f64> = centers.iter().map(|c| crate::linalg::dist2(&x, c)).collect();
        match intersect_spheres(&centers, &radii) {
            Ok(s) if s.radius >= 0.2 => return Ok((centers, radii)),
            _ => continue,
        }
    }
}

pub(crate) fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d = d.max(dist(&points[i], &points[j]));
        }
    }
    d
}
