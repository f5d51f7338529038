//! Intersections of spheres and the Gram weight of the surface measure.

use crate::error::{invalid, Error, Result};
use crate::linalg::{complement, dot, gram, norm, orthonormalize, solve, sub, Point};
use crate::radial::unit_sphere_area;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative tolerance on the squared radius separating empty, tangent and
/// proper intersections.
const TANGENCY_TOL: f64 = 1e-10;

/// A p-sphere in ℝ^d lying in the affine subspace through `center`
/// orthogonal to `normal_basis`, with p = d − 1 − normal_basis.len().
#[derive(Clone, Debug, PartialEq)]
pub struct SphereSlice {
    pub center: Point,
    pub radius: f64,
    pub normal_basis: Vec<Point>,
    tangent_basis: Vec<Point>,
}

impl SphereSlice {
    pub fn new(center: Point, radius: f64, normal_basis: Vec<Point>) -> Result<SphereSlice> {
        let d = center.len();
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("sphere radius must be positive"));
        }
        if normal_basis.len() >= d {
            return Err(invalid("normal space leaves no room for a sphere"));
        }
        for (i, a) in normal_basis.iter().enumerate() {
            for (j, b) in normal_basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(a, b) - target).abs() > 1e-12 {
                    return Err(invalid("normal basis is not orthonormal"));
                }
            }
        }
        let tangent_basis = complement(&normal_basis, d);
        Ok(SphereSlice {
            center,
            radius,
            normal_basis,
            tangent_basis,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    /// Dimension p of the sphere itself.
    pub fn sphere_dim(&self) -> usize {
        self.ambient_dim() - 1 - self.normal_basis.len()
    }

    /// Orthonormal basis of the (p+1)-dimensional subspace containing the sphere.
    pub fn tangent_basis(&self) -> &[Point] {
        &self.tangent_basis
    }

    pub fn surface_area(&self) -> f64 {
        let p = self.sphere_dim();
        unit_sphere_area(p) * self.radius.powi(p as i32)
    }

    /// Max of the distance-to-sphere and normal-offset residuals.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let rel = sub(x, &self.center);
        let off = self.normal_basis.iter().fold(0.0f64, |m, n| m.max(dot(&rel, n).abs()));
        off.max((norm(&rel) - self.radius).abs())
    }

    /// Point c + ρ Σ u_i t_i for u on the unit sphere of the tangent space.
    pub fn point(&self, u: &[f64]) -> Point {
        let mut x = self.center.clone();
        for (ui, t) in u.iter().zip(&self.tangent_basis) {
            for (xa, ta) in x.iter_mut().zip(t) {
                *xa += self.radius * ui * ta;
            }
        }
        x
    }

    /// Uniform point: normalized Gaussian in the tangent space. A 0-sphere
    /// picks each of its two points with probability 1/2.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let q = self.tangent_basis.len();
        if q == 1 {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            return self.point(&[s]);
        }
        loop {
            let g: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm(&g);
            if n > 1e-300 {
                let u: Vec<f64> = g.iter().map(|v| v / n).collect();
                return self.point(&u);
            }
        }
    }

    /// Component of ξ in the sphere's tangent space.
    pub fn project_tangent(&self, xi: &[f64]) -> Point {
        let mut out = vec![0.0; xi.len()];
        for t in &self.tangent_basis {
            let c = dot(xi, t);
            for (o, ta) in out.iter_mut().zip(t) {
                *o += c * ta;
            }
        }
        out
    }
}

/// The set {x : |x − x_i|² = t_i for all i}.
///
/// Subtracting the first equation from the others leaves the linear system
/// 2x·(x_i − x₁) = t₁ − t_i + |x_i|² − |x₁|², whose solution in the affine hull
/// of the centers is the sphere center.
pub fn intersect_spheres(centers: &[Point], squared_radii: &[f64]) -> Result<SphereSlice> {
    let m = centers.len();
    if m == 0 || squared_radii.len() != m {
        return Err(invalid("need one squared radius per center and at least one center"));
    }
    let d = centers[0].len();
    if d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(invalid("centers must share one positive dimension"));
    }
    if m > d {
        return Err(Error::DegenerateCenters);
    }
    let x1 = &centers[0];
    let edges: Vec<Point> = centers[1..].iter().map(|c| sub(c, x1)).collect();
    let (normal_basis, full) = orthonormalize(&edges, 1e-10);
    if !full {
        return Err(Error::DegenerateCenters);
    }
    let mut center = x1.clone();
    if !edges.is_empty() {
        let g = gram(&edges);
        let b: Vec<f64> = edges
            .iter()
            .enumerate()
            .map(|(i, e)| 0.5 * (squared_radii[0] - squared_radii[i + 1] + dot(e, e)))
            .collect();
        let c = solve(g, &b).ok_or(Error::DegenerateCenters)?;
        for (ci, e) in c.iter().zip(&edges) {
            for (x, ea) in center.iter_mut().zip(e) {
                *x += ci * ea;
            }
        }
    }
    let off = sub(&center, x1);
    let r2 = squared_radii[0] - dot(&off, &off);
    let scale = squared_radii.iter().fold(1.0f64, |m, t| m.max(t.abs()));
    if r2 < -TANGENCY_TOL * scale {
        return Err(Error::EmptyIntersection(r2));
    }
    if r2.abs() <= TANGENCY_TOL * scale {
        return Err(Error::TangentIntersection(r2));
    }
    SphereSlice::new(center, r2.sqrt(), normal_basis)
}

/// Gram matrix T_ij = (x − x_i)·(x − x_j) and c_T = 2^{−m} det(T)^{−1/2}.
#[derive(Clone, Debug, PartialEq)]
pub struct GramData {
    pub matrix: DMatrix<f64>,
    pub determinant: f64,
    pub weight: f64,
    /// Volume of the parallelotope spanned by the x − x_i, √det T.
    pub volume: f64,
}

pub fn gram_weight(x: &[f64], centers: &[Point]) -> Result<GramData> {
    if centers.is_empty() || centers.iter().any(|c| c.len() != x.len()) {
        return Err(invalid("centers must be nonempty and match the point dimension"));
    }
    let vs: Vec<Point> = centers.iter().map(|c| sub(x, c)).collect();
    let matrix = gram(&vs);
    let determinant = matrix.determinant();
    if !(determinant > 1e-14) {
        return Err(Error::SingularGram(determinant));
    }
    let m = centers.len() as i32;
    Ok(GramData {
        matrix,
        determinant,
        weight: 0.5f64.powi(m) / determinant.sqrt(),
        volume: determinant.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_spheres_in_three_space() {
        let s = intersect_spheres(&[vec![0.0; 3], vec![1.0, 0.0, 0.0]], &[1.0, 1.0]).unwrap();
        assert!((s.center[0] - 0.5).abs() < 1e-15 && s.center[1] == 0.0 && s.center[2] == 0.0);
        assert!((s.radius - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(s.normal_basis, vec![vec![1.0, 0.0, 0.0]]);
        assert_eq!(s.sphere_dim(), 1);
    }

    #[test]
    fn single_sphere() {
        let s = intersect_spheres(&[vec![0.0, 0.0]], &[4.0]).unwrap();
        assert_eq!(s.radius, 2.0);
        assert!(s.normal_basis.is_empty());
        assert_eq!(s.sphere_dim(), 1);
    }

    #[test]
    fn disjoint_spheres() {
        let e = intersect_spheres(&[vec![0.0, 0.0], vec![3.0, 0.0]], &[1.0, 1.0]);
        assert!(matches!(e, Err(Error::EmptyIntersection(_))));
        let e = intersect_spheres(&[vec![0.0, 0.0], vec![2.0, 0.0]], &[1.0, 1.0]);
        assert!(matches!(e, Err(Error::TangentIntersection(_))));
        let e = intersect_spheres(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, 1.0]);
        assert!(matches!(e, Err(Error::DegenerateCenters)));
    }

    #[test]
    fn samples_lie_on_the_slice() {
        let s = intersect_spheres(
            &[vec![0.1, 0.0, 0.3, 0.0], vec![1.0, 0.2, 0.0, 0.1], vec![0.0, 1.0, 0.5, 0.0]],
            &[1.0, 1.2, 0.9],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = s.sample(&mut rng);
            assert!(s.residual(&x) < 1e-12);
        }
    }

    #[test]
    fn gram_examples() {
        let g = gram_weight(&[1.0, 0.0], &[vec![0.0, 0.0]]).unwrap();
        assert!((g.weight - 0.5).abs() < 1e-15);
        let g = gram_weight(&[0.0, 0.0, 0.0], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!((g.weight - 0.25).abs() < 1e-15);
        // unit-side triangle, apex at unit distance from all three vertices
        let h = (1.0f64 / 3.0).sqrt();
        let tri = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0, 0.0]];
        let apex = vec![0.5, h / 2.0, (1.0 - h * h).sqrt()];
        let g = gram_weight(&apex, &tri).unwrap();
        assert!((g.determinant - 0.5).abs() < 1e-12);
        assert!((g.weight - 0.125 * 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            gram_weight(&[0.5, 0.0], &[vec![0.0, 0.0], vec![1.0, 0.0]]),
            Err(Error::SingularGram(_))
        ));
    }
}
