//! Small dense linear-algebra helpers on `&[f64]` points.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Point = Vec<f64>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Modified Gram–Schmidt with re-orthogonalization. Vectors whose residual
/// norm falls below `tol` times their original norm are dropped; the
/// second return value reports whether every input survived.
pub fn orthonormalize(vectors: &[Point], tol: f64) -> (Vec<Point>, bool) {
    let mut basis: Vec<Point> = Vec::with_capacity(vectors.len());
    let mut full = true;
    for v in vectors {
        let n0 = norm(v);
        if n0 == 0.0 {
            full = false;
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&w);
        if n <= tol * n0 {
            full = false;
            continue;
        }
        basis.push(scale(&w, 1.0 / n));
    }
    (basis, full)
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in ℝ^d,
/// where `basis` is already orthonormal.
pub fn complement(basis: &[Point], d: usize) -> Vec<Point> {
    let mut all: Vec<Point> = basis.to_vec();
    let mut out = Vec::with_capacity(d - basis.len());
    for i in 0..d {
        if all.len() == d {
            break;
        }
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        let (ext, ok) = orthonormalize(&[e], 1e-8);
        if !ok {
            continue;
        }
        let mut w = ext[0].clone();
        for _ in 0..2 {
            for b in &all {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&w);
        if n > 1e-6 {
            let u = scale(&w, 1.0 / n);
            all.push(u.clone());
            out.push(u);
        }
    }
    out
}

/// Matrix whose rows are the given vectors.
pub fn rows_matrix(rows: &[Point]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |v| v.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// Gram matrix `G_ij = v_i · v_j`.
pub fn gram(vectors: &[Point]) -> DMatrix<f64> {
    let n = vectors.len();
    DMatrix::from_fn(n, n, |i, j| dot(&vectors[i], &vectors[j]))
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Smallest singular value of a matrix with at least as many columns as rows
/// (the rank-relevant one for row independence).
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    if sv.len() < m.nrows().min(m.ncols()) || m.nrows() > m.ncols() {
        return 0.0;
    }
    sv.last().copied().unwrap_or(0.0)
}

/// Uniformly distributed rotation in SO(d) (QR of a Gaussian matrix with
/// sign correction, then a column flip to force det = +1).
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..d {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    q
}

pub fn apply(m: &DMatrix<f64>, x: &[f64]) -> Point {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// Solve a small dense square system; `None` when singular.
pub fn solve(a: DMatrix<f64>, b: &[f64]) -> Option<Point> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Distance from `p` to the affine hull of `points`, via least squares on the
/// edge vectors `points[i] - points[0]`.
pub fn distance_to_affine_hull(p: &[f64], points: &[Point]) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    let base = &points[0];
    let edges: Vec<Point> = points[1..].iter().map(|q| sub(q, base)).collect();
    let rel = sub(p, base);
    if edges.is_empty() {
        return norm(&rel);
    }
    let (basis, _) = orthonormalize(&edges, 1e-12);
    let mut r = rel;
    for b in &basis {
        let c = dot(&r, b);
        r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
    norm(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_is_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..6 {
            let q = random_rotation(d, &mut rng);
            let e = &q.transpose() * &q - DMatrix::identity(d, d);
            assert!(e.abs().max() < 1e-12);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn complement_spans_rest() {
        let (b, ok) = orthonormalize(&[vec![1.0, 1.0, 0.0]], 1e-12);
        assert!(ok);
        let c = complement(&b, 3);
        assert_eq!(c.len(), 2);
        for u in &c {
            assert!(dot(u, &b[0]).abs() < 1e-12);
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&c[0], &c[1]).abs() < 1e-12);
    }

    #[test]
    fn hull_distance_matches_line() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let d = distance_to_affine_hull(&[0.0, 0.0], &pts);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
