//! The chart measure ω_F on varieties cut out by squared-distance equations
//! |p − q|² = t, integrated in local coordinates x_I with the remaining
//! coordinates x_J solved by Newton iteration and weighted by 1/|det ∂F/∂x_J|.

use super::sphere::intersect_spheres;
use crate::error::{invalid, Error, Result};
use crate::linalg::{complement, dist2, singular_values, Point};
use crate::quadrature::gauss_legendre_on;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;

const MAX_NEWTON: usize = 50;
/// |j_{F,J}| below this (relative to the constraint scale) ends the chart.
const BOUNDARY_TOL: f64 = 1e-10;
/// Homotopy substeps from the seed to the first node of each row.
const HOMOTOPY_STEPS: usize = 8;
const MAX_SUBSETS: usize = 1 << 20;

/// One end of a distance constraint: a configuration variable or a fixed point.
#[derive(Clone, Debug, PartialEq)]
pub enum Endpoint {
    Var(usize),
    Fixed(Point),
}

/// |a − b|² − squared_length.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub a: Endpoint,
    pub b: Endpoint,
    pub squared_length: f64,
}

/// Zero set of a family of distance constraints on `num_points` unknown
/// points of ℝ^d, flattened into one vector of d·num_points coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialVariety {
    point_dim: usize,
    num_points: usize,
    constraints: Vec<Constraint>,
}

impl PolynomialVariety {
    pub fn new(point_dim: usize, num_points: usize, constraints: Vec<Constraint>) -> Result<PolynomialVariety> {
        if point_dim == 0 || num_points == 0 {
            return Err(invalid("variety needs a positive dimension and at least one unknown point"));
        }
        if constraints.is_empty() || constraints.len() > point_dim * num_points {
            return Err(invalid("need between 1 and d·n constraints"));
        }
        for c in &constraints {
            if !(c.squared_length > 0.0 && c.squared_length.is_finite()) {
                return Err(invalid("squared lengths must be positive"));
            }
            let mut has_var = false;
            for e in [&c.a, &c.b] {
                match e {
                    Endpoint::Var(i) if *i >= num_points => {
                        return Err(invalid(format!("variable {i} out of range")));
                    }
                    Endpoint::Var(_) => has_var = true,
                    Endpoint::Fixed(p) if p.len() != point_dim => {
                        return Err(invalid("fixed endpoint has the wrong dimension"));
                    }
                    Endpoint::Fixed(_) => {}
                }
            }
            if !has_var || c.a == c.b {
                return Err(invalid("each constraint must involve a variable and two distinct endpoints"));
            }
        }
        Ok(PolynomialVariety {
            point_dim,
            num_points,
            constraints,
        })
    }

    /// {x ∈ ℝ^d : |x − c_i|² = t_i}.
    pub fn sphere_intersection(centers: &[Point], squared_radii: &[f64]) -> Result<PolynomialVariety> {
        if centers.is_empty() || centers.len() != squared_radii.len() {
            return Err(invalid("need one squared radius per center"));
        }
        let constraints = centers
            .iter()
            .zip(squared_radii)
            .map(|(c, &t)| Constraint {
                a: Endpoint::Var(0),
                b: Endpoint::Fixed(c.clone()),
                squared_length: t,
            })
            .collect();
        PolynomialVariety::new(centers[0].len(), 1, constraints)
    }

    pub fn point_dim(&self) -> usize {
        self.point_dim
    }
    pub fn num_points(&self) -> usize {
        self.num_points
    }
    /// Number of scalar unknowns D.
    pub fn num_vars(&self) -> usize {
        self.point_dim * self.num_points
    }
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
    /// Dimension D − n of the nonsingular part.
    pub fn dimension(&self) -> usize {
        self.num_vars() - self.num_constraints()
    }

    fn scale(&self) -> f64 {
        self.constraints.iter().fold(1.0f64, |m, c| m.max(c.squared_length))
    }

    fn endpoint<'a>(&self, e: &'a Endpoint, x: &'a [f64]) -> &'a [f64] {
        match e {
            Endpoint::Var(i) => &x[i * self.point_dim..(i + 1) * self.point_dim],
            Endpoint::Fixed(p) => p,
        }
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| dist2(self.endpoint(&c.a, x), self.endpoint(&c.b, x)) - c.squared_length)
            .collect()
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// n × D matrix of constraint gradients.
    pub fn gradient(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.point_dim;
        let mut g = DMatrix::zeros(self.constraints.len(), self.num_vars());
        for (k, c) in self.constraints.iter().enumerate() {
            let a = self.endpoint(&c.a, x);
            let b = self.endpoint(&c.b, x);
            if let Endpoint::Var(i) = c.a {
                for l in 0..d {
                    g[(k, i * d + l)] += 2.0 * (a[l] - b[l]);
                }
            }
            if let Endpoint::Var(j) = c.b {
                for l in 0..d {
                    g[(k, j * d + l)] -= 2.0 * (a[l] - b[l]);
                }
            }
        }
        g
    }

    /// j_{F,J}(x) = det ∂F/∂x_J.
    pub fn jacobian_det(&self, x: &[f64], coords: &[usize]) -> f64 {
        self.gradient(x).select_columns(coords).determinant()
    }

    /// Centers and squared radii when this is an intersection of spheres in
    /// one unknown point.
    pub fn sphere_data(&self) -> Option<(Vec<Point>, Vec<f64>)> {
        if self.num_points != 1 {
            return None;
        }
        let mut centers = Vec::new();
        let mut radii = Vec::new();
        for c in &self.constraints {
            match (&c.a, &c.b) {
                (Endpoint::Var(0), Endpoint::Fixed(p)) | (Endpoint::Fixed(p), Endpoint::Var(0)) => {
                    centers.push(p.clone());
                    radii.push(c.squared_length);
                }
                _ => return None,
            }
        }
        Some((centers, radii))
    }

    /// Newton on x_J with x_I held fixed; returns j_{F,J} at the solution.
    fn newton(&self, x: &mut [f64], coords: &[usize]) -> Result<f64> {
        let tol = 1e-12 * self.scale();
        for _ in 0..=MAX_NEWTON {
            let f = self.residual(x);
            let jac = self.gradient(x).select_columns(coords);
            if f.iter().all(|v| v.abs() <= tol) {
                return Ok(jac.determinant());
            }
            let lu = jac.lu();
            let step = match lu.solve(&DVector::from_vec(f)) {
                Some(s) => s,
                None => return Err(Error::ChartBoundary(0.0)),
            };
            for (k, &c) in coords.iter().enumerate() {
                x[c] -= step[k];
            }
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        Err(Error::NewtonNonconvergence(MAX_NEWTON))
    }
}

fn smallest_sv(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=(n - (k - cur.len())) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

fn subset_count(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Every coordinate set J with j_{F,J}(x) ≠ 0, best conditioned first, scored
/// by the smallest singular value of ∂F/∂x_J.
pub fn admissible_coordinates(variety: &PolynomialVariety, x: &[f64]) -> Result<Vec<(Vec<usize>, f64)>> {
    if x.len() != variety.num_vars() {
        return Err(invalid("configuration has the wrong length"));
    }
    let n = variety.num_constraints();
    if subset_count(variety.num_vars(), n) > MAX_SUBSETS as f64 {
        return Err(invalid("too many coordinate subsets to enumerate"));
    }
    let g = variety.gradient(x);
    let tol = BOUNDARY_TOL * variety.scale();
    let mut ranked: Vec<(Vec<usize>, f64)> = combinations(variety.num_vars(), n)
        .into_iter()
        .map(|j| {
            let s = smallest_sv(&g.select_columns(&j));
            (j, s)
        })
        .filter(|(_, s)| *s > tol)
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Greedy column pick maximizing the smallest singular value at each step.
fn greedy_coordinates(variety: &PolynomialVariety, x: &[f64]) -> Result<Vec<usize>> {
    let g = variety.gradient(x);
    let n = variety.num_constraints();
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut last = 0.0;
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..variety.num_vars() {
            if chosen.contains(&c) {
                continue;
            }
            let mut cols = chosen.clone();
            cols.push(c);
            let s = smallest_sv(&g.select_columns(&cols));
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        let (c, s) = best.expect("at least n columns");
        chosen.push(c);
        last = s;
    }
    if last <= BOUNDARY_TOL * variety.scale() {
        return Err(Error::ChartBoundary(last));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

fn check_coordinates(variety: &PolynomialVariety, coords: &[usize]) -> Result<Vec<usize>> {
    let mut j = coords.to_vec();
    j.sort_unstable();
    j.dedup();
    if j.len() != variety.num_constraints() || j.iter().any(|&c| c >= variety.num_vars()) {
        return Err(invalid(format!(
            "coordinate set must name {} distinct indices below {}",
            variety.num_constraints(),
            variety.num_vars()
        )));
    }
    Ok(j)
}

fn free_coordinates(d: usize, j: &[usize]) -> Vec<usize> {
    (0..d).filter(|c| !j.contains(c)).collect()
}

/// Region of local coordinates to integrate over.
#[derive(Clone, Debug, PartialEq)]
pub enum ChartDomain {
    /// The entire sphere of a sphere-intersection variety, covered by the
    /// two sheets over the ellipsoid that is its projection onto x_I.
    WholeSphere,
    /// The sheet through `seed` over the box |x_I − seed_I| ≤ halfwidth.
    /// The integrand must vanish outside that patch.
    Box { seed: Point, halfwidth: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartOptions {
    /// Solved coordinates J; chosen automatically when absent.
    pub coordinates: Option<Vec<usize>>,
    /// Gauss–Legendre nodes per local axis.
    pub nodes: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions {
            coordinates: None,
            nodes: 24,
        }
    }
}

impl ChartOptions {
    pub fn with_nodes(nodes: usize) -> ChartOptions {
        ChartOptions {
            nodes,
            ..Default::default()
        }
    }

    pub fn coordinates(mut self, j: Vec<usize>) -> ChartOptions {
        self.coordinates = Some(j);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartIntegral {
    pub value: f64,
    /// |I_n − I_m| against a coarser rule with m ≈ 2n/3 nodes per axis.
    pub error_estimate: f64,
    pub coordinates: Vec<usize>,
    pub evaluations: usize,
}

/// ∫ g dω_F = ∫ g(x) / |j_{F,J}(x)| dx_I.
pub fn chart_integrate<G>(
    variety: &PolynomialVariety,
    g: G,
    domain: &ChartDomain,
    options: &ChartOptions,
) -> Result<ChartIntegral>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    if options.nodes < 2 {
        return Err(invalid("need at least two quadrature nodes per axis"));
    }
    if variety.dimension() == 0 && matches!(domain, ChartDomain::Box { .. }) {
        return Err(invalid("zero-dimensional varieties have no box charts"));
    }
    let coarse = (options.nodes * 2).div_ceil(3).max(2);
    match domain {
        ChartDomain::WholeSphere => {
            let chart = SphereChart::new(variety, options.coordinates.as_deref())?;
            let (fine, n_fine) = chart.integrate(variety, &g, options.nodes)?;
            let (rough, n_rough) = if chart.p == 0 { (fine, 0) } else { chart.integrate(variety, &g, coarse)? };
            Ok(ChartIntegral {
                value: fine,
                error_estimate: (fine - rough).abs(),
                coordinates: chart.coords,
                evaluations: n_fine + n_rough,
            })
        }
        ChartDomain::Box { seed, halfwidth } => {
            if seed.len() != variety.num_vars() {
                return Err(invalid("seed has the wrong length"));
            }
            if !(*halfwidth > 0.0 && halfwidth.is_finite()) {
                return Err(invalid("box half-width must be positive"));
            }
            let off = variety.max_residual(seed);
            if off > 1e-9 * variety.scale() {
                return Err(Error::OffVariety(off));
            }
            let coords = match &options.coordinates {
                Some(j) => check_coordinates(variety, j)?,
                None => greedy_coordinates(variety, seed)?,
            };
            let (fine, n_fine) = integrate_box(variety, &g, seed, *halfwidth, &coords, options.nodes)?;
            let (rough, n_rough) = integrate_box(variety, &g, seed, *halfwidth, &coords, coarse)?;
            Ok(ChartIntegral {
                value: fine,
                error_estimate: (fine - rough).abs(),
                coordinates: coords,
                evaluations: n_fine + n_rough,
            })
        }
    }
}

/// x = c + ρ W u with u on the unit p-sphere. Writing the projection
/// P_I W = U Σ Vᵀ, the sheets over the ellipsoid x_I = c_I + ρ U Σ b, |b| < 1,
/// are u = V_p b ± √(1 − |b|²) v_{p+1}. The ball is parametrized by nested
/// angles so the √(1 − |b|²) edge singularity cancels.
struct SphereChart {
    p: usize,
    coords: Vec<usize>,
    center: Point,
    radius: f64,
    tangent: Vec<Point>,
    right: Vec<Point>,
    null: Point,
    det_a: f64,
}

impl SphereChart {
    fn new(variety: &PolynomialVariety, coords: Option<&[usize]>) -> Result<SphereChart> {
        let (centers, radii) = variety
            .sphere_data()
            .ok_or_else(|| invalid("whole-sphere charts need an intersection of spheres"))?;
        let slice = intersect_spheres(&centers, &radii)?;
        let d = slice.ambient_dim();
        let p = slice.sphere_dim();
        let tangent = slice.tangent_basis().to_vec();
        let projection = |j: &[usize]| {
            let free = free_coordinates(d, j);
            DMatrix::from_fn(p, p + 1, |r, c| tangent[c][free[r]])
        };
        let coords = match coords {
            Some(j) => check_coordinates(variety, j)?,
            None if p == 0 => (0..d).collect(),
            None => {
                if subset_count(d, p) > MAX_SUBSETS as f64 {
                    return Err(invalid("too many coordinate subsets to enumerate"));
                }
                let mut best: Option<(Vec<usize>, f64)> = None;
                for j in combinations(d, d - p) {
                    let s = smallest_sv(&projection(&j));
                    if best.as_ref().is_none_or(|(_, b)| s > *b) {
                        best = Some((j, s));
                    }
                }
                best.expect("nonempty").0
            }
        };
        if p == 0 {
            return Ok(SphereChart {
                p,
                coords,
                center: slice.center.clone(),
                radius: slice.radius,
                null: tangent[0].clone(),
                tangent,
                right: Vec::new(),
                det_a: 1.0,
            });
        }
        let m = projection(&coords);
        let sigma_min = smallest_sv(&m);
        if sigma_min <= BOUNDARY_TOL {
            return Err(Error::ChartBoundary(sigma_min));
        }
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let right: Vec<Point> = (0..p).map(|r| v_t.row(r).iter().copied().collect()).collect();
        let null = complement(&right, p + 1).pop().ok_or(Error::ChartBoundary(0.0))?;
        let det_a = slice.radius.powi(p as i32) * svd.singular_values.iter().product::<f64>();
        Ok(SphereChart {
            p,
            coords,
            center: slice.center.clone(),
            radius: slice.radius,
            tangent,
            right,
            null,
            det_a,
        })
    }

    fn point(&self, u: &[f64]) -> Point {
        let mut x = self.center.clone();
        for (ul, w) in u.iter().zip(&self.tangent) {
            for (xa, wa) in x.iter_mut().zip(w) {
                *xa += self.radius * ul * wa;
            }
        }
        x
    }

    fn weight<G: Fn(&[f64]) -> f64>(&self, variety: &PolynomialVariety, g: &G, mut x: Point) -> Result<f64> {
        let j = variety.newton(&mut x, &self.coords)?;
        if j == 0.0 {
            return Err(Error::ChartBoundary(0.0));
        }
        Ok(g(&x) / j.abs())
    }

    fn integrate<G: Fn(&[f64]) -> f64 + Sync>(&self, variety: &PolynomialVariety, g: &G, n: usize) -> Result<(f64, usize)> {
        let p = self.p;
        if p == 0 {
            let a = self.weight(variety, g, self.point(&[1.0]))?;
            let b = self.weight(variety, g, self.point(&[-1.0]))?;
            return Ok((a + b, 2));
        }
        let (theta, w) = gauss_legendre_on(n, -FRAC_PI_2, FRAC_PI_2);
        let sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let cos: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let inner = n.pow(p as u32 - 1);
        let partials: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|first| {
                let mut idx = vec![0usize; p];
                idx[0] = first;
                let mut b = vec![0.0; p];
                let mut u = vec![0.0; p + 1];
                let mut sum = 0.0;
                for flat in 0..inner {
                    let mut rest = flat;
                    for a in (1..p).rev() {
                        idx[a] = rest % n;
                        rest /= n;
                    }
                    // b_k = cos θ_1 ⋯ cos θ_{k−1} sin θ_k, h = Π cos θ_i, and
                    // db = Π cos^{p−i+1} θ_i dθ
                    let mut prefix = 1.0;
                    let mut jac = 1.0;
                    let mut wt = 1.0;
                    for a in 0..p {
                        let i = idx[a];
                        b[a] = prefix * sin[i];
                        prefix *= cos[i];
                        jac *= cos[i].powi((p - a) as i32);
                        wt *= w[i];
                    }
                    let h = prefix;
                    for sign in [1.0, -1.0] {
                        for (l, ul) in u.iter_mut().enumerate() {
                            *ul = sign * h * self.null[l];
                            for (bk, r) in b.iter().zip(&self.right) {
                                *ul += bk * r[l];
                            }
                        }
                        sum += wt * jac * self.weight(variety, g, self.point(&u))?;
                    }
                }
                Ok(sum)
            })
            .collect();
        let mut total = 0.0;
        for part in partials {
            total += part?;
        }
        Ok((total * self.det_a, 2 * n.pow(p as u32)))
    }
}

/// Tensor Gauss–Legendre rule on the box, one row per multi-index of the
/// leading axes. Each row starts by homotopy from the seed and continues
/// node to node, so every node stays on the seed's sheet.
fn integrate_box<G: Fn(&[f64]) -> f64 + Sync>(
    variety: &PolynomialVariety,
    g: &G,
    seed: &[f64],
    halfwidth: f64,
    coords: &[usize],
    n: usize,
) -> Result<(f64, usize)> {
    let free = free_coordinates(variety.num_vars(), coords);
    let q = free.len();
    let (t, w) = gauss_legendre_on(n, -halfwidth, halfwidth);
    let mut start = seed.to_vec();
    let j0 = variety.newton(&mut start, coords)?;
    let sign0 = j0.signum();
    let tol = BOUNDARY_TOL * variety.scale();
    let rows = n.pow(q as u32 - 1);

    let step_to = |x: &mut Point, target: &[f64]| -> Result<f64> {
        let from: Vec<f64> = free.iter().map(|&c| x[c]).collect();
        for subdivisions in [1usize, 4, 16] {
            let mut trial = x.clone();
            let mut ok = true;
            let mut j = 0.0;
            for s in 1..=subdivisions {
                let f = s as f64 / subdivisions as f64;
                for (k, &c) in free.iter().enumerate() {
                    trial[c] = from[k] + f * (target[k] - from[k]);
                }
                match variety.newton(&mut trial, coords) {
                    Ok(v) if v.signum() == sign0 && v.abs() > tol => j = v,
                    Ok(v) if v.abs() <= tol => return Err(Error::ChartBoundary(v.abs())),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                *x = trial;
                return Ok(j);
            }
        }
        // the sheet could not be followed without the Jacobian changing sign
        Err(Error::ChartBoundary(0.0))
    };

    let partials: Vec<Result<f64>> = (0..rows)
        .into_par_iter()
        .map(|row| {
            let mut idx = vec![0usize; q];
            let mut rest = row;
            for a in (0..q - 1).rev() {
                idx[a] = rest % n;
                rest /= n;
            }
            let mut target: Vec<f64> = (0..q).map(|a| seed[free[a]] + t[idx[a]]).collect();
            let row_weight: f64 = (0..q - 1).map(|a| w[idx[a]]).product();
            let mut x = start.clone();
            let mut sum = 0.0;
            for last in 0..n {
                target[q - 1] = seed[free[q - 1]] + t[last];
                let j = if last == 0 {
                    let mut jv = j0;
                    for s in 1..=HOMOTOPY_STEPS {
                        let f = s as f64 / HOMOTOPY_STEPS as f64;
                        let mid: Vec<f64> = (0..q).map(|a| seed[free[a]] + f * (target[a] - seed[free[a]])).collect();
                        jv = step_to(&mut x, &mid)?;
                    }
                    jv
                } else {
                    step_to(&mut x, &target)?
                };
                sum += row_weight * w[last] * g(&x) / j.abs();
            }
            Ok(sum)
        })
        .collect();
    let mut total = 0.0;
    for part in partials {
        total += part?;
    }
    Ok((total, rows * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclid_config::gram_weight;
    use crate::radial::unit_sphere_area;
    use std::f64::consts::PI;

    #[test]
    fn circle_mass_is_pi_for_every_radius() {
        for r in [0.3, 1.0, 2.5] {
            let v = PolynomialVariety::sphere_intersection(&[vec![0.1, -0.2]], &[r * r]).unwrap();
            let out = chart_integrate(&v, |_| 1.0, &ChartDomain::WholeSphere, &ChartOptions::default()).unwrap();
            assert!((out.value - PI).abs() < 1e-12, "r={r}: {}", out.value);
        }
    }

    #[test]
    fn two_sphere_circle_matches_gram_weight() {
        let centers = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        let v = PolynomialVariety::sphere_intersection(&centers, &[1.0, 1.0]).unwrap();
        let out = chart_integrate(&v, |_| 1.0, &ChartDomain::WholeSphere, &ChartOptions::default()).unwrap();
        let rho = 3f64.sqrt() / 2.0;
        let x = vec![0.5, rho, 0.0];
        let c = gram_weight(&x, &centers).unwrap().weight;
        assert!((out.value - c * 2.0 * PI * rho).abs() < 1e-12);
    }

    #[test]
    fn half_space_gets_half_the_mass() {
        let centers = vec![vec![0.2, 0.0, 0.1, 0.0], vec![1.0, 0.3, 0.0, 0.2]];
        let v = PolynomialVariety::sphere_intersection(&centers, &[1.1, 0.9]).unwrap();
        let slice = intersect_spheres(&centers, &[1.1, 0.9]).unwrap();
        let normal = [0.3, -0.5, 0.7, 0.2];
        let full = chart_integrate(&v, |_| 1.0, &ChartDomain::WholeSphere, &ChartOptions::default()).unwrap();
        let half = chart_integrate(
            &v,
            |x| {
                let s: f64 = (0..4).map(|i| (x[i] - slice.center[i]) * normal[i]).sum();
                if s > 0.0 { 1.0 } else { 0.0 }
            },
            &ChartDomain::WholeSphere,
            &ChartOptions::default(),
        )
        .unwrap();
        assert!((half.value - 0.5 * full.value).abs() < 1e-6 * full.value);
    }

    #[test]
    fn charts_agree_and_match_surface_area() {
        let centers = vec![vec![0.0, 0.1, 0.0, 0.3, 0.0], vec![0.9, 0.0, 0.2, 0.0, 0.1]];
        let t = [1.2, 1.0];
        let v = PolynomialVariety::sphere_intersection(&centers, &t).unwrap();
        let slice = intersect_spheres(&centers, &t).unwrap();
        let x = slice.point(&[1.0, 0.0, 0.0, 0.0]);
        let ranked = admissible_coordinates(&v, &x).unwrap();
        assert!(ranked.len() >= 2);
        let c = gram_weight(&x, &centers).unwrap().weight;
        let exact = c * unit_sphere_area(3) * slice.radius.powi(3);
        for (j, _) in ranked.iter().take(3) {
            let opts = ChartOptions::with_nodes(16).coordinates(j.clone());
            let out = chart_integrate(&v, |_| 1.0, &ChartDomain::WholeSphere, &opts).unwrap();
            assert!((out.value / exact - 1.0).abs() < 1e-10, "{j:?}: {} vs {exact}", out.value);
        }
    }

    #[test]
    fn zero_sphere_is_two_points() {
        let centers = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let v = PolynomialVariety::sphere_intersection(&centers, &[1.0, 1.0]).unwrap();
        let out = chart_integrate(&v, |_| 1.0, &ChartDomain::WholeSphere, &ChartOptions::default()).unwrap();
        let x = vec![0.5, 3f64.sqrt() / 2.0];
        let c = gram_weight(&x, &centers).unwrap().weight;
        assert!((out.value - 2.0 * c).abs() < 1e-12);
    }

    #[test]
    fn box_chart_matches_sphere_chart_on_a_patch() {
        // smooth bump on a patch of the unit 2-sphere
        let v = PolynomialVariety::sphere_intersection(&[vec![0.0; 3]], &[1.0]).unwrap();
        let pole = vec![0.0, 0.0, 1.0];
        let bump = |x: &[f64]| crate::radial::unit_bump(dist2(x, &pole).sqrt(), 0.4);
        // the pole sits over the center of the x_I disk, away from the fold
        let opts = ChartOptions::with_nodes(320).coordinates(vec![2]);
        let whole = chart_integrate(&v, bump, &ChartDomain::WholeSphere, &opts).unwrap();
        let patch = chart_integrate(
            &v,
            bump,
            &ChartDomain::Box { seed: pole.clone(), halfwidth: 0.45 },
            &ChartOptions::with_nodes(48),
        )
        .unwrap();
        assert_eq!(patch.coordinates, vec![2]);
        assert!((whole.value - patch.value).abs() < 1e-6 * whole.value, "{} {}", whole.value, patch.value);
    }

    #[test]
    fn box_chart_rejects_off_variety_seed() {
        let v = PolynomialVariety::sphere_intersection(&[vec![0.0; 3]], &[1.0]).unwrap();
        let e = chart_integrate(
            &v,
            |_| 1.0,
            &ChartDomain::Box { seed: vec![0.0, 0.0, 1.1], halfwidth: 0.1 },
            &ChartOptions::default(),
        );
        assert!(matches!(e, Err(Error::OffVariety(_))));
    }

    #[test]
    fn box_over_a_fold_is_a_chart_boundary() {
        let v = PolynomialVariety::sphere_intersection(&[vec![0.0; 2]], &[1.0]).unwrap();
        let e = chart_integrate(
            &v,
            |_| 1.0,
            &ChartDomain::Box { seed: vec![0.0, 1.0], halfwidth: 1.5 },
            &ChartOptions::default().coordinates(vec![1]),
        );
        assert!(matches!(e, Err(Error::ChartBoundary(_)) | Err(Error::NewtonNonconvergence(_))), "{e:?}");
    }
}
