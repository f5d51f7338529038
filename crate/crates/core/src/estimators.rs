//! Monte Carlo estimates of the counting functionals
//! T_{λV}(f) = ∫ f(x) Π_j f(x − λ x_j) dω(x₁, …) dx
//! for grid densities f, plus telescoping differences, decay fits,
//! superlevel sets and λ-scans.
//!
//! x is uniform on the grid box (scaled by its volume) and the chain comes
//! from a [`ChainSampler`]. Several densities can share one pass, which
//! couples their estimates through common random numbers.

use crate::error::{invalid, Error, Result};
use crate::euclid_config::Simplex;
use crate::graph_config::DistanceGraph;
use crate::measure_forge::PointMassMeasure;
use crate::mollify::{mollify, GridFunction, GridSpec, MollifierSpec, RESOLUTION_FACTOR};
use crate::rng::{chunked, Streams};
use crate::sampler::{ChainSampler, Scratch};
use crate::stats::{loglog_fit, LinearFit, Moments};
use rand::Rng;

/// Largest boundary value, relative to the sup, tolerated on the grid edge.
const EDGE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountEstimate {
    pub lambda: f64,
    pub epsilon: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl CountEstimate {
    fn from_moments(m: &Moments, lambda: f64, epsilon: f64) -> CountEstimate {
        CountEstimate {
            lambda,
            epsilon,
            value: m.mean,
            std_error: m.std_error(),
            n_samples: m.n as usize,
        }
    }
}

/// Per-density moments from one coupled pass, and moments of the
/// per-sample differences field[i] − field[i+1].
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledCounts {
    pub values: Vec<Moments>,
    pub differences: Vec<Moments>,
    /// Mean sample mass ∫ φ dω_F per unit integrand.
    pub reference_mass: Moments,
}

fn check_fields(fields: &[&GridFunction], sampler: &ChainSampler, lambda: f64) -> Result<GridSpec> {
    if fields.is_empty() {
        return Err(invalid("need at least one density"));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(invalid(format!("λ = {lambda} outside (0, 1]")));
    }
    let spec = *fields[0].spec();
    if fields.iter().any(|f| *f.spec() != spec) {
        return Err(invalid("densities must share one grid"));
    }
    if spec.dim != sampler.ambient_dim() {
        return Err(invalid(format!(
            "grid is {}-dimensional but the configuration lives in dimension {}",
            spec.dim,
            sampler.ambient_dim()
        )));
    }
    for f in fields {
        let edge = edge_max(f);
        let sup = f.sup();
        if sup > 0.0 && edge > EDGE_TOL * sup {
            return Err(Error::BoxCoverage(format!(
                "density reaches {edge:e} on the grid boundary (sup {sup:e})"
            )));
        }
    }
    Ok(spec)
}

fn edge_max(f: &GridFunction) -> f64 {
    let spec = f.spec();
    let mut idx = vec![0usize; spec.dim];
    let mut m: f64 = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        spec.unflatten(i, &mut idx);
        if idx.iter().any(|&a| a == 0 || a + 1 == spec.n) {
            m = m.max(v.abs());
        }
    }
    m
}

/// One pass over `n` samples evaluating every density on the same x and chain.
pub fn coupled_counts(
    fields: &[&GridFunction],
    sampler: &ChainSampler,
    lambda: f64,
    n: usize,
    streams: &Streams,
) -> Result<CoupledCounts> {
    let spec = check_fields(fields, sampler, lambda)?;
    let k = fields.len();
    let d = spec.dim;
    let volume = spec.volume();
    let half = spec.halfwidth;
    let parts = chunked(streams, n, |rng, count| -> Result<(Vec<Moments>, Vec<Moments>, Moments)> {
        let mut vals = vec![Moments::default(); k];
        let mut diffs = vec![Moments::default(); k.saturating_sub(1)];
        let mut reference = Moments::default();
        let mut coords = sampler.graph_ref().configuration();
        let mut scratch = Scratch::default();
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut out = vec![0.0; k];
        for _ in 0..count {
            for xa in x.iter_mut() {
                *xa = rng.random_range(-half..half);
            }
            let mut any = false;
            for (o, f) in out.iter_mut().zip(fields) {
                *o = f.interpolate(&x);
                any |= *o != 0.0;
            }
            // the chain is drawn only when some integrand can be nonzero
            let mass = if any {
                let (w, a) = sampler.draw(rng, &mut coords, &mut scratch)?;
                sampler.mass(w, a)
            } else {
                0.0
            };
            if mass == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
            } else {
                for chunk in coords.chunks(d) {
                    for a in 0..d {
                        y[a] = x[a] - lambda * chunk[a];
                    }
                    for (o, f) in out.iter_mut().zip(fields) {
                        if *o != 0.0 {
                            *o *= f.interpolate(&y);
                        }
                    }
                }
                out.iter_mut().for_each(|o| *o *= volume * mass);
            }
            if any {
                reference.push(mass);
            }
            for i in 0..k {
                vals[i].push(out[i]);
            }
            for i in 0..k.saturating_sub(1) {
                diffs[i].push(out[i] - out[i + 1]);
            }
        }
        Ok((vals, diffs, reference))
    });
    let parts: Vec<_> = parts.into_iter().collect::<Result<_>>()?;
    let values = (0..k).map(|i| Moments::merge_all(parts.iter().map(|p| &p.0[i]))).collect();
    let differences = (0..k.saturating_sub(1))
        .map(|i| Moments::merge_all(parts.iter().map(|p| &p.1[i])))
        .collect();
    // only samples that drew a chain carry mass information
    let reference = Moments::merge_all(parts.iter().map(|p| &p.2));
    Ok(CoupledCounts {
        values,
        differences,
        reference_mass: reference,
    })
}

/// T_{λV}(μ_ε) over the chained spherical measure of V.
pub fn estimate_t_simplex(
    mu_eps: &GridFunction,
    epsilon: f64,
    v: &Simplex,
    lambda: f64,
    n: usize,
    streams: &Streams,
) -> Result<CountEstimate> {
    let sampler = ChainSampler::simplex(v);
    let c = coupled_counts(&[mu_eps], &sampler, lambda, n, streams)?;
    Ok(CountEstimate::from_moments(&c.values[0], lambda, epsilon))
}

/// T_{λΓ₀}(μ_ε) over φ·ω_F, with the mean sample mass ∫ φ dω_F alongside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphEstimate {
    pub estimate: CountEstimate,
    pub reference_mass: f64,
}

impl GraphEstimate {
    /// The estimate divided by the recorded ω_F mass.
    pub fn normalized(&self) -> CountEstimate {
        let mut e = self.estimate;
        if self.reference_mass > 0.0 {
            e.value /= self.reference_mass;
            e.std_error /= self.reference_mass;
        }
        e
    }
}

pub fn estimate_t_graph(
    mu_eps: &GridFunction,
    epsilon: f64,
    graph: &DistanceGraph,
    lambda: f64,
    eta: f64,
    n: usize,
    streams: &Streams,
) -> Result<GraphEstimate> {
    let order = graph.elimination_order();
    let sampler = ChainSampler::graph(graph, &order.order, eta)?;
    let c = coupled_counts(&[mu_eps], &sampler, lambda, n, streams)?;
    Ok(GraphEstimate {
        estimate: CountEstimate::from_moments(&c.values[0], lambda, epsilon),
        reference_mass: c.reference_mass.mean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelescopingEstimate {
    /// T at scale 2ε.
    pub coarse: CountEstimate,
    /// T at scale ε.
    pub fine: CountEstimate,
    /// T(μ_{2ε}) − T(μ_ε) on common random numbers.
    pub difference: f64,
    pub std_error: f64,
}

impl TelescopingEstimate {
    pub fn abs_difference(&self) -> f64 {
        self.difference.abs()
    }
}

/// Coupled estimates from already mollified densities at 2ε and ε.
pub fn telescoping_from_fields(
    coarse: &GridFunction,
    fine: &GridFunction,
    sampler: &ChainSampler,
    lambda: f64,
    epsilon: f64,
    n: usize,
    streams: &Streams,
) -> Result<TelescopingEstimate> {
    let c = coupled_counts(&[coarse, fine], sampler, lambda, n, streams)?;
    Ok(TelescopingEstimate {
        coarse: CountEstimate::from_moments(&c.values[0], lambda, 2.0 * epsilon),
        fine: CountEstimate::from_moments(&c.values[1], lambda, epsilon),
        difference: c.differences[0].mean,
        std_error: c.differences[0].std_error(),
    })
}

/// |T_{λV}(μ_{2ε}) − T_{λV}(μ_ε)| with both densities mollified on `grid`.
pub fn telescoping_difference(
    mu: &PointMassMeasure,
    v: &Simplex,
    lambda: f64,
    epsilon: f64,
    grid: &GridSpec,
    n: usize,
    streams: &Streams,
) -> Result<TelescopingEstimate> {
    let floor = RESOLUTION_FACTOR * mu.resolution();
    if epsilon < floor * (1.0 - 1e-12) {
        return Err(Error::BelowResolution { epsilon, floor });
    }
    let coarse = mollify(mu, &MollifierSpec::new((2.0 * epsilon).min(1.0)), grid)?;
    let fine = mollify(mu, &MollifierSpec::new(epsilon), grid)?;
    telescoping_from_fields(&coarse, &fine, &ChainSampler::simplex(v), lambda, epsilon, n, streams)
}

/// Telescoping differences at successive halvings ε₀ > ε₀/2 > ⋯ from one
/// coupled pass, so every difference shares the same x and chains.
pub fn telescoping_ladder(
    mu: &PointMassMeasure,
    v: &Simplex,
    lambda: f64,
    epsilons: &[f64],
    grid: &GridSpec,
    n: usize,
    streams: &Streams,
) -> Result<Vec<TelescopingEstimate>> {
    if epsilons.is_empty() {
        return Err(invalid("need at least one scale"));
    }
    if epsilons.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-9) {
        return Err(invalid("scales must be successive halvings, largest first"));
    }
    let floor = RESOLUTION_FACTOR * mu.resolution();
    if let Some(&e) = epsilons.iter().find(|&&e| e < floor * (1.0 - 1e-12)) {
        return Err(Error::BelowResolution { epsilon: e, floor });
    }
    let mut scales = vec![(2.0 * epsilons[0]).min(1.0)];
    scales.extend_from_slice(epsilons);
    let fields = scales
        .iter()
        .map(|&e| mollify(mu, &MollifierSpec::new(e), grid))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&GridFunction> = fields.iter().collect();
    let c = coupled_counts(&refs, &ChainSampler::simplex(v), lambda, n, streams)?;
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| TelescopingEstimate {
            coarse: CountEstimate::from_moments(&c.values[i], lambda, scales[i]),
            fine: CountEstimate::from_moments(&c.values[i + 1], lambda, eps),
            difference: c.differences[i].mean,
            std_error: c.differences[i].std_error(),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub fit: LinearFit,
    /// (k − ½)(s − k) + ¼.
    pub predicted: f64,
    /// Measured decay is at least as fast as the bound: slope ≥ predicted
    /// minus the 95% half-width.
    pub consistent_with_bound: bool,
}

pub fn predicted_exponent(k: usize, s: f64) -> f64 {
    let k = k as f64;
    (k - 0.5) * (s - k) + 0.25
}

/// Least-squares slope of log|ΔT| against log ε, from at least four points
/// spanning two octaves.
pub fn decay_regression(pairs: &[(f64, f64)], k: usize, s: f64) -> Result<DecayFit> {
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    if pairs.len() < 4 || hi / lo < 4.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientSpan { needed: 4, octaves: 2.0 });
    }
    if pairs.iter().any(|&(e, t)| !(e > 0.0) || !(t > 0.0)) {
        return Err(invalid("decay regression needs positive ε and |ΔT|"));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let fit = loglog_fit(&xs, &ys)?;
    let predicted = predicted_exponent(k, s);
    Ok(DecayFit {
        fit,
        predicted,
        consistent_with_bound: fit.slope + fit.slope_ci95 >= predicted,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperlevelSet {
    pub indicator: GridFunction,
    /// Lebesgue measure of A_ε by grid quadrature.
    pub measure: f64,
    /// α = ∫ f_ε.
    pub alpha: f64,
    /// c in f_ε = c ε^{k−s} μ̃_ε, chosen so that sup f_ε = 1.
    pub c: f64,
}

/// A_ε = {f_ε ≥ α/2} for f_ε = c ε^{k−s} μ̃_ε with c = 1/(ε^{k−s} sup μ̃_ε).
/// Fails with an invariant violation when |A_ε| < α/2 beyond one cell.
pub fn superlevel_set(mu_tilde: &GridFunction, s: f64, epsilon: f64) -> Result<SuperlevelSet> {
    let sup = mu_tilde.sup();
    if !(sup > 0.0 && sup.is_finite()) || mu_tilde.min_value() < 0.0 {
        return Err(Error::Normalization(sup));
    }
    let k = mu_tilde.dim() as f64;
    let scale = epsilon.powf(k - s);
    let c = 1.0 / (scale * sup);
    let f = mu_tilde.map(|v| c * scale * v);
    if f.sup() > 1.0 + 1e-12 {
        return Err(Error::Normalization(f.sup()));
    }
    let alpha = f.mass();
    let indicator = f.map(|v| if v >= 0.5 * alpha { 1.0 } else { 0.0 });
    let measure = indicator.mass();
    let tol = mu_tilde.spec().cell_volume().max(1e-3);
    if measure < 0.5 * alpha - tol {
        return Err(Error::InvariantViolation(format!(
            "superlevel set has measure {measure} below α/2 = {}",
            0.5 * alpha
        )));
    }
    Ok(SuperlevelSet {
        indicator,
        measure,
        alpha,
        c,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaScan {
    pub estimates: Vec<CountEstimate>,
    /// Trapezoid rule for ∫ λ^{1/2} T(λ) dλ over the given λ range.
    pub integral: f64,
    pub integral_std_error: f64,
    /// Set when the λ grid has a single point and the integral is 0.
    pub zero_width: bool,
}

/// T at each λ (independent streams per λ) and the λ^{1/2}-weighted integral.
pub fn lambda_scan(
    mu_eps: &GridFunction,
    epsilon: f64,
    sampler: &ChainSampler,
    lambdas: &[f64],
    n: usize,
    streams: &Streams,
) -> Result<LambdaScan> {
    if lambdas.is_empty() {
        return Err(invalid("λ grid is empty"));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut estimates = Vec::with_capacity(sorted.len());
    for (i, &lambda) in sorted.iter().enumerate() {
        let c = coupled_counts(&[mu_eps], sampler, lambda, n, &streams.derive(i as u64))?;
        estimates.push(CountEstimate::from_moments(&c.values[0], lambda, epsilon));
    }
    let mut weights = vec![0.0; sorted.len()];
    for i in 1..sorted.len() {
        let h = 0.5 * (sorted[i] - sorted[i - 1]);
        weights[i - 1] += h;
        weights[i] += h;
    }
    let integral = estimates.iter().zip(&weights).map(|(e, w)| w * e.lambda.sqrt() * e.value).sum();
    let var: f64 = estimates
        .iter()
        .zip(&weights)
        .map(|(e, w)| (w * e.lambda.sqrt() * e.std_error).powi(2))
        .sum();
    Ok(LambdaScan {
        estimates,
        integral,
        integral_std_error: var.sqrt(),
        zero_width: sorted.len() == 1,
    })
}

/// CSV rows `lambda,epsilon,T,std_err,n_samples`.
pub fn write_estimates_csv<W: std::io::Write>(rows: &[CountEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "epsilon", "T", "std_err", "n_samples"])?;
    for r in rows {
        w.write_record([
            format!("{:.17e}", r.lambda),
            format!("{:.17e}", r.epsilon),
            format!("{:.17e}", r.value),
            format!("{:.17e}", r.std_error),
            r.n_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mollify::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn plateau(half: f64, inner: f64, n: usize) -> GridFunction {
        let g = GridSpec::new(2, half, n).unwrap();
        GridFunction::from_fn(g, |x| if x[0].abs() < inner && x[1].abs() < inner { 1.0 } else { 0.0 })
    }

    #[test]
    fn far_apart_copies_count_zero() {
        let f = plateau(2.0, 0.2, 64);
        let v = Simplex::equilateral_triangle(2).unwrap();
        let e = estimate_t_simplex(&f, 0.0, &v, 1.0, 20_000, &Streams::new(1)).unwrap();
        assert_eq!(e.value, 0.0);
        let zero = GridFunction::zeros(*f.spec());
        let g = DistanceGraph::complete(&v);
        let e = estimate_t_graph(&zero, 0.0, &g, 0.5, f64::INFINITY, 1000, &Streams::new(1)).unwrap();
        assert_eq!(e.estimate.value, 0.0);
    }

    #[test]
    fn identical_fields_telescope_to_zero() {
        let f = plateau(2.0, 1.0, 64);
        let v = Simplex::equilateral_triangle(2).unwrap();
        let t = telescoping_from_fields(&f, &f, &ChainSampler::simplex(&v), 0.3, 0.1, 20_000, &Streams::new(3)).unwrap();
        assert_eq!(t.difference, 0.0);
        assert_eq!(t.std_error, 0.0);
        assert!(t.coarse.value > 0.0);
    }

    #[test]
    fn pointwise_larger_fields_count_more() {
        let small = plateau(2.0, 0.8, 64);
        let big = plateau(2.0, 1.0, 64);
        let v = Simplex::equilateral_triangle(2).unwrap();
        let s = ChainSampler::simplex(&v);
        let c = coupled_counts(&[&big, &small], &s, 0.5, 20_000, &Streams::new(2)).unwrap();
        assert!(c.values[0].mean >= c.values[1].mean);
        assert!(c.differences[0].mean >= 0.0);
    }

    #[test]
    fn boundary_mass_is_rejected() {
        let f = plateau(1.0, 2.0, 32);
        let v = Simplex::equilateral_triangle(2).unwrap();
        let e = estimate_t_simplex(&f, 0.0, &v, 0.5, 100, &Streams::new(1));
        assert!(matches!(e, Err(Error::BoxCoverage(_))));
    }

    #[test]
    fn exact_power_law_slope() {
        let pairs: Vec<(f64, f64)> = (0..5).map(|i| 0.5f64.powi(i + 2)).map(|e| (e, 3.0 * e.powf(0.7))).collect();
        let f = decay_regression(&pairs, 2, 2.0).unwrap();
        assert!((f.fit.slope - 0.7).abs() < 1e-6);
        assert_eq!(f.predicted, 0.25);
        assert!(matches!(
            decay_regression(&pairs[..3], 2, 2.0),
            Err(Error::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn noisy_power_law_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pairs: Vec<(f64, f64)> = (0..8)
            .map(|i| 0.5f64.powi(i + 1))
            .map(|e| (e, 3.0 * e.powf(0.7) * (1.0 + noise.sample(&mut rng))))
            .collect();
        let f = decay_regression(&pairs, 2, 2.0).unwrap();
        assert!((f.fit.slope - 0.7).abs() < 0.05);
    }

    #[test]
    fn superlevel_examples() {
        // constant density on a box of volume 1: A is the whole box
        let g = GridSpec::new(2, 0.5, 16).unwrap();
        let f = GridFunction::from_fn(g, |_| 1.0);
        let a = superlevel_set(&f, 2.0, 0.1).unwrap();
        assert!((a.measure - 1.0).abs() < 1e-12);
        // on a box of volume 16 a flat density has no point above α/2
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |_| 1.0 / 16.0);
        assert!(matches!(superlevel_set(&f, 2.0, 0.1), Err(Error::InvariantViolation(_))));
        let zero = GridFunction::zeros(g);
        assert!(matches!(superlevel_set(&zero, 2.0, 0.1), Err(Error::Normalization(_))));
    }

    #[test]
    fn single_lambda_scan_flags_zero_width() {
        let f = plateau(2.0, 1.0, 64);
        let v = Simplex::equilateral_triangle(2).unwrap();
        let s = lambda_scan(&f, 0.1, &ChainSampler::simplex(&v), &[0.5], 5000, &Streams::new(1)).unwrap();
        assert!(s.zero_width);
        assert_eq!(s.integral, 0.0);
        assert!(s.estimates[0].value > 0.0);
    }

    #[test]
    fn estimates_csv_header() {
        let mut buf = Vec::new();
        let e = CountEstimate {
            lambda: 0.5,
            epsilon: 0.1,
            value: 1.0,
            std_error: 0.1,
            n_samples: 10,
        };
        write_estimates_csv(&[e], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lambda,epsilon,T,std_err,n_samples\n"));
    }
}
