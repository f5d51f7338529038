//! Fourier-side diagnostics with the convention f̂(ξ) = ∫ f(x) e^{−2πi x·ξ} dx.
//!
//! Transforms of atomic measures are exact exponential sums evaluated on a
//! symmetric frequency grid; nothing is computed by FFT here.

use crate::error::{invalid, Error, Result};
use crate::euclid_config::{Simplex, SphereSlice};
use crate::linalg::{dot, norm};
use crate::measure_forge::PointMassMeasure;
use crate::mollify::{Kernel, MollifierSpec};
use crate::radial::sphere_average_cos;
use crate::rng::{chunked, Streams};
use crate::sampler::{ChainSampler, Scratch};
use crate::stats::{loglog_fit, LinearFit, Moments};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Oversampling of the atom-side support used when a grid is chosen
/// automatically; the resolution requirement is a factor 4.
const AUTO_OVERSAMPLING: f64 = 8.0;
const REQUIRED_OVERSAMPLING: f64 = 4.0;

/// Nodes jΔ, j ∈ [−m, m]^k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyGrid {
    pub dim: usize,
    pub spacing: f64,
    pub half_count: usize,
}

impl FrequencyGrid {
    pub fn new(dim: usize, spacing: f64, half_count: usize) -> Result<FrequencyGrid> {
        if dim == 0 {
            return Err(invalid("frequency grid needs a positive dimension"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("frequency spacing must be positive"));
        }
        let side = 2 * half_count + 1;
        if (side as f64).powi(dim as i32) > 5e7 {
            return Err(invalid(format!("{side}^{dim} frequency nodes is too many")));
        }
        Ok(FrequencyGrid {
            dim,
            spacing,
            half_count,
        })
    }

    /// Grid covering |ξ| ≤ 1/ε (the support of ψ̂(ε·)) at spacing
    /// 1/(8·diam supp μ).
    pub fn for_identity(mu: &PointMassMeasure, epsilon: f64) -> Result<FrequencyGrid> {
        let diam = support_diameter(mu).max(epsilon);
        let spacing = 1.0 / (AUTO_OVERSAMPLING * diam);
        FrequencyGrid::new(mu.dim(), spacing, (1.0 / (epsilon * spacing)).ceil() as usize)
    }

    pub fn side(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_frequency(&self) -> f64 {
        self.half_count as f64 * self.spacing
    }

    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let side = self.side();
        let mut xi = vec![0.0; self.dim];
        for x in xi.iter_mut().rev() {
            *x = ((flat % side) as f64 - self.half_count as f64) * self.spacing;
            flat /= side;
        }
        xi
    }

    /// Flat index of the zero frequency.
    pub fn origin(&self) -> usize {
        (0..self.dim).fold(0, |acc, _| acc * self.side() + self.half_count)
    }

    /// Flat index of −ξ for the node at `flat`.
    pub fn mirror(&self, flat: usize) -> usize {
        self.len() - 1 - flat
    }
}

/// μ̂ sampled on a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn abs2(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn at_zero(&self) -> Complex64 {
        self.values[self.grid.origin()]
    }

    /// Largest |μ̂(−ξ) − conj μ̂(ξ)| over the grid.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[self.grid.mirror(i)] - self.values[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// CSV with header `xi1,…,xik,re,im,abs2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.grid.dim).map(|i| format!("xi{i}")).collect();
        header.extend(["re", "im", "abs2"].map(String::from));
        w.write_record(&header)?;
        for (i, z) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.grid.node(i).iter().map(|x| x.to_string()).collect();
            row.extend([z.re, z.im, z.norm_sqr()].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// μ̂(ξ) = Σ w_a e^{−2πi a·ξ}.
pub fn fourier_at(mu: &PointMassMeasure, xi: &[f64]) -> Complex64 {
    mu.atoms()
        .map(|(a, w)| Complex64::from_polar(w, -2.0 * PI * dot(a, xi)))
        .sum()
}

/// Exact transform on every grid node. The phase factorizes over axes, so
/// per-axis tables are built once per atom.
pub fn measure_spectrum(mu: &PointMassMeasure, grid: &FrequencyGrid) -> Result<SpectrumGrid> {
    if mu.dim() != grid.dim {
        return Err(invalid(format!(
            "measure is {}-dimensional, frequency grid is {}-dimensional",
            mu.dim(),
            grid.dim
        )));
    }
    let side = grid.side();
    let k = grid.dim;
    let m = grid.half_count as f64;
    let atoms: Vec<(Vec<Vec<Complex64>>, f64)> = mu
        .atoms()
        .map(|(a, w)| {
            let tables = a
                .iter()
                .map(|&x| {
                    (0..side)
                        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * x * (j as f64 - m) * grid.spacing))
                        .collect()
                })
                .collect();
            (tables, w)
        })
        .collect();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let mut idx = vec![0usize; k];
            let mut f = flat;
            for i in idx.iter_mut().rev() {
                *i = f % side;
                f /= side;
            }
            atoms
                .iter()
                .map(|(tables, w)| idx.iter().zip(tables).fold(Complex64::new(*w, 0.0), |acc, (&j, t)| acc * t[j]))
                .sum()
        })
        .collect();
    Ok(SpectrumGrid { grid: *grid, values })
}

fn support_diameter(mu: &PointMassMeasure) -> f64 {
    let (lo, hi) = mu.bounding_box();
    lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    /// ∫ |μ̂(ξ)|² ψ̂(εξ) dξ by the trapezoid rule on the grid.
    pub lhs: f64,
    /// Σ_a w_a μ_ε(a), with μ_ε evaluated exactly at the atoms.
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Compares the frequency-side energy with the atom-side pairing. The grid
/// defaults to [`FrequencyGrid::for_identity`].
pub fn spectral_identity_check(
    mu: &PointMassMeasure,
    spec: &MollifierSpec,
    grid: Option<FrequencyGrid>,
) -> Result<IdentityCheck> {
    let kernel = Kernel::new(*spec, mu.dim())?;
    let grid = match grid {
        Some(g) => g,
        None => FrequencyGrid::for_identity(mu, spec.epsilon)?,
    };
    let support = 1.0 / spec.effective_scale();
    if grid.max_frequency() < support {
        return Err(invalid(format!(
            "frequency grid reaches {} but ψ̂(ε·) is supported up to {support}",
            grid.max_frequency()
        )));
    }
    let diam = support_diameter(mu);
    if diam > 0.0 {
        let limit = 1.0 / (REQUIRED_OVERSAMPLING * diam);
        if grid.spacing > limit {
            return Err(Error::UnderResolved {
                spacing: grid.spacing,
                limit,
            });
        }
    }
    let spectrum = measure_spectrum(mu, &grid)?;
    let cell = grid.spacing.powi(grid.dim as i32);
    // collected before summing so the result does not depend on the pool size
    let terms: Vec<f64> = spectrum
        .values
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let h = kernel.hat_radial(norm(&grid.node(i)));
            if h == 0.0 {
                0.0
            } else {
                z.norm_sqr() * h
            }
        })
        .collect();
    let lhs = terms.iter().sum::<f64>() * cell;
    let pairings: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let a = mu.atom(i);
            mu.atoms()
                .map(|(b, w)| w * kernel.radial(crate::linalg::dist(a, b)))
                .sum::<f64>()
                * mu.weights()[i]
        })
        .collect();
    let rhs: f64 = pairings.iter().sum();
    Ok(IdentityCheck {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / rhs.abs(),
    })
}

/// σ̂(ξ) for the normalized surface measure on the slice:
/// e^{−2πi c·ξ} times the sphere average of a plane wave at 2πρ|P ξ|,
/// P the projection onto the slice's tangent space.
pub fn sphere_fourier(slice: &SphereSlice, xi: &[f64]) -> Complex64 {
    let phase = Complex64::from_polar(1.0, -2.0 * PI * dot(&slice.center, xi));
    let t = 2.0 * PI * slice.radius * norm(&slice.project_tangent(xi));
    let radial = if t == 0.0 {
        1.0
    } else {
        sphere_average_cos(slice.sphere_dim() + 1, t)
    };
    phase * radial
}

/// Monte Carlo value of I_λ(ξ) at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereDecayEstimate {
    pub lambda: f64,
    pub xi: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// I_λ(ξ) = E |σ̂(λξ)|², where the chain x₁, …, x_{n−1} of V is drawn from the
/// normalized chain measure and σ is the slice on which the last vertex
/// ranges given that chain.
pub fn i_lambda_estimate(v: &Simplex, lambda: f64, xi: &[f64], n: usize, streams: &Streams) -> Result<SphereDecayEstimate> {
    if xi.len() != v.ambient_dim() {
        return Err(invalid("frequency dimension differs from the simplex"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("λ must be finite and nonnegative"));
    }
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let sampler = ChainSampler::simplex(v);
    let last = sampler.order().len();
    let scaled: Vec<f64> = xi.iter().map(|x| lambda * x).collect();
    let parts = chunked(streams, n, |rng, count| -> Result<Moments> {
        let mut m = Moments::default();
        let mut coords = sampler.graph_ref().configuration();
        let mut scratch = Scratch::default();
        let mut steps = Vec::with_capacity(last);
        for _ in 0..count {
            steps.clear();
            sampler.draw_range(rng, &mut coords, 1, last, &mut scratch, Some(&mut steps))?;
            let slice = &steps.last().expect("a simplex has at least one chain step").slice;
            m.push(sphere_fourier(slice, &scaled).norm_sqr());
        }
        Ok(m)
    });
    let parts: Vec<Moments> = parts.into_iter().collect::<Result<_>>()?;
    let m = Moments::merge_all(parts.iter());
    Ok(SphereDecayEstimate {
        lambda,
        xi: xi.to_vec(),
        value: m.mean,
        std_error: m.std_error(),
        n_samples: m.n as usize,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereDecayFit {
    pub estimates: Vec<SphereDecayEstimate>,
    /// log I against log |ξ|.
    pub fit: LinearFit,
    /// Exponent of the (1 + r λ|ξ|)^{−1} bound.
    pub bound_exponent: f64,
}

/// I_λ along the ray t·direction for each t in `radii`, with a log-log slope.
pub fn i_lambda_decay(
    v: &Simplex,
    lambda: f64,
    direction: &[f64],
    radii: &[f64],
    n: usize,
    streams: &Streams,
) -> Result<SphereDecayFit> {
    let len = norm(direction);
    if !(len > 0.0) {
        return Err(invalid("direction must be nonzero"));
    }
    let estimates = radii
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let xi: Vec<f64> = direction.iter().map(|d| t * d / len).collect();
            i_lambda_estimate(v, lambda, &xi, n, &streams.derive(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let fit = loglog_fit(radii, &values)?;
    Ok(SphereDecayFit {
        estimates,
        fit,
        bound_exponent: -1.0,
    })
}

/// sup over |ξ| ≤ ε^{−1/2} of |ψ̂(2εξ) − ψ̂(εξ)|, scanned on a radial grid.
pub fn psi_hat_difference_sup(k: usize, epsilon: f64) -> Result<f64> {
    let kernel = Kernel::new(MollifierSpec::new(1.0), k)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(invalid("ε must lie in (0, 1]"));
    }
    let top = epsilon.powf(-0.5);
    let steps = 4096;
    Ok((0..=steps)
        .map(|i| {
            let r = top * i as f64 / steps as f64;
            (kernel.hat_radial(2.0 * epsilon * r) - kernel.hat_radial(epsilon * r)).abs()
        })
        .fold(0.0, f64::max))
}
