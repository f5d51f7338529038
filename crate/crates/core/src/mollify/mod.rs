//! Mollified densities μ_ε = μ∗ψ_ε and their truncations on box grids.

mod convolve;
mod grid;
mod kernel;

pub use grid::{GridFunction, GridSpec};
pub use kernel::{kernel_profile, Kernel, KernelTable, MollifierSpec, TABLE_RADIUS};

use crate::error::{invalid, Error, Result};
use crate::measure_forge::PointMassMeasure;
use crate::stats::{loglog_fit, LinearFit};

/// Kernel mass allowed to fall outside the grid box.
pub const MASS_TOLERANCE: f64 = 1e-4;

/// Kernel mass dropped by cutting the convolution off at a finite radius.
pub const CONVOLUTION_TAIL: f64 = 1e-10;

/// Smallest ε, in atom spacings, at which a finite-depth measure is trusted.
pub const RESOLUTION_FACTOR: f64 = 4.0;

fn check_box(mu: &PointMassMeasure, kernel: &Kernel, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    if mu.dim() != grid.dim {
        return Err(invalid(format!("measure is {}-dimensional, grid is {}-dimensional", mu.dim(), grid.dim)));
    }
    let required = mu.sup_abs_coordinate() + kernel.tail_radius(MASS_TOLERANCE);
    if required > grid.halfwidth {
        return Err(Error::BoxTooSmall {
            halfwidth: grid.halfwidth,
            required,
        });
    }
    Ok(())
}

/// μ_ε on the grid: Σ_a w_a ψ_ε(x − a) at each node.
pub fn mollify(mu: &PointMassMeasure, spec: &MollifierSpec, grid: &GridSpec) -> Result<GridFunction> {
    let kernel = Kernel::new(*spec, grid.dim)?;
    check_box(mu, &kernel, grid)?;
    let radius = kernel.tail_radius(CONVOLUTION_TAIL);
    let values = convolve::convolve_atoms(mu, grid, radius, |r| kernel.radial(r));
    let out = GridFunction::new(*grid, values)?;
    let mass = out.mass();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "mollified mass {mass} differs from 1 by more than {MASS_TOLERANCE}; grid spacing {} may exceed the kernel scale {}",
            grid.spacing(),
            kernel.spec.effective_scale()
        )));
    }
    Ok(out)
}

/// μ̃_ε = μ∗ψ̃_ε, clipped to [0, μ_ε] and exactly zero farther than the
/// truncation radius from every atom.
pub fn truncate(mu_eps: &GridFunction, mu: &PointMassMeasure, spec: &MollifierSpec) -> Result<GridFunction> {
    let grid = *mu_eps.spec();
    let kernel = Kernel::new(*spec, grid.dim)?;
    check_box(mu, &kernel, &grid)?;
    let support = spec.truncation_radius();
    let radius = kernel.tail_radius(CONVOLUTION_TAIL).min(support);
    let raw = convolve::convolve_atoms(mu, &grid, radius, |r| kernel.truncated_radial(r));
    // number of atoms strictly inside the support radius, up to rounding
    let near = convolve::convolve_atoms(&mu.counting(), &grid, support, |r| if r < support { 1.0 } else { 0.0 });
    let values: Vec<f64> = raw
        .iter()
        .zip(&near)
        .zip(mu_eps.values())
        .map(|((&v, &c), &cap)| if c < 0.5 { 0.0 } else { v.clamp(0.0, cap) })
        .collect();
    let out = GridFunction::new(grid, values)?;
    let mass = out.mass();
    if mass < 0.5 {
        return Err(Error::MassCollapse { mass });
    }
    Ok(out)
}

/// Measured sup norms of μ_ε and the log-log slope against ε.
#[derive(Clone, Debug)]
pub struct SupNormScaling {
    pub samples: Vec<(f64, f64)>,
    pub fit: LinearFit,
    /// s − k, the exponent in ‖μ_ε‖_∞ ≲ ε^{s−k}.
    pub predicted_slope: f64,
}

pub fn sup_norm_scaling(
    mu: &PointMassMeasure,
    s: f64,
    epsilons: &[f64],
    grid: &GridSpec,
) -> Result<SupNormScaling> {
    if epsilons.len() < 2 {
        return Err(Error::InsufficientSpan { needed: 2, octaves: 2.0 });
    }
    let lo = epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = epsilons.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 4.0 * (1.0 - 1e-12) {
        return Err(Error::InsufficientSpan { needed: epsilons.len(), octaves: 2.0 });
    }
    let floor = RESOLUTION_FACTOR * mu.resolution();
    if let Some(&e) = epsilons.iter().find(|&&e| e < floor * (1.0 - 1e-12)) {
        return Err(Error::BelowResolution { epsilon: e, floor });
    }
    let mut samples = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let f = mollify(mu, &MollifierSpec::new(eps), grid)?;
        samples.push((eps, f.sup()));
    }
    let xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.1).collect();
    Ok(SupNormScaling {
        fit: loglog_fit(&xs, &ys)?,
        samples,
        predicted_slope: s - mu.dim() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_forge::{build_cantor_dust, IteratedFunctionSystem};

    #[test]
    fn single_atom_reproduces_kernel() {
        let spec = MollifierSpec::new(0.25);
        let g = GridSpec::new(2, 4.0, 128).unwrap();
        let f = mollify(&PointMassMeasure::dirac(vec![0.0, 0.0]), &spec, &g).unwrap();
        let k = Kernel::new(spec, 2).unwrap();
        for i in (0..g.len()).step_by(37) {
            let x = g.node(i);
            assert!((f.values()[i] - k.value(&x)).abs() < 1e-12 * k.value(&[0.0, 0.0]));
        }
        assert!((f.mass() - 1.0).abs() < 1e-6, "{}", f.mass());
    }

    #[test]
    fn box_too_small() {
        let g = GridSpec::new(1, 1.0, 64).unwrap();
        let e = mollify(&PointMassMeasure::dirac(vec![0.9]), &MollifierSpec::new(0.1), &g);
        assert!(matches!(e, Err(Error::BoxTooSmall { .. })));
    }

    #[test]
    fn truncation_is_dominated_and_keeps_mass() {
        let mu = build_cantor_dust(&IteratedFunctionSystem::cantor_1d(5)).unwrap();
        let spec = MollifierSpec::new(1.0 / 64.0);
        let g = GridSpec::new(1, 2.0, 4096).unwrap();
        let me = mollify(&mu, &spec, &g).unwrap();
        let mt = truncate(&me, &mu, &spec).unwrap();
        assert!(mt.mass() >= 0.5);
        for (a, b) in mt.values().iter().zip(me.values()) {
            assert!(*a >= 0.0 && a <= b);
        }
    }

    #[test]
    fn sup_norm_floor() {
        let mu = build_cantor_dust(&IteratedFunctionSystem::sierpinski_2d(4)).unwrap();
        let g = GridSpec::new(2, 2.0, 64).unwrap();
        let e = sup_norm_scaling(&mu, mu.dimension_s(), &[0.25, 0.125, 0.0625], &g);
        assert!(matches!(e, Err(Error::BelowResolution { .. })));
        let e = sup_norm_scaling(&mu, mu.dimension_s(), &[0.5, 0.3], &g);
        assert!(matches!(e, Err(Error::InsufficientSpan { .. })));
    }
}
