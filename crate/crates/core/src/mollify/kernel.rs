//! The band-limited mollifier.
//!
//! With χ(ξ) = exp(−1/(1−|2ξ|²)) on |ξ| < 1/2, the kernel is
//! ψ = |χ̌|² / ‖χ‖₂², so ψ ≥ 0, ∫ψ = 1 and ψ̂ = (χ⋆χ)/(χ⋆χ)(0) is supported in
//! the unit ball with ψ̂(0) = 1. Both ψ and ψ̂ are radial and tabulated once per
//! dimension.

use crate::error::{invalid, Result};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::radial::{bump, unit_sphere_area};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Radius (in units of the effective scale) where the kernel table ends.
pub const TABLE_RADIUS: f64 = 48.0;
const TABLE_STEPS_PER_UNIT: usize = 256;
const HAT_STEPS: usize = 1024;
const MAX_TABLE_DIM: usize = 8;

/// Parameters of ψ_ε and of the truncated kernel ψ̃_ε = ψ_ε·φ(c ε^{−1/2} ·).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollifierSpec {
    pub epsilon: f64,
    /// Support radius of χ on the frequency side; ψ̂ is supported in twice this.
    pub bump_support_radius: f64,
    pub truncation_c: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Self {
        MollifierSpec {
            epsilon,
            bump_support_radius: 0.5,
            truncation_c: 0.25,
        }
    }

    pub fn with_truncation(mut self, c: f64) -> Self {
        self.truncation_c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid(format!("epsilon {} not in (0,1]", self.epsilon)));
        }
        if !(self.bump_support_radius > 0.0 && self.bump_support_radius <= 0.5) {
            return Err(invalid("bump support radius must lie in (0, 1/2]"));
        }
        if !(self.truncation_c > 0.0 && self.truncation_c.is_finite()) {
            return Err(invalid("truncation constant must be positive"));
        }
        Ok(())
    }

    /// Spatial scale of ψ_ε relative to the reference kernel.
    pub fn effective_scale(&self) -> f64 {
        self.epsilon / (2.0 * self.bump_support_radius)
    }

    /// Radius beyond which φ(c ε^{−1/2} x) vanishes.
    pub fn truncation_radius(&self) -> f64 {
        2.0 * self.epsilon.sqrt() / self.truncation_c
    }
}

/// Tabulated reference kernel ψ and its transform ψ̂ in one dimension k.
pub struct KernelTable {
    k: usize,
    step: f64,
    psi: Vec<f64>,
    /// Mass of ψ outside radius i·step.
    tail: Vec<f64>,
    hat: Vec<f64>,
}

fn chi(r: f64) -> f64 {
    bump(2.0 * r)
}

impl KernelTable {
    fn build(k: usize) -> KernelTable {
        let area = unit_sphere_area(k - 1);
        // χ̌ is radial, so χ̌(ρ) = ∫ P(t) cos(2πρt) dt with P the projection of
        // χ onto one axis
        let (t, wt) = gauss_legendre_on(160, 0.0, 0.5);
        let proj: Vec<f64> = t.iter().map(|&x| projection(k, x)).collect();
        let (r, wr) = gauss_legendre_on(160, 0.0, 0.5);
        let norm2: f64 = area
            * r.iter()
                .zip(&wr)
                .map(|(ri, wi)| wi * chi(*ri).powi(2) * ri.powi(k as i32 - 1))
                .sum::<f64>();
        let step = 1.0 / TABLE_STEPS_PER_UNIT as f64;
        let n = (TABLE_RADIUS / step) as usize + 1;
        let psi: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let rho = i as f64 * step;
                let c: f64 = 2.0
                    * t.iter()
                        .zip(&wt)
                        .zip(&proj)
                        .map(|((x, w), p)| w * p * (2.0 * PI * rho * x).cos())
                        .sum::<f64>();
                c * c / norm2
            })
            .collect();

        // cumulative radial mass; the difference to the total cancels the
        // trapezoid bias at the origin
        let mut cum = vec![0.0; n];
        let dens = |i: usize| area * psi[i] * (i as f64 * step).powi(k as i32 - 1);
        for i in 1..n {
            cum[i] = cum[i - 1] + 0.5 * step * (dens(i - 1) + dens(i));
        }
        let total = cum[n - 1];
        let tail = cum.iter().map(|c| (total - c).max(0.0)).collect();

        let hat = hat_table(k);
        KernelTable {
            k,
            step,
            psi,
            tail,
            hat,
        }
    }

    /// Cached table for dimension k.
    pub fn get(k: usize) -> &'static KernelTable {
        static TABLES: [OnceLock<KernelTable>; MAX_TABLE_DIM] = [const { OnceLock::new() }; MAX_TABLE_DIM];
        assert!((1..=MAX_TABLE_DIM).contains(&k), "kernel tables exist for dimensions 1..={MAX_TABLE_DIM}");
        TABLES[k - 1].get_or_init(|| KernelTable::build(k))
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// Reference kernel ψ at radius ρ; Catmull-Rom interpolation, clamped ≥ 0.
    pub fn psi(&self, rho: f64) -> f64 {
        catmull_rom(&self.psi, rho / self.step)
    }

    /// Reference transform ψ̂ at frequency radius q; zero for q ≥ 1.
    pub fn psi_hat(&self, q: f64) -> f64 {
        if q >= 1.0 {
            return 0.0;
        }
        catmull_rom(&self.hat, q * HAT_STEPS as f64).min(1.0)
    }

    /// Smallest tabulated radius with mass of ψ outside it at most `tol`.
    pub fn tail_radius(&self, tol: f64) -> f64 {
        let i = self.tail.partition_point(|&t| t > tol);
        (i as f64 * self.step).min(TABLE_RADIUS)
    }

    /// Mass of ψ outside radius ρ.
    pub fn tail_mass(&self, rho: f64) -> f64 {
        let i = ((rho / self.step).ceil() as usize).min(self.tail.len() - 1);
        self.tail[i]
    }
}

/// ∫ over ℝ^{k−1} of χ(√(t² + |η|²)) dη.
fn projection(k: usize, t: f64) -> f64 {
    if k == 1 {
        return chi(t);
    }
    let rmax = (0.25 - t * t).max(0.0).sqrt();
    let (r, w) = gauss_legendre_on(64, 0.0, rmax);
    unit_sphere_area(k - 2)
        * r.iter()
            .zip(&w)
            .map(|(ri, wi)| wi * chi(t.hypot(*ri)) * ri.powi(k as i32 - 2))
            .sum::<f64>()
}

/// ψ̂(q) = (χ⋆χ)(q e₁)/(χ⋆χ)(0) by Gauss–Legendre in cylindrical coordinates
/// (axial η₁, transverse radius ρ).
fn hat_table(k: usize) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(64);
    let corr = |q: f64| -> f64 {
        let (e, we) = gauss_legendre_on(96, q - 0.5, 0.5);
        if k == 1 {
            return e.iter().zip(&we).map(|(x, w)| w * chi(x.abs()) * chi((x - q).abs())).sum();
        }
        let area = unit_sphere_area(k - 2);
        e.iter()
            .zip(&we)
            .map(|(x, w)| {
                let m = x.abs().max((x - q).abs());
                if m >= 0.5 {
                    return 0.0;
                }
                let half = 0.5 * (0.25 - m * m).sqrt();
                let inner: f64 = gx
                    .iter()
                    .zip(&gw)
                    .map(|(u, v)| {
                        let r = half * (1.0 + u);
                        v * half * area * r.powi(k as i32 - 2) * chi(x.hypot(r)) * chi((x - q).hypot(r))
                    })
                    .sum();
                w * inner
            })
            .sum()
    };
    let c0 = corr(0.0);
    (0..=HAT_STEPS)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 / HAT_STEPS as f64;
            if i == HAT_STEPS {
                0.0
            } else {
                (corr(q) / c0).clamp(0.0, 1.0)
            }
        })
        .collect()
}

/// Catmull-Rom spline through samples at integer abscissae; even extension
/// below 0, zero beyond the end.
fn catmull_rom(table: &[f64], u: f64) -> f64 {
    let u = u.abs();
    let n = table.len();
    if u >= (n - 1) as f64 {
        return 0.0;
    }
    let i = u.floor() as usize;
    let t = u - i as f64;
    let at = |j: isize| -> f64 {
        let j = j.unsigned_abs();
        if j < n {
            table[j]
        } else {
            0.0
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let v = 0.5
        * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * (p1 - p2) + p3 - p0) * t * t * t);
    v.max(0.0)
}

/// Mollifier ψ_ε in a fixed dimension.
#[derive(Clone, Copy)]
pub struct Kernel {
    pub spec: MollifierSpec,
    table: &'static KernelTable,
    scale: f64,
    norm: f64,
}

impl Kernel {
    pub fn new(spec: MollifierSpec, k: usize) -> Result<Kernel> {
        spec.validate()?;
        if !(1..=MAX_TABLE_DIM).contains(&k) {
            return Err(invalid(format!("kernel dimension {k} not supported")));
        }
        let scale = spec.effective_scale();
        Ok(Kernel {
            spec,
            table: KernelTable::get(k),
            scale,
            norm: scale.powi(-(k as i32)),
        })
    }

    pub fn dim(&self) -> usize {
        self.table.k
    }

    /// ψ_ε at distance r from the origin.
    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        self.norm * self.table.psi(r / self.scale)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.radial(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Truncated kernel ψ̃_ε at distance r.
    #[inline]
    pub fn truncated_radial(&self, r: f64) -> f64 {
        let y = self.spec.truncation_c * r / self.spec.epsilon.sqrt();
        let phi = crate::radial::cutoff(y);
        if phi == 0.0 {
            0.0
        } else {
            phi * self.radial(r)
        }
    }

    /// ψ̂_ε at frequency radius |ξ|.
    pub fn hat_radial(&self, xi: f64) -> f64 {
        self.table.psi_hat(self.scale * xi)
    }

    /// Radius outside which ψ_ε carries at most `tol` of its mass.
    pub fn tail_radius(&self, tol: f64) -> f64 {
        self.scale * self.table.tail_radius(tol)
    }

    /// Largest radius where the table is nonzero.
    pub fn table_radius(&self) -> f64 {
        self.scale * TABLE_RADIUS
    }
}

/// ψ_ε(x) for the given spec, in dimension `x.len()`.
pub fn kernel_profile(spec: &MollifierSpec, x: &[f64]) -> Result<f64> {
    Ok(Kernel::new(*spec, x.len())?.value(x))
}
