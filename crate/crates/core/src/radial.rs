//! Radial special functions: sphere areas, sphere-averaged plane waves and
//! the compact bump profiles shared by the mollifier and the samplers.

use crate::quadrature::{adaptive_gk, periodic_trapezoid};
use std::f64::consts::PI;

/// Γ(n/2) for a positive integer n.
pub fn gamma_half(n: usize) -> f64 {
    assert!(n > 0);
    if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x + 1e-9 < n as f64 / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface area of the unit p-sphere S^p ⊂ ℝ^{p+1}; |S^0| = 2 (two points).
pub fn unit_sphere_area(p: usize) -> f64 {
    2.0 * PI.powf((p as f64 + 1.0) / 2.0) / gamma_half(p + 1)
}

/// Surface area of a p-sphere of the given radius.
pub fn sphere_area(p: usize, radius: f64) -> f64 {
    unit_sphere_area(p) * radius.powi(p as i32)
}

/// Bessel J0 through its periodic integral representation
/// J0(t) = (1/2π) ∫ cos(t sin θ) dθ over a full period.
pub fn bessel_j0(t: f64) -> f64 {
    let n = 2 * ((t.abs() / 2.0) as usize + 24);
    periodic_trapezoid(|th| (t * th.sin()).cos(), n) / (2.0 * PI)
}

/// Average of cos(t ω₁) over the unit sphere S^{n-1} ⊂ ℝ^n, i.e. the
/// Fourier transform of the normalized sphere measure at radius·frequency t
/// (up to the 2π factor supplied by the caller). Equals 1 at t = 0.
pub fn sphere_average_cos(n: usize, t: f64) -> f64 {
    assert!(n >= 1);
    let t = t.abs();
    match n {
        1 => t.cos(),
        2 => bessel_j0(t),
        3 => {
            if t < 1e-4 {
                1.0 - t * t / 6.0 + t.powi(4) / 120.0
            } else {
                t.sin() / t
            }
        }
        _ => {
            if t == 0.0 {
                return 1.0;
            }
            let p = (n - 2) as i32;
            let z = PI.sqrt() * gamma_half(n - 1) / gamma_half(n);
            adaptive_gk(|th| (t * th.cos()).cos() * th.sin().powi(p), 0.0, PI, 1e-12) / z
        }
    }
}

/// The compact bump exp(-1/(1-u²)) on |u| < 1, zero outside.
#[inline]
pub fn bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// Bump rescaled to width `eta` with value 1 at the center.
#[inline]
pub fn unit_bump(r: f64, eta: f64) -> f64 {
    if eta.is_infinite() {
        return 1.0;
    }
    bump(r / eta) * std::f64::consts::E
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let a = f(t);
    a / (a + f(1.0 - t))
}

/// Smooth radial cut-off: 1 for |x| ≤ 1/2, 0 for |x| ≥ 2, values in [0, 1].
#[inline]
pub fn cutoff(r: f64) -> f64 {
    smooth_step((2.0 - r) / 1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(0) - 2.0).abs() < 1e-15);
        assert!((unit_sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn j0_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!(bessel_j0(2.404_825_557_695_773).abs() < 1e-14);
        assert!((bessel_j0(100.0) - 0.019_985_850_304_223_12).abs() < 1e-13);
    }

    #[test]
    fn general_sphere_average_matches_closed_forms() {
        // n = 3 via the generic branch should agree with sin t / t.
        for &t in &[0.3, 2.0, 17.0] {
            let p = 1;
            let z = 2.0;
            let v = adaptive_gk(|th| (t * th.cos()).cos() * th.sin().powi(p), 0.0, PI, 1e-13) / z;
            assert!((v - sphere_average_cos(3, t)).abs() < 1e-11);
        }
        // n = 4: Ω_4(t) = 2 J1(t)/t; J1(1) = 0.44005058574493355
        assert!((sphere_average_cos(4, 1.0) - 2.0 * 0.440_050_585_744_933_55).abs() < 1e-10);
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.0), 0.0);
        assert!(cutoff(1.2) > 0.0 && cutoff(1.2) < 1.0);
        assert!((unit_bump(0.0, 0.3) - 1.0).abs() < 1e-15);
        assert_eq!(unit_bump(0.3, 0.3), 0.0);
    }
}
