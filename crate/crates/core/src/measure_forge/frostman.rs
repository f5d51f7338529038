//! Sampled Frostman constants and the rescaling that brings a measure to
//! constant at most 4 on the unit ball.

use super::PointMassMeasure;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dist2, Point};
use crate::rng::Streams;
use rand::Rng;
use rayon::prelude::*;

/// Constants above this are reported as divergent (atom-scale blow-up).
pub const DEFAULT_CEILING: f64 = 1e6;

/// Scan tolerance in the bound K' ≤ 4(1+τ) on a renormalized measure.
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct FrostmanReport {
    pub exponent_s: f64,
    pub constant_k: f64,
    pub witness_center: Point,
    pub witness_radius: f64,
    pub radii_scanned: Vec<f64>,
    /// True when `constant_k` exceeds [`DEFAULT_CEILING`].
    pub diverged: bool,
}

/// `count` radii spaced geometrically from `min` to `max` inclusive.
pub fn geometric_radii(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![max];
    }
    let q = (max / min).ln() / (count - 1) as f64;
    (0..count).map(|i| min * (q * i as f64).exp()).collect()
}

/// Sorted squared distances from `center` with matching prefix masses.
struct Profile {
    d2: Vec<f64>,
    mass: Vec<f64>,
}

impl Profile {
    fn new(mu: &PointMassMeasure, center: &[f64]) -> Profile {
        let mut pairs: Vec<(f64, f64)> = mu.atoms().map(|(a, w)| (dist2(a, center), w)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut acc = 0.0;
        let mut mass = Vec::with_capacity(pairs.len());
        for &(_, w) in &pairs {
            acc += w;
            mass.push(acc);
        }
        Profile {
            d2: pairs.into_iter().map(|p| p.0).collect(),
            mass,
        }
    }

    #[inline]
    fn ball(&self, r: f64) -> f64 {
        let r2 = r * r;
        let k = self.d2.partition_point(|&d| d <= r2);
        if k == 0 {
            0.0
        } else {
            self.mass[k - 1]
        }
    }
}

fn validate(mu: &PointMassMeasure, s: f64, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(invalid("radius list is empty"));
    }
    if !(s > 0.0) || s > mu.dim() as f64 + 1e-12 {
        return Err(invalid(format!("exponent {s} not in (0, {}]", mu.dim())));
    }
    if radii.iter().any(|&r| !(r > 0.0 && r <= 2.0 + 1e-12)) {
        return Err(invalid("radii must lie in (0, 2]"));
    }
    Ok(())
}

fn scan_centers(mu: &PointMassMeasure, n_random: usize, streams: &Streams) -> Vec<Point> {
    let mut centers: Vec<Point> = (0..mu.len()).map(|i| mu.atom(i).to_vec()).collect();
    let (lo, hi) = mu.bounding_box();
    let mut rng = streams.derive(0xF805).rng(0);
    for _ in 0..n_random {
        centers.push(
            lo.iter()
                .zip(&hi)
                .map(|(a, b)| if b > a { rng.random_range(*a..*b) } else { *a })
                .collect(),
        );
    }
    centers
}

/// Max of μ(B(x,r))/r^s over atom centers plus `n_random` uniform centers in
/// the bounding box, and the given radii. A lower bound for the supremum.
pub fn estimate_frostman_constant(
    mu: &PointMassMeasure,
    s: f64,
    n_random: usize,
    radii: &[f64],
    streams: &Streams,
) -> Result<FrostmanReport> {
    validate(mu, s, radii)?;
    let centers = scan_centers(mu, n_random, streams);
    let scale: Vec<f64> = radii.iter().map(|r| r.powf(-s)).collect();
    let best: Vec<(f64, usize)> = centers
        .par_iter()
        .map(|c| {
            let p = Profile::new(mu, c);
            let mut top = (f64::NEG_INFINITY, 0);
            for (j, &r) in radii.iter().enumerate() {
                let q = p.ball(r) * scale[j];
                if q > top.0 {
                    top = (q, j);
                }
            }
            top
        })
        .collect();
    // first maximum in center order keeps the witness deterministic
    let mut arg = 0;
    for (i, b) in best.iter().enumerate() {
        if b.0 > best[arg].0 {
            arg = i;
        }
    }
    let (k, j) = best[arg];
    Ok(FrostmanReport {
        exponent_s: s,
        constant_k: k,
        witness_center: centers[arg].clone(),
        witness_radius: radii[j],
        radii_scanned: radii.to_vec(),
        diverged: k > DEFAULT_CEILING,
    })
}

/// A measure restricted to B(center, radius), recentred and rescaled to the
/// unit ball, with its mass renormalized to one.
#[derive(Clone, Debug)]
pub struct Renormalized {
    pub measure: PointMassMeasure,
    pub center: Point,
    pub radius: f64,
    /// μ(B(center, radius)) before renormalization.
    pub retained_mass: f64,
    /// Radii of the source scan expressed in the new coordinates, capped at 2.
    pub rescan_radii: Vec<f64>,
}

impl Renormalized {
    /// Rescan the output at the source radii and enforce K' ≤ 4(1+τ).
    pub fn verify(&self, n_random: usize, tau: f64, streams: &Streams) -> Result<FrostmanReport> {
        let s = self.measure.dimension_s();
        let report = estimate_frostman_constant(&self.measure, s, n_random, &self.rescan_radii, streams)?;
        if report.constant_k > 4.0 * (1.0 + tau) {
            return Err(Error::InvariantViolation(format!(
                "renormalized Frostman constant {} exceeds {}",
                report.constant_k,
                4.0 * (1.0 + tau)
            )));
        }
        Ok(report)
    }
}

/// Pick the largest scanned ball Q = B(v,ρ) with μ(Q) ≥ Kρ^s/2 among atom
/// centers and the witness, then map Q onto the unit ball.
pub fn renormalize(mu: &PointMassMeasure, report: &FrostmanReport) -> Result<Renormalized> {
    let s = report.exponent_s;
    let k = report.constant_k;
    validate(mu, s, &report.radii_scanned)?;
    let mut radii = report.radii_scanned.clone();
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut centers: Vec<Point> = (0..mu.len()).map(|i| mu.atom(i).to_vec()).collect();
    centers.push(report.witness_center.clone());

    // per candidate: (radius, mass) of its largest qualifying ball
    let picks: Vec<Option<(f64, f64)>> = centers
        .par_iter()
        .map(|c| {
            let p = Profile::new(mu, c);
            radii.iter().find_map(|&r| {
                let m = p.ball(r);
                (m >= 0.5 * k * r.powf(s) * (1.0 - 1e-12) && m > 0.0).then_some((r, m))
            })
        })
        .collect();
    let mut arg: Option<(usize, f64, f64)> = None;
    for (i, p) in picks.iter().enumerate() {
        if let Some((r, m)) = *p {
            let better = match arg {
                None => true,
                Some((_, br, bm)) => r > br || (r == br && m > bm),
            };
            if better {
                arg = Some((i, r, m));
            }
        }
    }
    let (ci, rho, _) = arg.ok_or(Error::NoWitness)?;
    let v = centers[ci].clone();
    let r2 = rho * rho;
    let dim = mu.dim();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (a, w) in mu.atoms() {
        if dist2(a, &v) <= r2 {
            coords.extend(a.iter().zip(&v).map(|(x, c)| (x - c) / rho));
            weights.push(w);
        }
    }
    let retained: f64 = weights.iter().sum();
    let resolution = mu.resolution.map(|h| h / rho);
    let measure = PointMassMeasure::from_raw(dim, coords, weights, s, resolution);
    let rescan_radii = report
        .radii_scanned
        .iter()
        .map(|r| r / rho)
        .filter(|&r| r <= 2.0)
        .collect();
    Ok(Renormalized {
        measure,
        center: v,
        radius: rho,
        retained_mass: retained,
        rescan_radii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_forge::{build_cantor_dust, IteratedFunctionSystem};

    fn uniform_line(n: usize) -> PointMassMeasure {
        let pts: Vec<Point> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
        PointMassMeasure::normalized(1, &pts, vec![1.0; n], 1.0).unwrap()
    }

    /// Exhaustive oracle: every atom center, every radius in the list.
    fn oracle(mu: &PointMassMeasure, s: f64, radii: &[f64]) -> f64 {
        let mut k: f64 = 0.0;
        for i in 0..mu.len() {
            for &r in radii {
                k = k.max(mu.measure_ball(mu.atom(i), r) / r.powf(s));
            }
        }
        k
    }

    #[test]
    fn uniform_line_constant_near_two() {
        let mu = uniform_line(10_000);
        let radii = geometric_radii(0.01, 1.0, 8);
        let rep = estimate_frostman_constant(&mu, 1.0, 50, &radii, &Streams::new(3)).unwrap();
        assert!((rep.constant_k - oracle(&mu, 1.0, &radii)).abs() < 1e-12);
        assert!(rep.constant_k >= 2.0 && rep.constant_k <= 2.02, "{}", rep.constant_k);
        let w = mu.measure_ball(&rep.witness_center, rep.witness_radius) / rep.witness_radius;
        assert!((w - rep.constant_k).abs() < 1e-9);
    }

    #[test]
    fn single_atom_diverges() {
        let mu = PointMassMeasure::dirac(vec![0.0, 0.0]);
        let rep = estimate_frostman_constant(&mu, 1.5, 0, &geometric_radii(1e-6, 1.0, 10), &Streams::new(1)).unwrap();
        assert!(rep.diverged);
        assert!((rep.constant_k - 1e9).abs() < 1e-3);
    }

    #[test]
    fn cantor_constant_in_range() {
        let mu = build_cantor_dust(&IteratedFunctionSystem::cantor_1d(7)).unwrap();
        let s = mu.dimension_s();
        let radii: Vec<f64> = (0..=7).map(|j| 3f64.powi(-j)).collect();
        let rep = estimate_frostman_constant(&mu, s, 100, &radii, &Streams::new(5)).unwrap();
        let o = oracle(&mu, s, &radii);
        assert!(rep.constant_k >= o - 1e-12);
        assert!((1.0..=4.0).contains(&rep.constant_k), "{}", rep.constant_k);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mu = uniform_line(10);
        assert!(estimate_frostman_constant(&mu, 1.0, 0, &[], &Streams::new(0)).is_err());
        assert!(estimate_frostman_constant(&mu, 0.0, 0, &[0.5], &Streams::new(0)).is_err());
    }

    #[test]
    fn renormalized_uniform_line() {
        let mu = uniform_line(1000);
        let radii = geometric_radii(0.01, 1.0, 20);
        let streams = Streams::new(9);
        let rep = estimate_frostman_constant(&mu, 1.0, 20, &radii, &streams).unwrap();
        let out = renormalize(&mu, &rep).unwrap();
        assert!((out.measure.total_mass() - 1.0).abs() < 1e-12);
        assert!(out.measure.atoms().all(|(a, _)| a[0].abs() <= 1.0 + 1e-12));
        let re = out.verify(20, DEFAULT_TAU, &streams).unwrap();
        assert!(re.constant_k <= 4.0);
    }

    #[test]
    fn tiny_support_maps_into_unit_ball() {
        let pts: Vec<Point> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![0.1 * t.cos() * (i as f64 / 50.0), 0.1 * t.sin() * (i as f64 / 50.0)]
            })
            .collect();
        let mu = PointMassMeasure::normalized(2, &pts, vec![1.0; 50], 1.0).unwrap();
        let rep = estimate_frostman_constant(&mu, 1.0, 10, &geometric_radii(0.005, 0.25, 12), &Streams::new(2)).unwrap();
        let out = renormalize(&mu, &rep).unwrap();
        assert!(out.measure.atoms().all(|(a, _)| a[0].hypot(a[1]) <= 1.0 + 1e-12));
    }

    #[test]
    fn inconsistent_report_has_no_witness() {
        let mu = uniform_line(100);
        let rep = FrostmanReport {
            exponent_s: 1.0,
            constant_k: 1e3,
            witness_center: vec![0.5],
            witness_radius: 0.1,
            radii_scanned: vec![0.1, 0.5],
            diverged: false,
        };
        assert!(matches!(renormalize(&mu, &rep), Err(Error::NoWitness)));
    }
}
