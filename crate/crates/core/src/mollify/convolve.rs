//! Atom-by-kernel convolution sampled on a grid.
//!
//! When every atom sits at a common sub-node offset from a node (lattice
//! measures on a commensurate grid) the sum is a discrete convolution and is
//! done by FFT; otherwise nodes gather from a cell list of nearby atoms.

use super::grid::GridSpec;
use crate::measure_forge::PointMassMeasure;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::collections::HashMap;

/// Atoms within this distance of the lattice (in node units) count as aligned.
const ALIGN_TOL: f64 = 1e-9;

/// Σ_a w_a f(|node − a|) at every node, with f = 0 beyond `radius`.
pub(crate) fn convolve_atoms<F>(mu: &PointMassMeasure, grid: &GridSpec, radius: f64, f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    match lattice_offset(mu, grid) {
        Some((idx, delta)) => convolve_fft(mu, grid, &idx, &delta, radius, &f),
        None => {
            let work = mu.len() as f64 * (2.0 * radius / grid.spacing()).powi(grid.dim as i32);
            if work > 1e9 {
                log::warn!(
                    "atoms are not commensurate with the grid spacing {}; direct convolution needs about {work:.1e} kernel evaluations",
                    grid.spacing()
                );
            }
            convolve_direct(mu, grid, radius, &f)
        }
    }
}

/// Node multi-index of each atom and the common fractional offset per axis.
fn lattice_offset(mu: &PointMassMeasure, grid: &GridSpec) -> Option<(Vec<usize>, Vec<f64>)> {
    let k = grid.dim;
    let h = grid.spacing();
    let mut delta: Vec<f64> = Vec::new();
    let mut idx = Vec::with_capacity(mu.len() * k);
    for (a, _) in mu.atoms() {
        for ax in 0..k {
            let u = (a[ax] + grid.halfwidth) / h - 0.5;
            if delta.len() < k {
                delta.push(u - u.round());
            }
            let i = (u - delta[ax]).round();
            if (u - delta[ax] - i).abs() > ALIGN_TOL {
                return None;
            }
            if i < 0.0 || i >= grid.n as f64 {
                return None;
            }
            idx.push(i as usize);
        }
    }
    Some((idx, delta))
}

fn fast_size(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn convolve_fft<F>(
    mu: &PointMassMeasure,
    grid: &GridSpec,
    idx: &[usize],
    delta: &[f64],
    radius: f64,
    f: &F,
) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let k = grid.dim;
    let n = grid.n;
    let h = grid.spacing();
    // offsets beyond n−1 nodes never connect an atom to a node
    let reach = ((radius / h).ceil() as usize + 1).min(n);
    let m = fast_size(n + reach);
    let total = m.pow(k as u32);

    let mut atoms = vec![Complex64::new(0.0, 0.0); total];
    for (i, w) in mu.weights().iter().enumerate() {
        let flat = idx[i * k..(i + 1) * k].iter().fold(0, |acc, &j| acc * m + j);
        atoms[flat].re += w;
    }

    let r2 = radius * radius;
    let mut kern: Vec<Complex64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut d2 = 0.0;
            for ax in (0..k).rev() {
                let j = rest % m;
                rest /= m;
                if j > reach && j < m - reach {
                    return Complex64::new(0.0, 0.0);
                }
                let off = if j <= reach { j as f64 } else { j as f64 - m as f64 };
                let v = (off - delta[ax]) * h;
                d2 += v * v;
            }
            if d2 > r2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(f(d2.sqrt()), 0.0)
            }
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fft_nd(&mut atoms, m, k, &*fwd);
    fft_nd(&mut kern, m, k, &*fwd);
    atoms.par_iter_mut().zip(kern.par_iter()).for_each(|(a, b)| *a *= b);
    fft_nd(&mut atoms, m, k, &*inv);
    let norm = 1.0 / total as f64;

    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut big = 0usize;
            let mut mult = 1usize;
            for _ in 0..k {
                big += (rest % n) * mult;
                rest /= n;
                mult *= m;
            }
            (atoms[big].re * norm).max(0.0)
        })
        .collect()
}

/// In-place k-dimensional transform of an m^k row-major array.
fn fft_nd(data: &mut [Complex64], m: usize, k: usize, plan: &dyn rustfft::Fft<f64>) {
    for axis in 0..k {
        let stride = m.pow((k - 1 - axis) as u32);
        if stride == 1 {
            data.par_chunks_mut(m).for_each_init(
                || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                |scratch, line| plan.process_with_scratch(line, scratch),
            );
            continue;
        }
        for block in data.chunks_mut(m * stride) {
            let cols: Vec<Vec<Complex64>> = (0..stride)
                .into_par_iter()
                .map_init(
                    || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
                    |scratch, c| {
                        let mut line: Vec<Complex64> = (0..m).map(|j| block[j * stride + c]).collect();
                        plan.process_with_scratch(&mut line, scratch);
                        line
                    },
                )
                .collect();
            block.par_chunks_mut(stride).enumerate().for_each(|(j, row)| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = cols[c][j];
                }
            });
        }
    }
}

fn convolve_direct<F>(mu: &PointMassMeasure, grid: &GridSpec, radius: f64, f: &F) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let k = grid.dim;
    let cell = radius.max(grid.spacing());
    let key = |x: &[f64]| -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..k {
            c[a] = (x[a] / cell).floor() as i64;
        }
        c
    };
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..mu.len() {
        cells.entry(key(mu.atom(i))).or_default().push(i);
    }
    let r2 = radius * radius;
    let w = mu.weights();
    (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let x = grid.node(flat);
            let c = key(&x);
            let mut sum = 0.0;
            for nb in 0..3usize.pow(k as u32) {
                let mut probe = c;
                let mut t = nb;
                for item in probe.iter_mut().take(k) {
                    *item += (t % 3) as i64 - 1;
                    t /= 3;
                }
                if let Some(list) = cells.get(&probe) {
                    for &i in list {
                        let d2 = crate::linalg::dist2(&x, mu.atom(i));
                        if d2 <= r2 {
                            sum += w[i] * f(d2.sqrt());
                        }
                    }
                }
            }
            sum
        })
        .collect()
}
