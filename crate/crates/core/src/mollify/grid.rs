//! Scalar fields on a uniform cell-centred box grid.
//!
//! Node i along an axis sits at −L + (i + ½)h with h = 2L/N. Values are stored
//! row-major (last axis fastest).

use crate::error::{invalid, Error, Result};
use rayon::prelude::*;
use std::io::{BufRead, Write};

/// Grid geometry: [−L, L]^k with N nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub halfwidth: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, halfwidth: f64, n: usize) -> Result<GridSpec> {
        let g = GridSpec { dim, halfwidth, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(invalid(format!("grid dimension {} not in 1..=3", self.dim)));
        }
        if !(self.halfwidth > 0.0 && self.halfwidth.is_finite()) {
            return Err(invalid("grid half-width must be positive"));
        }
        if self.n < 2 {
            return Err(invalid("grid needs at least two nodes per axis"));
        }
        if (self.n as f64).powi(self.dim as i32) > 2e9 {
            return Err(invalid("grid is too large"));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.halfwidth / self.n as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.halfwidth + (i as f64 + 0.5) * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.halfwidth).powi(self.dim as i32)
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
    }

    /// Coordinates of the node with the given flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.unflatten(flat, &mut idx);
        idx.iter().map(|&i| self.coord(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<GridFunction> {
        spec.validate()?;
        if values.len() != spec.len() {
            return Err(invalid(format!("expected {} values, got {}", spec.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        Ok(GridFunction { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> GridFunction {
        GridFunction {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync>(spec: GridSpec, f: F) -> GridFunction {
        let values = (0..spec.len())
            .into_par_iter()
            .map_init(|| vec![0.0; spec.dim], |x, i| {
                let mut idx = [0usize; 3];
                spec.unflatten(i, &mut idx[..spec.dim]);
                for a in 0..spec.dim {
                    x[a] = spec.coord(idx[a]);
                }
                f(x)
            })
            .collect();
        GridFunction { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Riemann-sum integral h^k Σ values.
    pub fn mass(&self) -> f64 {
        self.spec.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> GridFunction {
        GridFunction {
            spec: self.spec,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64 + Sync>(&self, other: &GridFunction, f: F) -> Result<GridFunction> {
        if self.spec != other.spec {
            return Err(invalid("grid geometries differ"));
        }
        Ok(GridFunction {
            spec: self.spec,
            values: self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Multilinear interpolation; nodes outside the grid count as zero, so
    /// the interpolant vanishes half a cell beyond the outermost nodes.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let n = self.spec.n;
        let h = self.spec.spacing();
        let l = self.spec.halfwidth;
        let k = self.spec.dim;
        let mut base = [0isize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..k {
            let u = (x[a] + l) / h - 0.5;
            if !(u > -1.0 && u < n as f64) {
                return 0.0;
            }
            let f = u.floor();
            base[a] = f as isize;
            frac[a] = u - f;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << k) {
            let mut flat = 0usize;
            let mut wgt = 1.0;
            let mut inside = true;
            for a in 0..k {
                let up = corner >> a & 1;
                let i = base[a] + up as isize;
                if i < 0 || i >= n as isize {
                    inside = false;
                    break;
                }
                flat = flat * n + i as usize;
                wgt *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if inside && wgt != 0.0 {
                total += wgt * self.values[flat];
            }
        }
        total
    }

    /// Binary layout: text line "k N L" then row-major little-endian f64.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {:.17e}", self.spec.dim, self.spec.n, self.spec.halfwidth)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut input: R) -> Result<GridFunction> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Parse("grid header must be 'k N L'".into()));
        }
        let bad = |e: String| Error::Parse(format!("grid header: {e}"));
        let dim: usize = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
        let halfwidth: f64 = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
        let spec = GridSpec::new(dim, halfwidth, n)?;
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != spec.len() * 8 {
            return Err(Error::Parse(format!("expected {} bytes of values, got {}", spec.len() * 8, bytes.len())));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridFunction::new(spec, values)
    }

    /// CSV export `x1,...,xk,value`, one node per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = self.spec.node(i).iter().map(|x| format!("{x:.16e}")).collect();
            row.push(format!("{v:.16e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_cell_centred() {
        let g = GridSpec::new(1, 2.0, 8).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.coord(0), -1.75);
        assert_eq!(g.coord(7), 1.75);
    }

    #[test]
    fn interpolation_reproduces_affine_functions() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1]);
        for &(a, b) in &[(0.1, 0.2), (-0.7, 0.33), (0.9, -0.9)] {
            assert!((f.interpolate(&[a, b]) - (1.0 + 2.0 * a - b)).abs() < 1e-12);
        }
        assert_eq!(f.interpolate(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn interpolation_is_nonnegative_for_nonnegative_data() {
        let g = GridSpec::new(3, 1.0, 6).unwrap();
        let f = GridFunction::from_fn(g, |x| (x[0] * 7.0).sin().abs() * x[1].abs());
        for i in 0..200 {
            let t = i as f64 * 0.0131;
            let x = [t.sin(), (2.0 * t).cos(), t - 1.0];
            assert!(f.interpolate(&x) >= 0.0);
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = GridSpec::new(2, 1.5, 5).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] * x[1] + 0.1);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let back = GridFunction::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn mass_of_constant() {
        let g = GridSpec::new(2, 1.0, 10).unwrap();
        let f = GridFunction::from_fn(g, |_| 0.25);
        assert!((f.mass() - 1.0).abs() < 1e-14);
    }
}
