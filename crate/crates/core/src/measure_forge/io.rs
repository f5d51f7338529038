//! CSV serialization: header `x1,...,xk,weight`, one atom per row.

use super::PointMassMeasure;
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub fn write_measure_csv<W: Write>(mu: &PointMassMeasure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=mu.dim()).map(|i| format!("x{i}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (a, wt) in mu.atoms() {
        let mut row: Vec<String> = a.iter().map(|x| format!("{x:.16e}")).collect();
        row.push(format!("{wt:.16e}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads atoms and renormalizes the weights; `dimension_s` is not stored in
/// the file and must be supplied.
pub fn read_measure_csv<R: Read>(input: R, dimension_s: f64) -> Result<PointMassMeasure> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let k = header.len().checked_sub(1).filter(|&k| k > 0).ok_or_else(|| Error::Parse("measure header needs x1..xk,weight".into()))?;
    for (i, h) in header.iter().enumerate() {
        let expected = if i == k { "weight".to_string() } else { format!("x{}", i + 1) };
        if h.trim() != expected {
            return Err(Error::Parse(format!("unexpected column '{h}', wanted '{expected}'")));
        }
    }
    let mut pts = Vec::new();
    let mut weights = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?;
        if vals.len() != k + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", line + 2, vals.len())));
        }
        weights.push(vals[k]);
        pts.push(vals[..k].to_vec());
    }
    PointMassMeasure::normalized(k, &pts, weights, dimension_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_forge::{build_cantor_dust, IteratedFunctionSystem};

    #[test]
    fn round_trip_is_exact() {
        let mu = build_cantor_dust(&IteratedFunctionSystem::sierpinski_2d(3)).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mu, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,weight\n"));
        let back = read_measure_csv(buf.as_slice(), mu.dimension_s()).unwrap();
        assert_eq!(back.coords(), mu.coords());
        for (a, b) in back.weights().iter().zip(mu.weights()) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn bad_header() {
        assert!(read_measure_csv("a,b\n1,2\n".as_bytes(), 1.0).is_err());
    }
}
