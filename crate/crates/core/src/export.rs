//! Plain CSV writers. Numbers carry 12 significant digits in scientific
//! notation so output is byte-stable.

use std::io::Write;

use num_complex::Complex64;

use crate::error::Result;
use crate::limitlaw::{DensityCurve, StieltjesSolution};
use crate::moments::MomentTable;
use crate::spectral::{EmpiricalCdf, StieltjesSample};

/// `x` with `digits` significant digits, scientific notation.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        // drop the sign of negative zero
        return format!("{:.*e}", digits - 1, 0.0);
    }
    format!("{:.*e}", digits - 1, x)
}

pub fn sig12(x: f64) -> String {
    fmt_sig(x, 12)
}

pub fn sig17(x: f64) -> String {
    fmt_sig(x, 17)
}

fn row<W: Write>(out: &mut W, fields: &[String]) -> Result<()> {
    writeln!(out, "{}", fields.join(","))?;
    Ok(())
}

/// Columns `location,cumulative`.
pub fn write_esd_csv<W: Write>(out: &mut W, f: &EmpiricalCdf) -> Result<()> {
    row(out, &["location".into(), "cumulative".into()])?;
    for (&(x, _), &c) in f.atoms().iter().zip(f.cumulative()) {
        row(out, &[sig12(x), sig12(c)])?;
    }
    Ok(())
}

fn stieltjes_row<W: Write>(out: &mut W, z: Complex64, s: Complex64) -> Result<()> {
    row(out, &[sig12(z.re), sig12(z.im), sig12(s.re), sig12(s.im)])
}

/// Columns `re_z,im_z,re_s,im_s`.
pub fn write_stieltjes_csv<W: Write>(out: &mut W, samples: &[StieltjesSample]) -> Result<()> {
    row(out, &["re_z".into(), "im_z".into(), "re_s".into(), "im_s".into()])?;
    for sample in samples {
        stieltjes_row(out, sample.z, sample.s)?;
    }
    Ok(())
}

/// Same columns as [`write_stieltjes_csv`].
pub fn write_solution_csv<W: Write>(out: &mut W, solution: &StieltjesSolution) -> Result<()> {
    row(out, &["re_z".into(), "im_z".into(), "re_s".into(), "im_s".into()])?;
    for (&z, &s) in solution.grid.iter().zip(&solution.values) {
        stieltjes_row(out, z, s)?;
    }
    Ok(())
}

/// Columns `x,g,G`.
pub fn write_density_csv<W: Write>(out: &mut W, curve: &DensityCurve) -> Result<()> {
    row(out, &["x".into(), "g".into(), "G".into()])?;
    for ((&x, &g), &c) in curve.x.iter().zip(&curve.density).zip(&curve.cdf) {
        row(out, &[sig12(x), sig12(g), sig12(c)])?;
    }
    Ok(())
}

/// Columns `k,numerator,denominator,value`.
pub fn write_moments_csv<W: Write>(out: &mut W, table: &MomentTable) -> Result<()> {
    row(out, &["k".into(), "numerator".into(), "denominator".into(), "value".into()])?;
    for (k, (v, f)) in table.values.iter().zip(table.to_f64()).enumerate() {
        row(out, &[k.to_string(), v.numer().to_string(), v.denom().to_string(), sig12(f)])?;
    }
    Ok(())
}

/// Columns `re_z,im_z,abs_delta`.
pub fn write_residual_csv<W: Write>(out: &mut W, rows: &[(Complex64, f64)]) -> Result<()> {
    row(out, &["re_z".into(), "im_z".into(), "abs_delta".into()])?;
    for &(z, d) in rows {
        row(out, &[sig12(z.re), sig12(z.im), sig12(d)])?;
    }
    Ok(())
}
