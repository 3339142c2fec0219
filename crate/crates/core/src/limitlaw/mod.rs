//! The limiting squared-singular-value law `G_y` and its symmetrization.
//!
//! Its Stieltjes transform `s` is a root of a degree-`m + 1` polynomial in
//! `s` whose coefficients depend on `z`:
//!
//! * squares: `1 + z s − s ∏_l (1 − y_l − z y_l s) = 0`
//! * symmetrized: `1 + z s − (s / z) ∏_l (1 − y_l − z y_l s) = 0`
//!
//! The physical root is the one continued from `s ≈ −1/z` at infinity; see
//! [`branch`]. Density and CDF come from [`density`].

pub mod branch;
pub mod density;
pub mod roots;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use branch::{select_branch, stieltjes_on_grid, StieltjesSolution};
pub use density::{density, support_edge, DensityCurve, LimitCdf};
pub use roots::solve_all_roots;

/// Which law the equation describes: `G_y` on `[0, ∞)` or its symmetrization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Squares,
    Symmetrized,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Squares => "squares",
            Variant::Symmetrized => "symmetrized",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squares" => Ok(Variant::Squares),
            "symmetrized" => Ok(Variant::Symmetrized),
            other => Err(Error::invalid(format!("unknown variant '{other}'"))),
        }
    }
}

/// Parameters `(m, y_1..y_m)` of the limit law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLawSpec {
    y: Vec<f64>,
}

impl LimitLawSpec {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("the limit law needs m >= 1 ratios"));
        }
        if let Some(bad) = y.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::invalid(format!("ratio {bad} is outside (0, 1]")));
        }
        Ok(Self { y })
    }

    /// All ratios equal to 1.
    pub fn square(m: usize) -> Result<Self> {
        Self::new(vec![1.0; m])
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// True when some `y_l = 1`, which puts a hard edge at 0.
    pub fn has_hard_edge(&self) -> bool {
        self.y.iter().any(|&v| v >= 1.0 - 1e-12)
    }

    /// Upper bound on the right edge of the squares law,
    /// `∏ (1 + √(y_l / y_{l−1}))²` with `y_0 = 1`.
    pub fn support_bound(&self) -> f64 {
        let mut prev = 1.0;
        let mut bound = 1.0;
        for &yl in &self.y {
            bound *= (1.0 + (yl / prev).sqrt()).powi(2);
            prev = yl;
        }
        bound
    }
}

/// Monomial coefficients (ascending powers of `s`, length `m + 2`) of the
/// limit equation at `z`.
pub fn poly_coefficients(spec: &LimitLawSpec, z: Complex64, variant: Variant) -> Result<Vec<Complex64>> {
    let factor = match variant {
        Variant::Squares => Complex64::new(1.0, 0.0),
        Variant::Symmetrized => {
            if z == Complex64::new(0.0, 0.0) {
                return Err(Error::invalid("the symmetrized equation is undefined at z = 0"));
            }
            1.0 / z
        }
    };
    // ∏ (a_l + b_l s), a_l = 1 − y_l, b_l = −z y_l
    let mut product = vec![Complex64::new(1.0, 0.0)];
    for &yl in spec.y() {
        let a = Complex64::new(1.0 - yl, 0.0);
        let b = -z * yl;
        let mut next = vec![Complex64::new(0.0, 0.0); product.len() + 1];
        for (i, &q) in product.iter().enumerate() {
            next[i] += q * a;
            next[i + 1] += q * b;
        }
        product = next;
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); spec.m() + 2];
    coeffs[0] = Complex64::new(1.0, 0.0);
    coeffs[1] = z;
    for (j, q) in product.into_iter().enumerate() {
        coeffs[j + 1] -= factor * q;
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::equation_residual;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_case_is_sparse() {
        for m in 1..=5 {
            let z = cx(0.7, -1.3);
            let c = poly_coefficients(&LimitLawSpec::square(m).unwrap(), z, Variant::Squares).unwrap();
            assert_eq!(c.len(), m + 2);
            assert_eq!(c[0], cx(1.0, 0.0));
            assert_abs_diff_eq!((c[1] - z).norm(), 0.0, epsilon = 1e-15);
            for ci in &c[2..=m] {
                assert_abs_diff_eq!(ci.norm(), 0.0, epsilon = 1e-14);
            }
            let sign = if (m + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let want = sign * z.powu(m as u32);
            assert!((c[m + 1] - want).norm() <= 1e-13 * want.norm());
        }
    }

    #[test]
    fn single_factor_expansion() {
        let y = 0.35;
        let z = cx(1.2, 0.4);
        let c = poly_coefficients(&LimitLawSpec::new(vec![y]).unwrap(), z, Variant::Squares).unwrap();
        assert_abs_diff_eq!((c[0] - 1.0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((c[1] - (z - 1.0 + y)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((c[2] - z * y).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(LimitLawSpec::new(vec![]).is_err());
        assert!(LimitLawSpec::new(vec![0.0]).is_err());
        assert!(LimitLawSpec::new(vec![1.2]).is_err());
        let spec = LimitLawSpec::new(vec![0.5]).unwrap();
        assert!(poly_coefficients(&spec, cx(0.0, 0.0), Variant::Symmetrized).is_err());
        assert!("cubes".parse::<Variant>().is_err());
        assert_eq!("symmetrized".parse::<Variant>().unwrap(), Variant::Symmetrized);
    }

    #[test]
    fn support_bound_examples() {
        assert_abs_diff_eq!(LimitLawSpec::square(2).unwrap().support_bound(), 16.0);
        assert_abs_diff_eq!(LimitLawSpec::new(vec![0.25]).unwrap().support_bound(), 2.25);
    }

    proptest! {
        #[test]
        fn coefficients_match_product_form(
            y in prop::collection::vec(0.05f64..=1.0, 1..5),
            zr in -3.0f64..3.0, zi in 0.1f64..3.0,
            sr in -2.0f64..2.0, si in -2.0f64..2.0,
            symmetrized in any::<bool>(),
        ) {
            let spec = LimitLawSpec::new(y).unwrap();
            let variant = if symmetrized { Variant::Symmetrized } else { Variant::Squares };
            let (z, s) = (Complex64::new(zr, zi), Complex64::new(sr, si));
            let c = poly_coefficients(&spec, z, variant).unwrap();
            let via_coeffs = roots::eval(&c, s);
            let direct = equation_residual(s, z, &spec, variant).unwrap();
            let scale = roots::eval_scale(&c, s).max(1.0);
            prop_assert!((via_coeffs - direct).norm() <= 1e-13 * scale);
        }
    }
}
