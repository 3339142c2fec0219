//! Limit moments `M_k = ∫ x^k dG_y(x)`.
//!
//! With `w = 1/z` and `h(w) = Σ M_k w^k` (so `s = −w h`), the limit equation
//! becomes `h = 1 + w h ∏_l (1 − y_l + y_l h)`, which fixes `M_k` from
//! `M_0..M_{k−1}`. All `y_l = 1` gives the Fuss–Catalan numbers.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::limitlaw::DensityCurve;

/// Exact moments `M_0..M_K` for ratios `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    pub m: usize,
    pub y: Vec<BigRational>,
    pub values: Vec<BigRational>,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(rational_to_f64).collect()
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"3/4"`, `"0.75"`, `"1"` or `"7.5e-1"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::invalid(format!("cannot read '{text}' as a rational number"));
    if let Some((num, den)) = t.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(all);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 1..=k {
        // C(n − k + i, i) stays integral at every step
        acc = acc * BigUint::from(n - k + i) / BigUint::from(i);
    }
    acc
}

/// `binom((m + 1) k, k) / (m k + 1)`.
pub fn fuss_catalan(m: usize, k: usize) -> BigUint {
    let (m, k) = (m as u64, k as u64);
    binomial((m + 1) * k, k) / BigUint::from(m * k + 1)
}

fn truncated_product<T: Num + Clone>(a: &[T], b: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            out[i + j] = out[i + j].clone() + ai.clone() * bj.clone();
        }
    }
    out
}

/// `M_0..M_K` from `M_k = Σ_{k_0+…+k_m = k−1} ∏ M_{k_ν}`, i.e. the
/// coefficient of `t^{k−1}` in the `(m + 1)`-th power of the prefix series.
pub fn fuss_catalan_by_recurrence(m: usize, k_max: usize) -> Vec<BigUint> {
    let mut values = vec![BigUint::one()];
    for k in 1..=k_max {
        let mut power = values.clone();
        for _ in 0..m {
            power = truncated_product(&power, &values, k);
        }
        values.push(power[k - 1].clone());
    }
    values
}

/// Coefficient of `w^{k−1}` in `h ∏ (1 − y_l + y_l h)` with `h` truncated to `prefix`.
fn series_rhs<T: Num + Clone>(prefix: &[T], y: &[T], k: usize) -> T {
    let mut acc = prefix.to_vec();
    acc.truncate(k);
    for yl in y {
        let factor: Vec<T> = prefix
            .iter()
            .enumerate()
            .map(|(i, hi)| {
                let base = yl.clone() * hi.clone();
                if i == 0 {
                    T::one() - yl.clone() + base
                } else {
                    base
                }
            })
            .collect();
        acc = truncated_product(&acc, &factor, k);
    }
    acc.get(k - 1).cloned().unwrap_or_else(T::zero)
}

fn series_moments<T: Num + Clone>(y: &[T], k_max: usize) -> Result<Vec<T>> {
    let mut values = vec![T::one()];
    for k in 1..=k_max {
        // E(t) = t − rhs(M_0..M_{k−1}, t): the linear coefficient in M_k must not vanish
        let mut probe = values.clone();
        probe.push(T::zero());
        let e0 = T::zero() - series_rhs(&probe, y, k);
        probe[k] = T::one();
        let e1 = T::one() - series_rhs(&probe, y, k);
        let linear = e1 - e0.clone();
        if linear.is_zero() {
            return Err(Error::Structural(format!("degenerate linear coefficient at k = {k}")));
        }
        values.push((T::zero() - e0) / linear);
    }
    Ok(values)
}

fn check_ratios<'a>(y: impl Iterator<Item = &'a f64>) -> Result<()> {
    for &v in y {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::invalid(format!("ratio {v} is outside (0, 1]")));
        }
    }
    Ok(())
}

/// Exact moments for rational ratios.
pub fn moments_general_y(y: &[BigRational], k_max: usize) -> Result<MomentTable> {
    if y.is_empty() {
        return Err(Error::invalid("moments need m >= 1 ratios"));
    }
    let one = BigRational::one();
    if let Some(bad) = y.iter().find(|&v| !(v > &BigRational::zero() && v <= &one)) {
        return Err(Error::invalid(format!("ratio {bad} is outside (0, 1]")));
    }
    let values = series_moments(y, k_max)?;
    Ok(MomentTable { m: y.len(), y: y.to_vec(), values })
}

/// Same recursion in floating point; relative error grows like `O(K² ε)`.
pub fn moments_general_y_f64(y: &[f64], k_max: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::invalid("moments need m >= 1 ratios"));
    }
    check_ratios(y.iter())?;
    series_moments(y, k_max)
}

/// Relative errors `|∫ x^k dG − M_k| / M_k` for `k = 0..=K`, with the
/// integral a Stieltjes sum against the curve's CDF column
/// (`∫ dG = G(last) − G(first)`, so entry 0 is `|∫ dG − 1|`).
pub fn moment_report(curve: &DensityCurve, table: &MomentTable, k_max: usize) -> Result<Vec<f64>> {
    if k_max >= table.len() {
        return Err(Error::invalid(format!("table has {} moments, {} requested", table.len(), k_max + 1)));
    }
    let exact = table.to_f64();
    Ok((0..=k_max)
        .map(|k| {
            let integral: f64 = curve
                .x
                .windows(2)
                .zip(curve.cdf.windows(2))
                .map(|(x, g)| 0.5 * (x[0].powi(k as i32) + x[1].powi(k as i32)) * (g[1] - g[0]))
                .sum();
            (integral - exact[k]).abs() / exact[k]
        })
        .collect())
}
