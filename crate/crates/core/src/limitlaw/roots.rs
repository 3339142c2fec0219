//! All-roots polynomial solver (Aberth–Ehrlich with Gauss–Seidel updates).
//!
//! Coefficients are in ascending order: `c[0] + c[1] s + ... + c[d] s^d`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Leading coefficients at or below this modulus are dropped.
pub const TRIM_THRESHOLD: f64 = 1e-300;

const MAX_ITERATIONS: usize = 500;

/// Horner evaluation of `p(s)` and `p'(s)`.
pub fn eval_with_derivative(coeffs: &[Complex64], s: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

pub fn eval(coeffs: &[Complex64], s: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `Σ |c_i| |s|^i`, the natural scale of `p(s)`.
pub fn eval_scale(coeffs: &[Complex64], s: Complex64) -> f64 {
    let r = s.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Trims negligible leading terms and factors out roots at zero.
///
/// Returns `(core coefficients, number of zero roots)`.
fn normalize(coeffs: &[Complex64]) -> Result<(Vec<Complex64>, usize)> {
    let Some(last) = coeffs.iter().rposition(|c| c.norm() > TRIM_THRESHOLD) else {
        return Err(Error::invalid("zero polynomial has no well-defined roots"));
    };
    if coeffs[..=last].iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::invalid("polynomial has non-finite coefficients"));
    }
    let first = coeffs.iter().position(|c| *c != Complex64::new(0.0, 0.0)).unwrap_or(0);
    Ok((coeffs[first..=last].to_vec(), first))
}

fn initial_guesses(coeffs: &[Complex64]) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    let radius = (coeffs[0].norm() / coeffs[deg].norm()).powf(1.0 / deg as f64);
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    (0..deg)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / deg as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect()
}

/// Runs Aberth iterations in place; returns whether every root converged.
fn aberth(coeffs: &[Complex64], roots: &mut [Complex64]) -> bool {
    let deg = roots.len();
    let mut converged = vec![false; deg];
    for _ in 0..MAX_ITERATIONS {
        for i in 0..deg {
            if converged[i] {
                continue;
            }
            let zi = roots[i];
            let (p, dp) = eval_with_derivative(coeffs, zi);
            if p.norm() <= 4.0 * f64::EPSILON * eval_scale(coeffs, zi) {
                converged[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..deg)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - roots[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        1.0 / d
                    }
                })
                .sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if !(step.re.is_finite() && step.im.is_finite()) {
                // stationary point of p: nudge off it
                roots[i] = zi * Complex64::new(1.0, 1e-3) + Complex64::new(1e-8, 0.0);
                continue;
            }
            roots[i] = zi - step;
            if step.norm() <= 2.0 * f64::EPSILON * roots[i].norm() {
                converged[i] = true;
            }
        }
        if converged.iter().all(|&c| c) {
            return true;
        }
    }
    false
}

fn solve_core(coeffs: &[Complex64], guesses: Option<&[Complex64]>) -> Vec<Complex64> {
    let deg = coeffs.len() - 1;
    match deg {
        0 => Vec::new(),
        1 => vec![-coeffs[0] / coeffs[1]],
        _ => {
            let mut roots = match guesses {
                Some(g) if g.len() == deg => g.to_vec(),
                _ => initial_guesses(coeffs),
            };
            // coincident warm-start guesses would stall the repulsion term
            for i in 1..deg {
                for j in 0..i {
                    if roots[i] == roots[j] {
                        let bump = Complex64::new(1e-10, 1e-10) * (1.0 + roots[i].norm());
                        roots[i] += bump;
                    }
                }
            }
            if !aberth(coeffs, &mut roots) && guesses.is_some() {
                roots = initial_guesses(coeffs);
                aberth(coeffs, &mut roots);
            }
            roots
        }
    }
}

/// All complex roots of the polynomial, with multiplicity.
pub fn solve_all_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let (core, zeros) = normalize(coeffs)?;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    roots.extend(solve_core(&core, None));
    Ok(roots)
}

/// As [`solve_all_roots`], warm-started from a previous root set.
pub fn solve_all_roots_from(coeffs: &[Complex64], guesses: &[Complex64]) -> Result<Vec<Complex64>> {
    let (core, zeros) = normalize(coeffs)?;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let deg = core.len() - 1;
    let warm: Option<Vec<Complex64>> = (guesses.len() == deg + zeros).then(|| {
        let mut g: Vec<Complex64> = guesses.to_vec();
        // drop the guesses closest to zero to make room for exact zero roots
        g.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        g.truncate(deg);
        g
    });
    roots.extend(solve_core(&core, warm.as_deref()));
    Ok(roots)
}
