//! Dimension profiles, entry laws and the sampled matrix chain.
//!
//! Sampling is counter-addressed: entry `(j, k)` of matrix `ν` is produced
//! from ChaCha8 keyed by the seed, on stream `ν`, at word position
//! `4 * (j * cols + k)`. Every entry consumes exactly two 64-bit words, so a
//! matrix can be regenerated in any order (or in parallel) with identical
//! results.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes `p_0 = n, p_1, ..., p_m` of a matrix chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionProfile {
    p: Vec<usize>,
}

impl DimensionProfile {
    /// Builds a profile from the full size list `p_0, ..., p_m`.
    pub fn new(p: Vec<usize>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::invalid("a profile needs at least p_0 and p_1"));
        }
        let n = p[0];
        if n == 0 {
            return Err(Error::invalid("p_0 = n must be positive"));
        }
        if let Some((l, &pl)) = p.iter().enumerate().skip(1).find(|(_, &pl)| pl < n) {
            return Err(Error::invalid(format!("p_{l} = {pl} is smaller than n = {n}")));
        }
        Ok(Self { p })
    }

    /// Sizes from aspect ratios: `p_l = round(n / y_l)`.
    pub fn from_ratios(n: usize, y: &[f64]) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("at least one ratio is required"));
        }
        let mut p = Vec::with_capacity(y.len() + 1);
        p.push(n);
        for (l, &yl) in y.iter().enumerate() {
            if !(yl > 0.0 && yl <= 1.0) {
                return Err(Error::invalid(format!("y_{} = {yl} is outside (0, 1]", l + 1)));
            }
            p.push((n as f64 / yl).round() as usize);
        }
        Self::new(p)
    }

    pub fn square(m: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; m + 1])
    }

    /// Chain length `m`.
    pub fn m(&self) -> usize {
        self.p.len() - 1
    }

    pub fn n(&self) -> usize {
        self.p[0]
    }

    /// `p_l` for `l = 0..=m`.
    pub fn p(&self, l: usize) -> usize {
        self.p[l]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.p
    }

    /// `y_l = n / p_l` for `l = 1..=m`.
    pub fn y(&self, l: usize) -> f64 {
        assert!(l >= 1 && l <= self.m(), "ratio index {l} out of range");
        self.p[0] as f64 / self.p[l] as f64
    }

    pub fn ratios(&self) -> Vec<f64> {
        (1..=self.m()).map(|l| self.y(l)).collect()
    }

    /// `y_l` as the exact pair `(n, p_l)`.
    pub fn ratio_parts(&self, l: usize) -> (usize, usize) {
        (self.p[0], self.p[l])
    }

    /// Shape of matrix `ν` (1-based), `p_{ν-1} × p_ν`.
    pub fn shape(&self, nu: usize) -> (usize, usize) {
        (self.p[nu - 1], self.p[nu])
    }
}

/// Law of the raw entries. Every variant has mean 0 and `E|X|^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EntryLaw {
    RealGaussian,
    /// Independent real and imaginary parts, each with variance 1/2.
    ComplexGaussian,
    Rademacher,
    /// `P(X = ±a) = 1/(2a²)`, `P(X = 0) = 1 − 1/a²`.
    ThreePointHeavy { a: f64 },
}

impl EntryLaw {
    pub const DEFAULT_THREE_POINT_A: f64 = 5.0;

    pub fn three_point() -> Self {
        EntryLaw::ThreePointHeavy { a: Self::DEFAULT_THREE_POINT_A }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EntryLaw::ThreePointHeavy { a } if !(a.is_finite() && a >= 1.0) => {
                Err(Error::invalid(format!("three-point parameter a = {a} must be >= 1")))
            }
            _ => Ok(()),
        }
    }

    /// Almost-sure bound on `|X|`, if the law is bounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            EntryLaw::Rademacher => Some(1.0),
            EntryLaw::ThreePointHeavy { a } => Some(a),
            EntryLaw::RealGaussian | EntryLaw::ComplexGaussian => None,
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self, EntryLaw::ComplexGaussian)
    }

    /// Draws one entry from exactly two 64-bit words.
    fn draw(&self, w0: u64, w1: u64) -> Complex64 {
        match *self {
            EntryLaw::RealGaussian => {
                let (g, _) = box_muller(w0, w1);
                Complex64::new(g, 0.0)
            }
            EntryLaw::ComplexGaussian => {
                let (g0, g1) = box_muller(w0, w1);
                Complex64::new(g0 * std::f64::consts::FRAC_1_SQRT_2, g1 * std::f64::consts::FRAC_1_SQRT_2)
            }
            EntryLaw::Rademacher => {
                let sign = if w0 >> 63 == 1 { 1.0 } else { -1.0 };
                Complex64::new(sign, 0.0)
            }
            EntryLaw::ThreePointHeavy { a } => {
                let u = unit_open_right(w0);
                let tail = 1.0 / (2.0 * a * a);
                let x = if u < tail {
                    a
                } else if u < 2.0 * tail {
                    -a
                } else {
                    0.0
                };
                Complex64::new(x, 0.0)
            }
        }
    }
}

/// Uniform on `[0, 1)` from the top 53 bits.
fn unit_open_right(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(w0: u64, w1: u64) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = 1.0 - unit_open_right(w0);
    let u2 = unit_open_right(w1);
    let r = (-2.0 * u1.ln()).sqrt();
    let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
    (r * cos, r * sin)
}

/// The `m` raw (un-normalized) entry matrices of one chain realization.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryMatrixSet {
    profile: DimensionProfile,
    raw: Vec<DMatrix<Complex64>>,
    law: EntryLaw,
    seed: u64,
}

impl EntryMatrixSet {
    /// Wraps explicit matrices; shapes must match the profile.
    pub fn from_raw(
        profile: DimensionProfile,
        raw: Vec<DMatrix<Complex64>>,
        law: EntryLaw,
        seed: u64,
    ) -> Result<Self> {
        if raw.len() != profile.m() {
            return Err(Error::invalid(format!(
                "expected {} matrices, got {}",
                profile.m(),
                raw.len()
            )));
        }
        for (i, mat) in raw.iter().enumerate() {
            let want = profile.shape(i + 1);
            if mat.shape() != want {
                return Err(Error::invalid(format!(
                    "matrix {} has shape {:?}, profile requires {:?}",
                    i + 1,
                    mat.shape(),
                    want
                )));
            }
        }
        Ok(Self { profile, raw, law, seed })
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn raw(&self) -> &[DMatrix<Complex64>] {
        &self.raw
    }

    pub fn law(&self) -> EntryLaw {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entry_count(&self) -> usize {
        self.raw.iter().map(|m| m.len()).sum()
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.raw.iter().all(|m| m.iter().all(|x| x.im == 0.0))
    }
}

/// Samples the chain `X(1), ..., X(m)` with i.i.d. entries from `law`.
pub fn sample_chain(profile: &DimensionProfile, law: EntryLaw, seed: u64) -> Result<EntryMatrixSet> {
    law.validate()?;
    let raw = (1..=profile.m())
        .map(|nu| {
            let (rows, cols) = profile.shape(nu);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(nu as u64);
            let mut mat = DMatrix::<Complex64>::zeros(rows, cols);
            for j in 0..rows {
                for k in 0..cols {
                    let w0 = rng.next_u64();
                    let w1 = rng.next_u64();
                    mat[(j, k)] = law.draw(w0, w1);
                }
            }
            mat
        })
        .collect();
    EntryMatrixSet::from_raw(profile.clone(), raw, law, seed)
}

/// Regenerates a single entry by seeking straight to its counter position.
pub fn sample_entry(
    profile: &DimensionProfile,
    law: EntryLaw,
    seed: u64,
    nu: usize,
    row: usize,
    col: usize,
) -> Complex64 {
    let (_, cols) = profile.shape(nu);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(nu as u64);
    rng.set_word_pos(4 * (row * cols + col) as u128);
    let w0 = rng.next_u64();
    let w1 = rng.next_u64();
    law.draw(w0, w1)
}

/// Plug-in Lindeberg functional
/// `max_ν n^{-2} Σ_{j,k} |X_jk|² 1{|X_jk| ≥ τ√n}` over the realized entries.
pub fn lindeberg_functional(set: &EntryMatrixSet, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau = {tau} must be a finite nonnegative number")));
    }
    let n = set.profile.n() as f64;
    let threshold = tau * n.sqrt();
    let value = set
        .raw
        .iter()
        .map(|mat| {
            mat.iter()
                .map(|x| x.norm_sqr())
                .filter(|&a2| a2.sqrt() >= threshold)
                .sum::<f64>()
                / (n * n)
        })
        .fold(0.0, f64::max);
    Ok(value)
}

/// Deepest level of the dyadic grid searched by [`select_truncation_level`].
pub const TRUNCATION_GRID_DEPTH: i32 = 40;

/// Smallest `τ ∈ {2^0, 2^-1, ..., 2^-40}` with `L_n(τ) ≤ τ³`, or 1 if none.
pub fn select_truncation_level(set: &EntryMatrixSet) -> Result<f64> {
    let mut best = None;
    for j in 0..=TRUNCATION_GRID_DEPTH {
        let tau = 2f64.powi(-j);
        if lindeberg_functional(set, tau)? <= tau * tau * tau {
            best = Some(tau);
        }
    }
    Ok(best.unwrap_or(1.0))
}

/// Zeroes every entry with `|X| > c τ √n`, then subtracts from each matrix
/// the sample mean of its truncated entries.
pub fn truncate_and_center(set: &EntryMatrixSet, c: f64, tau: f64) -> Result<EntryMatrixSet> {
    if !(c > 0.0 && tau > 0.0) {
        return Err(Error::invalid(format!("c = {c} and tau = {tau} must be positive")));
    }
    let threshold = c * tau * (set.profile.n() as f64).sqrt();
    let raw = set
        .raw
        .iter()
        .map(|mat| {
            let truncated = mat.map(|x| if x.norm() <= threshold { x } else { Complex64::new(0.0, 0.0) });
            let mean = truncated.iter().sum::<Complex64>() / truncated.len() as f64;
            truncated.map(|x| x - mean)
        })
        .collect();
    EntryMatrixSet::from_raw(set.profile.clone(), raw, set.law, set.seed)
}
