//! Monte Carlo trials and the statistics reported on them.
//!
//! Trials run in parallel but results are collected in trial order, and every
//! trial draws from its own seed, so output does not depend on thread count.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{sample_chain, select_truncation_level, truncate_and_center, DimensionProfile, EntryLaw};
use crate::error::{Error, Result};
use crate::hermitization::{build_product, hermitized_spectrum, singular_values};
use crate::limitlaw::density::default_x_grid;
use crate::limitlaw::{density, DensityCurve, LimitCdf, LimitLawSpec, Variant};
use crate::spectral::{empirical_moment, empirical_stieltjes, equation_residual, esd_squares, kolmogorov_distance, EmpiricalCdf};

/// Entry truncation applied before forming the product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Truncation {
    Off,
    /// `τ` from [`select_truncation_level`], threshold `c τ √n`.
    Auto { c: f64 },
    Fixed { c: f64, tau: f64 },
}

impl Truncation {
    /// Off for bounded laws, automatic for unbounded ones.
    pub fn default_for(law: EntryLaw) -> Self {
        match law.bound() {
            Some(_) => Truncation::Off,
            None => Truncation::Auto { c: 1.0 },
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Off => f.write_str("off"),
            Truncation::Auto { .. } => f.write_str("auto"),
            Truncation::Fixed { c, tau } => write!(f, "{c}:{tau}"),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    /// `off`, `auto`, or `c:τ`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "off" => Ok(Truncation::Off),
            "auto" => Ok(Truncation::Auto { c: 1.0 }),
            other => {
                let bad = || Error::invalid(format!("truncation '{other}' is not off, auto or c:tau"));
                let (c, tau) = other.split_once(':').ok_or_else(bad)?;
                let c: f64 = c.trim().parse().map_err(|_| bad())?;
                let tau: f64 = tau.trim().parse().map_err(|_| bad())?;
                if !(c > 0.0 && c.is_finite() && tau > 0.0 && tau.is_finite()) {
                    return Err(bad());
                }
                Ok(Truncation::Fixed { c, tau })
            }
        }
    }
}

/// Seed of trial `trial` at size `n`, derived from the base seed by
/// SplitMix64 mixing.
pub fn trial_seed(base: u64, n: usize, trial: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ n as u64) ^ trial as u64)
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Descending singular values of `W`, `n` of them.
    pub svals: Vec<f64>,
    /// Truncation level used, if any.
    pub tau: Option<f64>,
}

pub fn run_trial(profile: &DimensionProfile, law: EntryLaw, truncation: Truncation, seed: u64) -> Result<TrialOutcome> {
    let raw = sample_chain(profile, law, seed)?;
    let (set, tau) = match truncation {
        Truncation::Off => (raw, None),
        Truncation::Auto { c } => {
            let tau = select_truncation_level(&raw)?;
            (truncate_and_center(&raw, c, tau)?, Some(tau))
        }
        Truncation::Fixed { c, tau } => (truncate_and_center(&raw, c, tau)?, Some(tau)),
    };
    let w = build_product(&set)?;
    Ok(TrialOutcome { seed, svals: singular_values(&w)?, tau })
}

/// `trials` independent trials, in trial order.
pub fn run_trials(
    profile: &DimensionProfile,
    law: EntryLaw,
    truncation: Truncation,
    base_seed: u64,
    trials: usize,
) -> Result<Vec<TrialOutcome>> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    law.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|t| run_trial(profile, law, truncation, trial_seed(base_seed, profile.n(), t)))
        .collect()
}

/// Limit law with the ratios realized by the integer sizes.
pub fn effective_spec(profile: &DimensionProfile) -> Result<LimitLawSpec> {
    LimitLawSpec::new(profile.ratios())
}

/// Squares-law CDF on the default grid.
pub fn limit_curve(spec: &LimitLawSpec, v_min: f64) -> Result<(LimitCdf, DensityCurve)> {
    let grid = default_x_grid(spec, Variant::Squares)?;
    let curve = density(spec, Variant::Squares, &grid, v_min, true)?;
    Ok((LimitCdf::from_curve(&curve)?, curve))
}

/// ESD of all trials' squared singular values together.
pub fn pooled_esd(trials: &[TrialOutcome]) -> Result<EmpiricalCdf> {
    let all: Vec<f64> = trials.iter().flat_map(|t| t.svals.iter().copied()).collect();
    esd_squares(&all)
}

/// Mean and standard error (sample sd / √T; 0 for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaReport {
    /// Kolmogorov distance of the pooled ESD.
    pub pooled: f64,
    pub mean: f64,
    /// Standard error of the per-trial distances.
    pub stderr: f64,
    pub per_trial: Vec<f64>,
}

pub fn delta_report(trials: &[TrialOutcome], limit: &LimitCdf) -> Result<DeltaReport> {
    let g = |x: f64| limit.cdf(x);
    let per_trial = trials
        .iter()
        .map(|t| Ok(kolmogorov_distance(&esd_squares(&t.svals)?, g)))
        .collect::<Result<Vec<f64>>>()?;
    let pooled = kolmogorov_distance(&pooled_esd(trials)?, g);
    let (mean, stderr) = mean_and_stderr(&per_trial);
    Ok(DeltaReport { pooled, mean, stderr, per_trial })
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub k: usize,
    pub empirical: f64,
    pub limit: f64,
    pub relative_error: f64,
    pub stderr: f64,
}

/// Pooled empirical moments `k = 1..=k_max` against `limit[k]`.
pub fn moment_comparison(trials: &[TrialOutcome], limit: &[f64], k_max: usize) -> Result<Vec<MomentRow>> {
    if k_max >= limit.len() {
        return Err(Error::invalid("not enough limit moments for the comparison"));
    }
    let pooled = pooled_esd(trials)?;
    let esds = trials.iter().map(|t| esd_squares(&t.svals)).collect::<Result<Vec<_>>>()?;
    (1..=k_max)
        .map(|k| {
            let empirical = empirical_moment(&pooled, k as u32)?;
            let per_trial = esds.iter().map(|f| empirical_moment(f, k as u32)).collect::<Result<Vec<_>>>()?;
            let (_, stderr) = mean_and_stderr(&per_trial);
            Ok(MomentRow {
                k,
                empirical,
                limit: limit[k],
                relative_error: (empirical - limit[k]).abs() / limit[k],
                stderr,
            })
        })
        .collect()
}

/// `Re z ∈ [−3, 3]` (61 points), `Im z = 1`.
pub fn residual_grid() -> Vec<Complex64> {
    (0..61).map(|i| Complex64::new(-3.0 + 0.1 * i as f64, 1.0)).collect()
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    /// Trial-averaged `|δ_n(z)|` per grid point.
    pub points: Vec<(Complex64, f64)>,
    pub max: f64,
    pub mean: f64,
    /// Standard error of the per-trial grid means.
    pub mean_stderr: f64,
}

/// `|δ_n(z)|`: the symmetrized limit equation evaluated at the empirical
/// transform of each trial.
pub fn residual_report(
    trials: &[TrialOutcome],
    profile: &DimensionProfile,
    spec: &LimitLawSpec,
    grid: &[Complex64],
) -> Result<ResidualReport> {
    let p_m = profile.p(profile.m());
    let per_trial: Vec<Vec<f64>> = trials
        .iter()
        .map(|t| {
            let eigs = hermitized_spectrum(&t.svals, p_m)?;
            grid.iter()
                .map(|&z| {
                    let s = empirical_stieltjes(&eigs, profile, z)?.s;
                    Ok(equation_residual(s, z, spec, Variant::Symmetrized)?.norm())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let t = per_trial.len() as f64;
    let points: Vec<(Complex64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(i, &z)| (z, per_trial.iter().map(|r| r[i]).sum::<f64>() / t))
        .collect();
    let max = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let grid_means: Vec<f64> = per_trial.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    let (mean, mean_stderr) = mean_and_stderr(&grid_means);
    Ok(ResidualReport { points, max, mean, mean_stderr })
}
