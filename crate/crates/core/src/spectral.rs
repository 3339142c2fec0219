//! Empirical distributions and their transforms.

use num_complex::Complex64;

use crate::ensemble::DimensionProfile;
use crate::error::{Error, Result};
use crate::limitlaw::{LimitLawSpec, Variant};

/// Step distribution with finitely many weighted atoms.
///
/// Locations are strictly increasing; atoms at equal locations are merged.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    total: f64,
}

impl EmpiricalCdf {
    /// Builds a distribution from `(location, weight)` pairs in any order.
    pub fn from_weighted(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("an empirical distribution needs at least one atom"));
        }
        if let Some(&(x, w)) = points.iter().find(|(x, w)| !x.is_finite() || !(*w > 0.0)) {
            return Err(Error::invalid(format!("bad atom ({x}, {w})")));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (x, w) in points {
            match atoms.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => atoms.push((x, w)),
            }
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for &(_, w) in &atoms {
            acc += w;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {acc}, not 1")));
        }
        Ok(Self { atoms, cumulative, total: acc })
    }

    /// Equal weights `1/len` at each location.
    pub fn uniform(locations: &[f64]) -> Result<Self> {
        let w = 1.0 / locations.len() as f64;
        Self::from_weighted(locations.iter().map(|&x| (x, w)).collect())
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `F(x) = Σ_{x_i ≤ x} w_i`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.0 <= x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// `F(x⁻) = Σ_{x_i < x} w_i`.
    pub fn left_cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.0 < x);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    /// Cumulative weight after each atom, aligned with [`Self::atoms`].
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// `∫ (x − z)^{-1} dF(x)`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.atoms.iter().map(|&(x, w)| w / (x - z)).sum()
    }
}

/// One evaluation `s(z)` of a Stieltjes transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StieltjesSample {
    pub z: Complex64,
    pub s: Complex64,
}

/// ESD of the squared singular values: weight `1/n` at each `s_k²`.
pub fn esd_squares(svals: &[f64]) -> Result<EmpiricalCdf> {
    if let Some(s) = svals.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::invalid(format!("singular value {s} is negative")));
    }
    let squares: Vec<f64> = svals.iter().map(|s| s * s).collect();
    EmpiricalCdf::uniform(&squares)
}

/// Distribution of `±√ξ` with a fair sign, for `ξ ~ F` on `[0, ∞)`.
pub fn symmetrize(f: &EmpiricalCdf) -> Result<EmpiricalCdf> {
    let mut points = Vec::with_capacity(2 * f.atoms.len());
    for &(t, w) in &f.atoms {
        if t < 0.0 {
            return Err(Error::invalid(format!("atom at {t} is negative")));
        }
        if t == 0.0 {
            points.push((0.0, w));
        } else {
            let r = t.sqrt();
            points.push((-r, w / 2.0));
            points.push((r, w / 2.0));
        }
    }
    EmpiricalCdf::from_weighted(points)
}

fn require_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("z = {z} is not in the upper half-plane")))
    }
}

/// `(1/2n) Σ_i (λ_i − z)^{-1} + (1 − y_m)/(2 y_m z)` over the `n + p_m`
/// eigenvalues of `V̂`.
///
/// The correction term removes the `p_m − n` structural zeros, so the result
/// is the Stieltjes transform of the symmetrized squared-singular-value ESD.
pub fn empirical_stieltjes(eigs: &[f64], profile: &DimensionProfile, z: Complex64) -> Result<StieltjesSample> {
    require_upper(z)?;
    let n = profile.n();
    let p_m = profile.p(profile.m());
    if eigs.len() != n + p_m {
        return Err(Error::invalid(format!(
            "expected {} eigenvalues, got {}",
            n + p_m,
            eigs.len()
        )));
    }
    let trace: Complex64 = eigs.iter().map(|&l| 1.0 / (l - z)).sum();
    // (1 − y_m)/(2 y_m) with y_m = n/p_m, kept in integers
    let correction = (p_m - n) as f64 / (2 * n) as f64 / z;
    Ok(StieltjesSample { z, s: trace / (2 * n) as f64 + correction })
}

/// Kolmogorov distance between a step distribution and a continuous CDF.
///
/// The supremum of a step-vs-continuous difference is attained at an atom
/// or at its left limit, so only those points are visited.
pub fn kolmogorov_distance<G: Fn(f64) -> f64>(f: &EmpiricalCdf, g: G) -> f64 {
    let mut below = 0.0;
    let mut worst = 0.0f64;
    for (&(x, _), &above) in f.atoms.iter().zip(&f.cumulative) {
        let gx = g(x);
        worst = worst.max((above - gx).abs()).max((below - gx).abs());
        below = above;
    }
    worst.min(1.0)
}

/// Kolmogorov distance between two step distributions.
pub fn kolmogorov_distance_steps(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    a.atoms
        .iter()
        .chain(&b.atoms)
        .map(|&(x, _)| (a.cdf(x) - b.cdf(x)).abs())
        .fold(0.0, f64::max)
}

/// Sup distance between two continuous CDFs over the supplied points.
pub fn kolmogorov_distance_on<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, points: &[f64]) -> f64 {
    points.iter().map(|&x| (f(x) - g(x)).abs()).fold(0.0, f64::max)
}

/// `∫ x^k dF = Σ w_i x_i^k`.
pub fn empirical_moment(f: &EmpiricalCdf, k: u32) -> Result<f64> {
    let exp = i32::try_from(k).map_err(|_| Error::Overflow(format!("moment order {k} too large")))?;
    let value: f64 = f.atoms.iter().map(|&(x, w)| w * x.powi(exp)).sum();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow(format!("moment of order {k} is not finite ({value})")))
    }
}

/// Left side of the limit equation evaluated at an arbitrary `s`:
///
/// * squares: `1 + z s − s ∏ (1 − y_l − z y_l s)`
/// * symmetrized: `1 + z s − (s/z) ∏ (1 − y_l − z y_l s)`
pub fn equation_residual(s: Complex64, z: Complex64, spec: &LimitLawSpec, variant: Variant) -> Result<Complex64> {
    let product: Complex64 = spec.y().iter().map(|&y| 1.0 - y - z * y * s).product();
    match variant {
        Variant::Squares => Ok(1.0 + z * s - s * product),
        Variant::Symmetrized => {
            if z == Complex64::new(0.0, 0.0) {
                return Err(Error::invalid("the symmetrized equation is undefined at z = 0"));
            }
            Ok(1.0 + z * s - s / z * product)
        }
    }
}
