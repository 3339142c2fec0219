//! Density, CDF and support edges of the limit law.
//!
//! The density is `Im s(x + i v_min) / π` (optionally Richardson-extrapolated
//! from `v_min` and `2 v_min`).
//!
//! The CDF is computed pointwise instead of by integrating the density: with
//! `L(z) = ∫ log(z − t) dG(t)` we have `L' = −s` and
//! `G(x) = 1 − Im L(x + i0) / π`. Walking down the vertical line from
//! `x + iV`, where `L` is given by its moment series
//! `log z − Σ_k M_k / (k z^k)`, gives
//! `Im L(x + iv) = Im L(x + iV) + ∫_v^V Re s(x + iτ) dτ`.
//! The integral is taken by Simpson's rule in `ln τ` along the same path used
//! for branch tracking, down to a floor far below `v_min`. This stays accurate
//! next to hard edges where the density is not integrable on a uniform grid.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::branch::{branch_at, log_path, track_vertical};
use super::{LimitLawSpec, Variant};
use crate::error::{Error, Result};
use crate::moments::moments_general_y_f64;

/// Steps per decade of `v` on continuation paths.
pub const PATH_POINTS_PER_DECADE: usize = 40;
/// Lowest height reached when integrating for the CDF.
pub const CDF_FLOOR: f64 = 1e-10;
/// Default inversion height for the density.
pub const DEFAULT_V_MIN: f64 = 1e-4;
/// Number of points of the uniform part of the default grid.
pub const DEFAULT_GRID_POINTS: usize = 2001;
/// Margin added on both sides of the support by the default grid.
pub const DEFAULT_GRID_MARGIN: f64 = 0.1;

const SERIES_TERMS: usize = 16;
const EDGE_PROBE_HEIGHT: f64 = 1e-9;
const EDGE_PROBE_THRESHOLD: f64 = 1e-4;
const EDGE_BISECTION_WIDTH: f64 = 1e-7;
const NEGATIVE_DENSITY_LIMIT: f64 = -1e-6;

/// Density and CDF of the limit law on an ascending grid.
#[derive(Clone, Debug, Serialize)]
pub struct DensityCurve {
    pub variant: Variant,
    pub x: Vec<f64>,
    /// Density `g`, clamped at zero.
    pub density: Vec<f64>,
    /// CDF `G`, nondecreasing.
    pub cdf: Vec<f64>,
    pub edge_lo: f64,
    pub edge_hi: f64,
    pub v_min: f64,
    pub extrapolated: bool,
    /// Grid points where the raw density fell below `−1e−6` before clamping.
    pub negative_excursions: usize,
    /// Trapezoid integral of the density over the grid.
    pub trapezoid_mass: f64,
    /// `|1 − G(last)|`.
    pub cdf_tail_deviation: f64,
}

/// Continuation start height: well outside the support so the moment
/// series for `L` converges fast and `−1/z` identifies the branch.
fn top_height(spec: &LimitLawSpec, variant: Variant) -> f64 {
    let radius = match variant {
        Variant::Squares => spec.support_bound(),
        Variant::Symmetrized => spec.support_bound().sqrt(),
    };
    (10.0 * radius).max(10.0)
}

fn series_moments(spec: &LimitLawSpec, variant: Variant) -> Result<Vec<f64>> {
    match variant {
        Variant::Squares => moments_general_y_f64(spec.y(), SERIES_TERMS),
        Variant::Symmetrized => {
            let half = moments_general_y_f64(spec.y(), SERIES_TERMS / 2)?;
            Ok((0..=SERIES_TERMS).map(|k| if k % 2 == 0 { half[k / 2] } else { 0.0 }).collect())
        }
    }
}

/// `∫ log(z − t) dG(t)` from the moment series, valid for `|z|` beyond the support.
fn log_potential_far(z: Complex64, moments: &[f64]) -> Complex64 {
    let inv = 1.0 / z;
    let mut power = Complex64::new(1.0, 0.0);
    let mut acc = z.ln();
    for (k, &mk) in moments.iter().enumerate().skip(1) {
        power *= inv;
        acc -= mk / k as f64 * power;
    }
    acc
}

struct PointValues {
    density_raw: f64,
    cdf: f64,
}

fn evaluate_point(
    spec: &LimitLawSpec,
    variant: Variant,
    x: f64,
    path: &[f64],
    moments: &[f64],
    v_min: f64,
    extrapolate: bool,
) -> Result<PointValues> {
    let (values, probes) = track_vertical(spec, variant, x, path, &[v_min, 2.0 * v_min])?;
    let density_raw = if extrapolate {
        (2.0 * probes[0].im - probes[1].im) / std::f64::consts::PI
    } else {
        probes[0].im / std::f64::consts::PI
    };
    // Simpson in u = ln τ; the path has an even number of equal log-steps
    let h = (path[0] / path[1]).ln();
    let last = path.len() - 1;
    let mut integral = 0.0;
    for (k, (&v, s)) in path.iter().zip(&values).enumerate() {
        let weight = if k == 0 || k == last {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        integral += weight * s.re * v;
    }
    integral *= h / 3.0;
    let top = log_potential_far(Complex64::new(x, path[0]), moments);
    let im_l = top.im + integral;
    Ok(PointValues { density_raw, cdf: 1.0 - im_l / std::f64::consts::PI })
}

/// Inverts the Stieltjes transform on `x_grid` (ascending).
pub fn density(
    spec: &LimitLawSpec,
    variant: Variant,
    x_grid: &[f64],
    v_min: f64,
    extrapolate: bool,
) -> Result<DensityCurve> {
    if x_grid.is_empty() || x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("x grid must be nonempty and strictly ascending"));
    }
    if !(v_min > 0.0 && v_min <= 0.1) {
        return Err(Error::invalid(format!("v_min = {v_min} must lie in (0, 0.1]")));
    }
    let (lo, hi) = support_edge(spec)?;
    let (edge_lo, edge_hi) = match variant {
        Variant::Squares => (lo, hi),
        Variant::Symmetrized => (-hi.sqrt(), hi.sqrt()),
    };
    let top = top_height(spec, variant);
    let floor = CDF_FLOOR.min(v_min / 10.0);
    let path = log_path(top, floor, PATH_POINTS_PER_DECADE);
    let moments = series_moments(spec, variant)?;
    let points: Vec<PointValues> = x_grid
        .par_iter()
        .map(|&x| evaluate_point(spec, variant, x, &path, &moments, v_min, extrapolate))
        .collect::<Result<_>>()?;

    let mut negative_excursions = 0;
    let density: Vec<f64> = points
        .iter()
        .zip(x_grid)
        .map(|(p, &x)| {
            if p.density_raw < NEGATIVE_DENSITY_LIMIT {
                negative_excursions += 1;
                log::warn!("density {:.3e} at x = {x} clamped to 0", p.density_raw);
            }
            p.density_raw.max(0.0)
        })
        .collect();
    let mut running = 0.0f64;
    let cdf: Vec<f64> = points
        .iter()
        .map(|p| {
            running = running.max(p.cdf.clamp(0.0, 1.0));
            running
        })
        .collect();
    let trapezoid_mass = x_grid
        .windows(2)
        .zip(density.windows(2))
        .map(|(x, g)| 0.5 * (g[0] + g[1]) * (x[1] - x[0]))
        .sum();
    let cdf_tail_deviation = (1.0 - cdf[cdf.len() - 1]).abs();
    Ok(DensityCurve {
        variant,
        x: x_grid.to_vec(),
        density,
        cdf,
        edge_lo,
        edge_hi,
        v_min,
        extrapolated: extrapolate,
        negative_excursions,
        trapezoid_mass,
        cdf_tail_deviation,
    })
}

fn inside_support(spec: &LimitLawSpec, x: f64, top: f64) -> Result<bool> {
    let s = branch_at(spec, Variant::Squares, x, EDGE_PROBE_HEIGHT, top, PATH_POINTS_PER_DECADE)?;
    Ok(s.im >= EDGE_PROBE_THRESHOLD)
}

fn bisect_edge(spec: &LimitLawSpec, top: f64, mut inside: f64, mut outside: f64) -> Result<f64> {
    while (outside - inside).abs() > EDGE_BISECTION_WIDTH {
        let mid = 0.5 * (inside + outside);
        if inside_support(spec, mid, top)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Edges `(lo, hi)` of the squares-law support, located by bisection on
/// `Im s(x + i·1e−9) ≥ 1e−4`. `lo` is exactly 0 when some `y_l = 1`.
pub fn support_edge(spec: &LimitLawSpec) -> Result<(f64, f64)> {
    let top = top_height(spec, Variant::Squares);
    let bound = spec.support_bound();
    // the mean is 1; fall back to a scan if the support has a hole there
    let mut interior = 1.0;
    if !inside_support(spec, interior, top)? {
        let found = (1..400)
            .map(|i| bound * i as f64 / 400.0)
            .find(|&x| inside_support(spec, x, top).unwrap_or(false));
        interior = found.ok_or_else(|| Error::Structural("could not find a point inside the support".into()))?;
    }
    let mut outside = 1.1 * bound + 0.1;
    while inside_support(spec, outside, top)? {
        outside *= 2.0;
    }
    let hi = bisect_edge(spec, top, interior, outside)?;
    let lo = if spec.has_hard_edge() || inside_support(spec, 0.0, top)? {
        0.0
    } else {
        bisect_edge(spec, top, interior, 0.0)?
    };
    Ok((lo, hi))
}

fn uniform(a: f64, b: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).map(move |i| a + (b - a) * i as f64 / (count - 1) as f64)
}

/// Default grid: [`DEFAULT_GRID_POINTS`] uniform points, see [`x_grid`].
pub fn default_x_grid(spec: &LimitLawSpec, variant: Variant) -> Result<Vec<f64>> {
    x_grid(spec, variant, DEFAULT_GRID_POINTS)
}

/// `count` uniform points over the support widened by 0.1 on each side,
/// plus geometric clusters (8 per decade, 1e−1 down to 1e−9) on both sides
/// of every edge, where the CDF is not smooth.
pub fn x_grid(spec: &LimitLawSpec, variant: Variant, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::invalid("a grid needs at least 2 uniform points"));
    }
    let (lo, hi) = support_edge(spec)?;
    let (a, b, singular) = match variant {
        Variant::Squares => (lo - DEFAULT_GRID_MARGIN, hi + DEFAULT_GRID_MARGIN, vec![lo, hi]),
        Variant::Symmetrized => {
            let r = hi.sqrt();
            let inner = if lo > 0.0 { vec![-lo.sqrt(), lo.sqrt()] } else { vec![0.0] };
            let mut s = vec![-r, r];
            s.extend(inner);
            (-r - DEFAULT_GRID_MARGIN, r + DEFAULT_GRID_MARGIN, s)
        }
    };
    let mut grid: Vec<f64> = uniform(a, b, count).collect();
    for e in singular {
        grid.push(e);
        for j in 8..=72 {
            let d = 10f64.powf(-(j as f64) / 8.0);
            grid.extend([e - d, e + d].into_iter().filter(|x| (a..=b).contains(x)));
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * q.abs().max(1.0));
    Ok(grid)
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Butland slopes).
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::invalid("interpolation needs two or more matching points"));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("interpolation abscissae must be strictly ascending"));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        slopes[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(Self { x, y, slopes })
    }

    /// Interpolated value; constant extrapolation outside the data.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let u = (t - self.x[k]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

/// Continuous limit CDF interpolated from a [`DensityCurve`]; 0 left of the
/// grid and 1 right of it.
#[derive(Clone, Debug)]
pub struct LimitCdf {
    interp: MonotoneCubic,
    lo: f64,
    hi: f64,
}

impl LimitCdf {
    pub fn from_curve(curve: &DensityCurve) -> Result<Self> {
        let interp = MonotoneCubic::new(curve.x.clone(), curve.cdf.clone())?;
        Ok(Self { interp, lo: curve.x[0], hi: curve.x[curve.x.len() - 1] })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lo {
            0.0
        } else if x > self.hi {
            1.0
        } else {
            self.interp.eval(x).clamp(0.0, 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mp_density(x: f64, y: f64) -> f64 {
        let (a, b) = ((1.0 - y.sqrt()).powi(2), (1.0 + y.sqrt()).powi(2));
        if x <= a || x >= b {
            0.0
        } else {
            ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * y * x)
        }
    }

    #[test]
    fn monotone_cubic_reproduces_lines_and_stays_monotone() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7).collect();
        let line: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let interp = MonotoneCubic::new(x.clone(), line).unwrap();
        assert_abs_diff_eq!(interp.eval(3.33), 2.0 * 3.33 + 1.0, epsilon = 1e-12);
        let step: Vec<f64> = x.iter().map(|&v| if v < 3.0 { 0.0 } else { 1.0 }).collect();
        let interp = MonotoneCubic::new(x, step).unwrap();
        let mut prev = -1.0;
        for i in 0..=700 {
            let v = interp.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn marchenko_pastur_edges() {
        let (lo, hi) = support_edge(&LimitLawSpec::square(1).unwrap()).unwrap();
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 4.0, epsilon = 1e-3);
        let (lo, hi) = support_edge(&LimitLawSpec::new(vec![0.25]).unwrap()).unwrap();
        assert_abs_diff_eq!(lo, 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 2.25, epsilon = 1e-3);
    }

    #[test]
    fn marchenko_pastur_density() {
        let spec = LimitLawSpec::square(1).unwrap();
        let grid: Vec<f64> = (0..200).map(|i| 4.0 * (i as f64 + 0.5) / 200.0).collect();
        let curve = density(&spec, Variant::Squares, &grid, DEFAULT_V_MIN, true).unwrap();
        for (x, g) in curve.x.iter().zip(&curve.density) {
            assert!((g - mp_density(*x, 1.0)).abs() <= 2e-3, "x = {x}");
        }
        assert_eq!(curve.negative_excursions, 0);

        let spec = LimitLawSpec::new(vec![0.25]).unwrap();
        let grid: Vec<f64> = uniform(0.27, 2.23, 197).collect();
        let curve = density(&spec, Variant::Squares, &grid, DEFAULT_V_MIN, true).unwrap();
        for (x, g) in curve.x.iter().zip(&curve.density) {
            assert!((g - mp_density(*x, 0.25)).abs() <= 2e-3, "x = {x}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        for y in [vec![0.25], vec![0.5, 0.8]] {
            let spec = LimitLawSpec::new(y).unwrap();
            let grid = default_x_grid(&spec, Variant::Squares).unwrap();
            let curve = density(&spec, Variant::Squares, &grid, DEFAULT_V_MIN, true).unwrap();
            assert_abs_diff_eq!(curve.trapezoid_mass, 1.0, epsilon = 1e-3);
            assert!(curve.cdf_tail_deviation <= 1e-6);
            assert!(curve.cdf[0] <= 1e-6);
            assert!(curve.cdf.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn symmetrized_density_is_even() {
        let spec = LimitLawSpec::new(vec![0.5, 0.8]).unwrap();
        let grid: Vec<f64> = uniform(-2.5, 2.5, 101).collect();
        let curve = density(&spec, Variant::Symmetrized, &grid, DEFAULT_V_MIN, true).unwrap();
        let n = grid.len();
        for i in 0..n {
            assert_abs_diff_eq!(curve.density[i], curve.density[n - 1 - i], epsilon = 1e-10);
        }
        assert!(curve.cdf_tail_deviation <= 1e-6);
        assert_abs_diff_eq!(curve.cdf[n / 2], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn cdf_of_hard_edge_law_is_accurate() {
        // Marchenko–Pastur at y = 1, reference CDF by quadrature
        let spec = LimitLawSpec::square(1).unwrap();
        let grid = vec![1e-8, 1e-4, 0.01, 0.5, 1.0, 2.0, 3.5, 3.999, 4.5];
        let curve = density(&spec, Variant::Squares, &grid, DEFAULT_V_MIN, true).unwrap();
        for (x, got) in grid.iter().zip(&curve.cdf) {
            // substitution x = 4 sin²θ removes the endpoint singularities
            let theta_max = (x.min(4.0) / 4.0).sqrt().asin();
            let steps = 20000;
            let mut acc = 0.0;
            for i in 0..steps {
                let t = theta_max * (i as f64 + 0.5) / steps as f64;
                // g(x) dx with x = 4 sin²t: (1/2π)√((4−x)/x) · 8 sin t cos t dt = (4/π) cos² t dt
                acc += 4.0 / std::f64::consts::PI * t.cos().powi(2);
            }
            let want = acc * theta_max / steps as f64;
            assert!((got - want).abs() <= 1e-4, "x = {x}: {got} vs {want}");
        }
    }

    #[test]
    fn default_grid_covers_edges() {
        let spec = LimitLawSpec::square(2).unwrap();
        let grid = default_x_grid(&spec, Variant::Squares).unwrap();
        assert!(grid.len() > DEFAULT_GRID_POINTS);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid[0] <= -0.1 + 1e-12);
        assert!(grid.iter().any(|&x| x > 0.0 && x < 1e-8));
    }

    #[test]
    fn rejects_bad_density_inputs() {
        let spec = LimitLawSpec::square(1).unwrap();
        assert!(density(&spec, Variant::Squares, &[1.0, 0.5], 1e-4, true).is_err());
        assert!(density(&spec, Variant::Squares, &[0.5], 0.5, true).is_err());
        assert!(density(&spec, Variant::Squares, &[], 1e-4, true).is_err());
    }
}
