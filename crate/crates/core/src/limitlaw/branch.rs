//! Branch selection and vertical continuation of the Stieltjes root.
//!
//! At large `|z|` the physical root is the one closest to `−1/z`. Moving
//! toward the real axis, each step keeps the root nearest to the previous
//! selection. A step whose displacement is large compared with the gap to the
//! nearest competing root is subdivided, so the walk cannot hop branches.

use num_complex::Complex64;
use rayon::prelude::*;

use super::roots::{eval, eval_scale, solve_all_roots, solve_all_roots_from};
use super::{poly_coefficients, LimitLawSpec, Variant};
use crate::error::{Error, Result};

/// Roots with imaginary part above this are eligible.
pub const IMAG_TOLERANCE: f64 = -1e-12;

/// Relative distance under which two candidate roots count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

/// Maximum number of halvings of one continuation step.
const MAX_SUBDIVISION_DEPTH: u32 = 24;

/// Picks the Stieltjes branch among the roots at `z`.
///
/// With `prev`, the eligible root nearest to it; without, the eligible root
/// nearest to `−1/z`. Ties go to the larger imaginary part.
pub fn select_branch(roots: &[Complex64], z: Complex64, prev: Option<Complex64>) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::invalid(format!("z = {z} is not in the upper half-plane")));
    }
    let target = prev.unwrap_or_else(|| -1.0 / z);
    let mut best: Option<(f64, Complex64)> = None;
    for &r in roots.iter().filter(|r| r.im > IMAG_TOLERANCE) {
        let d = (r - target).norm();
        best = match best {
            None => Some((d, r)),
            Some((bd, br)) => {
                let tied = (d - bd).abs() <= TIE_TOLERANCE * bd.max(f64::MIN_POSITIVE);
                if tied {
                    log::debug!("branch-point event at z = {z}: roots {br} and {r} tie");
                    Some(if r.im > br.im { (d, r) } else { (bd, br) })
                } else if d < bd {
                    Some((d, r))
                } else {
                    Some((bd, br))
                }
            }
        };
    }
    let Some((_, s)) = best else {
        return Err(Error::BranchLoss { z, roots: roots.to_vec() });
    };
    if s.norm() > (1.0 + 1e-6) / z.im {
        return Err(Error::BranchLoss { z, roots: roots.to_vec() });
    }
    Ok(s)
}

/// Continuation state at one point `z`.
#[derive(Clone, Debug)]
struct TrackState {
    z: Complex64,
    s: Complex64,
    roots: Vec<Complex64>,
}

impl TrackState {
    fn start(spec: &LimitLawSpec, variant: Variant, z: Complex64) -> Result<Self> {
        let coeffs = poly_coefficients(spec, z, variant)?;
        let roots = solve_all_roots(&coeffs)?;
        let s = select_branch(&roots, z, None)?;
        Ok(Self { z, s, roots })
    }

    /// Distance from the selected root to its nearest competitor.
    fn gap(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| (r - self.s).norm())
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    fn step(&self, spec: &LimitLawSpec, variant: Variant, z: Complex64, depth: u32) -> Result<Self> {
        let coeffs = poly_coefficients(spec, z, variant)?;
        let roots = solve_all_roots_from(&coeffs, &self.roots)?;
        let s = select_branch(&roots, z, Some(self.s))?;
        let jump = (s - self.s).norm();
        if jump > 0.5 * self.gap() && depth < MAX_SUBDIVISION_DEPTH {
            let mid = (self.z + z) * 0.5;
            let half = self.step(spec, variant, mid, depth + 1)?;
            return half.step(spec, variant, z, depth + 1);
        }
        Ok(Self { z, s, roots })
    }
}

/// Walks `x + i v` down the descending `path`, returning the branch at every
/// step. `probes` are extra heights evaluated on short side branches as the
/// walk passes them; their values come back in the second vector.
pub(crate) fn track_vertical(
    spec: &LimitLawSpec,
    variant: Variant,
    x: f64,
    path: &[f64],
    probes: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let mut state = TrackState::start(spec, variant, Complex64::new(x, path[0]))?;
    let mut values = Vec::with_capacity(path.len());
    values.push(state.s);
    let mut probe_values = vec![Complex64::new(0.0, 0.0); probes.len()];
    let mut probe_done = vec![false; probes.len()];
    for &v in &path[1..] {
        for (i, &pv) in probes.iter().enumerate() {
            if !probe_done[i] && pv <= state.z.im && pv > v {
                probe_values[i] = state.step(spec, variant, Complex64::new(x, pv), 0)?.s;
                probe_done[i] = true;
            }
        }
        state = state.step(spec, variant, Complex64::new(x, v), 0)?;
        values.push(state.s);
    }
    for (i, &pv) in probes.iter().enumerate() {
        if !probe_done[i] {
            probe_values[i] = state.step(spec, variant, Complex64::new(x, pv), 0)?.s;
        }
    }
    Ok((values, probe_values))
}

/// `Im s(x + i v)` after walking down from `top`, `per_decade` steps per decade.
pub(crate) fn branch_at(
    spec: &LimitLawSpec,
    variant: Variant,
    x: f64,
    v: f64,
    top: f64,
    per_decade: usize,
) -> Result<Complex64> {
    let path = log_path(top, v, per_decade);
    let (values, _) = track_vertical(spec, variant, x, &path, &[])?;
    Ok(*values.last().expect("path is never empty"))
}

/// Geometric path from `top` down to `floor` with an even number of equal
/// log-steps, at least `per_decade` per decade.
pub(crate) fn log_path(top: f64, floor: f64, per_decade: usize) -> Vec<f64> {
    assert!(top > floor && floor > 0.0);
    let decades = (top / floor).log10();
    let mut steps = (decades * per_decade as f64).ceil() as usize;
    steps = steps.max(2);
    steps += steps % 2;
    let ratio = (floor / top).ln() / steps as f64;
    let mut path: Vec<f64> = (0..=steps).map(|k| top * (ratio * k as f64).exp()).collect();
    path[steps] = floor;
    path
}

/// Branch-tracked transform values on `x + i v_last` for every `x`.
#[derive(Clone, Debug)]
pub struct StieltjesSolution {
    pub grid: Vec<Complex64>,
    pub values: Vec<Complex64>,
    pub variant: Variant,
    /// `|P(s; z)|` at each grid point.
    pub residuals: Vec<f64>,
    /// `Σ |c_i| |s|^i` at each grid point, the scale the residual is judged against.
    pub scales: Vec<f64>,
}

/// Tracks the branch for each `x` from `x + i v_path[0]` down to
/// `x + i v_path[last]`.
pub fn stieltjes_on_grid(
    spec: &LimitLawSpec,
    variant: Variant,
    x_grid: &[f64],
    v_path: &[f64],
) -> Result<StieltjesSolution> {
    if v_path.is_empty() || v_path[0] < 10.0 {
        return Err(Error::invalid("v path must start at v >= 10"));
    }
    if v_path.windows(2).any(|w| !(w[1] < w[0])) || !(v_path[v_path.len() - 1] > 0.0) {
        return Err(Error::invalid("v path must be strictly descending and positive"));
    }
    let v_last = v_path[v_path.len() - 1];
    let values: Vec<Complex64> = x_grid
        .par_iter()
        .map(|&x| track_vertical(spec, variant, x, v_path, &[]).map(|(vals, _)| vals[vals.len() - 1]))
        .collect::<Result<_>>()?;
    let grid: Vec<Complex64> = x_grid.iter().map(|&x| Complex64::new(x, v_last)).collect();
    let mut residuals = Vec::with_capacity(grid.len());
    let mut scales = Vec::with_capacity(grid.len());
    for (&z, &s) in grid.iter().zip(&values) {
        let c = poly_coefficients(spec, z, variant)?;
        residuals.push(eval(&c, s).norm());
        scales.push(eval_scale(&c, s));
    }
    Ok(StieltjesSolution { grid, values, variant, residuals, scales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Marchenko–Pastur transform for ratio y, upper-half-plane branch.
    fn mp(z: Complex64, y: f64) -> Complex64 {
        let disc = ((z - 1.0 - y) * (z - 1.0 - y) - 4.0 * y).sqrt();
        let a = (1.0 - y - z + disc) / (2.0 * y * z);
        let b = (1.0 - y - z - disc) / (2.0 * y * z);
        if a.im > b.im {
            a
        } else {
            b
        }
    }

    #[test]
    fn far_field_picks_minus_inverse_z() {
        for spec in [LimitLawSpec::square(3).unwrap(), LimitLawSpec::new(vec![0.3, 0.9]).unwrap()] {
            for variant in [Variant::Squares, Variant::Symmetrized] {
                let z = cx(3.0, 1e6);
                let roots = solve_all_roots(&poly_coefficients(&spec, z, variant).unwrap()).unwrap();
                let s = select_branch(&roots, z, None).unwrap();
                assert!((s + 1.0 / z).norm() <= 1e-5);
            }
        }
    }

    #[test]
    fn branch_loss_is_reported() {
        let z = cx(0.0, 1.0);
        let err = select_branch(&[cx(1.0, -1.0), cx(0.0, -0.5)], z, None).unwrap_err();
        assert!(matches!(err, Error::BranchLoss { .. }));
        assert!(select_branch(&[cx(0.0, 1.0)], cx(0.0, -1.0), None).is_err());
    }

    #[test]
    fn ties_prefer_upper_root() {
        for roots in [[cx(1.0, 0.0), cx(0.0, 1.0)], [cx(0.0, 1.0), cx(1.0, 0.0)]] {
            let s = select_branch(&roots, cx(0.0, 0.1), Some(cx(0.5, 0.5))).unwrap();
            assert_eq!(s, cx(0.0, 1.0));
        }
    }

    #[test]
    fn marchenko_pastur_near_axis() {
        let spec = LimitLawSpec::square(1).unwrap();
        let z = cx(-1.0, 0.001);
        let s = branch_at(&spec, Variant::Squares, z.re, z.im, 10.0, 40).unwrap();
        assert!((s - mp(z, 1.0)).norm() <= 1e-3);
    }

    #[test]
    fn grid_matches_marchenko_pastur() {
        let spec = LimitLawSpec::square(1).unwrap();
        let xs: Vec<f64> = (0..61).map(|i| -1.0 + 6.0 * i as f64 / 60.0).collect();
        let path = log_path(10.0, 1e-3, 30);
        let sol = stieltjes_on_grid(&spec, Variant::Squares, &xs, &path).unwrap();
        for ((z, s), (r, sc)) in sol.grid.iter().zip(&sol.values).zip(sol.residuals.iter().zip(&sol.scales)) {
            assert!((s - mp(*z, 1.0)).norm() <= 1e-8, "z = {z}");
            assert!(s.im > 0.0);
            assert!(*r <= 1e-10 * sc);
        }
    }

    #[test]
    fn grid_rejects_bad_paths() {
        let spec = LimitLawSpec::square(1).unwrap();
        assert!(stieltjes_on_grid(&spec, Variant::Squares, &[0.0], &[5.0, 1.0]).is_err());
        assert!(stieltjes_on_grid(&spec, Variant::Squares, &[0.0], &[10.0, 11.0]).is_err());
        assert!(stieltjes_on_grid(&spec, Variant::Squares, &[0.0], &[]).is_err());
    }

    #[test]
    fn continuation_has_no_jumps() {
        let spec = LimitLawSpec::new(vec![0.5, 0.8]).unwrap();
        let path = log_path(10.0, 0.01, 40);
        let (vals, _) = track_vertical(&spec, Variant::Squares, 1.3, &path, &[]).unwrap();
        for (k, w) in vals.windows(2).enumerate() {
            // |s'(z)| ≤ 1/v² for a Stieltjes transform, so a step of dv moves s by at most dv/v²
            let dv = path[k] - path[k + 1];
            let bound = dv / (path[k + 1] * path[k + 1]);
            assert!((w[1] - w[0]).norm() <= bound * (1.0 + 1e-9), "step {k}");
        }
        for (k, s) in vals.iter().enumerate() {
            let z = cx(1.3, path[k]);
            let c = poly_coefficients(&spec, z, Variant::Squares).unwrap();
            assert!(eval(&c, *s).norm() <= 1e-10 * eval_scale(&c, *s));
        }
    }

    #[test]
    fn probes_are_on_the_same_branch() {
        let spec = LimitLawSpec::square(2).unwrap();
        let path = log_path(10.0, 1e-4, 40);
        let (_, probes) = track_vertical(&spec, Variant::Squares, 2.0, &path, &[2e-4, 1e-4]).unwrap();
        let direct = branch_at(&spec, Variant::Squares, 2.0, 2e-4, 10.0, 40).unwrap();
        assert_abs_diff_eq!((probes[0] - direct).norm(), 0.0, epsilon = 1e-12);
        assert!(probes.iter().all(|s| s.im > 0.0));
    }

    /// Cardano solution of the square m = 2 equation `1 + z s − z² s³ = 0`,
    /// written as `s³ + p s + q = 0` with `p = −1/z`, `q = −1/z²`.
    fn cubic_roots(z: Complex64) -> [Complex64; 3] {
        let p = -1.0 / z;
        let q = -1.0 / (z * z);
        let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let mut u = (-q / 2.0 + disc).powf(1.0 / 3.0);
        if u.norm() < 1e-300 {
            u = (-q / 2.0 - disc).powf(1.0 / 3.0);
        }
        let omega = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        let mut out = [cx(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let uk = u * omega.powu(k as u32);
            *slot = uk - p / (3.0 * uk);
        }
        out
    }

    #[test]
    fn square_m2_matches_cardano() {
        let spec = LimitLawSpec::square(2).unwrap();
        let z = cx(1.0, 0.001);
        let s = branch_at(&spec, Variant::Squares, 1.0, 0.001, 10.0, 40).unwrap();
        let candidates: Vec<Complex64> =
            cubic_roots(z).into_iter().filter(|r| r.im > 0.0 && r.norm() <= 1.0 / z.im).collect();
        assert_eq!(candidates.len(), 1, "{candidates:?}");
        assert!((s - candidates[0]).norm() <= 1e-9 * s.norm());
    }

    #[test]
    fn herglotz_on_a_grid() {
        for spec in [LimitLawSpec::square(3).unwrap(), LimitLawSpec::new(vec![0.2, 0.6, 1.0]).unwrap()] {
            for variant in [Variant::Squares, Variant::Symmetrized] {
                let xs: Vec<f64> = (0..41).map(|i| -4.0 + 12.0 * i as f64 / 40.0).collect();
                let path = log_path(100.0, 0.01, 30);
                let sol = stieltjes_on_grid(&spec, variant, &xs, &path).unwrap();
                for s in &sol.values {
                    assert!(s.im > 0.0);
                    assert!(s.norm() <= 1.0 / 0.01 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn asymptotic_decay_along_diagonal() {
        let spec = LimitLawSpec::new(vec![0.5, 0.8]).unwrap();
        let mut errs = Vec::new();
        for r in [1e3, 1e4, 1e5] {
            let z = Complex64::from_polar(r, std::f64::consts::FRAC_PI_4);
            let roots = solve_all_roots(&poly_coefficients(&spec, z, Variant::Squares).unwrap()).unwrap();
            let s = select_branch(&roots, z, None).unwrap();
            errs.push((z * s + 1.0).norm());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((5.0..20.0).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn symmetrized_matches_squares_under_substitution() {
        let spec = LimitLawSpec::new(vec![0.5, 0.8]).unwrap();
        for (re, im) in [(0.7, 0.3), (-1.1, 0.2), (0.2, 1.5)] {
            let z = cx(re, im);
            let w = z * z;
            let tilde = branch_at(&spec, Variant::Symmetrized, z.re, z.im, 100.0, 40).unwrap();
            // the squares law at w = z² may sit in the lower half-plane; use conjugation symmetry
            let sq = if w.im > 0.0 {
                branch_at(&spec, Variant::Squares, w.re, w.im, 100.0, 40).unwrap()
            } else {
                branch_at(&spec, Variant::Squares, w.re, -w.im, 100.0, 40).unwrap().conj()
            };
            assert!((tilde - z * sq).norm() <= 1e-8, "z = {z}");
        }
    }
}
