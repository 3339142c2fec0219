use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use prodsv::limitlaw::density::{default_x_grid, x_grid};
use prodsv::limitlaw::{density, stieltjes_on_grid, support_edge, LimitCdf, LimitLawSpec, Variant};
use prodsv::moments::{fuss_catalan, moment_report, moments_general_y, parse_rational};

fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    // both are huge; compare through their bit-shifted heads
    let shift = b.bits().saturating_sub(60);
    (a >> shift).to_f64().unwrap() / (b >> shift).to_f64().unwrap()
}

#[test]
fn right_edge_matches_moment_growth() {
    // M_{k+1}/M_k = r − c/k + O(1/k²); two-point extrapolation removes the 1/k term
    let growth = |k: usize| ratio(&fuss_catalan(2, k + 1), &fuss_catalan(2, k));
    let (k1, k2) = (1000, 2000);
    let oracle = 2.0 * growth(k2) - growth(k1);
    assert!((oracle - 6.75).abs() < 1e-4, "oracle {oracle}");
    let (lo, hi) = support_edge(&LimitLawSpec::square(2).unwrap()).unwrap();
    assert_eq!(lo, 0.0);
    assert!((hi - oracle).abs() < 1e-3, "edge {hi} vs {oracle}");
}

#[test]
fn density_moments_match_series() {
    for y in [vec!["1", "1"], vec!["1/2", "4/5"], vec!["1/3", "1", "2/3"]] {
        let exact: Vec<_> = y.iter().map(|t| parse_rational(t).unwrap()).collect();
        let spec = LimitLawSpec::new(exact.iter().map(prodsv::moments::rational_to_f64).collect()).unwrap();
        let grid = default_x_grid(&spec, Variant::Squares).unwrap();
        let curve = density(&spec, Variant::Squares, &grid, 1e-4, true).unwrap();
        let table = moments_general_y(&exact, 6).unwrap();
        let errors = moment_report(&curve, &table, 6).unwrap();
        assert!(errors.iter().all(|&e| e <= 1e-2), "y = {y:?}: {errors:?}");
    }
}

#[test]
fn herglotz_and_decay_on_a_wide_grid() {
    let spec = LimitLawSpec::new(vec![0.3, 0.9, 1.0]).unwrap();
    let xs: Vec<f64> = (0..81).map(|i| -5.0 + 0.25 * i as f64).collect();
    let path: Vec<f64> = (0..=60).map(|i| 10.0 * 10f64.powf(-(i as f64) / 20.0)).collect();
    for variant in [Variant::Squares, Variant::Symmetrized] {
        let sol = stieltjes_on_grid(&spec, variant, &xs, &path).unwrap();
        for (z, s) in sol.grid.iter().zip(&sol.values) {
            assert!(s.im > 0.0, "{variant} at {z}: {s}");
            assert!(s.norm() <= 1.0 / z.im + 1e-9);
        }
    }
}

#[test]
fn symmetrized_law_is_square_root_image() {
    let spec = LimitLawSpec::new(vec![0.5, 0.8]).unwrap();
    let sym_grid = x_grid(&spec, Variant::Symmetrized, 401).unwrap();
    let sym = LimitCdf::from_curve(&density(&spec, Variant::Symmetrized, &sym_grid, 1e-4, true).unwrap()).unwrap();
    let sq_grid = x_grid(&spec, Variant::Squares, 401).unwrap();
    let sq = LimitCdf::from_curve(&density(&spec, Variant::Squares, &sq_grid, 1e-4, true).unwrap()).unwrap();
    for x in [0.1, 0.5, 1.0, 1.7, 2.1] {
        let want = 0.5 * (1.0 + sq.cdf(x * x));
        assert!((sym.cdf(x) - want).abs() < 2e-4, "x = {x}");
        assert!((sym.cdf(-x) - (1.0 - want)).abs() < 2e-4, "x = -{x}");
    }
}

#[test]
fn continuation_residuals_are_small() {
    let spec = LimitLawSpec::new(vec![0.25, 0.6]).unwrap();
    let xs: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
    let path = [12.0, 1.0, 0.1, 0.01, 0.001];
    let sol = stieltjes_on_grid(&spec, Variant::Squares, &xs, &path).unwrap();
    for ((r, scale), z) in sol.residuals.iter().zip(&sol.scales).zip(&sol.grid) {
        assert!(*r <= 1e-10 * scale.max(1.0), "residual {r} at {z}");
    }
    let far = stieltjes_on_grid(&spec, Variant::Squares, &[0.0], &[1e6]).unwrap();
    let z = Complex64::new(0.0, 1e6);
    assert!((far.values[0] + 1.0 / z).norm() <= 1e-5 * (1.0 / z).norm());
}
