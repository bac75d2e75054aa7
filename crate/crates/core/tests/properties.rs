use approx::assert_relative_eq;
use membrane_core::coefficients::{
    build_scenario, sigma_gram, validate_assumptions, CoefficientField, Density, SamplingGrid, ScenarioSpec,
    ValidationThresholds,
};
use membrane_core::linalg::{self, Vector, ZERO};
use membrane_core::membranes::MembraneLayout;
use membrane_core::stats::ks_two_sample;
use membrane_core::transform::StripChart;
use proptest::prelude::*;

fn constant(n: usize, m: usize, sigma: Vec<Vec<f64>>, beta: f64, theta: Vec<f64>) -> CoefficientField {
    build_scenario(&ScenarioSpec::Constant { n, m, b: vec![0.0; 1 + n], sigma, beta, theta, density: Density::default() })
        .unwrap()
}

fn fig2(gamma: f64) -> CoefficientField {
    build_scenario(&ScenarioSpec::Fig2 { gamma, r_trunc: 10.0, width: 2.0 }).unwrap()
}

fn sine_layout(eps: f64) -> MembraneLayout {
    MembraneLayout::new(eps, Density::Sine { base: 2.0, amp: 1.0 }, 100_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_symmetric_and_positive_semidefinite(entries in prop::collection::vec(-3.0f64..3.0, 6)) {
        let sigma = vec![entries[0..2].to_vec(), entries[2..4].to_vec(), entries[4..6].to_vec()];
        let field = constant(2, 2, sigma.clone(), 0.0, vec![0.0, 0.0]);
        let g = sigma_gram(&field, &ZERO).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let brute: f64 = (0..2).map(|l| sigma[i][l] * sigma[j][l]).sum();
                prop_assert!((g[i][j] - brute).abs() <= 1e-12 * (1.0 + brute.abs()));
                prop_assert_eq!(g[i][j], g[j][i]);
            }
        }
        prop_assert!(linalg::min_eigenvalue(&g, 3) >= -1e-10);
    }

    #[test]
    fn spacing_is_bounded_by_the_density(eps in 0.005f64..0.3, k in -200i64..200) {
        let layout = sine_layout(eps);
        let gap = layout.membrane_position(k + 1).unwrap() - layout.membrane_position(k).unwrap();
        prop_assert!(gap >= eps * 1.0 - 1e-12 && gap <= eps * 3.0 + 1e-12);
    }

    #[test]
    fn membranes_bracket_themselves(eps in 0.01f64..0.3, k in -100i64..100) {
        let layout = sine_layout(eps);
        let b = layout.bracketing(layout.membrane_position(k).unwrap()).unwrap();
        prop_assert_eq!((b.lo, b.hi, b.nearest), (k, k, k));
    }

    #[test]
    fn interior_points_lie_between_neighbours(eps in 0.01f64..0.3, x in -5.0f64..5.0) {
        let layout = sine_layout(eps);
        let b = layout.bracketing(x).unwrap();
        prop_assert!(layout.membrane_position(b.lo).unwrap() <= x);
        prop_assert!(layout.membrane_position(b.hi).unwrap() >= x);
        prop_assert!(b.hi - b.lo <= 1);
    }

    #[test]
    fn b_factor_stays_close_to_one(eps in 0.001f64..0.25, beta in -0.99f64..0.99) {
        let field = constant(0, 1, vec![vec![1.0]], beta, vec![]);
        let layout = MembraneLayout::new(eps, Density::default(), 1000).unwrap();
        let chart = StripChart::new(&field, &layout, 0).unwrap();
        let b = chart.b_factor(&ZERO).unwrap();
        prop_assert!((b - 1.0).abs() <= 4.0 * eps * beta.abs() + 1e-15);
    }

    #[test]
    fn b_factor_gradient_is_bounded(eps in 0.001f64..0.1, y in -3.0f64..3.0) {
        let field = fig2(1.0);
        let layout = MembraneLayout::new(eps, Density::default(), 1000).unwrap();
        let chart = StripChart::new(&field, &layout, 0).unwrap();
        let h = 1e-5;
        let at = |v: f64| {
            let mut p = ZERO;
            p[1] = v;
            chart.b_factor(&p).unwrap()
        };
        let fd = (at(y + h) - at(y - h)) / (2.0 * h);
        // sup |β'| = 3 for γ = 1.
        prop_assert!(fd.abs() <= 8.0 * eps * 3.0);
    }

    #[test]
    fn constant_theta_round_trip(x in -0.1f64..0.1, y in -3.0f64..3.0, theta in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let field = constant(1, 2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], beta, vec![theta]);
        let layout = MembraneLayout::new(0.1, Density::default(), 1000).unwrap();
        let chart = StripChart::new(&field, &layout, 0).unwrap();
        let s: Vector = [x, y, 0.0, 0.0];
        let w = chart.forward(&s).unwrap();
        let back = chart.inverse(&w).unwrap();
        prop_assert!((back[0] - x).abs() <= 1e-12 && (back[1] - y).abs() <= 1e-12);
    }

    #[test]
    fn fig2_chart_round_trip(x in -0.05f64..0.05, y in -1.0f64..1.0) {
        let field = fig2(1.0);
        let layout = MembraneLayout::new(0.05, Density::default(), 1000).unwrap();
        let chart = StripChart::new(&field, &layout, 20).unwrap();
        let s: Vector = [x, y, 0.0, 0.0];
        let w = chart.forward(&s).unwrap();
        let again = chart.forward(&chart.inverse(&w).unwrap()).unwrap();
        prop_assert!((again[0] - w[0]).abs() <= 1e-10 && (again[1] - w[1]).abs() <= 1e-10);
    }

    #[test]
    fn phi_is_increasing_in_u(u in -0.05f64..0.05, du in 1e-6f64..0.01, v in -1.0f64..1.0) {
        let field = fig2(1.0);
        let layout = MembraneLayout::new(0.05, Density::default(), 1000).unwrap();
        let chart = StripChart::new(&field, &layout, 20).unwrap();
        let a = chart.inverse(&[u, v, 0.0, 0.0]).unwrap();
        let b = chart.inverse(&[u + du, v, 0.0, 0.0]).unwrap();
        prop_assert!(b[0] > a[0]);
    }

    #[test]
    fn ks_two_sample_is_symmetric_and_rank_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 1..60),
        b in prop::collection::vec(-10.0f64..10.0, 1..60),
    ) {
        let d = ks_two_sample(&a, &b).unwrap();
        prop_assert_eq!(d, ks_two_sample(&b, &a).unwrap());
        let g = |x: &f64| x.powi(3) + 2.0 * x;
        let (ga, gb): (Vec<f64>, Vec<f64>) = (a.iter().map(g).collect(), b.iter().map(g).collect());
        prop_assert!((ks_two_sample(&ga, &gb).unwrap() - d).abs() <= 1e-15);
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn validation_is_deterministic() {
    let field = fig2(1e-2);
    let grid = SamplingGrid::cube(2, -5.0, 5.0, 11);
    let t = ValidationThresholds::default();
    let a = validate_assumptions(&field, &grid, &t).unwrap();
    let b = validate_assumptions(&field, &grid, &t).unwrap();
    assert_eq!(a, b);
    assert!(a.passed());
}

#[test]
fn end_membranes_follow_the_two_term_expansion() {
    // a₊ − (d(0)ε + d'(0)ε²/2) and its mirror for a₋ vanish at least like ε³.
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let layout = sine_layout(eps);
        let ap = layout.membrane_position(1).unwrap();
        let am = -layout.membrane_position(-1).unwrap();
        plus.push((eps, (ap - (2.0 * eps + eps * eps / 2.0)).abs()));
        minus.push((eps, (am - (2.0 * eps - eps * eps / 2.0)).abs()));
    }
    for pts in [plus, minus] {
        let fit = membrane_core::stats::fit_rate(&pts).unwrap();
        assert!(fit.slope >= 3.0 - 1e-6, "slope {}", fit.slope);
    }
}

#[test]
fn sine_strip_matches_antiderivative() {
    let layout = MembraneLayout::new(0.1, Density::Sine { base: 2.0, amp: 1.0 }, 1000).unwrap();
    let (lo, hi) = layout.strip(0).unwrap();
    assert_relative_eq!(hi, 0.2 + (1.0 - 0.1f64.cos()), epsilon = 1e-12);
    assert_relative_eq!(-lo, 0.2 - (1.0 - 0.1f64.cos()), epsilon = 1e-12);
}
