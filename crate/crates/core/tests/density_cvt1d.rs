use cvt_core::cvt1d::{initial_centroids, lloyd_residual};
use cvt_core::quadrature::adaptive_simpson;
use cvt_core::*;
use proptest::prelude::*;

fn density_strategy() -> impl Strategy<Value = Density1D> {
    prop_oneof![
        (-5.0..5.0f64, 0.5..6.0f64).prop_map(|(lo, w)| Density1D::uniform(lo, lo + w).unwrap()),
        (-2.0..2.0f64, 0.2..4.0f64, 1.0..6.0f64).prop_map(|(m, v, half)| Density1D::gaussian(
            m,
            v,
            m - half,
            m + 0.7 * half
        )
        .unwrap()),
        (1.0..20.0f64, 0.5..1.5f64).prop_map(|(a, w)| Density1D::exp_quadratic(a, -w, w).unwrap()),
        prop::collection::vec(0.2..3.0f64, 3..7).prop_map(|rhos| {
            let xs = (0..rhos.len()).map(|i| i as f64 * 0.5).collect();
            let hi = (rhos.len() - 1) as f64 * 0.5;
            Density1D::tabulated(Table::new(xs, rhos).unwrap(), 0.0, hi).unwrap()
        }),
    ]
}

fn split(d: &Density1D, fracs: (f64, f64)) -> (f64, f64, f64) {
    let dom = d.domain();
    let (p, q) = if fracs.0 < fracs.1 {
        fracs
    } else {
        (fracs.1, fracs.0)
    };
    let a = dom.lo() + p * dom.width();
    let c = dom.lo() + q * dom.width();
    (a, 0.5 * (a + c), c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_is_additive(d in density_strategy(), f in (0.0..0.45f64, 0.55..1.0f64)) {
        let (a, b, c) = split(&d, f);
        let whole = d.mass(&Interval::new(a, c).unwrap()).unwrap();
        let parts = d.mass(&Interval::new(a, b).unwrap()).unwrap()
            + d.mass(&Interval::new(b, c).unwrap()).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12, "{} vs {}", whole, parts);
    }

    #[test]
    fn centroid_lies_inside(d in density_strategy(), f in (0.0..0.9f64, 0.1..1.0f64)) {
        prop_assume!((f.0 - f.1).abs() > 1e-3);
        let (a, _, c) = split(&d, f);
        let seg = Interval::new(a, c).unwrap();
        let z = d.centroid(&seg).unwrap();
        prop_assert!(seg.contains_interior(z));
    }

    #[test]
    fn second_moment_minimized_at_centroid(d in density_strategy()) {
        let seg = d.domain();
        let c = d.centroid(&seg).unwrap();
        let at_c = d.second_moment_about(&seg, c).unwrap();
        for k in -10..=10 {
            if k == 0 { continue; }
            let z = c + k as f64 * 0.01 * seg.width();
            prop_assert!(d.second_moment_about(&seg, z).unwrap() > at_c);
        }
    }

    #[test]
    fn scaling_preserves_centroid(d in density_strategy(), scale in 0.01..100.0f64) {
        let s = d.scaled(scale);
        let seg = d.domain();
        prop_assert!((s.centroid(&seg).unwrap() - d.centroid(&seg).unwrap()).abs() <= 1e-12 * seg.width().max(1.0));
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        prop_assert!(rel(s.mass(&seg).unwrap(), scale * d.mass(&seg).unwrap()) < 1e-12);
        let z = seg.midpoint();
        prop_assert!(rel(s.second_moment_about(&seg, z).unwrap(), scale * d.second_moment_about(&seg, z).unwrap()) < 1e-12);
    }

    #[test]
    fn solution_is_a_fixed_point(d in density_strategy(), n in 1usize..12) {
        let cfg = SolverConfig::default();
        let s = solve(&d, n, &cfg).unwrap();
        prop_assert!(lloyd_residual(&d, &s.cvt).unwrap() <= cfg.tolerance);
        prop_assert_eq!(s.cvt.len(), n);
    }

    #[test]
    fn lloyd_energy_never_increases(d in density_strategy(), n in 2usize..10) {
        let mut z = initial_centroids(&d, n);
        let mut last = f64::INFINITY;
        for _ in 0..40 {
            let cvt = Cvt1D::from_centroids(d.domain(), z.clone()).unwrap();
            let e = energy_1d(&d, &cvt).unwrap();
            prop_assert!(e <= last + 1e-12, "{} > {}", e, last);
            last = e;
            z = lloyd_step(&d, &z).unwrap();
        }
    }
}

#[test]
fn exp_quadratic_mass_against_simpson_oracle() {
    // √(π/10)·erf(√10), cross-checked with a tighter Simpson run
    let oracle = adaptive_simpson(|x: f64| (-10.0 * x * x).exp(), -1.0, 1.0, 1e-14, 60);
    let closed = (std::f64::consts::PI / 10.0).sqrt() * ERF_SQRT_10;
    assert!((oracle - closed).abs() < 1e-13);
    let d = Density1D::exp_quadratic(10.0, -1.0, 1.0).unwrap();
    assert!((d.total_mass().unwrap() - oracle).abs() < 1e-12);
}

// erf(√10), from Python's math.erf
const ERF_SQRT_10: f64 = 0.999_992_255_783_569_4;

#[test]
fn symmetric_densities_give_symmetric_centroids() {
    let cases = [
        Density1D::gaussian(7.5, 1.0, 0.0, 15.0).unwrap(),
        Density1D::exp_quadratic(10.0, -1.0, 1.0).unwrap(),
        Density1D::gaussian(0.0, 2.0, -3.0, 3.0).unwrap(),
    ];
    for d in &cases {
        let m = d.domain().midpoint();
        for n in [2, 5, 9] {
            let cfg = SolverConfig::default();
            let z = solve(d, n, &cfg).unwrap().cvt.centroids().to_vec();
            for j in 0..n {
                assert!(((z[j] - m) + (z[n - 1 - j] - m)).abs() <= 10.0 * cfg.tolerance);
            }
        }
    }
}

#[test]
fn affine_map_carries_centroids() {
    // x -> 3x + 2 maps gaussian(0.5, 0.25) on [-1, 2] to gaussian(3.5, 2.25) on [-1, 8]
    let d = Density1D::gaussian(0.5, 0.25, -1.0, 2.0).unwrap();
    let e = Density1D::gaussian(3.5, 2.25, -1.0, 8.0).unwrap();
    let cfg = SolverConfig::default();
    for n in [3, 7] {
        let a = solve(&d, n, &cfg).unwrap();
        let b = solve(&e, n, &cfg).unwrap();
        for (x, y) in a.cvt.centroids().iter().zip(b.cvt.centroids()) {
            assert!(
                (3.0 * x + 2.0 - y).abs() <= 10.0 * cfg.tolerance * 3.0,
                "{x} {y}"
            );
        }
    }
}

#[test]
fn energy_of_regular_grid() {
    let d = Density1D::uniform(0.0, 1.0).unwrap();
    let s = solve(&d, 16, &SolverConfig::default()).unwrap();
    let e = energy_1d(&d, &s.cvt).unwrap();
    assert!((e - 1.0 / 3072.0).abs() < 1e-15);
}

#[test]
fn exp_quadratic_eight_cell_energy_against_simpson() {
    let d = Density1D::exp_quadratic(10.0, -1.0, 1.0).unwrap();
    let s = solve(&d, 8, &SolverConfig::default()).unwrap();
    let z = s.cvt.centroids();
    let b = s.cvt.breakpoints();
    let oracle: f64 = (0..8)
        .map(|j| {
            adaptive_simpson(
                |x: f64| (x - z[j]) * (x - z[j]) * (-10.0 * x * x).exp(),
                b[j],
                b[j + 1],
                1e-15,
                60,
            )
        })
        .sum();
    let e = energy_1d(&d, &s.cvt).unwrap();
    assert!((e - oracle).abs() < 1e-13);
    // frozen from an independent Lloyd run (scipy quad, tolerance 1e-14)
    assert!((e - 9.668062455954584e-4).abs() < 1e-12, "{e}");
}
