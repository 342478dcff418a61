use cvt_core::oracle::*;
use cvt_core::*;

fn sep(m: Vec<Density1D>) -> SeparableDensity {
    SeparableDensity::new(m).unwrap()
}

#[test]
fn product_cvt_is_a_grid_lloyd_fixed_point() {
    let d = sep(vec![
        Density1D::gaussian(12.0, 4.0, 0.0, 20.0).unwrap(),
        Density1D::exp_quadratic(1.0, 0.0, 10.0).unwrap(),
    ]);
    let p = build_product(&d, &[4, 5], &SolverConfig::default()).unwrap();
    let coarse = verify_fixed_point(&p, &d, 128).unwrap();
    let fine = verify_fixed_point(&p, &d, 1024).unwrap();
    assert!(fine < coarse, "{coarse} -> {fine}");
    assert!(fine < 0.02, "{fine}");
}

#[test]
fn swapped_coordinates_are_not_a_fixed_point() {
    let d = sep(vec![
        Density1D::gaussian(12.0, 4.0, 0.0, 20.0).unwrap(),
        Density1D::gaussian(7.0, 1.0, 0.0, 10.0).unwrap(),
    ]);
    let p = build_product(&d, &[3, 2], &SolverConfig::default()).unwrap();
    let good = verify_fixed_point(&p, &d, 512).unwrap();
    // generators from the transposed problem, squeezed into the box
    let swapped: Vec<Vec<f64>> = p
        .materialize()
        .into_iter()
        .map(|g| vec![g[1], 0.5 * g[0]])
        .collect();
    let bad = fixed_point_displacement(&swapped, &d, 512).unwrap();
    assert!(bad > 100.0 * good, "{bad} vs {good}");
}

#[test]
fn grid_lloyd_agrees_with_one_dimensional_solver() {
    // Discrete Lloyd stalls anywhere on a plateau of width ~ h / (1 - r),
    // r the contraction rate, so the bound is in grid spacings.
    let cases = [
        (Density1D::gaussian(0.3, 0.5, -2.0, 2.0).unwrap(), 3, 2.0),
        (Density1D::exp_quadratic(2.0, -1.0, 1.0).unwrap(), 4, 2.0),
        (Density1D::uniform(0.0, 1.0).unwrap(), 6, 2.0),
        // slow contraction: the plateau is wider
        (Density1D::gaussian(0.3, 0.5, -2.0, 2.0).unwrap(), 5, 6.0),
    ];
    for (m, n, spacings) in cases {
        let d = sep(vec![m.clone()]);
        let grid = GridDiscretization::from_density(&d, 16001).unwrap();
        let h = grid.spacing()[0];
        let cfg = SolverConfig::lloyd().with_tolerance(1e-12);
        let exact = solve_lloyd(&m, n, &cfg).unwrap();
        let init = cvt_core::cvt1d::initial_centroids(&m, n)
            .into_iter()
            .map(|z| vec![z])
            .collect();
        let disc = lloyd_nd_solve_from(&grid, init, &cfg).unwrap();
        for (a, b) in disc.centroids.iter().zip(exact.cvt.centroids()) {
            assert!((a[0] - b).abs() <= spacings * h, "n={n}: {} vs {b}", a[0]);
        }
    }
}

#[test]
fn seeding_at_product_centroids_converges_at_once() {
    let d = sep(vec![
        Density1D::uniform(0.0, 2.0).unwrap(),
        Density1D::uniform(0.0, 1.0).unwrap(),
    ]);
    let p = build_product(&d, &[3, 2], &SolverConfig::default()).unwrap();
    // even grid counts keep nodes off the cell boundaries
    let grid = GridDiscretization::from_density(&d, 601).unwrap();
    let cfg = SolverConfig::lloyd().with_tolerance(1e-2);
    let s = lloyd_nd_solve_from(&grid, p.materialize(), &cfg).unwrap();
    assert!(s.iterations <= 1, "{}", s.iterations);
}

#[test]
fn rectangle_has_several_six_point_cvts() {
    let d = sep(vec![
        Density1D::uniform(0.0, 3.0).unwrap(),
        Density1D::uniform(0.0, 2.0).unwrap(),
    ]);
    let grid = GridDiscretization::from_density(&d, 64).unwrap();
    let cfg = SolverConfig::lloyd().with_tolerance(1e-9);
    let mut found: Vec<NdSolution> = Vec::new();
    for seed in 0..20 {
        let s = lloyd_nd_solve(&grid, 6, seed, &cfg).unwrap();
        assert!(s.energy_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        if !found
            .iter()
            .any(|f| configurations_match(&f.centroids, &s.centroids, 1e-3))
        {
            found.push(s);
        }
    }
    assert!(found.len() >= 2, "only {} configuration(s)", found.len());
}

#[test]
fn single_generator_goes_to_grid_mean() {
    let d = sep(vec![
        Density1D::gaussian(1.0, 1.0, 0.0, 4.0).unwrap(),
        Density1D::uniform(0.0, 1.0).unwrap(),
    ]);
    let grid = GridDiscretization::from_density(&d, 50).unwrap();
    let w = grid.weights();
    let total: f64 = w.iter().sum();
    let mut mean = [0.0; 2];
    let mut x = [0.0; 2];
    for (i, wi) in w.iter().enumerate() {
        grid.node(i, &mut x);
        mean[0] += wi * x[0] / total;
        mean[1] += wi * x[1] / total;
    }
    for seed in [1, 2, 3] {
        let s = lloyd_nd_solve(&grid, 1, seed, &SolverConfig::lloyd()).unwrap();
        assert!((s.centroids[0][0] - mean[0]).abs() < 1e-12);
        assert!((s.centroids[0][1] - mean[1]).abs() < 1e-12);
    }
}
