use threewave::{Grid, Scenario};

/// Adaptive Simpson quadrature with Richardson correction.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

fn mass(scenario: &Scenario, grid: &Grid) -> f64 {
    scenario.project_initial(grid).u.iter().sum::<f64>() * grid.dk()
}

#[test]
fn mollifier_mass_matches_adaptive_quadrature() {
    let grid = Grid::new(30.0, 0.5).unwrap();
    let g0 = |k: f64| Scenario::Mollifier.eval_g0(k);
    let exact = adaptive_simpson(&g0, 14.0, 16.0, 1e-14);
    let projected = mass(&Scenario::Mollifier, &grid);
    assert!(
        (projected - exact).abs() <= 1e-6 * exact,
        "{projected} vs {exact}"
    );
}

#[test]
fn cell_averages_match_adaptive_quadrature() {
    for (scenario, length) in [
        (Scenario::Mollifier, 30.0),
        (Scenario::TripleBump, 200.0),
        (Scenario::DiscLine, 200.0),
    ] {
        let grid = Grid::new(length, 0.5).unwrap();
        let u = scenario.project_initial(&grid).u;
        let edges = grid.edges();
        let g0 = |k: f64| scenario.eval_g0(k);
        for i in 0..grid.len() {
            let (a, b) = (edges[i], edges[i + 1]);
            // the ramp's jump at k = 20 is a cell edge on this grid
            let avg = adaptive_simpson(&g0, a, b, 1e-13) / (b - a);
            assert!(
                (u[i] - avg).abs() <= 1e-6 * avg.abs().max(1e-3),
                "{scenario} cell {i}: {} vs {avg}",
                u[i]
            );
        }
    }
}

#[test]
fn projected_mass_converges_under_refinement() {
    let g0 = |k: f64| Scenario::TripleBump.eval_g0(k);
    let exact = adaptive_simpson(&g0, 0.0, 200.0, 1e-12);
    let errors: Vec<f64> = [2.0, 1.0, 0.5]
        .iter()
        .map(|&dk| (mass(&Scenario::TripleBump, &Grid::new(200.0, dk).unwrap()) - exact).abs())
        .collect();
    // Gauss–Legendre per cell is far beyond second order on a smooth profile.
    assert!(errors.iter().all(|&e| e <= 1e-10 * exact), "{errors:?}");

    let line = |k: f64| Scenario::DiscLine.eval_g0(k);
    let exact = adaptive_simpson(&line, 20.0, 150.0, 1e-12);
    for dk in [0.5, 0.25] {
        let m = mass(&Scenario::DiscLine, &Grid::new(200.0, dk).unwrap());
        assert!(
            (m - exact).abs() <= 1e-12 * exact,
            "dk {dk}: {m} vs {exact}"
        );
    }
}

#[test]
fn projections_are_nonnegative() {
    for name in Scenario::NAMES {
        let scenario: Scenario = name.parse().unwrap();
        for &length in scenario.recommended_lengths() {
            let grid = Grid::new(length, scenario.recommended_dk()).unwrap();
            let state = scenario.project_initial(&grid);
            assert!(state.u.iter().all(|&v| v >= 0.0), "{name} L={length}");
            assert_eq!(state.t, 0.0);
        }
    }
}
