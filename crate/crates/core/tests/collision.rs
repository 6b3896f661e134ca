use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threewave::{CollisionKernel, Grid};

/// Roundoff scale of `Q_{i+1/2}` for non-negative states: the same combination
/// of the six sums with every sign made positive.
fn flux_scale(kernel: &CollisionKernel, u: &[f64], i: isize) -> f64 {
    let t = kernel.flux_half_terms(u, i);
    2.0 * (t[0] + t[1] + 4.0 * t[2] + 4.0 * t[3] + 2.0 * t[4] + 2.0 * t[5])
}

fn check_against_direct(kernel: &CollisionKernel, u: &[f64]) {
    let d = kernel.flux_divergence(u);
    for i in 0..u.len() as isize {
        let direct = kernel.flux_half(u, i) - kernel.flux_half(u, i - 1);
        let scale = flux_scale(kernel, u, i) + flux_scale(kernel, u, i - 1);
        let err = (d[i as usize] - direct).abs();
        assert!(
            err <= 1e-12 * scale.max(f64::MIN_POSITIVE),
            "cell {i}: closed form {} vs direct {direct} (scale {scale})",
            d[i as usize]
        );
    }
}

proptest! {
    #[test]
    fn closed_form_matches_direct_difference(
        cells in 2usize..40,
        dk in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0]),
        seed in any::<u64>(),
    ) {
        let grid = Grid::new(cells as f64 * dk, dk).unwrap();
        let kernel = CollisionKernel::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>()).collect();
        check_against_direct(&kernel, &u);
    }

    #[test]
    fn moment_change_is_boundary_flux(cells in 2usize..40, seed in any::<u64>()) {
        let grid = Grid::new(cells as f64 * 0.5, 0.5).unwrap();
        let kernel = CollisionKernel::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = kernel.flux_divergence(&u).iter().sum();
        let m = grid.last_index() as isize;
        let net = kernel.flux_half(&u, m) - kernel.flux_half(&u, -1);
        let scale = flux_scale(&kernel, &u, m) + flux_scale(&kernel, &u, -1);
        prop_assert!((total - net).abs() <= 1e-12 * scale);
    }

    #[test]
    fn rhs_is_quadratic(seed in any::<u64>(), c in 0.0f64..10.0) {
        let grid = Grid::new(10.0, 0.5).unwrap();
        let kernel = CollisionKernel::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
        let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
        let r = kernel.rhs(&u);
        let rc = kernel.rhs(&cu);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in rc.iter().zip(&r) {
            prop_assert!((x - c * c * y).abs() <= 1e-12 * c * c * scale.max(1.0));
        }
    }
}

#[test]
fn closed_form_on_larger_grid() {
    let grid = Grid::new(100.0, 0.5).unwrap();
    let kernel = CollisionKernel::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
    check_against_direct(&kernel, &u);
}

#[test]
fn jacobian_matches_central_differences() {
    let grid = Grid::new(25.5, 0.5).unwrap();
    let kernel = CollisionKernel::new(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm = |x: &[f64]| x.iter().map(|y| y * y).sum::<f64>().sqrt();
        let h = 1e-6 * norm(&u) / norm(&v);
        let plus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd: Vec<f64> = kernel
            .rhs(&plus)
            .iter()
            .zip(kernel.rhs(&minus))
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect();
        let jac = kernel.rhs_jacobian(&u);
        let jv: Vec<f64> = (0..grid.len())
            .map(|i| (0..grid.len()).map(|m| jac[(i, m)] * v[m]).sum())
            .collect();
        let diff: Vec<f64> = jv.iter().zip(&fd).map(|(a, b)| a - b).collect();
        assert!(
            norm(&diff) <= 1e-6 * norm(&jv),
            "{} vs {}",
            norm(&diff),
            norm(&jv)
        );
    }
}
