//! Evaluates the collision flux for the mollifier profile and checks that the
//! closed-form per-cell difference telescopes to the boundary fluxes.
//!
//!     cargo run --release --example flux_balance -- [L] [dk]

use threewave::{CollisionKernel, Grid, Scenario};

fn main() -> threewave::Result<()> {
    let mut args = std::env::args().skip(1);
    let length: f64 = args.next().map_or(Ok(30.0), |s| s.parse()).expect("L");
    let dk: f64 = args.next().map_or(Ok(0.5), |s| s.parse()).expect("dk");

    let grid = Grid::new(length, dk)?;
    let kernel = CollisionKernel::new(&grid);
    let u = Scenario::Mollifier.project_initial(&grid).u;

    let d = kernel.flux_divergence(&u);
    let m = grid.last_index() as isize;
    let mut worst = 0.0f64;
    for i in 0..=m {
        let direct = kernel.flux_half(&u, i) - kernel.flux_half(&u, i - 1);
        let scale = d[i as usize].abs().max(direct.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((d[i as usize] - direct).abs() / scale);
    }
    let total: f64 = d.iter().sum();
    let boundary = kernel.flux_half(&u, m) - kernel.flux_half(&u, -1);

    println!("cells                      {}", grid.len());
    println!("max |closed - direct| rel  {worst:.3e}");
    println!("sum of differences         {total:.12e}");
    println!("Q(L) - Q(0)                {boundary:.12e}");

    let rhs = kernel.rhs(&u);
    let (imax, vmax) = rhs.iter().enumerate().fold((0, 0.0f64), |acc, (i, &v)| {
        if v.abs() > acc.1.abs() {
            (i, v)
        } else {
            acc
        }
    });
    println!(
        "largest |du/dt| = {vmax:.4e} at k = {}",
        grid.midpoints()[imax]
    );
    Ok(())
}
