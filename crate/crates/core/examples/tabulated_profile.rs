//! Builds an initial condition from a `k,g0` table instead of a named
//! scenario and evolves it for a short time.
//!
//!     cargo run --release --example tabulated_profile

use threewave::diagnostics::total_energy;
use threewave::{advance, CollisionKernel, Grid, Scenario, StepperConfig};

const TABLE: &str = "\
# k, g0
k,g0
5, 0.0
8, 0.4
10, 0.5
12, 0.4
15, 0.0
";

fn main() -> threewave::Result<()> {
    let scenario = Scenario::from_table_str(TABLE)?;
    let grid = Grid::new(40.0, 0.5)?;
    let kernel = CollisionKernel::new(&grid);
    let initial = scenario.project_initial(&grid);
    println!("E(0) = {:.6e}", total_energy(&initial.u, &grid));

    let cfg = StepperConfig::for_final_time(0.1);
    let mut next = 1e-5;
    let (end, stats) = advance(&kernel, initial, &cfg, &mut |rec| {
        if rec.t >= next {
            println!("t = {:.3e}  E = {:.6e}", rec.t, total_energy(rec.u, &grid));
            next *= 10.0;
        }
    })?;
    println!(
        "reached t = {} in {} steps, E = {:.6e}",
        end.t,
        stats.steps_accepted,
        total_energy(&end.u, &grid)
    );
    Ok(())
}
