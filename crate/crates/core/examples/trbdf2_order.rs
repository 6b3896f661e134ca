//! Fixed-step TR-BDF2 on y' = -y: observed global order and the one-step map
//! against the stability function of the tableau.
//!
//!     cargo run --release --example trbdf2_order

use threewave::stepper::LinearScalar;
use threewave::{trbdf2_step, StepperConfig, Tableau};

fn main() -> threewave::Result<()> {
    let sys = LinearScalar { lambda: -1.0 };
    let cfg = StepperConfig::for_final_time(1.0);
    let exact = (-1.0f64).exp();

    println!("{:>10} {:>14} {:>8}", "dt", "error", "order");
    let mut previous: Option<f64> = None;
    for n in [10usize, 20, 40, 80, 160] {
        let dt = 1.0 / n as f64;
        let mut y = vec![1.0];
        for _ in 0..n {
            y = trbdf2_step(&sys, &y, dt, &cfg)?.u_next;
        }
        let err = (y[0] - exact).abs();
        let order = previous.map(|p| format!("{:.3}", (p / err).log2()));
        println!("{dt:>10.5} {err:>14.6e} {:>8}", order.unwrap_or_default());
        previous = Some(err);
    }

    let tab = Tableau::trbdf2();
    for z in [-1.0, -10.0, -1e6] {
        let step = trbdf2_step(&LinearScalar { lambda: z }, &[1.0], 1.0, &cfg)?;
        println!(
            "z = {z:>8}: one step {:.15e}, R(z) {:.15e}",
            step.u_next[0],
            tab.stability_function(z)
        );
    }
    Ok(())
}
