//! Runs one scenario through the harness and reports the energy history and
//! the late-time decay slope, written to `out/energy_decay/`.
//!
//!     cargo run --release --example energy_decay -- [scenario] [L] [T]

use threewave::diagnostics::{fit_decay, last_decade};
use threewave::harness::{self, RunConfig};

fn main() -> threewave::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = args.next().unwrap_or_else(|| "mollifier".into());
    let length: f64 = args.next().map_or(30.0, |s| s.parse().expect("L"));
    let t_final: f64 = args.next().map_or(1e4, |s| s.parse().expect("T"));

    let cfg = RunConfig {
        scenario,
        length,
        t_final,
        out: "out/energy_decay".into(),
        ..RunConfig::default()
    };
    let outcome = harness::run(&cfg)?;
    let series = outcome.energy_series();

    let mut next = 1e-6;
    for &(t, e) in &series {
        if t >= next {
            println!("t = {t:>11.4e}   E = {e:.6e}");
            next *= 10.0;
        }
    }
    let stats = outcome.report.stats.as_ref();
    if let Some(s) = stats {
        println!(
            "{} steps accepted, {} rejected, min u = {:.3e}",
            s.steps_accepted, s.steps_rejected, s.min_u
        );
    }
    if let Some(err) = outcome.error() {
        println!("run stopped early: {}", err.message);
    }
    match last_decade(&series).map(|w| fit_decay(&series, w)) {
        Some(Ok(fit)) => println!(
            "slope over [{:.3e}, {:.3e}] = {:.4}",
            fit.t_lo, fit.t_hi, fit.slope
        ),
        Some(Err(e)) => println!("no fit: {e}"),
        None => println!("no fit: empty series"),
    }
    println!("files written to {}", cfg.out.display());
    Ok(())
}
