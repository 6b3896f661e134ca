//! Splits an energy history into conserved and decaying phases.
//!
//!     cargo run --release --example energy_phases -- [scenario] [L] [T]

use threewave::diagnostics::{detect_phases, phase_drift, DEFAULT_FLAT_TOL};
use threewave::harness::{self, RunConfig};

fn main() -> threewave::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = RunConfig {
        scenario: args.next().unwrap_or_else(|| "triple_bump".into()),
        length: args.next().map_or(300.0, |s| s.parse().expect("L")),
        t_final: args.next().map_or(10.0, |s| s.parse().expect("T")),
        out: "out/energy_phases".into(),
        ..RunConfig::default()
    };
    let outcome = harness::run(&cfg)?;
    let series = outcome.energy_series();
    println!("E(0) = {:.6e}", outcome.report.initial_energy);
    for phase in detect_phases(&series, DEFAULT_FLAT_TOL)? {
        println!(
            "{:?}: t in [{:.3e}, {:.3e}], relative drift {:.3e}",
            phase.kind,
            phase.t_start,
            phase.t_end,
            phase_drift(&series, &phase)
        );
    }
    Ok(())
}
