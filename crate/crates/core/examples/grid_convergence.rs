//! Grid self-convergence of the triple-bump scenario: coarse solutions are
//! interpolated onto a reference grid and compared in relative L1 and Linf.
//! The defaults are a quick version of the full study
//! (arguments `2,4,8,16 20 10`, about half an hour on one core).
//!
//!     cargo run --release --example grid_convergence -- [dks as 1/dk list] [1/dk_ref] [T]

use threewave::harness::{self, RunConfig};
use threewave::stepper::JacobianMode;

fn main() -> threewave::Result<()> {
    let mut args = std::env::args().skip(1);
    let dks: Vec<f64> = args
        .next()
        .unwrap_or_else(|| "2,4".into())
        .split(',')
        .map(|s| 1.0 / s.parse::<f64>().expect("cells per unit"))
        .collect();
    let dk_ref = 1.0 / args.next().map_or(8.0, |s| s.parse().expect("reference"));
    let t_final: f64 = args.next().map_or(1.0, |s| s.parse().expect("T"));

    let cfg = RunConfig {
        scenario: "triple_bump".into(),
        length: 200.0,
        t_final,
        dks,
        dk_ref,
        jacobian: JacobianMode::FrozenPerStep,
        out: "out/grid_convergence".into(),
        ..RunConfig::default()
    };
    let rows = harness::cmd_convergence(&cfg)?;
    print!("{}", harness::convergence_csv(&rows));
    Ok(())
}
