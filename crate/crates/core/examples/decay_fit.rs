//! Fits a power law to the energy column of a `series.csv` and lists the
//! detected phases. Without an argument a synthetic series is fitted.
//!
//!     cargo run --release --example decay_fit -- [series.csv] [t_lo t_hi]

use std::path::PathBuf;

use threewave::harness;

fn main() -> threewave::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let path = match args.first() {
        Some(p) => PathBuf::from(p),
        None => {
            let dir = PathBuf::from("out/decay_fit");
            std::fs::create_dir_all(&dir)?;
            let mut text = String::from("t,dt,E,M1,M2,M3,min_u\n");
            for n in 0..=120 {
                let t = 10f64.powf(-3.0 + 7.0 * n as f64 / 120.0);
                // flat, then t^-0.75 beyond t = 1
                let e = if t < 1.0 { 2.0 } else { 2.0 * t.powf(-0.75) };
                text.push_str(&format!("{t:?},0.0,{e:?},0.0,0.0,0.0,0.0\n"));
            }
            let path = dir.join("series.csv");
            std::fs::write(&path, text)?;
            path
        }
    };
    let window = match (args.get(1), args.get(2)) {
        (Some(lo), Some(hi)) => Some((lo.parse().expect("t_lo"), hi.parse().expect("t_hi"))),
        _ => None,
    };
    let report = harness::cmd_fit(&path, window, None)?;
    println!(
        "slope {:.5} intercept {:.5} over [{:.3e}, {:.3e}] ({} samples)",
        report.fit.slope,
        report.fit.intercept,
        report.fit.t_lo,
        report.fit.t_hi,
        report.fit.samples
    );
    for p in &report.phases {
        println!("  {:?} {:.3e} .. {:.3e}", p.kind, p.t_start, p.t_end);
    }
    Ok(())
}
