//! Moments, decay-rate fits, phase detection and grid self-convergence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionKernel, State};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scenarios::Scenario;
use crate::stepper::{advance, SolverStats, StepperConfig};

/// Moment orders recorded by default; order 0 is the total energy `E_L`.
pub const DEFAULT_MOMENT_ORDERS: [u32; 4] = [0, 1, 2, 3];

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Width of the moving least-squares window used by [`detect_phases`].
pub const PHASE_WINDOW: usize = 7;

/// Default threshold on the local log-log slope below which energy counts as conserved.
pub const DEFAULT_FLAT_TOL: f64 = 0.05;

/// `Σ_j dk u_j k_j^(r+1)`.
pub fn moment(u: &[f64], grid: &Grid, r: u32) -> f64 {
    assert_eq!(u.len(), grid.len(), "state length does not match grid");
    let dk = grid.dk();
    u.iter()
        .zip(grid.midpoints())
        .map(|(v, k)| dk * v * k.powi(r as i32 + 1))
        .sum()
}

/// Total energy on `[0, L]`.
pub fn total_energy(u: &[f64], grid: &Grid) -> f64 {
    moment(u, grid, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    /// `(r, M^r_L)` for every configured order.
    pub moments: Vec<(u32, f64)>,
    pub min_u: f64,
}

impl DiagnosticsRecord {
    pub fn capture(t: f64, dt: f64, u: &[f64], grid: &Grid, orders: &[u32]) -> Self {
        Self {
            t,
            dt,
            moments: orders.iter().map(|&r| (r, moment(u, grid, r))).collect(),
            min_u: u.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn moment(&self, r: u32) -> Option<f64> {
        self.moments.iter().find(|m| m.0 == r).map(|m| m.1)
    }

    pub fn energy(&self) -> Option<f64> {
        self.moment(0)
    }
}

/// Keeps at most `max_rows` records, chosen closest to log-spaced times.
/// The first and last records are always kept and order is preserved.
pub fn downsample_log(records: &[DiagnosticsRecord], max_rows: usize) -> Vec<DiagnosticsRecord> {
    if records.len() <= max_rows || max_rows < 2 {
        return records.to_vec();
    }
    let positive: Vec<usize> = (0..records.len()).filter(|&i| records[i].t > 0.0).collect();
    let mut keep = vec![false; records.len()];
    keep[0] = true;
    keep[records.len() - 1] = true;
    if let (Some(&lo), Some(&hi)) = (positive.first(), positive.last()) {
        let (a, b) = (records[lo].t.ln(), records[hi].t.ln());
        let slots = max_rows - 2;
        let mut cursor = 0;
        for s in 0..slots {
            let target = a + (b - a) * s as f64 / (slots.max(2) - 1) as f64;
            while cursor + 1 < positive.len() && records[positive[cursor + 1]].t.ln() <= target {
                cursor += 1;
            }
            keep[positive[cursor]] = true;
        }
    }
    records
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(r, _)| r.clone())
        .collect()
}

/// Least-squares line through `(ln t, ln E)` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the log-space residuals.
    pub residual: f64,
    pub samples: usize,
}

/// Fits `ln E = intercept + slope ln t` to the samples with `t_lo <= t <= t_hi`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo < t_hi) {
        return Err(Error::Input(format!("empty fit window [{t_lo}, {t_hi}]")));
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_lo && t <= t_hi)
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: points.len(),
        });
    }
    for &(t, e) in &points {
        if !(t > 0.0) {
            return Err(Error::NonPositiveValue { t, value: t });
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveValue { t, value: e });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(DecayFit {
        t_lo,
        t_hi,
        slope,
        intercept,
        residual,
        samples: points.len(),
    })
}

/// Window covering the last decade of the series, `[t_end / 10, t_end]`.
pub fn last_decade(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let t_end = series.last()?.0;
    (t_end > 0.0).then(|| (t_end / 10.0, t_end))
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhaseKind {
    Conserved,
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub t_start: f64,
    pub t_end: f64,
    /// Indices into the positive-time samples of the series.
    pub first: usize,
    pub last: usize,
}

/// Splits an energy series into alternating CONSERVED and DECAYING spans.
///
/// The local slope at each sample is the least-squares slope of `ln E`
/// against `ln t` over a centred window of [`PHASE_WINDOW`] samples. A sample
/// is CONSERVED when that slope, or the slope of the one-sided window ending
/// or starting at it, is below `flat_tol` in magnitude; the one-sided windows
/// keep the breakpoints of a flat stretch on its last flat sample. Samples at
/// `t <= 0` are ignored.
pub fn detect_phases(series: &[(f64, f64)], flat_tol: f64) -> Result<Vec<Phase>> {
    let points: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 > 0.0).collect();
    if points.len() < PHASE_WINDOW {
        return Err(Error::InsufficientSamples {
            needed: PHASE_WINDOW,
            found: points.len(),
        });
    }
    if let Some(&(t, e)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveValue { t, value: e });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len();
    let half = PHASE_WINDOW / 2;
    let slope_over =
        |lo: usize| least_squares(&xs[lo..lo + PHASE_WINDOW], &ys[lo..lo + PHASE_WINDOW]).0;

    let kinds: Vec<PhaseKind> = (0..n)
        .map(|i| {
            let centred = slope_over(i.saturating_sub(half).min(n - PHASE_WINDOW));
            let mut flat = centred.abs() < flat_tol;
            if i + 1 >= PHASE_WINDOW {
                flat |= slope_over(i + 1 - PHASE_WINDOW).abs() < flat_tol;
            }
            if i + PHASE_WINDOW <= n {
                flat |= slope_over(i).abs() < flat_tol;
            }
            if flat {
                PhaseKind::Conserved
            } else {
                PhaseKind::Decaying
            }
        })
        .collect();

    let mut phases: Vec<Phase> = Vec::new();
    for (i, &kind) in kinds.iter().enumerate() {
        match phases.last_mut() {
            Some(p) if p.kind == kind => {
                p.last = i;
                p.t_end = points[i].0;
            }
            _ => phases.push(Phase {
                kind,
                t_start: points[i].0,
                t_end: points[i].0,
                first: i,
                last: i,
            }),
        }
    }
    Ok(phases)
}

/// Relative change of `E` across a phase, `|E_last - E_first| / E_first`.
pub fn phase_drift(series: &[(f64, f64)], phase: &Phase) -> f64 {
    let points: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 > 0.0).collect();
    let e0 = points[phase.first].1;
    let e1 = points[phase.last].1;
    (e1 - e0).abs() / e0
}

/// Piecewise-linear interpolation of cell values on `grid` at the points `at`,
/// extrapolating linearly from the end cells.
pub fn interpolate_linear(grid: &Grid, values: &[f64], at: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), grid.len());
    let k = grid.midpoints();
    let n = grid.len();
    at.iter()
        .map(|&x| {
            let j = ((x - k[0]) / grid.dk()).floor();
            let j = if j < 0.0 { 0 } else { (j as usize).min(n - 2) };
            let s = (x - k[j]) / grid.dk();
            values[j] + s * (values[j + 1] - values[j])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dk: f64,
    pub l1_rel: f64,
    pub linf_rel: f64,
    /// Observed orders against the previous (coarser) row; `None` on the first row.
    pub order_l1: Option<f64>,
    pub order_linf: Option<f64>,
}

/// Relative L¹ and L∞ distances between a coarse solution and a reference,
/// after interpolating the coarse one onto the reference midpoints.
pub fn relative_errors(coarse: &Grid, u: &[f64], reference: &Grid, u_ref: &[f64]) -> (f64, f64) {
    let mapped = interpolate_linear(coarse, u, reference.midpoints());
    let mut l1 = 0.0;
    let mut l1_ref = 0.0;
    let mut linf: f64 = 0.0;
    let mut linf_ref: f64 = 0.0;
    for (a, b) in mapped.iter().zip(u_ref) {
        l1 += (a - b).abs();
        l1_ref += b.abs();
        linf = linf.max((a - b).abs());
        linf_ref = linf_ref.max(b.abs());
    }
    (l1 / l1_ref, linf / linf_ref)
}

/// Assembles convergence rows from per-width errors, computing observed
/// orders between consecutive widths.
pub fn convergence_table(errors: &[(f64, f64, f64)]) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(errors.len());
    for (i, &(dk, l1, linf)) in errors.iter().enumerate() {
        let order = |prev: f64, cur: f64| {
            let (pdk, _, _) = errors[i - 1];
            (prev / cur).ln() / (pdk / dk).ln()
        };
        let (order_l1, order_linf) = if i == 0 {
            (None, None)
        } else {
            (
                Some(order(errors[i - 1].1, l1)),
                Some(order(errors[i - 1].2, linf)),
            )
        };
        rows.push(ConvergenceRow {
            dk,
            l1_rel: l1,
            linf_rel: linf,
            order_l1,
            order_linf,
        });
    }
    rows
}

/// Checks the widths for a convergence study: at least two, strictly
/// decreasing, all dividing `length`, and all strictly coarser than the reference.
pub fn validate_convergence_widths(length: f64, dks: &[f64], dk_ref: f64) -> Result<()> {
    if dks.len() < 2 {
        return Err(Error::Config(
            "convergence study needs at least two cell widths".into(),
        ));
    }
    if dks.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(
            "convergence cell widths must be strictly decreasing".into(),
        ));
    }
    if !(dk_ref < dks[dks.len() - 1]) {
        return Err(Error::Config(format!(
            "reference width {dk_ref} must be finer than the finest width {}",
            dks[dks.len() - 1]
        )));
    }
    for &dk in dks.iter().chain(std::iter::once(&dk_ref)) {
        Grid::new(length, dk)?;
    }
    Ok(())
}

/// Solves `scenario` to time `cfg.t_final` on every width in `dks` and on
/// `dk_ref`, then reports errors relative to the reference solution.
pub fn convergence_study(
    scenario: &Scenario,
    length: f64,
    dks: &[f64],
    dk_ref: f64,
    cfg: &StepperConfig,
) -> Result<(Vec<ConvergenceRow>, Vec<SolverStats>)> {
    validate_convergence_widths(length, dks, dk_ref)?;
    let solve = |dk: f64| -> Result<(Grid, State, SolverStats)> {
        let grid = Grid::new(length, dk)?;
        let kernel = CollisionKernel::new(&grid);
        let initial = scenario.project_initial(&grid);
        let (end, stats) = advance(&kernel, initial, cfg, &mut |_| {})?;
        Ok((grid, end, stats))
    };
    let widths: Vec<f64> = dks.iter().copied().chain(std::iter::once(dk_ref)).collect();
    let mut solved: Vec<(Grid, State, SolverStats)> = widths
        .par_iter()
        .map(|&dk| solve(dk))
        .collect::<Result<_>>()?;
    let (ref_grid, ref_state, ref_stats) = solved.pop().expect("reference run");
    let errors: Vec<(f64, f64, f64)> = solved
        .iter()
        .map(|(grid, state, _)| {
            let (l1, linf) = relative_errors(grid, &state.u, &ref_grid, &ref_state.u);
            (grid.dk(), l1, linf)
        })
        .collect();
    let mut stats: Vec<SolverStats> = solved.into_iter().map(|s| s.2).collect();
    stats.push(ref_stats);
    Ok((convergence_table(&errors), stats))
}
