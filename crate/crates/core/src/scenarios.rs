//! Initial energy-density profiles and their cell averages.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::collision::State;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// 5-point Gauss–Legendre nodes and weights on [-1, 1].
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

const PANEL_TOL: f64 = 1e-13;
const MAX_BISECTIONS: u32 = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Smooth bump supported on `|k - 15| < 1`.
    Mollifier,
    /// Linear ramp from 1 at `k = 20` down to 0 at `k = 150`, zero elsewhere.
    DiscLine,
    /// Three Gaussians centred at 50, 75 and 100.
    TripleBump,
    /// Piecewise-linear interpolation of `(k, g0)` samples, zero outside.
    Tabulated(Vec<(f64, f64)>),
}

impl Scenario {
    pub const NAMES: [&'static str; 3] = ["mollifier", "disc_line", "triple_bump"];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Mollifier => "mollifier",
            Scenario::DiscLine => "disc_line",
            Scenario::TripleBump => "triple_bump",
            Scenario::Tabulated(_) => "tabulated",
        }
    }

    /// Truncation parameters used for this profile in the reference experiments.
    pub fn recommended_lengths(&self) -> &'static [f64] {
        match self {
            Scenario::Mollifier => &[30.0, 100.0],
            Scenario::DiscLine | Scenario::TripleBump => &[200.0, 300.0],
            Scenario::Tabulated(_) => &[],
        }
    }

    pub fn recommended_final_time(&self) -> f64 {
        1e4
    }

    pub fn recommended_dk(&self) -> f64 {
        0.5
    }

    /// Loads a tabulated profile from a whitespace- or comma-separated file of
    /// `k g0` pairs; lines starting with `#` and a non-numeric header are skipped.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_table_str(&text)
    }

    pub fn from_table_str(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|s| s.parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == 2 => points.push((v[0], v[1])),
                Err(_) if points.is_empty() && !header_seen => header_seen = true,
                _ => {
                    return Err(Error::Input(format!(
                        "table line {}: expected two numbers, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if points.len() < 2 {
            return Err(Error::Input("table needs at least two rows".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Input("table wavenumbers must be increasing".into()));
        }
        if points
            .iter()
            .any(|&(k, g)| k < 0.0 || g < 0.0 || !g.is_finite())
        {
            return Err(Error::Input(
                "table entries must be finite and non-negative".into(),
            ));
        }
        Ok(Scenario::Tabulated(points))
    }

    /// Pointwise initial density `g0(k)`.
    pub fn eval_g0(&self, k: f64) -> f64 {
        match self {
            Scenario::Mollifier => {
                let x = k - 15.0;
                if x.abs() < 1.0 {
                    (1.0 / (10.0 * (x * x - 1.0))).exp()
                } else {
                    0.0
                }
            }
            Scenario::DiscLine => {
                if (20.0..=150.0).contains(&k) {
                    1.0 - (k - 20.0) / 130.0
                } else {
                    0.0
                }
            }
            Scenario::TripleBump => {
                let bump = |c: f64| (-(k - c).powi(2) / 100.0).exp();
                0.1 * (bump(50.0) + 0.5 * bump(75.0) + bump(100.0))
            }
            Scenario::Tabulated(points) => interpolate(points, k),
        }
    }

    /// Cell averages `u_i = (1/dk) ∫_{K_i} g0 dk` at `t = 0`, by 5-point
    /// Gauss–Legendre panels bisected until successive estimates agree.
    pub fn project_initial(&self, grid: &Grid) -> State {
        let dk = grid.dk();
        let edges = grid.edges();
        let u = (0..grid.len())
            .map(|i| {
                let (a, b) = (edges[i], edges[i + 1]);
                let whole = self.gauss_panel(a, b);
                self.refine(a, b, whole, MAX_BISECTIONS) / dk
            })
            .collect();
        State::new(0.0, u)
    }

    fn gauss_panel(&self, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        half * GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(x, w)| w * self.eval_g0(mid + half * x))
            .sum::<f64>()
    }

    fn refine(&self, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (left, right) = (self.gauss_panel(a, m), self.gauss_panel(m, b));
        let split = left + right;
        if depth == 0 || (split - whole).abs() <= PANEL_TOL * split.abs().max(f64::MIN_POSITIVE) {
            return split;
        }
        self.refine(a, m, left, depth - 1) + self.refine(m, b, right, depth - 1)
    }
}

fn interpolate(points: &[(f64, f64)], k: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if k < first.0 || k > last.0 {
        return 0.0;
    }
    let idx = points.partition_point(|p| p.0 <= k);
    if idx == points.len() {
        return last.1;
    }
    let (k0, g0) = points[idx - 1];
    let (k1, g1) = points[idx];
    g0 + (g1 - g0) * (k - k0) / (k1 - k0)
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mollifier" => Ok(Scenario::Mollifier),
            "disc_line" => Ok(Scenario::DiscLine),
            "triple_bump" => Ok(Scenario::TripleBump),
            other => Err(Error::Config(format!(
                "unknown scenario {other:?} (expected one of {})",
                Scenario::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
