//! Implicit time integration of `du/dt = rhs(u)`: backward Euler and the
//! adaptive embedded TR-BDF2 pair, both driven by Newton's method with the
//! analytic Jacobian.

mod newton;
mod tableau;

pub use newton::{newton_solve, weighted_max_norm, NewtonMatrix, NewtonOptions, NewtonSolution};
pub use tableau::Tableau;

use faer::linalg::solvers::PartialPivLu;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionKernel, State};
use crate::error::{Error, Result};

/// Largest step-size increase allowed after an accepted step.
const MAX_GROWTH: f64 = 5.0;
/// Smallest step-size reduction factor after a rejected step.
const MIN_SHRINK: f64 = 0.1;

/// Autonomous system `du/dt = rhs(u)` with a dense Jacobian.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs_into(&self, u: &[f64], out: &mut [f64]);

    fn jacobian(&self, u: &[f64]) -> Mat<f64>;

    fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.rhs_into(u, &mut out);
        out
    }
}

impl OdeSystem for CollisionKernel {
    fn dim(&self) -> usize {
        self.grid().len()
    }

    fn rhs_into(&self, u: &[f64], out: &mut [f64]) {
        CollisionKernel::rhs_into(self, u, out)
    }

    fn jacobian(&self, u: &[f64]) -> Mat<f64> {
        self.rhs_jacobian(u)
    }
}

/// Scalar linear test equation `y' = λ y`.
#[derive(Debug, Clone, Copy)]
pub struct LinearScalar {
    pub lambda: f64,
}

impl OdeSystem for LinearScalar {
    fn dim(&self) -> usize {
        1
    }

    fn rhs_into(&self, u: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * u[0];
    }

    fn jacobian(&self, _u: &[f64]) -> Mat<f64> {
        Mat::from_fn(1, 1, |_, _| self.lambda)
    }
}

/// Where the Newton matrix `I - dt d J` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Fresh Jacobian and factorization at every Newton iterate.
    #[default]
    Exact,
    /// Jacobian frozen at the start of the step; one factorization shared by
    /// both implicit stages.
    FrozenPerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Newton residual tolerance as a fraction of the step tolerance.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub safety: f64,
    pub t_final: f64,
    #[serde(default)]
    pub jacobian_mode: JacobianMode,
}

impl StepperConfig {
    /// Defaults for a run ending at `t_final`, with `dt_max = t_final / 10`.
    pub fn for_final_time(t_final: f64) -> Self {
        let dt_max = if t_final > 0.0 { t_final / 10.0 } else { 1.0 };
        Self {
            rtol: 1e-5,
            atol: 1e-8,
            newton_tol: 1e-2,
            newton_max_iter: 10,
            dt_init: 1e-3_f64.min(dt_max),
            dt_min: 1e-12_f64.min(dt_max),
            dt_max,
            safety: 0.9,
            t_final,
            jacobian_mode: JacobianMode::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("newton_tol", self.newton_tol),
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Config("newton_max_iter must be at least 1".into()));
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(Error::Config(format!(
                "need dt_min <= dt_init <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            )));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::Config(format!(
                "safety must lie in (0, 1), got {}",
                self.safety
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Config(format!(
                "final time must be non-negative, got {}",
                self.t_final
            )));
        }
        Ok(())
    }

    fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            rtol: self.rtol,
            atol: self.atol,
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
        }
    }
}

/// Solves `Y = base + coef * rhs(Y)`.
fn solve_stage<S: OdeSystem + ?Sized>(
    system: &S,
    base: &[f64],
    coef: f64,
    guess: Vec<f64>,
    cfg: &StepperConfig,
    frozen: Option<&PartialPivLu<f64>>,
) -> Result<NewtonSolution> {
    let n = base.len();
    let mut f = vec![0.0; n];
    let mut residual = |y: &[f64]| {
        system.rhs_into(y, &mut f);
        y.iter()
            .zip(base)
            .zip(&f)
            .map(|((y, b), f)| y - b - coef * f)
            .collect::<Vec<f64>>()
    };
    let opts = cfg.newton_options();
    match frozen {
        Some(lu) => newton_solve(&mut residual, NewtonMatrix::Frozen(lu), guess, &opts),
        None => {
            let mut matrix = |y: &[f64]| newton_matrix(system, y, coef);
            newton_solve(
                &mut residual,
                NewtonMatrix::Exact(&mut matrix),
                guess,
                &opts,
            )
        }
    }
}

/// `I - coef * J(u)`
fn newton_matrix<S: OdeSystem + ?Sized>(system: &S, u: &[f64], coef: f64) -> Mat<f64> {
    let mut m = system.jacobian(u);
    let n = u.len();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] *= -coef;
        }
        m[(j, j)] += 1.0;
    }
    m
}

/// One backward-Euler step: solves `u_next - u_n - dt * rhs(u_next) = 0`.
pub fn backward_euler_step<S: OdeSystem + ?Sized>(
    system: &S,
    u_n: &[f64],
    dt: f64,
    cfg: &StepperConfig,
) -> Result<NewtonSolution> {
    assert!(dt > 0.0, "time step must be positive");
    match solve_stage(system, u_n, dt, u_n.to_vec(), cfg, None) {
        Err(e) if e.is_solver_failure() => continuation_solve(system, u_n, dt, cfg).ok_or(e),
        other => other,
    }
}

/// Approaches the backward-Euler solution for `dt` through a geometric ramp of
/// smaller step sizes, each solve seeded with the previous solution. The
/// equation being solved is unchanged; only the Newton starting point differs.
fn continuation_solve<S: OdeSystem + ?Sized>(
    system: &S,
    u_n: &[f64],
    dt: f64,
    cfg: &StepperConfig,
) -> Option<NewtonSolution> {
    const RAMP: f64 = 2.0;
    let mut h = dt;
    let mut guess = loop {
        h /= RAMP;
        if h < cfg.dt_min {
            return None;
        }
        if let Ok(sol) = solve_stage(system, u_n, h, u_n.to_vec(), cfg, None) {
            break sol;
        }
    };
    let mut iterations = guess.iterations;
    while h < dt {
        let next = (h * RAMP).min(dt);
        match solve_stage(system, u_n, next, guess.x.clone(), cfg, None) {
            Ok(sol) => {
                iterations += sol.iterations;
                guess = sol;
                h = next;
            }
            Err(_) => {
                // refine the ramp locally
                let mid = (h * next).sqrt();
                if mid <= h * (1.0 + 1e-6) {
                    return None;
                }
                let sol = solve_stage(system, u_n, mid, guess.x.clone(), cfg, None).ok()?;
                iterations += sol.iterations;
                guess = sol;
                h = mid;
            }
        }
    }
    guess.iterations = iterations;
    Some(guess)
}

#[derive(Debug, Clone)]
pub struct TrBdf2Step {
    pub u_next: Vec<f64>,
    /// Weighted max norm of the embedded error estimate; the step is
    /// acceptable when this is at most 1.
    pub err: f64,
    pub newton_iterations: usize,
}

/// One TR-BDF2 step of size `dt` with its embedded error estimate.
pub fn trbdf2_step<S: OdeSystem + ?Sized>(
    system: &S,
    u_n: &[f64],
    dt: f64,
    cfg: &StepperConfig,
) -> Result<TrBdf2Step> {
    assert!(dt > 0.0, "time step must be positive");
    let tab = Tableau::trbdf2();
    let n = u_n.len();
    let coef = dt * tab.d;

    let lu = match cfg.jacobian_mode {
        JacobianMode::Exact => None,
        JacobianMode::FrozenPerStep => Some(newton_matrix(system, u_n, coef).partial_piv_lu()),
    };

    let f1 = system.rhs(u_n);
    let base2: Vec<f64> = (0..n).map(|i| u_n[i] + coef * f1[i]).collect();
    let stage2 = solve_stage(system, &base2, coef, u_n.to_vec(), cfg, lu.as_ref())?;
    let y2 = stage2.x;
    let f2 = system.rhs(&y2);

    let base3: Vec<f64> = (0..n)
        .map(|i| u_n[i] + dt * tab.w * (f1[i] + f2[i]))
        .collect();
    let stage3 = solve_stage(system, &base3, coef, y2, cfg, lu.as_ref())?;
    let u_next = stage3.x;
    let f3 = system.rhs(&u_next);

    let e = tab.error_weights();
    let est: Vec<f64> = (0..n)
        .map(|i| dt * (e[0] * f1[i] + e[1] * f2[i] + e[2] * f3[i]))
        .collect();
    let scale: Vec<f64> = (0..n).map(|i| u_n[i].abs().max(u_next[i].abs())).collect();
    let err = weighted_max_norm(&est, &scale, cfg.rtol, cfg.atol);

    Ok(TrBdf2Step {
        u_next,
        err,
        newton_iterations: stage2.iterations + stage3.iterations,
    })
}

/// Passed to the observer after every accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub t: f64,
    pub u: &'a [f64],
    pub dt: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub newton_failures: usize,
    pub newton_iterations: usize,
    /// Accepted states with `min(u) < -atol`.
    pub positivity_warnings: usize,
    pub min_u: f64,
    pub dt_smallest: f64,
    pub dt_largest: f64,
}

/// Integrates from `state` to `cfg.t_final` with adaptive TR-BDF2.
///
/// Steps are accepted when the embedded error is at most 1 and the next step
/// is `clamp(safety * dt * err^(-1/3), dt_min, dt_max)` with growth capped at
/// 5x. A step whose Newton solve fails is retried with half the size. The last
/// step is clipped to land exactly on `t_final`.
pub fn advance<S: OdeSystem + ?Sized>(
    system: &S,
    state: State,
    cfg: &StepperConfig,
    observer: &mut dyn FnMut(StepRecord<'_>),
) -> Result<(State, SolverStats)> {
    cfg.validate()?;
    assert_eq!(
        state.u.len(),
        system.dim(),
        "state length does not match system"
    );
    debug_assert!(Tableau::trbdf2().is_consistent(1e-14));

    let State { mut t, mut u } = state;
    let t_final = cfg.t_final;
    let mut stats = SolverStats {
        min_u: min_value(&u),
        dt_smallest: f64::INFINITY,
        ..Default::default()
    };
    let mut dt = cfg.dt_init;

    while t < t_final {
        let remaining = t_final - t;
        let last = dt >= remaining * (1.0 - 1e-12);
        let h = if last { remaining } else { dt };

        let outcome = trbdf2_step(system, &u, h, cfg);
        match outcome {
            Ok(step) if step.err <= 1.0 && step.u_next.iter().all(|v| v.is_finite()) => {
                stats.newton_iterations += step.newton_iterations;
                stats.steps_accepted += 1;
                stats.dt_smallest = stats.dt_smallest.min(h);
                stats.dt_largest = stats.dt_largest.max(h);
                t = if last { t_final } else { t + h };
                u = step.u_next;

                let lowest = min_value(&u);
                stats.min_u = stats.min_u.min(lowest);
                if lowest < -cfg.atol {
                    if stats.positivity_warnings == 0 {
                        log::warn!("state lost positivity at t = {t}: min(u) = {lowest:e}");
                    } else {
                        log::debug!("negative state at t = {t}: min(u) = {lowest:e}");
                    }
                    stats.positivity_warnings += 1;
                }
                observer(StepRecord { t, u: &u, dt: h });

                let factor = if step.err > 0.0 {
                    (cfg.safety * step.err.powf(-1.0 / 3.0)).min(MAX_GROWTH)
                } else {
                    MAX_GROWTH
                };
                dt = (h * factor).clamp(cfg.dt_min, cfg.dt_max);
            }
            Ok(step) => {
                log::trace!("step rejected at t = {t}, dt = {h:e}, err = {:e}", step.err);
                stats.newton_iterations += step.newton_iterations;
                stats.steps_rejected += 1;
                if h <= cfg.dt_min {
                    return Err(Error::AbortedAtMinStep {
                        t,
                        dt_min: cfg.dt_min,
                    });
                }
                let factor = if step.err.is_finite() {
                    (cfg.safety * step.err.powf(-1.0 / 3.0)).clamp(MIN_SHRINK, cfg.safety)
                } else {
                    0.5
                };
                dt = (h * factor).max(cfg.dt_min);
            }
            Err(e @ (Error::NonConvergence { .. } | Error::SingularMatrix)) => {
                stats.steps_rejected += 1;
                stats.newton_failures += 1;
                log::debug!("Newton failure at t = {t}, dt = {h:e}: {e}");
                if h <= cfg.dt_min {
                    return Err(Error::AbortedAtMinStep {
                        t,
                        dt_min: cfg.dt_min,
                    });
                }
                dt = (h * 0.5).max(cfg.dt_min);
            }
            Err(e) => return Err(e),
        }
    }
    if stats.steps_accepted == 0 {
        stats.dt_smallest = 0.0;
    }
    Ok((State { t, u }, stats))
}

fn min_value(u: &[f64]) -> f64 {
    u.iter().copied().fold(f64::INFINITY, f64::min)
}
