//! Conservative finite-volume solver for the isotropic 3-wave kinetic equation
//! written as `∂_t u = ∂_k Q[u]` for the energy-density variable `u = k g(t, k)`.

pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod scenarios;
pub mod stepper;

pub use collision::{CollisionKernel, State};
pub use diagnostics::{detect_phases, fit_decay, moment, DecayFit, DiagnosticsRecord, PhaseKind};
pub use error::{Error, Result};
pub use grid::Grid;
pub use harness::{run, RunConfig};
pub use scenarios::Scenario;
pub use stepper::{advance, backward_euler_step, trbdf2_step, StepperConfig, Tableau};
