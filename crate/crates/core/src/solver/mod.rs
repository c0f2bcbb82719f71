//! Pseudo-spectral time integration of the full perturbed system with the
//! exact linear propagator as integrating factor.

mod checkpoint;
mod initial;
mod integrator;
mod rhs;
mod state;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use initial::make_initial_data;
pub use integrator::{cfl_step, run, step, Integrator, IntegratorConfig, RunRecord, Scheme, StepInfo};
pub use rhs::nonlinear_rhs;
pub use state::{SimulationState, DIV_TOLERANCE, HERMITIAN_TOLERANCE};
