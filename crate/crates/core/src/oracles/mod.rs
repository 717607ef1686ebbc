//! Independent reference implementations used to validate the grid engine.
//!
//! None of these share code paths with [`crate::propagators`] beyond plain
//! FFTs: pure states evolve in the position representation, classical
//! ensembles as explicit points, and Lyapunov exponents from the tangent map.

pub mod ensemble;
pub mod kernel;
pub mod lyapunov;
pub mod wavefunction;

pub use ensemble::{histogram, mc_step, sampling_band, TrajectoryEnsemble};
pub use kernel::smoothed_kernel_quadrature;
pub use lyapunov::{lyapunov_damped_orbits, lyapunov_formula, lyapunov_numeric, LyapunovKind};
pub use wavefunction::{evolve_state_one_kick, wigner_of_state, WaveFunction};
