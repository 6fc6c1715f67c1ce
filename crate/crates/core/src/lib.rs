//! Heavy tracer particle coupled to the excitation field of a Bose gas.
//!
//! * [`spectral`] and [`integrator`]: direct particle-frame solver on a
//!   periodic Fourier grid with exact per-mode propagation.
//! * [`memory`]: oscillatory-quadrature kernels of the reduced particle
//!   dynamics and its self-consistent solver.
//! * [`analysis`]: decay exponents, asymptotic limits and convergence to
//!   the co-moving traveling wave.

// NaN-rejecting `!(x > 0.0)` checks and index loops that mirror the
// formulas are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod analysis;
pub mod error;
pub mod integrator;
pub mod memory;
pub mod model;
pub mod par;
pub mod spectral;
pub mod vec3;

pub use error::{Error, Result};
pub use integrator::{ParticleState, Sample, Trajectory};
pub use model::{ModelParams, PotentialSpec};
pub use spectral::{FieldState, SpectralGrid};
