//! Reduced particle dynamics: oscillatory quadrature, memory kernels and
//! the self-consistent history solver.

pub mod filon;
pub mod kernels;
pub mod quad;
pub mod reduced;
pub mod table;

pub use filon::{oscillatory_integral, FilonSettings, Outcome, PhaseParams};
pub use kernels::{
    kernel_d1, kernel_d2, kernel_d2_extended, kernel_k, BallisticPath, Beta0Spectrum, KernelSettings,
    KernelValue, PathView,
};
pub use reduced::{solve_reduced, HistoryWeighting, ReducedRun, ReducedSettings};
pub use table::{DecayReport, KernelTable, Mat3};
