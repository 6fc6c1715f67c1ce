//! Fourier-space representation of the particle-frame field: exact
//! per-mode propagation, steady states, force and energy.

pub mod fft;
pub mod field;
pub mod grid;
pub mod io;

pub use fft::Fft3;
pub use field::{
    force_on_particle, hamiltonian, propagate_field_step, steady_state_field,
    weighted_sobolev_norm, FieldState, ModeTable, Propagator,
};
pub use grid::SpectralGrid;

use crate::model::ModelParams;

/// Time after which waves radiated by the particle can re-enter its
/// neighbourhood through the periodic boundary.
///
/// Uses the group velocity at `k_cut`, the wavenumber beyond which the
/// field content is considered negligible.
pub fn wrap_horizon(grid: &SpectralGrid, params: &ModelParams, k_cut: f64) -> f64 {
    let reach = grid.min_half_width() - 6.0 * params.potential.length_scale();
    (reach / params.group_velocity(k_cut)).max(0.0)
}

/// Relative spectral weight `|Ŵ(k)|²/|Ŵ(0)|²` at the default wrap cutoff.
pub const WRAP_SPECTRAL_WEIGHT: f64 = 0.1;

/// How the wavenumber entering [`wrap_horizon`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapCutoff {
    /// Where `|Ŵ|²` falls to [`WRAP_SPECTRAL_WEIGHT`] of its peak, capped
    /// by the grid.
    Potential,
    /// The largest wavenumber on the grid (most conservative).
    Grid,
}

impl WrapCutoff {
    pub fn wavenumber(self, grid: &SpectralGrid, params: &ModelParams) -> f64 {
        match self {
            WrapCutoff::Grid => grid.k_max(),
            WrapCutoff::Potential => params
                .potential
                .spectral_cutoff(WRAP_SPECTRAL_WEIGHT.sqrt())
                .min(grid.k_max()),
        }
    }

    pub fn horizon(self, grid: &SpectralGrid, params: &ModelParams) -> f64 {
        wrap_horizon(grid, params, self.wavenumber(grid, params))
    }
}
