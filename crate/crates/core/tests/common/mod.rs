//! Shared helpers for integration tests: a spectral (lattice-sum) oracle
//! for the memory kernels and small run utilities.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use std::sync::Arc;
use tracer_core::spectral::ModeTable;
use tracer_core::vec3::{self, Vec3};
use tracer_core::{FieldState, ModelParams, SpectralGrid};

/// Kernels evaluated by propagating explicit mode fields on a periodic
/// grid and reading off the force, for a particle in uniform motion.
pub struct SpectralOracle {
    pub table: ModeTable,
    params: ModelParams,
}

impl SpectralOracle {
    pub fn new(n: usize, side: f64, params: &ModelParams) -> Self {
        let grid = Arc::new(SpectralGrid::cubic(n, side).unwrap());
        SpectralOracle {
            table: ModeTable::new(grid, params).unwrap(),
            params: *params,
        }
    }

    fn grid(&self) -> Arc<SpectralGrid> {
        self.table.grid().clone()
    }

    /// Source-free evolution `U(t) h`: the stepper is affine in `h`, so
    /// subtract the evolution of the zero field.
    pub fn evolve(&self, h: &FieldState, v: Vec3, t: f64) -> FieldState {
        let mut x = h.clone();
        let mut z = FieldState::zeros(self.grid());
        self.table.propagate(&mut x, v, t).unwrap();
        self.table.propagate(&mut z, v, t).unwrap();
        x.sub(&z).unwrap()
    }

    /// Force of the freely evolved initial field `h0` after time `t`.
    pub fn d1(&self, h0: &FieldState, v: Vec3, t: f64) -> Vec3 {
        self.table.force(&self.evolve(h0, v, t)).unwrap()
    }

    /// Gaussian initial field centered at `offset` from the particle.
    pub fn gaussian(&self, amplitude: C64, width: f64, offset: Vec3) -> FieldState {
        FieldState::gaussian_bump(self.grid(), amplitude, width, offset, vec3::ZERO).unwrap()
    }

    /// Minus the force of the evolved steady state.
    pub fn d2(&self, v: Vec3, t: f64) -> Vec3 {
        let h = self.table.steady_state(v).unwrap();
        vec3::scale(self.table.force(&self.evolve(&h, v, t)).unwrap(), -1.0)
    }

    /// `K_jl = −F_j[U(τ) ∂_{v_l} h_s(v)] / (2ρ₀)` with the velocity
    /// derivative of the steady state written out mode by mode.
    pub fn k(&self, v: Vec3, tau: f64) -> [[f64; 3]; 3] {
        let grid = self.grid();
        let p = &self.params;
        let sq = p.rho0.sqrt();
        let mut out = [[0.0; 3]; 3];
        for l in 0..3 {
            let n = grid.len();
            let mut h1 = vec![C64::default(); n];
            let mut h2 = vec![C64::default(); n];
            for idx in 0..n {
                let k = grid.wavevector(idx);
                let k2 = vec3::dot(k, k);
                if k2 == 0.0 {
                    continue;
                }
                let a = k2 / (2.0 * p.boson_mass);
                let b = a + p.lambda;
                let vk = vec3::dot(v, k);
                let det = a * b - vk * vk;
                let w = p.potential.fourier_k2(k2);
                h1[idx] = C64::new(-2.0 * sq * a * vk * k[l] * w / (det * det), 0.0);
                h2[idx] = C64::new(0.0, sq * k[l] * w * (a * b + vk * vk) / (det * det));
            }
            let h = FieldState::from_modes(grid.clone(), h1, h2).unwrap();
            let f = self.table.force(&self.evolve(&h, v, tau)).unwrap();
            for j in 0..3 {
                out[j][l] = -f[j] / (2.0 * p.rho0);
            }
        }
        out
    }
}

/// Richardson extrapolation of two lattice sums whose error scales as
/// `side^{-order}`.
pub fn richardson(small: f64, side_small: f64, large: f64, side_large: f64, order: i32) -> f64 {
    let r = (side_large / side_small).powi(order);
    (r * large - small) / (r - 1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
