use crate::error::{Error, Result};
use crate::integrator::ParticleState;
use crate::model::{FieldNorms, ModelParams};
use crate::par;
use crate::spectral::fft::Fft3;
use crate::spectral::grid::SpectralGrid;
use crate::vec3::{self, Vec3};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::Arc;

const I: C64 = C64::new(0.0, 1.0);

/// Two-component field `h = (Re β, Im β)(· + X)` in the particle frame,
/// stored as Fourier amplitudes on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: Arc<SpectralGrid>,
    h1: Vec<C64>,
    h2: Vec<C64>,
}

impl FieldState {
    pub fn zeros(grid: Arc<SpectralGrid>) -> Self {
        let n = grid.len();
        FieldState {
            grid,
            h1: vec![C64::default(); n],
            h2: vec![C64::default(); n],
        }
    }

    /// Build from amplitudes; inactive modes are cleared.
    pub fn from_modes(grid: Arc<SpectralGrid>, h1: Vec<C64>, h2: Vec<C64>) -> Result<Self> {
        if h1.len() != grid.len() || h2.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} modes, got {} and {}",
                grid.len(),
                h1.len(),
                h2.len()
            )));
        }
        let mut f = FieldState { grid, h1, h2 };
        f.clear_inactive();
        Ok(f)
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn h1(&self) -> &[C64] {
        &self.h1
    }

    pub fn h2(&self) -> &[C64] {
        &self.h2
    }

    fn clear_inactive(&mut self) {
        for idx in 0..self.h1.len() {
            if !self.grid.is_active(idx) {
                self.h1[idx] = C64::default();
                self.h2[idx] = C64::default();
            }
        }
    }

    fn check_grid(&self, other: &FieldState) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.grid.dims(),
                self.grid.box_len(),
                other.grid.dims(),
                other.grid.box_len()
            )))
        }
    }

    /// `self - other`
    pub fn sub(&self, other: &FieldState) -> Result<FieldState> {
        self.check_grid(other)?;
        let d = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(FieldState {
            grid: self.grid.clone(),
            h1: d(&self.h1, &other.h1),
            h2: d(&self.h2, &other.h2),
        })
    }

    /// `self + s · other`
    pub fn axpy(&self, s: f64, other: &FieldState) -> Result<FieldState> {
        self.check_grid(other)?;
        let d = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x + y * s).collect();
        Ok(FieldState {
            grid: self.grid.clone(),
            h1: d(&self.h1, &other.h1),
            h2: d(&self.h2, &other.h2),
        })
    }

    /// Largest `|ĥ(k) - conj(ĥ(-k))|` over both components.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.h1.len() {
            let m = self.grid.mirror(idx);
            worst = worst
                .max((self.h1[idx] - self.h1[m].conj()).norm())
                .max((self.h2[idx] - self.h2[m].conj()).norm());
        }
        worst
    }

    /// `‖h‖₂²` in real space.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.grid.mode_weight();
        w * self
            .h1
            .iter()
            .zip(&self.h2)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum::<f64>()
    }

    /// Squared norms of `∇β` and `Re β` entering the speed bound.
    pub fn norms(&self) -> FieldNorms {
        let w = self.grid.mode_weight();
        let [g, r] = par::reduce_chunks(self.h1.len(), plane(&self.grid), |range| {
            let mut acc = [0.0; 2];
            for idx in range {
                let k = self.grid.wavevector(idx);
                let n1 = self.h1[idx].norm_sqr();
                acc[0] += vec3::dot(k, k) * (n1 + self.h2[idx].norm_sqr());
                acc[1] += n1;
            }
            acc
        });
        FieldNorms {
            grad_sq: w * g,
            re_sq: w * r,
        }
    }

    /// Sample both components on the grid nodes (FFT order, node `j` at
    /// `j · spacing`).
    pub fn to_real_space(&self, fft: &Fft3) -> [Vec<f64>; 2] {
        let w = self.grid.mode_weight();
        let go = |hat: &[C64]| {
            let mut buf = hat.to_vec();
            fft.inverse(&mut buf);
            buf.into_iter().map(|z| z.re * w).collect::<Vec<f64>>()
        };
        [go(&self.h1), go(&self.h2)]
    }

    /// Inverse of [`FieldState::to_real_space`] up to the cleared modes.
    pub fn from_real_space(
        grid: Arc<SpectralGrid>,
        fft: &Fft3,
        h1: &[f64],
        h2: &[f64],
    ) -> Result<FieldState> {
        if h1.len() != grid.len() || h2.len() != grid.len() {
            return Err(Error::GridMismatch("real-space sample count".into()));
        }
        let dv = grid.cell_volume();
        let go = |x: &[f64]| {
            let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
            fft.forward(&mut buf);
            buf.iter_mut().for_each(|z| *z *= dv);
            buf
        };
        let (a, b) = (go(h1), go(h2));
        FieldState::from_modes(grid, a, b)
    }

    /// Localized initial perturbation `β₀(x) = c · exp(-|x - x_c|²/(2s²))`
    /// expressed in the frame of a particle at `particle_position`.
    pub fn gaussian_bump(
        grid: Arc<SpectralGrid>,
        amplitude: C64,
        width: f64,
        center: Vec3,
        particle_position: Vec3,
    ) -> Result<FieldState> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta0_width",
                reason: format!("must be finite and > 0, got {width}"),
            });
        }
        let shift = vec3::sub(center, particle_position);
        let norm = (2.0 * PI * width * width).powf(1.5);
        let n = grid.len();
        let mut h1 = vec![C64::default(); n];
        let mut h2 = vec![C64::default(); n];
        for idx in 0..n {
            let k = grid.wavevector(idx);
            let g = norm * (-0.5 * width * width * vec3::dot(k, k)).exp();
            let ph = C64::from_polar(g, -vec3::dot(k, shift));
            h1[idx] = ph * amplitude.re;
            h2[idx] = ph * amplitude.im;
        }
        FieldState::from_modes(grid, h1, h2)
    }

    /// Lab-frame `β̂(k) = e^{-ik·X} (ĥ₁ + i ĥ₂)(k)`.
    pub fn lab_frame_beta(&self, position: Vec3) -> Vec<C64> {
        (0..self.h1.len())
            .map(|idx| {
                let k = self.grid.wavevector(idx);
                C64::from_polar(1.0, -vec3::dot(k, position)) * (self.h1[idx] + I * self.h2[idx])
            })
            .collect()
    }
}

#[inline]
fn plane(grid: &SpectralGrid) -> usize {
    let d = grid.dims();
    d[1] * d[2]
}

/// Per-mode symbols `a`, `ω`, `Ŵ` for one grid and parameter set, plus the
/// active-mode mask.
#[derive(Debug, Clone)]
pub struct ModeTable {
    grid: Arc<SpectralGrid>,
    params: ModelParams,
    a: Vec<f64>,
    omega: Vec<f64>,
    w_hat: Vec<f64>,
    active: Vec<bool>,
}

/// `cos ωτ`, `a sin(ωτ)/ω`, `b sin(ωτ)/ω` per mode for a fixed `τ`.
#[derive(Debug, Clone)]
struct StepCache {
    dt: f64,
    cos: Vec<f64>,
    a_sin: Vec<f64>,
    b_sin: Vec<f64>,
}

impl ModeTable {
    pub fn new(grid: Arc<SpectralGrid>, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let n = grid.len();
        let mut a = vec![0.0; n];
        let mut omega = vec![0.0; n];
        let mut w_hat = vec![0.0; n];
        let mut active = vec![false; n];
        for idx in 0..n {
            let k = grid.wavevector(idx);
            let k2 = vec3::dot(k, k);
            a[idx] = params.kinetic_symbol(k2);
            omega[idx] = params.omega_k2(k2);
            w_hat[idx] = params.potential.fourier_k2(k2);
            active[idx] = grid.is_active(idx);
        }
        Ok(ModeTable {
            grid,
            params: *params,
            a,
            omega,
            w_hat,
            active,
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn check(&self, h: &FieldState) -> Result<()> {
        if self.grid.same_as(&h.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("field and mode table differ".into()))
        }
    }

    fn check_subsonic(&self, v: Vec3) -> Result<()> {
        let speed = vec3::norm(v);
        let cs = self.params.sound_speed();
        if speed.is_finite() && speed < cs {
            Ok(())
        } else {
            Err(Error::Supersonic {
                speed,
                sound_speed: cs,
            })
        }
    }

    /// Co-moving steady state of the mode `idx` at velocity `v`.
    #[inline]
    fn steady_mode(&self, idx: usize, vk: f64) -> (C64, C64) {
        let a = self.a[idx];
        let b = a + self.params.lambda;
        let det = a * b - vk * vk;
        let s = self.params.rho0.sqrt() * self.w_hat[idx] / det;
        (C64::new(-a * s, 0.0), C64::new(0.0, vk * s))
    }

    /// `√ρ₀ H(v)⁻¹ (0, W)ᵀ`: the field that co-moves with a particle at
    /// constant velocity `v`.
    pub fn steady_state(&self, v: Vec3) -> Result<FieldState> {
        self.check_subsonic(v)?;
        let mut f = FieldState::zeros(self.grid.clone());
        let chunk = plane(&self.grid);
        par::for_each_chunk_pair(&mut f.h1, &mut f.h2, chunk, |off, c1, c2| {
            for j in 0..c1.len() {
                let idx = off + j;
                if self.active[idx] {
                    let vk = vec3::dot(v, self.grid.wavevector(idx));
                    (c1[j], c2[j]) = self.steady_mode(idx, vk);
                }
            }
        });
        Ok(f)
    }

    /// Smallest `ω² - (v·k)²` over active modes.
    pub fn min_determinant(&self, v: Vec3) -> f64 {
        (0..self.grid.len())
            .filter(|&i| self.active[i])
            .map(|i| {
                let vk = vec3::dot(v, self.grid.wavevector(i));
                self.omega[i] * self.omega[i] - vk * vk
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn step_cache(&self, dt: f64) -> StepCache {
        let lambda = self.params.lambda;
        let n = self.grid.len();
        let mut cos = vec![1.0; n];
        let mut a_sin = vec![0.0; n];
        let mut b_sin = vec![0.0; n];
        for idx in 0..n {
            let w = self.omega[idx];
            if w > 0.0 {
                let (s, c) = (w * dt).sin_cos();
                cos[idx] = c;
                a_sin[idx] = self.a[idx] * s / w;
                b_sin[idx] = (self.a[idx] + lambda) * s / w;
            }
        }
        StepCache {
            dt,
            cos,
            a_sin,
            b_sin,
        }
    }

    fn propagate_with(&self, h: &mut FieldState, v: Vec3, cache: &StepCache) {
        let dt = cache.dt;
        if dt == 0.0 {
            return;
        }
        let d = self.grid.dims();
        let phase: [Vec<C64>; 3] = std::array::from_fn(|ax| {
            self.grid
                .axis(ax)
                .iter()
                .map(|&k| C64::from_polar(1.0, v[ax] * k * dt))
                .collect()
        });
        let chunk = plane(&self.grid);
        par::for_each_chunk_pair(&mut h.h1, &mut h.h2, chunk, |off, c1, c2| {
            let i0 = off / chunk;
            let p0 = phase[0][i0];
            for j in 0..c1.len() {
                let idx = off + j;
                if !self.active[idx] {
                    c1[j] = C64::default();
                    c2[j] = C64::default();
                    continue;
                }
                let (i1, i2) = (j / d[2], j % d[2]);
                let k = [
                    self.grid.axis(0)[i0],
                    self.grid.axis(1)[i1],
                    self.grid.axis(2)[i2],
                ];
                let vk = vec3::dot(v, k);
                let (s1, s2) = self.steady_mode(idx, vk);
                let d1 = c1[j] - s1;
                let d2 = c2[j] - s2;
                let e1 = d1 * cache.cos[idx] + d2 * cache.a_sin[idx];
                let e2 = d2 * cache.cos[idx] - d1 * cache.b_sin[idx];
                let ph = p0 * phase[1][i1] * phase[2][i2];
                c1[j] = s1 + ph * e1;
                c2[j] = s2 + ph * e2;
            }
        });
    }

    /// Exact evolution over `dt` (any sign) for frozen velocity `v`.
    pub fn propagate(&self, h: &mut FieldState, v: Vec3, dt: f64) -> Result<()> {
        self.check(h)?;
        self.check_subsonic(v)?;
        let cache = self.step_cache(dt);
        self.propagate_with(h, v, &cache);
        Ok(())
    }

    /// `2√ρ₀ ∫ ∇W h₁ dx`
    pub fn force(&self, h: &FieldState) -> Result<Vec3> {
        self.check(h)?;
        let sum = par::reduce_chunks(self.grid.len(), plane(&self.grid), |range| {
            let mut acc = [0.0; 3];
            for idx in range {
                if self.active[idx] {
                    let s = self.w_hat[idx] * h.h1[idx].im;
                    let k = self.grid.wavevector(idx);
                    for d in 0..3 {
                        acc[d] += k[d] * s;
                    }
                }
            }
            acc
        });
        Ok(vec3::scale(
            sum,
            self.params.force_coupling() * self.grid.mode_weight(),
        ))
    }

    /// Field part of the Hamilton functional:
    /// `∫ |∇β|²/2m + λ (Re β)² + 2√ρ₀ W^X Re β`.
    pub fn field_energy(&self, h: &FieldState) -> Result<f64> {
        self.check(h)?;
        let lambda = self.params.lambda;
        let kappa = self.params.force_coupling();
        let sum = par::reduce_chunks(self.grid.len(), plane(&self.grid), |range| {
            let mut acc = 0.0;
            for idx in range {
                if self.active[idx] {
                    let n1 = h.h1[idx].norm_sqr();
                    let n2 = h.h2[idx].norm_sqr();
                    acc += self.a[idx] * (n1 + n2)
                        + lambda * n1
                        + kappa * self.w_hat[idx] * h.h1[idx].re;
                }
            }
            acc
        });
        Ok(sum * self.grid.mode_weight())
    }

    pub fn hamiltonian(&self, particle: &ParticleState, h: &FieldState) -> Result<f64> {
        let p = particle.momentum;
        Ok(vec3::dot(p, p) / (2.0 * self.params.particle_mass) + self.field_energy(h)?)
    }

    /// `b|ĥ₁|² + a|ĥ₂|²` for each mode; conserved by source-free evolution.
    pub fn mode_energy(&self, h: &FieldState) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                (self.a[i] + self.params.lambda) * h.h1[i].norm_sqr() + self.a[i] * h.h2[i].norm_sqr()
            })
            .collect()
    }
}

/// Reusable exact propagator for a fixed step size.
#[derive(Debug, Clone)]
pub struct Propagator {
    table: ModeTable,
    cache: StepCache,
}

impl Propagator {
    pub fn new(table: ModeTable, dt: f64) -> Self {
        let cache = table.step_cache(dt);
        Propagator { table, cache }
    }

    pub fn table(&self) -> &ModeTable {
        &self.table
    }

    pub fn dt(&self) -> f64 {
        self.cache.dt
    }

    pub fn step(&self, h: &mut FieldState, v: Vec3) -> Result<()> {
        self.table.check(h)?;
        self.table.check_subsonic(v)?;
        self.table.propagate_with(h, v, &self.cache);
        Ok(())
    }
}

/// The field co-moving with a particle at constant subsonic velocity `v`.
pub fn steady_state_field(
    v: Vec3,
    params: &ModelParams,
    grid: Arc<SpectralGrid>,
) -> Result<FieldState> {
    ModeTable::new(grid, params)?.steady_state(v)
}

/// Exact field evolution over `dt` for frozen particle velocity `v`.
pub fn propagate_field_step(
    h: &FieldState,
    v: Vec3,
    dt: f64,
    params: &ModelParams,
) -> Result<FieldState> {
    let table = ModeTable::new(h.grid.clone(), params)?;
    let mut out = h.clone();
    table.propagate(&mut out, v, dt)?;
    Ok(out)
}

pub fn force_on_particle(h: &FieldState, params: &ModelParams) -> Result<Vec3> {
    ModeTable::new(h.grid.clone(), params)?.force(h)
}

pub fn hamiltonian(particle: &ParticleState, h: &FieldState, params: &ModelParams) -> Result<f64> {
    ModeTable::new(h.grid.clone(), params)?.hamiltonian(particle, h)
}

/// Grid approximation of `‖(1+|x|²)^{p/2} h‖_{H^s}` for the particle-frame
/// field, with `x` the minimal-image position relative to the particle.
pub fn weighted_sobolev_norm(h: &FieldState, fft: &Fft3, power: f64, order: i32) -> f64 {
    let grid = h.grid.clone();
    let [r1, r2] = h.to_real_space(fft);
    let weight: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.centered_position(i);
            (1.0 + vec3::dot(x, x)).powf(0.5 * power)
        })
        .collect();
    let dv = grid.cell_volume();
    let mut total = 0.0;
    for r in [r1, r2] {
        let mut buf: Vec<C64> = r
            .iter()
            .zip(&weight)
            .map(|(v, w)| C64::new(v * w, 0.0))
            .collect();
        fft.forward(&mut buf);
        for (idx, z) in buf.iter().enumerate() {
            let k = grid.wavevector(idx);
            total += (1.0 + vec3::dot(k, k)).powi(order) * (z * dv).norm_sqr();
        }
    }
    (total * grid.mode_weight()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;
    use proptest::prelude::*;

    fn small_grid() -> Arc<SpectralGrid> {
        Arc::new(SpectralGrid::new([8, 8, 8], [12.0, 12.0, 12.0]).unwrap())
    }

    fn random_field(grid: Arc<SpectralGrid>, seed: u64) -> FieldState {
        // smooth real-space field from deterministic pseudo-random coefficients
        let fft = Fft3::new(&grid);
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut h1 = vec![0.0; grid.len()];
        let mut h2 = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            h1[i] = next();
            h2[i] = next();
        }
        FieldState::from_real_space(grid, &fft, &h1, &h2).unwrap()
    }

    #[test]
    fn steady_state_at_rest_inverts_mode_matrix() {
        let p = ModelParams::default();
        let grid = small_grid();
        let f = steady_state_field([0.0; 3], &p, grid.clone()).unwrap();
        for idx in 0..grid.len() {
            assert_eq!(f.h2()[idx], C64::default());
            if grid.is_active(idx) {
                let k = grid.wavevector(idx);
                let k2 = vec3::dot(k, k);
                let b = p.kinetic_symbol(k2) + p.lambda;
                let expect = -p.rho0.sqrt() * p.potential.fourier_k2(k2) / b;
                assert!((f.h1()[idx].re - expect).abs() <= 1e-15 * expect.abs());
            }
        }
    }

    #[test]
    fn steady_state_solves_mode_equations() {
        let p = ModelParams::default();
        let grid = small_grid();
        let v = [0.2, -0.3, 0.5];
        let f = steady_state_field(v, &p, grid.clone()).unwrap();
        for idx in (0..grid.len()).filter(|&i| grid.is_active(i)) {
            let k = grid.wavevector(idx);
            let k2 = vec3::dot(k, k);
            let a = p.kinetic_symbol(k2);
            let b = a + p.lambda;
            let ivk = I * vec3::dot(v, k);
            let w = p.potential.fourier_k2(k2);
            let (h1, h2) = (f.h1()[idx], f.h2()[idx]);
            let r1 = ivk * h1 + a * h2;
            let r2 = -b * h1 + ivk * h2 - p.rho0.sqrt() * w;
            assert!(r1.norm() < 1e-13 * w && r2.norm() < 1e-13 * w);
        }
        assert!(f.reality_defect() < 1e-15);
    }

    #[test]
    fn supersonic_steady_state_rejected() {
        let p = ModelParams::default();
        let err = steady_state_field([0.0, 0.0, 1.0], &p, small_grid()).unwrap_err();
        assert!(matches!(err, Error::Supersonic { .. }));
    }

    #[test]
    fn zero_density_gives_zero_steady_state() {
        let p = ModelParams::default().with_rho0(0.0);
        let f = steady_state_field([0.1, 0.0, 0.0], &p, small_grid()).unwrap();
        assert!(f.h1().iter().chain(f.h2()).all(|z| *z == C64::default()));
    }

    #[test]
    fn steady_state_is_fixed_point_and_zero_step_identity() {
        let p = ModelParams::default();
        let v = [0.1, 0.2, -0.3];
        let s = steady_state_field(v, &p, small_grid()).unwrap();
        assert_eq!(propagate_field_step(&s, v, 0.37, &p).unwrap(), s);
        let r = random_field(small_grid(), 3);
        assert_eq!(propagate_field_step(&r, v, 0.0, &p).unwrap(), r);
    }

    #[test]
    fn orthogonality_of_steady_state() {
        let p = ModelParams::default();
        for frac in [0.0, 0.3, 0.6, 0.9] {
            let v = [0.0, frac * 0.6, frac * 0.8];
            let s = steady_state_field(v, &p, small_grid()).unwrap();
            let f = force_on_particle(&s, &p).unwrap();
            assert!(vec3::norm(f) < 1e-14, "{f:?}");
        }
    }

    /// Taylor series with scaling and squaring, independent of the closed form.
    fn expm2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let norm = m.iter().flatten().map(|x| x.abs()).sum::<f64>();
        let mut sq = 0;
        let mut s = 1.0;
        while norm * s > 0.1 {
            s *= 0.5;
            sq += 1;
        }
        let a = [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]];
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            let mut r = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            r
        };
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut sum = term;
        for n in 1..30 {
            term = mul(term, a);
            term = term.map(|r| r.map(|x| x / n as f64));
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..sq {
            sum = mul(sum, sum);
        }
        sum
    }

    #[test]
    fn source_free_step_matches_matrix_exponential() {
        let p = ModelParams::default().with_rho0(0.0);
        let grid = Arc::new(SpectralGrid::new([4, 4, 4], [6.0; 3]).unwrap());
        let idx = grid.index([1, 0, 0]);
        let mut h1 = vec![C64::default(); grid.len()];
        let mut h2 = vec![C64::default(); grid.len()];
        h1[idx] = C64::new(0.7, 0.0);
        h2[idx] = C64::new(-0.2, 0.0);
        let m = grid.mirror(idx);
        h1[m] = h1[idx];
        h2[m] = h2[idx];
        let f = FieldState::from_modes(grid.clone(), h1, h2).unwrap();
        let dt = 0.83;
        let out = propagate_field_step(&f, [0.0; 3], dt, &p).unwrap();
        let k2 = vec3::dot(grid.wavevector(idx), grid.wavevector(idx));
        let a = p.kinetic_symbol(k2);
        let b = a + p.lambda;
        let e = expm2([[0.0, a * dt], [-b * dt, 0.0]]);
        let x1 = e[0][0] * 0.7 + e[0][1] * -0.2;
        let x2 = e[1][0] * 0.7 + e[1][1] * -0.2;
        assert!((out.h1()[idx].re - x1).abs() < 1e-12);
        assert!((out.h2()[idx].re - x2).abs() < 1e-12);
    }

    /// Real-space oracles for force and energy on a band-limited field.
    #[test]
    fn force_and_energy_match_real_space_quadrature() {
        let p = ModelParams {
            rho0: 0.04,
            potential: PotentialSpec::gaussian(0.8, 1.2),
            ..ModelParams::default()
        };
        // fine grid so that W is resolved; random field is band-limited to
        // the coarse modes of a 8³ lattice embedded in a 32³ grid
        let coarse = Arc::new(SpectralGrid::new([8, 8, 8], [16.0; 3]).unwrap());
        let fine = Arc::new(SpectralGrid::new([32, 32, 32], [16.0; 3]).unwrap());
        let rc = random_field(coarse.clone(), 11);
        let mut h1 = vec![C64::default(); fine.len()];
        let mut h2 = vec![C64::default(); fine.len()];
        for idx in 0..coarse.len() {
            let k = coarse.wavevector(idx);
            let i = std::array::from_fn(|d| {
                let m = (k[d] * 16.0 / (2.0 * PI)).round() as i64;
                m.rem_euclid(32) as usize
            });
            h1[fine.index(i)] = rc.h1()[idx];
            h2[fine.index(i)] = rc.h2()[idx];
        }
        let f = FieldState::from_modes(fine.clone(), h1, h2).unwrap();
        let fft = Fft3::new(&fine);
        let [x1, x2] = f.to_real_space(&fft);
        let dv = fine.cell_volume();
        let kappa = p.force_coupling();
        // W periodized over neighbouring images is negligible at this width
        let mut force = [0.0; 3];
        let mut grad2 = 0.0;
        let mut energy = 0.0;
        for idx in 0..fine.len() {
            let x = fine.centered_position(idx);
            let gw = p.potential.gradient(x);
            for d in 0..3 {
                force[d] += kappa * gw[d] * x1[idx] * dv;
            }
            energy += (p.lambda * x1[idx] * x1[idx] + kappa * p.potential.value(x) * x1[idx]) * dv;
        }
        // gradient energy via spectral derivative of the real-space samples
        for comp in [&x1, &x2] {
            for d in 0..3 {
                let mut buf: Vec<C64> = comp.iter().map(|&v| C64::new(v, 0.0)).collect();
                fft.forward(&mut buf);
                for (idx, z) in buf.iter_mut().enumerate() {
                    *z *= I * fine.wavevector(idx)[d] / fine.len() as f64;
                }
                fft.inverse(&mut buf);
                grad2 += buf.iter().map(|z| z.re * z.re).sum::<f64>() * dv;
            }
        }
        energy += grad2 / (2.0 * p.boson_mass);
        let table = ModeTable::new(fine.clone(), &p).unwrap();
        let fs = table.force(&f).unwrap();
        for d in 0..3 {
            assert!((fs[d] - force[d]).abs() <= 1e-8 * vec3::norm(force), "{fs:?} {force:?}");
        }
        let es = table.field_energy(&f).unwrap();
        assert!((es - energy).abs() <= 1e-10 * energy.abs(), "{es} {energy}");
    }

    #[test]
    fn hamiltonian_kinetic_only() {
        let p = ModelParams {
            particle_mass: 1.0,
            ..ModelParams::default()
        };
        let z = FieldState::zeros(small_grid());
        let mut part = ParticleState::at_rest([0.0; 3]);
        assert_eq!(hamiltonian(&part, &z, &p).unwrap(), 0.0);
        part.momentum = [0.0, 1.0, 0.0];
        assert_eq!(hamiltonian(&part, &z, &p).unwrap(), 0.5);
    }

    #[test]
    fn parseval_identity() {
        let grid = small_grid();
        let f = random_field(grid.clone(), 5);
        let fft = Fft3::new(&grid);
        let [x1, x2] = f.to_real_space(&fft);
        let real: f64 = x1.iter().chain(&x2).map(|v| v * v).sum::<f64>() * grid.cell_volume();
        assert!((real - f.l2_norm_sq()).abs() <= 1e-12 * real);
    }

    #[test]
    fn radial_real_h1_gives_no_force() {
        let p = ModelParams::default();
        let grid = small_grid();
        let n = grid.len();
        let h1: Vec<C64> = (0..n)
            .map(|i| {
                let k = grid.wavevector(i);
                C64::new((-vec3::dot(k, k)).exp(), 0.0)
            })
            .collect();
        let f = FieldState::from_modes(grid, h1, vec![C64::default(); n]).unwrap();
        assert_eq!(force_on_particle(&f, &p).unwrap(), [0.0; 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn group_property(seed in 0u64..1000, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0,
                          v in prop::array::uniform3(-0.5f64..0.5)) {
            let p = ModelParams::default();
            let f = random_field(small_grid(), seed);
            let a = propagate_field_step(&propagate_field_step(&f, v, t1, &p).unwrap(), v, t2, &p).unwrap();
            let b = propagate_field_step(&f, v, t1 + t2, &p).unwrap();
            let scale = f.l2_norm_sq().sqrt() + 1.0;
            prop_assert!(a.sub(&b).unwrap().l2_norm_sq().sqrt() < 1e-12 * scale);
        }

        #[test]
        fn source_free_mode_energy_conserved(seed in 0u64..1000, dt in -2.0f64..2.0,
                                             v in prop::array::uniform3(-0.5f64..0.5)) {
            let p = ModelParams::default().with_rho0(0.0);
            let f = random_field(small_grid(), seed);
            let table = ModeTable::new(f.grid().clone(), &p).unwrap();
            let mut g = f.clone();
            table.propagate(&mut g, v, dt).unwrap();
            for (e0, e1) in table.mode_energy(&f).iter().zip(table.mode_energy(&g)) {
                prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1e-300));
            }
        }

        #[test]
        fn operations_preserve_reality_and_zero_mean(seed in 0u64..1000, dt in 0.0f64..1.0,
                                                     v in prop::array::uniform3(-0.5f64..0.5)) {
            let p = ModelParams::default();
            let f = random_field(small_grid(), seed);
            let g = propagate_field_step(&f, v, dt, &p).unwrap();
            prop_assert!(g.reality_defect() < 1e-12);
            prop_assert_eq!(g.h1()[0], C64::default());
            prop_assert_eq!(g.h2()[0], C64::default());
            let s = steady_state_field(v, &p, small_grid()).unwrap();
            prop_assert!(s.reality_defect() < 1e-14);
        }

        #[test]
        fn subsonic_determinant_positive(v in prop::array::uniform3(-0.57f64..0.57)) {
            let p = ModelParams::default();
            let table = ModeTable::new(small_grid(), &p).unwrap();
            let cs = p.sound_speed();
            let kmin = 2.0 * PI / 12.0;
            let bound = (cs * cs - vec3::dot(v, v)) * kmin * kmin;
            prop_assert!(table.min_determinant(v) >= bound * (1.0 - 1e-12));
        }
    }
}
