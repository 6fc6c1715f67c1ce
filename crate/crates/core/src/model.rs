//! Physical parameters, the coupling potential and scalar diagnostics.
//!
//! Conventions used throughout the crate:
//!
//! * Fourier transform `f̂(k) = ∫ e^{-ik·x} f(x) dx`.
//! * Mode symbols `a(k) = |k|²/2m`, `b(k) = a(k) + λ`, `ω(k) = √(a b)`.
//! * The particle feels the force `2√ρ₀ ∫ ∇W(y) Re β(y + X) dy`, which is
//!   `-∂H/∂X` for the Hamilton functional evaluated by
//!   [`crate::spectral::hamiltonian`].

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Shape of the particle–field coupling potential `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    /// `W(x) = amplitude · exp(-|x|² / (2 width²))`
    Gaussian { amplitude: f64, width: f64 },
}

impl PotentialSpec {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        PotentialSpec::Gaussian { amplitude, width }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Gaussian { amplitude, width } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "amplitude",
                        reason: format!("must be finite, got {amplitude}"),
                    });
                }
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "width",
                        reason: format!("must be finite and > 0, got {width}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Characteristic length of the potential (σ for the Gaussian).
    pub fn length_scale(&self) -> f64 {
        match *self {
            PotentialSpec::Gaussian { width, .. } => width,
        }
    }

    pub fn value(&self, x: Vec3) -> f64 {
        match *self {
            PotentialSpec::Gaussian { amplitude, width } => {
                amplitude * (-vec3::dot(x, x) / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: Vec3) -> Vec3 {
        match *self {
            PotentialSpec::Gaussian { width, .. } => {
                vec3::scale(x, -self.value(x) / (width * width))
            }
        }
    }

    /// `Ŵ` as a function of `|k|²`.
    #[inline]
    pub fn fourier_k2(&self, k2: f64) -> f64 {
        match *self {
            PotentialSpec::Gaussian { amplitude, width } => {
                let s2 = width * width;
                amplitude * (2.0 * PI * s2).powf(1.5) * (-0.5 * s2 * k2).exp()
            }
        }
    }

    /// `∫ W² dx`
    pub fn l2_norm_sq(&self) -> f64 {
        match *self {
            PotentialSpec::Gaussian { amplitude, width } => {
                amplitude * amplitude * (PI * width * width).powf(1.5)
            }
        }
    }

    /// `∫ |∇W|² dx`
    pub fn grad_l2_norm_sq(&self) -> f64 {
        match *self {
            PotentialSpec::Gaussian { width, .. } => {
                1.5 * self.l2_norm_sq() / (width * width)
            }
        }
    }

    /// Wavenumber beyond which `|Ŵ(k)| < rel · |Ŵ(0)|`.
    pub fn spectral_cutoff(&self, rel: f64) -> f64 {
        match *self {
            PotentialSpec::Gaussian { width, .. } => (2.0 * (1.0 / rel).ln()).sqrt() / width,
        }
    }
}

/// `Ŵ(k)` for a wavevector.
pub fn potential_fourier(spec: &PotentialSpec, k: Vec3) -> f64 {
    spec.fourier_k2(vec3::dot(k, k))
}

/// Constants of the model. Field names follow their physical role:
/// `particle_mass` is M, `boson_mass` is m, `lambda` the contact coupling
/// and `rho0` the condensate density parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub particle_mass: f64,
    pub boson_mass: f64,
    pub lambda: f64,
    pub rho0: f64,
    pub potential: PotentialSpec,
}

impl Default for ModelParams {
    /// Units with `2m = λ = 1` (so `c_s = 1`), a Gaussian of unit height
    /// and width, and a tracer four times heavier than the unit mass.
    fn default() -> Self {
        ModelParams {
            particle_mass: 4.0,
            boson_mass: 0.5,
            lambda: 1.0,
            rho0: 0.01,
            potential: PotentialSpec::gaussian(1.0, 1.0),
        }
    }
}

impl ModelParams {
    pub fn new(
        particle_mass: f64,
        boson_mass: f64,
        lambda: f64,
        rho0: f64,
        potential: PotentialSpec,
    ) -> Result<Self> {
        let p = ModelParams {
            particle_mass,
            boson_mass,
            lambda,
            rho0,
            potential,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        };
        positive("particle_mass", self.particle_mass)?;
        positive("boson_mass", self.boson_mass)?;
        positive("lambda", self.lambda)?;
        if !(self.rho0.is_finite() && self.rho0 >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho0",
                reason: format!("must be finite and >= 0, got {}", self.rho0),
            });
        }
        self.potential.validate()
    }

    pub fn with_rho0(mut self, rho0: f64) -> Self {
        self.rho0 = rho0;
        self
    }

    /// True for the `2m = λ = 1` convention.
    pub fn is_natural_units(&self) -> bool {
        2.0 * self.boson_mass == 1.0 && self.lambda == 1.0
    }

    pub fn units_label(&self) -> &'static str {
        if self.is_natural_units() {
            "2m=lambda=1"
        } else {
            "custom"
        }
    }

    #[inline]
    pub fn sound_speed(&self) -> f64 {
        (self.lambda / (2.0 * self.boson_mass)).sqrt()
    }

    /// Inverse healing length `√(2mλ)`; dimensionless wavenumbers are `|k|/k₀`.
    #[inline]
    pub fn healing_wavenumber(&self) -> f64 {
        (2.0 * self.boson_mass * self.lambda).sqrt()
    }

    /// Prefactor of the particle force, `2√ρ₀`.
    #[inline]
    pub fn force_coupling(&self) -> f64 {
        2.0 * self.rho0.sqrt()
    }

    #[inline]
    pub fn kinetic_symbol(&self, k2: f64) -> f64 {
        k2 / (2.0 * self.boson_mass)
    }

    #[inline]
    pub fn omega_k2(&self, k2: f64) -> f64 {
        let a = self.kinetic_symbol(k2);
        (a * (a + self.lambda)).sqrt()
    }

    /// Group velocity `dω/d|k|` at wavenumber `k ≥ 0`.
    pub fn group_velocity(&self, k: f64) -> f64 {
        if k == 0.0 {
            return self.sound_speed();
        }
        let a = self.kinetic_symbol(k * k);
        let w = (a * (a + self.lambda)).sqrt();
        k / (2.0 * self.boson_mass) * (2.0 * a + self.lambda) / w
    }

    pub fn speed(&self, momentum: Vec3) -> f64 {
        vec3::norm(momentum) / self.particle_mass
    }

    pub fn velocity(&self, momentum: Vec3) -> Vec3 {
        vec3::scale(momentum, 1.0 / self.particle_mass)
    }
}

/// `√(λ / 2m)`
pub fn sound_speed(params: &ModelParams) -> f64 {
    params.sound_speed()
}

/// `ω(k) = √(a(k) b(k))`
pub fn dispersion_omega(k: Vec3, params: &ModelParams) -> f64 {
    params.omega_k2(vec3::dot(k, k))
}

/// Largest sampled `speed / c_s`.
pub fn compute_eta(speeds: &[f64], sound_speed: f64) -> Result<f64> {
    if speeds.is_empty() {
        return Err(Error::NoSamples);
    }
    Ok(speeds.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s)) / sound_speed)
}

/// Squared norms of the initial field entering the speed bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldNorms {
    /// `‖∇β‖₂²`
    pub grad_sq: f64,
    /// `‖Re β‖₂²`
    pub re_sq: f64,
}

/// Energy-conservation bound on the particle speed,
///
/// `v_max = (1/M) [ |P₀|² + 2M ( ‖∇β₀‖²/2m + 2λ‖Re β₀‖² + 8ρ₀‖W‖²/λ ) ]^{1/2}`,
///
/// obtained by bounding the coupling term of the Hamiltonian from both
/// sides with the Schwarz inequality.
pub fn compute_vmax(initial_momentum: Vec3, norms: FieldNorms, params: &ModelParams) -> f64 {
    let m_big = params.particle_mass;
    let field = norms.grad_sq / (2.0 * params.boson_mass)
        + 2.0 * params.lambda * norms.re_sq
        + 8.0 * params.rho0 * params.potential.l2_norm_sq() / params.lambda;
    (vec3::dot(initial_momentum, initial_momentum) + 2.0 * m_big * field).sqrt() / m_big
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn units(boson_mass: f64, lambda: f64) -> ModelParams {
        ModelParams {
            boson_mass,
            lambda,
            ..ModelParams::default()
        }
    }

    #[test]
    fn sound_speed_examples() {
        assert_eq!(sound_speed(&units(0.5, 1.0)), 1.0);
        assert_eq!(sound_speed(&units(1.0, 2.0)), 1.0);
        assert_relative_eq!(sound_speed(&units(0.5, 0.5)), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_fourier_values() {
        let w = PotentialSpec::gaussian(1.0, 1.0);
        assert_relative_eq!(potential_fourier(&w, [0.0; 3]), 15.749610, epsilon = 1e-6);
        assert_relative_eq!(potential_fourier(&w, [0.0, 1.0, 0.0]), 9.552621, epsilon = 1e-6);
    }

    /// 3D midpoint sum of ∫ e^{-ik·x} W dx on a wide box; the Gaussian makes
    /// the truncation error negligible.
    #[test]
    fn gaussian_fourier_matches_real_space_quadrature() {
        let w = PotentialSpec::gaussian(1.0, 1.0);
        let k = [0.6, -0.3, 0.7416198487095663];
        let n = 96;
        let half = 9.0;
        let h = 2.0 * half / n as f64;
        let coords: Vec<f64> = (0..n).map(|i| -half + (i as f64 + 0.5) * h).collect();
        let mut re = 0.0;
        for &x in &coords {
            for &y in &coords {
                for &z in &coords {
                    let p = [x, y, z];
                    re += w.value(p) * vec3::dot(k, p).cos();
                }
            }
        }
        re *= h * h * h;
        assert_relative_eq!(re, potential_fourier(&w, k), max_relative = 1e-9);
        assert_relative_eq!(re, 9.552621, max_relative = 1e-6);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(compute_eta(&[0.5; 10], 1.0).unwrap(), 0.5);
        let dec: Vec<f64> = (0..20).map(|i| 0.8 - 0.01 * i as f64).collect();
        assert_eq!(compute_eta(&dec, 1.0).unwrap(), 0.8);
        assert!(matches!(compute_eta(&[], 1.0), Err(Error::NoSamples)));
        let seq = [0.1, 0.7, 0.3, 0.69, 0.2];
        let brute = seq.iter().cloned().fold(0.0, f64::max);
        assert_eq!(compute_eta(&seq, 2.0).unwrap(), brute / 2.0);
    }

    #[test]
    fn vmax_examples() {
        let p = ModelParams::default().with_rho0(0.0);
        let p0 = [0.0, 1.2, 0.0];
        assert_relative_eq!(compute_vmax(p0, FieldNorms::default(), &p), 1.2 / p.particle_mass);

        let p = ModelParams::default();
        let m = p.particle_mass;
        let expected = (1.44 + 16.0 * m * p.rho0 * p.potential.l2_norm_sq() / p.lambda).sqrt() / m;
        assert_relative_eq!(compute_vmax(p0, FieldNorms::default(), &p), expected, max_relative = 1e-15);
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(ModelParams::new(1.0, 0.5, -1.0, 0.0, PotentialSpec::gaussian(1.0, 1.0)).is_err());
        assert!(ModelParams::new(0.0, 0.5, 1.0, 0.0, PotentialSpec::gaussian(1.0, 1.0)).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0, -0.1, PotentialSpec::gaussian(1.0, 1.0)).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0, 0.1, PotentialSpec::gaussian(1.0, 0.0)).is_err());
        assert!(ModelParams::new(1.0, 0.5, 1.0, 0.0, PotentialSpec::gaussian(1.0, 1.0)).is_ok());
    }

    #[test]
    fn dispersion_examples() {
        let p = ModelParams::default();
        assert_eq!(dispersion_omega([0.0; 3], &p), 0.0);
        assert_relative_eq!(dispersion_omega([1.0, 0.0, 0.0], &p), 2f64.sqrt(), max_relative = 1e-15);
        let k = 1e-3;
        let w = dispersion_omega([0.0, 0.0, k], &p);
        assert!(((w - p.sound_speed() * k) / (p.sound_speed() * k)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn sound_speed_rescaling(a in 0.01f64..100.0, m in 0.1f64..10.0, l in 0.1f64..10.0) {
            let c1 = units(m, l).sound_speed();
            let c2 = units(a * m, a * l).sound_speed();
            prop_assert!((c1 - c2).abs() <= 1e-14 * c1);
        }

        #[test]
        fn fourier_positive_and_radial(k in prop::array::uniform3(-5.0f64..5.0),
                                       angle in 0.0f64..6.0, w0 in 0.01f64..10.0, s in 0.2f64..3.0) {
            let w = PotentialSpec::gaussian(w0, s);
            let base = potential_fourier(&w, k);
            prop_assert!(base > 0.0);
            // rotate about z, then about x
            let (sa, ca) = angle.sin_cos();
            let r1 = [ca * k[0] - sa * k[1], sa * k[0] + ca * k[1], k[2]];
            let r2 = [r1[0], ca * r1[1] - sa * r1[2], sa * r1[1] + ca * r1[2]];
            prop_assert!((potential_fourier(&w, r2) - base).abs() <= 1e-12 * base.max(1e-300));
        }

        #[test]
        fn vmax_monotone(p in 0.0f64..3.0, g in 0.0f64..2.0, r in 0.0f64..2.0, rho in 0.0f64..0.1,
                         dp in 0.0f64..1.0, dg in 0.0f64..1.0, dr in 0.0f64..1.0, drho in 0.0f64..0.1) {
            let params = ModelParams::default().with_rho0(rho);
            let base = compute_vmax([p, 0.0, 0.0], FieldNorms { grad_sq: g * g, re_sq: r * r }, &params);
            let bumped = [
                compute_vmax([p + dp, 0.0, 0.0], FieldNorms { grad_sq: g * g, re_sq: r * r }, &params),
                compute_vmax([p, 0.0, 0.0], FieldNorms { grad_sq: (g + dg).powi(2), re_sq: r * r }, &params),
                compute_vmax([p, 0.0, 0.0], FieldNorms { grad_sq: g * g, re_sq: (r + dr).powi(2) }, &params),
                compute_vmax([p, 0.0, 0.0], FieldNorms { grad_sq: g * g, re_sq: r * r }, &params.with_rho0(rho + drho)),
            ];
            for b in bumped {
                prop_assert!(b >= base);
            }
        }
    }
}
