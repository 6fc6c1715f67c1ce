//! Pointwise evaluation of the memory kernels as spherical Fourier
//! integrals.
//!
//! Every kernel has the form
//!
//! `C ∫ d³k/(2π)³ (−i k_j Ŵ) e^{ik·d} [E₀(τ) Z(k)]₁`
//!
//! with `d` the particle displacement over the elapsed time `τ`, `E₀` the
//! free mode propagator and `Z` a source vector. Splitting
//! `[E₀ Z]₁ = A₊ e^{iωτ} + A₋ e^{−iωτ}`, `A± = (Z₁ ± a Z₂/(iω))/2`, and taking
//! the polar axis along `d` turns the radial integrals into
//! [`oscillatory_integral`]s whose phase only depends on `cos θ`.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::memory::filon::{oscillatory_integral, FilonSettings, PhaseParams};
use crate::memory::quad::gauss_legendre;
use crate::model::ModelParams;
use crate::par::{self, Accumulate};
use crate::vec3::{self, Vec3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);

/// Quadrature settings shared by the kernel evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSettings {
    /// Gauss–Legendre nodes in `cos θ`.
    pub n_theta: usize,
    /// Uniform nodes in the azimuth `α` (reduced automatically when the
    /// integrand is axisymmetric about the polar axis).
    pub n_alpha: usize,
    pub filon: FilonSettings,
}

impl Default for KernelSettings {
    fn default() -> Self {
        KernelSettings {
            n_theta: 64,
            n_alpha: 32,
            filon: FilonSettings::default(),
        }
    }
}

/// Initial field in the particle frame, as an analytic Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Beta0Spectrum {
    Zero,
    /// The co-moving steady state at `velocity`.
    Steady { velocity: Vec3 },
    /// `β₀(x) = (re + i·im) exp(−|x − X₀ − offset|²/(2 width²))`.
    Gaussian {
        re: f64,
        im: f64,
        width: f64,
        offset: Vec3,
    },
}

impl Beta0Spectrum {
    /// `(ĥ₁, ĥ₂)(k)` of the particle-frame initial field.
    pub fn eval(&self, k: Vec3, params: &ModelParams) -> (C64, C64) {
        match *self {
            Beta0Spectrum::Zero => (C64::default(), C64::default()),
            Beta0Spectrum::Steady { velocity } => {
                let k2 = vec3::dot(k, k);
                if k2 == 0.0 {
                    return (C64::default(), C64::default());
                }
                let a = params.kinetic_symbol(k2);
                let vk = vec3::dot(velocity, k);
                let det = a * (a + params.lambda) - vk * vk;
                let s = params.rho0.sqrt() * params.potential.fourier_k2(k2) / det;
                (C64::new(-a * s, 0.0), C64::new(0.0, vk * s))
            }
            Beta0Spectrum::Gaussian {
                re,
                im,
                width,
                offset,
            } => {
                let k2 = vec3::dot(k, k);
                let g = (2.0 * PI * width * width).powf(1.5) * (-0.5 * width * width * k2).exp();
                let ph = C64::from_polar(g, -vec3::dot(k, offset));
                (ph * re, ph * im)
            }
        }
    }

    /// Wavenumber beyond which `|Ŵ ĥ₀|` is below `1e-16` of its scale.
    fn cutoff(&self, params: &ModelParams) -> f64 {
        let sigma = params.potential.length_scale();
        match *self {
            Beta0Spectrum::Zero | Beta0Spectrum::Steady { .. } => squared_potential_cutoff(params),
            Beta0Spectrum::Gaussian { width, .. } => {
                1.2 * (2.0 * 16.0 * 10f64.ln() / (sigma * sigma + width * width)).sqrt()
            }
        }
    }

    /// Direction about which the initial field is symmetric, if any.
    fn axis(&self) -> Option<Vec3> {
        match *self {
            Beta0Spectrum::Zero => Some(vec3::ZERO),
            Beta0Spectrum::Steady { velocity } => Some(velocity),
            Beta0Spectrum::Gaussian { offset, .. } => Some(offset),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Beta0Spectrum::Zero => true,
            Beta0Spectrum::Gaussian { re, im, .. } => re == 0.0 && im == 0.0,
            Beta0Spectrum::Steady { .. } => false,
        }
    }
}

/// Wavenumber where `Ŵ²` drops below `1e-16` of its peak, with a margin
/// for the polynomial prefactors.
pub fn squared_potential_cutoff(params: &ModelParams) -> f64 {
    1.2 * params.potential.spectral_cutoff(1e-8)
}

/// Particle path feeding the kernels.
pub trait PathView {
    fn position(&self, t: f64) -> Vec3;
    fn momentum(&self, t: f64) -> Vec3;
}

/// Uniform motion `X_t = X₀ + t P₀/M`.
#[derive(Debug, Clone, Copy)]
pub struct BallisticPath {
    pub position: Vec3,
    pub momentum: Vec3,
    pub mass: f64,
}

impl PathView for BallisticPath {
    fn position(&self, t: f64) -> Vec3 {
        vec3::axpy(self.position, t / self.mass, self.momentum)
    }
    fn momentum(&self, _t: f64) -> Vec3 {
        self.momentum
    }
}

/// Cubic Hermite interpolation of a recorded trajectory, using `P/M` and
/// `Ṗ` as the derivatives of `X` and `P`.
impl PathView for Trajectory {
    fn position(&self, t: f64) -> Vec3 {
        let m = self.particle_mass;
        hermite(self, t, |s| (s.position, vec3::scale(s.momentum, 1.0 / m)))
    }
    fn momentum(&self, t: f64) -> Vec3 {
        hermite(self, t, |s| (s.momentum, s.force))
    }
}

fn hermite<F>(traj: &Trajectory, t: f64, pick: F) -> Vec3
where
    F: Fn(&crate::integrator::Sample) -> (Vec3, Vec3),
{
    let s = &traj.samples;
    assert!(!s.is_empty(), "empty trajectory");
    if t <= s[0].time {
        return pick(&s[0]).0;
    }
    if t >= s[s.len() - 1].time {
        return pick(&s[s.len() - 1]).0;
    }
    let i = s.partition_point(|x| x.time <= t) - 1;
    let (a, b) = (&s[i], &s[i + 1]);
    let h = b.time - a.time;
    let x = (t - a.time) / h;
    let (ya, da) = pick(a);
    let (yb, db) = pick(b);
    let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
    let h10 = x * (1.0 - x) * (1.0 - x);
    let h01 = x * x * (3.0 - 2.0 * x);
    let h11 = x * x * (x - 1.0);
    std::array::from_fn(|d| h00 * ya[d] + h10 * h * da[d] + h01 * yb[d] + h11 * h * db[d])
}

/// Kernel value with quadrature diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct KernelValue<T> {
    pub value: T,
    /// Smallest recipe denominator `φ'/T` met at any node (`+∞` at `τ = 0`
    /// is never reported; the plain integral also checks it).
    pub min_denominator: f64,
    pub evaluations: usize,
}

/// Radial integration layout.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RadialForm {
    /// `ρ ∈ [0, ρ_max]` with both frequency branches.
    HalfLine,
    /// `ρ ∈ [−ρ_max, ρ_max]` with the `e^{+iωτ}` branch and odd `ω(ρ)`.
    ExtendedLine,
}

struct Geometry {
    frame: [Vec3; 3],
    time: f64,
    speed_ratio: f64,
    rho_max: f64,
    n_alpha: usize,
}

/// Integrate `Re ∫ d³k/(2π)³ e^{ik·d} [E₀(τ) Y_c(k)]₁` for `N` outputs,
/// where `source(k)` returns the observed source pairs `Y_c = P_c Z_c`.
fn spherical_integral<const N: usize, S>(
    params: &ModelParams,
    settings: &KernelSettings,
    geom: &Geometry,
    form: RadialForm,
    source: S,
) -> Result<KernelValue<[f64; N]>>
where
    S: Fn(Vec3) -> [[C64; 2]; N] + Sync,
    [C64; N]: Accumulate,
    [f64; N]: Accumulate,
{
    let k0 = params.healing_wavenumber();
    let lambda = params.lambda;
    let measure = k0.powi(3) / (2.0 * PI).powi(3);
    let (ct, wt) = gauss_legendre(settings.n_theta);
    let n_alpha = geom.n_alpha.max(1);
    let alphas: Vec<(f64, f64)> = (0..n_alpha)
        .map(|l| (2.0 * PI * l as f64 / n_alpha as f64).sin_cos())
        .collect();
    let w_alpha = 2.0 * PI / n_alpha as f64;
    let [e1, e2, e3] = geom.frame;
    let nodes: Vec<usize> = (0..ct.len()).collect();

    let per_theta = par::map_slice(&nodes, |&i| -> Result<([f64; N], f64, usize)> {
        let c = ct[i];
        let s = (1.0 - c * c).max(0.0).sqrt();
        let dirs: Vec<Vec3> = alphas
            .iter()
            .map(|&(sa, ca)| {
                let mut n = vec3::scale(e3, c);
                n = vec3::axpy(n, s * ca, e1);
                vec3::axpy(n, s * sa, e2)
            })
            .collect();
        // A₊ (sign +1) or conj(A₋) (sign −1), summed over α
        let branch = |rho: f64, sign: f64| -> [C64; N] {
            let mut acc = [C64::default(); N];
            if rho == 0.0 {
                return acc;
            }
            let omega = lambda * rho * (1.0 + rho * rho).sqrt();
            for n in &dirs {
                let k = vec3::scale(*n, k0 * rho);
                let a = params.kinetic_symbol(vec3::dot(k, k));
                let ratio = a / omega;
                let y = source(k);
                for (o, [y1, y2]) in acc.iter_mut().zip(y) {
                    // A± = (Y₁ ∓ i (a/ω) Y₂)/2
                    let amp = 0.5 * (y1 - sign * I * ratio * y2);
                    *o += if sign > 0.0 { amp } else { amp.conj() };
                }
            }
            let w = w_alpha * measure * rho * rho;
            acc.map(|z| z * w)
        };
        let mut total = [0.0; N];
        let mut min_den = f64::INFINITY;
        let mut evals = 0;
        let mu = geom.speed_ratio * c;
        let runs: &[(f64, f64, f64, f64)] = match form {
            // (sign, drift, lo, hi)
            RadialForm::HalfLine => &[(1.0, -mu, 0.0, geom.rho_max), (-1.0, mu, 0.0, geom.rho_max)],
            RadialForm::ExtendedLine => &[(1.0, -mu, -geom.rho_max, geom.rho_max)],
        };
        for &(sign, drift, lo, hi) in runs {
            let phase = PhaseParams::new(geom.time, drift);
            let out = oscillatory_integral(|rho| branch(rho, sign), lo, hi, phase, &settings.filon)?;
            for (t, z) in total.iter_mut().zip(out.value) {
                *t += wt[i] * z.re;
            }
            min_den = min_den.min(out.min_denominator);
            evals += out.evaluations * n_alpha;
        }
        Ok((total, min_den, evals))
    });

    let mut parts = Vec::with_capacity(per_theta.len());
    let mut min_den = f64::INFINITY;
    let mut evaluations = 0;
    for r in per_theta {
        let (v, d, e) = r?;
        parts.push(v);
        min_den = min_den.min(d);
        evaluations += e;
    }
    Ok(KernelValue {
        value: par::pairwise(&parts),
        min_denominator: min_den,
        evaluations,
    })
}

fn geometry(
    params: &ModelParams,
    settings: &KernelSettings,
    tau: f64,
    displacement: Vec3,
    symmetry: &[Option<Vec3>],
    rho_max: f64,
) -> Result<Geometry> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("elapsed time must be finite and >= 0, got {tau}"),
        });
    }
    let dist = vec3::norm(displacement);
    let cs = params.sound_speed();
    let speed_ratio = if tau > 0.0 { dist / (cs * tau) } else { 0.0 };
    if tau == 0.0 && dist > 0.0 {
        return Err(Error::InvalidParameter {
            name: "displacement",
            reason: "nonzero displacement at zero elapsed time".into(),
        });
    }
    if speed_ratio >= 1.0 {
        return Err(Error::DenominatorNotPositive {
            rho: 0.0,
            drift: speed_ratio,
            value: 1.0 - speed_ratio,
        });
    }
    // polar axis along the displacement, else along the first symmetry axis
    let axis = if dist > 0.0 {
        displacement
    } else {
        symmetry
            .iter()
            .flatten()
            .copied()
            .find(|a| vec3::norm(*a) > 0.0)
            .unwrap_or([0.0, 0.0, 1.0])
    };
    let frame = vec3::frame_along(axis);
    let axisymmetric = symmetry
        .iter()
        .all(|s| matches!(s, Some(v) if vec3::collinear(*v, frame[2], 1e-14)));
    Ok(Geometry {
        frame,
        time: params.lambda * tau,
        speed_ratio,
        rho_max: rho_max / params.healing_wavenumber(),
        n_alpha: if axisymmetric { settings.n_alpha.min(4) } else { settings.n_alpha },
    })
}

/// `P_j = −i k_j Ŵ(k)`
#[inline]
fn observe(k: Vec3, w: f64) -> [C64; 3] {
    k.map(|kj| C64::new(0.0, -kj * w))
}

/// `D₁(t) = 2√ρ₀ ⟨(∇W, 0)ᵀ, U(t,0) h₀⟩`: force exerted by the freely
/// evolving initial field.
pub fn kernel_d1<P: PathView + ?Sized>(
    t: f64,
    path: &P,
    beta0: &Beta0Spectrum,
    params: &ModelParams,
    settings: &KernelSettings,
) -> Result<KernelValue<Vec3>> {
    if beta0.is_zero() {
        return Ok(KernelValue {
            value: vec3::ZERO,
            min_denominator: f64::INFINITY,
            evaluations: 0,
        });
    }
    let d = vec3::sub(path.position(t), path.position(0.0));
    let geom = geometry(params, settings, t, d, &[beta0.axis()], beta0.cutoff(params))?;
    let out = spherical_integral::<3, _>(params, settings, &geom, RadialForm::HalfLine, |k| {
        let w = params.potential.fourier_k2(vec3::dot(k, k));
        let (z1, z2) = beta0.eval(k, params);
        observe(k, w).map(|p| [p * z1, p * z2])
    })?;
    Ok(scaled(out, params.force_coupling()))
}

fn d2_source(params: &ModelParams, v0: Vec3) -> impl Fn(Vec3) -> [[C64; 2]; 3] + Sync + '_ {
    move |k| {
        let k2 = vec3::dot(k, k);
        let w = params.potential.fourier_k2(k2);
        let a = params.kinetic_symbol(k2);
        let vk = vec3::dot(v0, k);
        let det = a * (a + params.lambda) - vk * vk;
        let z1 = C64::new(-a * w / det, 0.0);
        let z2 = C64::new(0.0, vk * w / det);
        observe(k, w).map(|p| [p * z1, p * z2])
    }
}

fn kernel_d2_form<P: PathView + ?Sized>(
    t: f64,
    path: &P,
    params: &ModelParams,
    settings: &KernelSettings,
    form: RadialForm,
) -> Result<KernelValue<Vec3>> {
    let v0 = params.velocity(path.momentum(0.0));
    if vec3::norm(v0) >= params.sound_speed() {
        return Err(Error::Supersonic {
            speed: vec3::norm(v0),
            sound_speed: params.sound_speed(),
        });
    }
    let d = vec3::sub(path.position(t), path.position(0.0));
    let geom = geometry(params, settings, t, d, &[Some(v0)], squared_potential_cutoff(params))?;
    let out = spherical_integral::<3, _>(params, settings, &geom, form, d2_source(params, v0))?;
    Ok(scaled(out, -2.0 * params.rho0))
}

/// `D₂(t) = −2ρ₀ ⟨(∇W, 0)ᵀ, U(t,0) H(0)⁻¹ (0, W)ᵀ⟩`: relaxation of the
/// initial steady-state mismatch.
pub fn kernel_d2<P: PathView + ?Sized>(
    t: f64,
    path: &P,
    params: &ModelParams,
    settings: &KernelSettings,
) -> Result<KernelValue<Vec3>> {
    kernel_d2_form(t, path, params, settings, RadialForm::HalfLine)
}

/// [`kernel_d2`] evaluated on the whole real line in `ρ` with a single
/// frequency branch; an independent quadrature of the same quantity.
pub fn kernel_d2_extended<P: PathView + ?Sized>(
    t: f64,
    path: &P,
    params: &ModelParams,
    settings: &KernelSettings,
) -> Result<KernelValue<Vec3>> {
    kernel_d2_form(t, path, params, settings, RadialForm::ExtendedLine)
}

/// `K_jl(t,s) = ⟨(∂_j W, 0)ᵀ, U(t,s) H(s)⁻² (0, ∂_l W)ᵀ⟩`, row-major.
pub fn kernel_k<P: PathView + ?Sized>(
    t: f64,
    s: f64,
    path: &P,
    params: &ModelParams,
    settings: &KernelSettings,
) -> Result<KernelValue<[[f64; 3]; 3]>> {
    if !(t >= s) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("need s <= t, got s = {s}, t = {t}"),
        });
    }
    let vs = params.velocity(path.momentum(s));
    if vec3::norm(vs) >= params.sound_speed() {
        return Err(Error::Supersonic {
            speed: vec3::norm(vs),
            sound_speed: params.sound_speed(),
        });
    }
    let d = vec3::sub(path.position(t), path.position(s));
    let geom = geometry(params, settings, t - s, d, &[Some(vs)], squared_potential_cutoff(params))?;
    let out = spherical_integral::<9, _>(params, settings, &geom, RadialForm::HalfLine, |k| {
        let k2 = vec3::dot(k, k);
        let w = params.potential.fourier_k2(k2);
        let a = params.kinetic_symbol(k2);
        let b = a + params.lambda;
        let vk = vec3::dot(vs, k);
        let det = a * b - vk * vk;
        let det2 = det * det;
        let p = observe(k, w);
        std::array::from_fn(|c| {
            let (j, l) = (c / 3, c % 3);
            let z1 = C64::new(2.0 * a * vk * k[l] * w / det2, 0.0);
            let z2 = C64::new(0.0, -k[l] * (a * b + vk * vk) * w / det2);
            [p[j] * z1, p[j] * z2]
        })
    })?;
    let v = out.value;
    Ok(KernelValue {
        value: [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]],
        min_denominator: out.min_denominator,
        evaluations: out.evaluations,
    })
}

fn scaled(v: KernelValue<[f64; 3]>, c: f64) -> KernelValue<Vec3> {
    KernelValue {
        value: vec3::scale(v.value, c),
        min_denominator: v.min_denominator,
        evaluations: v.evaluations,
    }
}
