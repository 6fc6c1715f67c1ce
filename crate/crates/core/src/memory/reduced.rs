//! Self-consistent reduced particle dynamics `Ṗ = D₁ + D₂ + D₃`.
//!
//! The field is eliminated: writing `h_t = h_s(v_t) + g_t` with `h_s` the
//! co-moving steady state, the force becomes
//!
//! `F(t) = κ⟨∇W, U(t,0)(h₀ − h_s(v₀))⟩ − (κ/M)∫₀ᵗ ⟨∇W, U(t,s) ∂_v h_s(v_s)·q_s⟩ ds`
//!
//! with `q_s = Ṗ_s`. The wavevector integral uses one fixed product rule
//! (composite Gauss–Legendre in `ρ`, Gauss–Legendre in `cos θ`, uniform in
//! `α`) sized for the whole run, so the history integral factorizes per
//! node and branch: `e^{i(k·X_t ± ωt)} ∫ e^{−i(k·X_s ± ωs)} A±(s) ds`.
//! Each time step then costs one pass over the nodes.

use crate::error::{Error, Result};
use crate::integrator::{ParticleState, Sample, Trajectory};
use crate::memory::kernels::{squared_potential_cutoff, Beta0Spectrum};
use crate::memory::quad::gauss_legendre;
use crate::model::ModelParams;
use crate::par;
use crate::vec3::{self, Vec3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const PANEL_NODES: usize = 8;
const CHUNK: usize = 4096;

/// Which history enters the memory term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HistoryWeighting {
    /// `Ṗ_s`, as obtained from the Duhamel expansion.
    #[default]
    ForceHistory,
    /// `P_s` in place of `Ṗ_s`; kept for comparison only.
    MomentumHistory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSettings {
    pub dt: f64,
    pub t_max: f64,
    pub sample_every: usize,
    pub history: HistoryWeighting,
    /// Radial cutoff in wavenumber units; defaults to where `Ŵ²` is
    /// negligible.
    pub k_max: Option<f64>,
    /// Largest phase change across one radial panel.
    pub panel_phase: f64,
    /// Node counts in `cos θ` and `α`; sized from the largest phase when
    /// unset.
    pub n_theta: Option<usize>,
    pub n_alpha: Option<usize>,
    pub fixed_point_tol: f64,
    pub max_iterations: usize,
}

impl Default for ReducedSettings {
    fn default() -> Self {
        ReducedSettings {
            dt: 0.02,
            t_max: 20.0,
            sample_every: 1,
            history: HistoryWeighting::ForceHistory,
            k_max: None,
            panel_phase: 5.0,
            n_theta: None,
            n_alpha: None,
            fixed_point_tol: 1e-10,
            max_iterations: 50,
        }
    }
}

impl ReducedSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be finite and > 0, got {}", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return bad("t_max", format!("must be finite and >= 0, got {}", self.t_max));
        }
        if self.sample_every == 0 {
            return bad("sample_every", "must be >= 1".into());
        }
        if !(self.panel_phase > 0.0 && self.panel_phase <= 6.0) {
            return bad("panel_phase", format!("must lie in (0, 6], got {}", self.panel_phase));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_iterations == 0 {
            return bad("fixed_point_tol", "tolerance and iteration cap must be positive".into());
        }
        Ok(())
    }
}

/// Reduced run output with quadrature and fixed-point diagnostics.
#[derive(Debug, Clone)]
pub struct ReducedRun {
    pub trajectory: Trajectory,
    pub nodes: usize,
    pub n_theta: usize,
    pub n_alpha: usize,
    pub axisymmetric: bool,
    /// Most fixed-point iterations used by any step.
    pub max_iterations: usize,
    /// Largest observed ratio of successive fixed-point changes.
    pub max_contraction: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Node {
    k: Vec3,
    /// quadrature weight times measure times `κ Ŵ`
    weight: f64,
    w_hat: f64,
    a: f64,
    b: f64,
    omega: f64,
    /// constant coefficients from the initial mismatch, per branch
    coef: [C64; 2],
    /// accumulated history integrals
    hist: [C64; 2],
    /// `e^{−iθ±}` at the last accepted time
    phasor: [C64; 2],
    /// `A±` at the last accepted time
    amp: [f64; 2],
    /// trial step: history without the new endpoint, new phasors and the
    /// endpoint factor `e^{iΔ} I₁(Δ)`
    trial_hist: [C64; 2],
    trial_phasor: [C64; 2],
    end: [C64; 2],
}

/// `∫₀¹ e^{cx} dx` and `∫₀¹ x e^{cx} dx` for `c = −iΔ`.
fn linear_moments(delta: f64) -> (C64, C64) {
    let c = C64::new(0.0, -delta);
    if delta.abs() < 1e-3 {
        let c2 = c * c;
        let c3 = c2 * c;
        let i0 = 1.0 + c / 2.0 + c2 / 6.0 + c3 / 24.0 + c2 * c2 / 120.0;
        let i1 = 0.5 + c / 3.0 + c2 / 8.0 + c3 / 30.0 + c2 * c2 / 144.0;
        (i0, i1)
    } else {
        let e = c.exp();
        let i0 = (e - 1.0) / c;
        let i1 = e / c - (e - 1.0) / (c * c);
        (i0, i1)
    }
}

impl Node {
    /// `A±` of `∂_v h_s(v)·q`, both real.
    fn history_amp(&self, v: Vec3, q: Vec3, sqrt_rho0: f64) -> [f64; 2] {
        let vk = vec3::dot(v, self.k);
        let kq = vec3::dot(self.k, q);
        let det = self.a * self.b - vk * vk;
        let s = sqrt_rho0 * kq * self.w_hat / (det * det);
        let y1 = -2.0 * self.a * vk * s;
        let y2 = (self.a * self.b + vk * vk) * s;
        let r = self.a / self.omega;
        [0.5 * (y1 + r * y2), 0.5 * (y1 - r * y2)]
    }
}

struct Layout {
    frame: [Vec3; 3],
    axisymmetric: bool,
}

fn layout(initial: &ParticleState, beta0: &Beta0Spectrum) -> Layout {
    let mut dirs: Vec<Vec3> = Vec::new();
    if vec3::norm(initial.momentum) > 0.0 {
        dirs.push(initial.momentum);
    }
    match *beta0 {
        Beta0Spectrum::Gaussian { offset, .. } if !beta0.is_zero() && vec3::norm(offset) > 0.0 => {
            dirs.push(offset)
        }
        Beta0Spectrum::Steady { velocity } if vec3::norm(velocity) > 0.0 => dirs.push(velocity),
        _ => {}
    }
    let axis = dirs.first().copied().unwrap_or([0.0, 0.0, 1.0]);
    let axisymmetric = dirs.iter().all(|d| vec3::collinear(*d, axis, 1e-12));
    Layout {
        frame: vec3::frame_along(axis),
        axisymmetric,
    }
}

/// Composite Gauss–Legendre nodes in `ρ` whose panels each span at most
/// `panel_phase` radians of `ωT + k·D`.
fn radial_rule(params: &ModelParams, rho_max: f64, t_max: f64, d_max: f64, panel_phase: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(PANEL_NODES);
    let k0 = params.healing_wavenumber();
    let rate = |r: f64| params.lambda * t_max * (1.0 + 2.0 * r * r) / (1.0 + r * r).sqrt() + k0 * d_max;
    let mut out = Vec::new();
    let mut lo = 0.0;
    while lo < rho_max {
        let guess = (lo + 0.25).min(rho_max);
        let h = (guess - lo).min(panel_phase / rate(guess));
        let hi = if rho_max - (lo + h) < 1e-12 { rho_max } else { lo + h };
        let (c, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(&w) {
            out.push((c + half * xi, half * wi));
        }
        lo = hi;
    }
    out
}

/// Node count for Gauss–Legendre in `cos θ` or trapezoid in `α` to
/// resolve `e^{i a cos}`.
fn angular_nodes(phase: f64) -> usize {
    (0.7 * phase).ceil() as usize + 24
}

/// Integrate the reduced dynamics from `initial` with initial field `β₀`.
pub fn solve_reduced(
    initial: &ParticleState,
    beta0: &Beta0Spectrum,
    params: &ModelParams,
    settings: &ReducedSettings,
) -> Result<ReducedRun> {
    params.validate()?;
    settings.validate()?;
    let cs = params.sound_speed();
    let mass = params.particle_mass;
    let v0 = params.velocity(initial.momentum);
    if vec3::norm(v0) >= cs {
        return Err(Error::Supersonic {
            speed: vec3::norm(v0),
            sound_speed: cs,
        });
    }
    let sqrt_rho0 = params.rho0.sqrt();
    let kappa = params.force_coupling();
    let k0 = params.healing_wavenumber();
    let lay = layout(initial, beta0);
    let k_max = settings.k_max.unwrap_or_else(|| squared_potential_cutoff(params));
    let rho_max = k_max / k0;
    let d_max = cs * settings.t_max;
    let radial = radial_rule(params, rho_max, settings.t_max, d_max, settings.panel_phase);
    let phase = k_max * d_max;
    let n_theta = settings.n_theta.unwrap_or_else(|| angular_nodes(phase)).max(2);
    let n_alpha = if lay.axisymmetric {
        1
    } else {
        settings.n_alpha.unwrap_or_else(|| angular_nodes(phase)).max(4)
    };
    let (ct, wt) = gauss_legendre(n_theta);
    let measure = k0.powi(3) / (2.0 * PI).powi(3);
    let w_alpha = 2.0 * PI / n_alpha as f64;
    let [e1, e2, e3] = lay.frame;

    let mut nodes = Vec::with_capacity(radial.len() * n_theta * n_alpha);
    for &(rho, wr) in &radial {
        for (&c, &wc) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for l in 0..n_alpha {
                let (sa, ca) = (2.0 * PI * l as f64 / n_alpha as f64).sin_cos();
                let n = vec3::axpy(vec3::axpy(vec3::scale(e3, c), s * ca, e1), s * sa, e2);
                let k = vec3::scale(n, k0 * rho);
                let k2 = vec3::dot(k, k);
                let w_hat = params.potential.fourier_k2(k2);
                let a = params.kinetic_symbol(k2);
                nodes.push(Node {
                    k,
                    weight: kappa * wr * wc * w_alpha * measure * rho * rho * w_hat,
                    w_hat,
                    a,
                    b: a + params.lambda,
                    omega: params.omega_k2(k2),
                    ..Node::default()
                });
            }
        }
    }

    // constant coefficients from g₀ = h₀ − h_s(v₀), phased to X₀
    let x0 = initial.position;
    let p0 = initial.momentum;
    let steady = Beta0Spectrum::Steady { velocity: v0 };
    par::for_each_chunk(&mut nodes, CHUNK, |_, chunk| {
        for nd in chunk.iter_mut() {
            let (h1, h2) = beta0.eval(nd.k, params);
            let (s1, s2) = steady.eval(nd.k, params);
            let (g1, g2) = (h1 - s1, h2 - s2);
            let r = nd.a / nd.omega;
            let i = C64::new(0.0, 1.0);
            let shift = C64::from_polar(1.0, -vec3::dot(nd.k, x0));
            nd.coef = [0.5 * (g1 - i * r * g2) * shift, 0.5 * (g1 + i * r * g2) * shift];
            // branch phases are tracked relative to the start time
            nd.phasor = [shift; 2];
        }
    });

    let project = |f: Vec3| if lay.axisymmetric { vec3::scale(e3, vec3::dot(f, e3)) } else { f };
    let force_of = |nodes: &[Node]| -> Vec3 {
        let f = par::reduce_chunks(nodes.len(), CHUNK, |r| {
            let mut acc = [0.0; 3];
            for nd in &nodes[r] {
                // Re[(−i k_j) z] = k_j Im z
                let z: C64 = (0..2).map(|b| nd.phasor[b].conj() * nd.coef[b]).sum();
                for j in 0..3 {
                    acc[j] += nd.weight * nd.k[j] * z.im;
                }
            }
            acc
        });
        project(f)
    };

    let q_of = |force: Vec3, momentum: Vec3| match settings.history {
        HistoryWeighting::ForceHistory => force,
        HistoryWeighting::MomentumHistory => momentum,
    };
    let mut force = force_of(&nodes);
    {
        let q = q_of(force, p0);
        for nd in nodes.iter_mut() {
            nd.amp = nd.history_amp(v0, q, sqrt_rho0);
        }
    }

    let mut traj = Trajectory::new(params);
    let mut state = *initial;
    let record = |traj: &mut Trajectory, st: &ParticleState, f: Vec3| {
        traj.push(Sample {
            time: st.time,
            position: st.position,
            momentum: st.momentum,
            force: f,
            hamiltonian: f64::NAN,
            wrapped: false,
        })
    };
    record(&mut traj, &state, force)?;

    let dt = settings.dt;
    let steps = (settings.t_max / dt).round() as usize;
    let mut max_iterations = 0;
    let mut max_contraction: f64 = 0.0;
    for n in 1..=steps {
        let t_b = initial.time + n as f64 * dt;
        let x_a = state.position;
        let x_b = vec3::axpy(vec3::axpy(x_a, dt / mass, state.momentum), 0.5 * dt * dt / mass, force);
        let shift = vec3::sub(x_b, x_a);

        // base force: all history except the new endpoint
        let base = project(par::reduce_chunks_mut(&mut nodes, CHUNK, |_, chunk| {
            let mut acc = [0.0; 3];
            for nd in chunk.iter_mut() {
                let kd = vec3::dot(nd.k, shift);
                let mut z = C64::default();
                for (br, sign) in [(0, 1.0), (1, -1.0)] {
                    let delta = kd + sign * nd.omega * dt;
                    let step = C64::from_polar(1.0, -delta);
                    let pb = nd.phasor[br] * step;
                    let (i0, i1) = linear_moments(delta);
                    let th = nd.hist[br] + dt * nd.phasor[br] * (i0 - i1) * nd.amp[br];
                    nd.trial_hist[br] = th;
                    nd.trial_phasor[br] = pb;
                    nd.end[br] = step.conj() * i1;
                    z += pb.conj() * (nd.coef[br] - th / mass);
                }
                for j in 0..3 {
                    acc[j] += nd.weight * nd.k[j] * z.im;
                }
            }
            acc
        }));

        // endpoint term: depends on the new velocity and force
        let endpoint = |v: Vec3, q: Vec3| -> Vec3 {
            project(par::reduce_chunks(nodes.len(), CHUNK, |r| {
                let mut acc = [0.0; 3];
                for nd in &nodes[r] {
                    let amp = nd.history_amp(v, q, sqrt_rho0);
                    let z = -(dt / mass) * (nd.end[0] * amp[0] + nd.end[1] * amp[1]);
                    for j in 0..3 {
                        acc[j] += nd.weight * nd.k[j] * z.im;
                    }
                }
                acc
            }))
        };

        let mut f_b = force;
        let mut last_change = f64::INFINITY;
        let mut iterations = 0;
        let (p_b, v_b) = loop {
            iterations += 1;
            let p_b = vec3::axpy(state.momentum, 0.5 * dt, vec3::add(force, f_b));
            let v_b = params.velocity(p_b);
            if vec3::norm(v_b) >= cs {
                return Err(Error::LeftSubsonic {
                    time: t_b,
                    speed: vec3::norm(v_b),
                    sound_speed: cs,
                    position: x_b,
                    momentum: p_b,
                });
            }
            let next = vec3::add(base, endpoint(v_b, q_of(f_b, p_b)));
            let change = vec3::norm(vec3::sub(next, f_b));
            if iterations > 1 && last_change > 0.0 && last_change.is_finite() {
                max_contraction = max_contraction.max(change / last_change);
            }
            f_b = next;
            if change <= settings.fixed_point_tol * vec3::norm(f_b).max(1.0) {
                let p_b = vec3::axpy(state.momentum, 0.5 * dt, vec3::add(force, f_b));
                break (p_b, params.velocity(p_b));
            }
            if iterations >= settings.max_iterations {
                return Err(Error::FixedPointNonConvergence {
                    time: t_b,
                    iterations,
                    change,
                    contraction: if last_change.is_finite() { change / last_change } else { f64::NAN },
                });
            }
            last_change = change;
        };
        max_iterations = max_iterations.max(iterations);

        let q_b = q_of(f_b, p_b);
        par::for_each_chunk(&mut nodes, CHUNK, |_, chunk| {
            for nd in chunk.iter_mut() {
                let amp = nd.history_amp(v_b, q_b, sqrt_rho0);
                for br in 0..2 {
                    // endpoint weight relative to the new phasor is I₁ e^{iΔ} · e^{−iθ_b}
                    nd.hist[br] = nd.trial_hist[br] + dt * nd.trial_phasor[br] * nd.end[br] * amp[br];
                    nd.phasor[br] = nd.trial_phasor[br];
                }
                nd.amp = amp;
            }
        });
        state = ParticleState {
            position: x_b,
            momentum: p_b,
            time: t_b,
        };
        force = f_b;
        if n % settings.sample_every == 0 || n == steps {
            record(&mut traj, &state, force)?;
        }
    }

    Ok(ReducedRun {
        trajectory: traj,
        nodes: nodes.len(),
        n_theta,
        n_alpha,
        axisymmetric: lay.axisymmetric,
        max_iterations,
        max_contraction,
    })
}
