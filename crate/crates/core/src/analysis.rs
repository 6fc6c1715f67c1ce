//! Post-processing of trajectories and fields: decay exponents, the
//! majorant `G`, asymptotic limits and distance to the traveling wave.

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{compute_eta, compute_vmax, FieldNorms, ModelParams};
use crate::spectral::{Fft3, FieldState, ModeTable};
use crate::vec3::{self, Vec3};
use serde::Serialize;
use std::collections::BTreeMap;

/// Least-squares power law `log f ≈ intercept + exponent·log(1+t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: [f64; 2],
    /// RMS residual in `log f`.
    pub residual: f64,
    pub points: usize,
    /// Nonpositive or nonfinite samples left out of the fit.
    pub masked: usize,
}

impl DecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        (self.intercept + self.exponent * (1.0 + t).ln()).exp()
    }
}

/// Running maximum of `(1+s)³|f_s|`.
pub fn g_majorant_series(times: &[f64], magnitudes: &[f64]) -> Vec<f64> {
    let mut g = 0.0f64;
    times
        .iter()
        .zip(magnitudes)
        .map(|(t, f)| {
            g = g.max((1.0 + t).powi(3) * f.abs());
            g
        })
        .collect()
}

/// `G(t) = max_{s ≤ t} (1+s)³|Ṗ_s|` at every sample.
pub fn g_majorant(traj: &Trajectory) -> Vec<f64> {
    let mags: Vec<f64> = traj.samples.iter().map(|s| vec3::norm(s.force)).collect();
    g_majorant_series(&traj.times(), &mags)
}

/// Fit the decay exponent of `values` over `window = [lo, hi]`.
pub fn decay_exponent(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut masked = 0;
    for (&t, &v) in times.iter().zip(values) {
        if t < window[0] || t > window[1] {
            continue;
        }
        if v > 0.0 && v.is_finite() {
            xs.push((1.0 + t).ln());
            ys.push(v.ln());
        } else {
            masked += 1;
        }
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} usable points in window [{}, {}], need 5",
            xs.len(),
            window[0],
            window[1]
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("window spans a single time".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        exponent,
        intercept,
        window,
        residual,
        points: xs.len(),
        masked,
    })
}

/// Default fit window `[max(10, T/4), T_wrap]`, clipped to the run.
pub fn default_window(traj: &Trajectory, wrap_horizon: f64) -> [f64; 2] {
    let t_end = traj.last().map_or(0.0, |s| s.time);
    [10f64.max(t_end / 4.0), wrap_horizon.min(t_end)]
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticLimits {
    pub p_inf: Vec3,
    pub x_inf: Vec3,
    /// `∫_T^∞ Ṗ` estimated from the power-law tail.
    pub tail_correction: Vec3,
    pub tail_fit: Option<DecayFit>,
    /// Largest component-wise spread of `Y_t = X_t − tP_∞/M` over the
    /// final quarter of the window, where `X_∞` is averaged.
    pub y_oscillation: f64,
    /// `max (1+t)²|P_t − P_∞|` over the window, the constant of the
    /// `(1+t)⁻²` approach.
    pub approach_constant: f64,
    pub window: [f64; 2],
}

/// Largest RMS residual of the tail fit accepted as a decayed power law.
pub const TAIL_RESIDUAL_LIMIT: f64 = 0.5;

/// Extrapolate `P_∞` and `X_∞` from the samples inside `window`.
pub fn extrapolate_limits(traj: &Trajectory, params: &ModelParams, window: [f64; 2]) -> Result<AsymptoticLimits> {
    let inside: Vec<_> = traj
        .samples
        .iter()
        .filter(|s| s.time >= window[0] && s.time <= window[1])
        .collect();
    let last = *inside.last().ok_or(Error::NoSamples)?;
    let mags: Vec<f64> = inside.iter().map(|s| vec3::norm(s.force)).collect();
    let times: Vec<f64> = inside.iter().map(|s| s.time).collect();
    let (tail_correction, tail_fit) = if mags.iter().all(|&m| m == 0.0) {
        (vec3::ZERO, None)
    } else {
        let fit = decay_exponent(&times, &mags, window)?;
        if fit.exponent >= -1.0 || fit.residual > TAIL_RESIDUAL_LIMIT {
            return Err(Error::TailNotDecayed(format!(
                "force exponent {:.3} with residual {:.3} over [{}, {}]",
                fit.exponent, fit.residual, window[0], window[1]
            )));
        }
        // ∫_T^∞ F(T)((1+t)/(1+T))^p dt = F(T)(1+T)/(−p−1)
        let c = (1.0 + last.time) / (-fit.exponent - 1.0);
        (vec3::scale(last.force, c), Some(fit))
    };
    let p_inf = vec3::add(last.momentum, tail_correction);
    let m = params.particle_mass;
    let final_lo = window[1] - 0.25 * (window[1] - window[0]);
    let ys: Vec<Vec3> = inside
        .iter()
        .filter(|s| s.time >= final_lo)
        .map(|s| vec3::axpy(s.position, -s.time / m, p_inf))
        .collect();
    let x_inf = vec3::scale(ys.iter().fold(vec3::ZERO, |a, &y| vec3::add(a, y)), 1.0 / ys.len() as f64);
    let y_oscillation = (0..3)
        .map(|d| {
            let lo = ys.iter().map(|y| y[d]).fold(f64::INFINITY, f64::min);
            let hi = ys.iter().map(|y| y[d]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    let approach_constant = inside
        .iter()
        .map(|s| (1.0 + s.time).powi(2) * vec3::norm(vec3::sub(s.momentum, p_inf)))
        .fold(0.0, f64::max);
    Ok(AsymptoticLimits {
        p_inf,
        x_inf,
        tail_correction,
        tail_fit,
        y_oscillation,
        approach_constant,
        window,
    })
}

/// `sup_x (1+|x|)⁻¹ |h(x) − h_s(v)(x)|` over the particle-frame grid.
pub fn traveling_wave_distance(h: &FieldState, v_inf: Vec3, table: &ModeTable, fft: &Fft3) -> Result<f64> {
    let steady = table.steady_state(v_inf)?;
    let diff = h.sub(&steady)?;
    let [r1, r2] = diff.to_real_space(fft);
    let grid = h.grid();
    let mut best = 0.0f64;
    for idx in 0..grid.len() {
        let x = grid.centered_position(idx);
        let v = (r1[idx] * r1[idx] + r2[idx] * r2[idx]).sqrt() / (1.0 + vec3::norm(x));
        best = best.max(v);
    }
    Ok(best)
}

/// Options for [`analyze`].
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub wrap_horizon: f64,
    pub window: Option<[f64; 2]>,
    /// Field norms of the initial state for the `v_max` bound.
    pub initial_norms: Option<FieldNorms>,
    /// `(t, distance)` samples of the traveling-wave distance.
    pub tw_distance: Vec<(f64, f64)>,
}

/// Machine-readable summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub eta: f64,
    pub max_speed: f64,
    pub sound_speed: f64,
    pub v_max: Option<f64>,
    pub energy_drift: Option<f64>,
    pub decay_fit: Option<DecayFit>,
    pub g_final: f64,
    /// Relative growth of `G` over the final quarter of the fit window.
    pub g_late_growth: Option<f64>,
    pub limits: Option<AsymptoticLimits>,
    pub tw_distance_series: Vec<(f64, f64)>,
    /// Log-log slope of `(1+t)·distance`.
    pub tw_weighted_slope: Option<f64>,
    pub wrap_horizon: f64,
    pub checks: BTreeMap<String, bool>,
    pub notes: Vec<String>,
}

/// Thresholds behind the report flags.
pub const ENERGY_DRIFT_LIMIT: f64 = 1e-6;
pub const DECAY_EXPONENT_LIMIT: f64 = -2.5;
pub const G_LATE_GROWTH_LIMIT: f64 = 0.01;
pub const TW_SLOPE_LIMIT: f64 = 0.1;
/// In units of the potential width.
pub const Y_OSCILLATION_LIMIT: f64 = 1e-3;

pub fn analyze(traj: &Trajectory, params: &ModelParams, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    if traj.is_empty() {
        return Err(Error::NoSamples);
    }
    let speeds = traj.speeds();
    let cs = params.sound_speed();
    let eta = compute_eta(&speeds, cs)?;
    let max_speed = eta * cs;
    let first = &traj.samples[0];
    let v_max = opts.initial_norms.map(|n| compute_vmax(first.momentum, n, params));
    let energy_drift = traj.energy_drift();
    let window = opts.window.unwrap_or_else(|| default_window(traj, opts.wrap_horizon));
    let mut notes = vec![format!("fit window [{}, {}]", window[0], window[1])];
    let mut checks = BTreeMap::new();

    checks.insert("subsonic".to_string(), max_speed < cs);
    if let Some(vm) = v_max {
        checks.insert("speed_below_vmax".to_string(), max_speed < vm && vm < cs);
    }
    if let Some(d) = energy_drift {
        checks.insert("energy_drift".to_string(), d < ENERGY_DRIFT_LIMIT);
    }

    let times = traj.times();
    let mags: Vec<f64> = traj.samples.iter().map(|s| vec3::norm(s.force)).collect();
    let decay_fit = match decay_exponent(&times, &mags, window) {
        Ok(f) => {
            checks.insert("force_decay".to_string(), f.exponent <= DECAY_EXPONENT_LIMIT);
            Some(f)
        }
        Err(e) => {
            notes.push(format!("decay fit skipped: {e}"));
            None
        }
    };
    let g = g_majorant(traj);
    let g_final = *g.last().unwrap_or(&0.0);
    let g_late_growth = late_growth(&times, &g, window);
    if let Some(x) = g_late_growth {
        checks.insert("g_bounded".to_string(), x <= G_LATE_GROWTH_LIMIT);
    }
    let limits = match extrapolate_limits(traj, params, window) {
        Ok(l) => {
            checks.insert("p_inf_subsonic".to_string(), vec3::norm(l.p_inf) / params.particle_mass < cs);
            let sigma = params.potential.length_scale();
            checks.insert("y_converged".to_string(), l.y_oscillation < Y_OSCILLATION_LIMIT * sigma);
            Some(l)
        }
        Err(e) => {
            notes.push(format!("limits skipped: {e}"));
            None
        }
    };
    let tw_weighted_slope = if opts.tw_distance.is_empty() {
        None
    } else {
        let (t, d): (Vec<f64>, Vec<f64>) = opts.tw_distance.iter().map(|&(t, d)| (t, d * (1.0 + t))).unzip();
        let lo = 5.0f64.min(window[1]);
        match decay_exponent(&t, &d, [lo, window[1]]) {
            Ok(f) => {
                checks.insert("traveling_wave".to_string(), f.exponent <= TW_SLOPE_LIMIT);
                Some(f.exponent)
            }
            Err(e) => {
                notes.push(format!("traveling-wave slope skipped: {e}"));
                None
            }
        }
    };
    Ok(AnalysisReport {
        eta,
        max_speed,
        sound_speed: cs,
        v_max,
        energy_drift,
        decay_fit,
        g_final,
        g_late_growth,
        limits,
        tw_distance_series: opts.tw_distance.clone(),
        tw_weighted_slope,
        wrap_horizon: opts.wrap_horizon,
        checks,
        notes,
    })
}

/// `(G(hi) − G(hi − (hi−lo)/4)) / G(hi)` from the sampled majorant.
pub fn late_growth(times: &[f64], g: &[f64], window: [f64; 2]) -> Option<f64> {
    let at = |t: f64| {
        let i = times.partition_point(|&x| x <= t);
        (i > 0).then(|| g[i - 1])
    };
    let hi = at(window[1])?;
    let mid = at(window[1] - 0.25 * (window[1] - window[0]))?;
    (hi > 0.0).then(|| (hi - mid) / hi)
}
