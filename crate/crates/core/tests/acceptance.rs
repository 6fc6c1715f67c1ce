//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.
//!
//! Runs several 64³ and 128³ simulations; expect several minutes on one
//! core with `--release`-level optimisation (the test profile uses
//! `opt-level = 3`).

mod common;

use common::{richardson, SpectralOracle};
use num_complex::Complex64 as C64;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use tracer_core::analysis::{self, G_LATE_GROWTH_LIMIT};
use tracer_core::integrator::{run_direct, RunSettings};
use tracer_core::memory::{
    kernel_d1, kernel_d2, kernel_d2_extended, kernel_k, solve_reduced, BallisticPath, Beta0Spectrum,
    KernelSettings, PathView, ReducedSettings,
};
use tracer_core::model::{compute_vmax, FieldNorms};
use tracer_core::spectral::{io as snapshot, Fft3, ModeTable, WrapCutoff};
use tracer_core::vec3::{self, Vec3};
use tracer_core::{FieldState, ModelParams, ParticleState, SpectralGrid, Trajectory};

const SPEED_RATIO: f64 = 0.5;
/// Criterion 1
const DRIFT_LIMIT: f64 = 1e-6;
const DRIFT_RATIO_RANGE: [f64; 2] = [3.0, 5.0];

type Stage = fn(&mut Vec<Line>);
/// Criterion 2
const SPEED_MARGIN: f64 = 1e-3;
/// Criterion 3
const DECAY_LIMIT: f64 = -2.5;
const WINDOW_START: f64 = 10.0;
/// Criterion 4, in units of σ
const Y_LIMIT: f64 = 1e-3;
/// Criterion 5
const ORACLE_TOL: f64 = 1e-6;
/// Criterion 6
const REDUCED_TOL: f64 = 1e-4;
const REDUCED_T: f64 = 20.0;
/// Criterion 7
const TW_START: f64 = 5.0;
const TW_SLOPE_LIMIT: f64 = 0.1;
const SNAPSHOT_EVERY: f64 = 0.5;
/// Criterion 8
const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Criterion 9
const FORMS_TOL: f64 = 1e-9;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn params() -> ModelParams {
    ModelParams::default()
}

fn p0(p: &ModelParams) -> Vec3 {
    [0.0, 0.0, SPEED_RATIO * p.sound_speed() * p.particle_mass]
}

fn table(n: usize, side: f64, p: &ModelParams) -> ModeTable {
    ModeTable::new(Arc::new(SpectralGrid::cubic(n, side).unwrap()), p).unwrap()
}

/// Direct run from `β₀ = 0`; saves snapshots in `[snap_from, snap_to]`
/// when `snap_dir` is given.
fn direct(
    n: usize,
    side: f64,
    dt: f64,
    t_max: f64,
    snaps: Option<(&Path, f64, f64)>,
) -> (Trajectory, f64, Vec<(PathBuf, f64)>) {
    let p = params();
    let tab = table(n, side, &p);
    let horizon = WrapCutoff::Potential.horizon(tab.grid(), &p);
    let field = FieldState::zeros(tab.grid().clone());
    let every = (0.1 / dt).round() as usize;
    let settings = RunSettings {
        dt,
        t_max,
        sample_every: every,
        wrap_horizon: horizon,
    };
    let mut files = Vec::new();
    let mut next = 0usize;
    let traj = run_direct(tab, ParticleState::new(vec3::ZERO, p0(&p)), field, settings, |s, f| {
        if let Some((dir, from, to)) = snaps {
            let k = (s.time / SNAPSHOT_EVERY).round() as usize;
            let on_grid = (s.time - k as f64 * SNAPSHOT_EVERY).abs() < 1e-9;
            if on_grid && k >= next && s.time >= from - 1e-9 && s.time <= to + 1e-9 {
                let path = dir.join(format!("snap_{k:04}.btf"));
                snapshot::save(&path, f, &p)?;
                files.push((path, s.time));
                next = k + 1;
            }
        }
        Ok(())
    })
    .unwrap();
    (traj, horizon, files)
}

fn criterion_1_2(lines: &mut Vec<Line>) {
    let p = params();
    let (coarse, _, _) = direct(64, 64.0, 0.01, 30.0, None);
    let (fine, _, _) = direct(64, 64.0, 0.005, 30.0, None);
    let d1 = coarse.energy_drift().unwrap();
    let d2 = fine.energy_drift().unwrap();
    let ratio = d1 / d2;
    lines.push(Line {
        id: 1,
        name: "energy conservation",
        pass: d1 < DRIFT_LIMIT && (DRIFT_RATIO_RANGE[0]..=DRIFT_RATIO_RANGE[1]).contains(&ratio),
        detail: format!("drift {d1:.3e} (dt 0.01), {d2:.3e} (dt 0.005), ratio {ratio:.3}"),
    });

    let cs = p.sound_speed();
    let vmax_run = coarse.speeds().into_iter().fold(0.0, f64::max);
    let bound = compute_vmax(p0(&p), FieldNorms::default(), &p);
    lines.push(Line {
        id: 2,
        name: "subsonic confinement",
        pass: vmax_run < bound && bound < cs && vmax_run < cs - SPEED_MARGIN,
        detail: format!("max|v| {vmax_run:.6}, v_max {bound:.6}, c_s {cs}"),
    });
}

/// `max (1+t)²|P_t − P_∞|` over `[lo, hi]`.
fn approach(traj: &Trajectory, p_inf: Vec3, lo: f64, hi: f64) -> f64 {
    traj.samples
        .iter()
        .filter(|s| s.time >= lo && s.time <= hi)
        .map(|s| (1.0 + s.time).powi(2) * vec3::norm(vec3::sub(s.momentum, p_inf)))
        .fold(0.0, f64::max)
}

fn criteria_3_4_6_7(lines: &mut Vec<Line>) {
    let p = params();
    let tmp = tempfile::tempdir().unwrap();
    let tab = table(128, 128.0, &p);
    let horizon = WrapCutoff::Potential.horizon(tab.grid(), &p);
    drop(tab);
    let (traj, _, files) = direct(128, 128.0, 0.01, REDUCED_T, Some((tmp.path(), TW_START, horizon)));
    let window = [WINDOW_START, horizon];

    // 3: force decay and bounded majorant
    let times = traj.times();
    let mags: Vec<f64> = traj.samples.iter().map(|s| vec3::norm(s.force)).collect();
    let fit = analysis::decay_exponent(&times, &mags, window).unwrap();
    let g = analysis::g_majorant(&traj);
    let growth = analysis::late_growth(&times, &g, window).unwrap();
    lines.push(Line {
        id: 3,
        name: "force decay",
        pass: fit.exponent <= DECAY_LIMIT && growth <= G_LATE_GROWTH_LIMIT,
        detail: format!(
            "exponent {:.3} over [{}, {:.2}] ({} points), G late growth {:.2e}",
            fit.exponent, window[0], window[1], fit.points, growth
        ),
    });

    // 4: ballistic limit
    let lim = analysis::extrapolate_limits(&traj, &p, window).unwrap();
    let mid = window[1] - 0.25 * (window[1] - window[0]);
    let c_early = approach(&traj, lim.p_inf, window[0], mid);
    let c_late = approach(&traj, lim.p_inf, mid, window[1]);
    let sigma = p.potential.length_scale();
    lines.push(Line {
        id: 4,
        name: "ballistic limit",
        pass: c_late <= c_early && lim.y_oscillation < Y_LIMIT * sigma,
        detail: format!(
            "P_inf {:.8}, C {:.4} (final quarter {:.4}), Y oscillation {:.2e}",
            lim.p_inf[2], c_early, c_late, lim.y_oscillation
        ),
    });

    // 6: reduced vs direct
    let t_cmp = REDUCED_T.min(horizon);
    let settings = ReducedSettings {
        dt: 0.02,
        t_max: REDUCED_T,
        ..ReducedSettings::default()
    };
    let red = solve_reduced(&ParticleState::new(vec3::ZERO, p0(&p)), &Beta0Spectrum::Zero, &p, &settings).unwrap();
    let mut worst = (0.0f64, 0.0);
    for s in traj.samples.iter().filter(|s| s.time <= t_cmp + 1e-9) {
        let d = vec3::norm(vec3::sub(s.momentum, red.trajectory.momentum(s.time))) / vec3::norm(s.momentum);
        if d > worst.0 {
            worst = (d, s.time);
        }
    }
    lines.push(Line {
        id: 6,
        name: "reduced vs direct",
        pass: worst.0 <= REDUCED_TOL,
        detail: format!("max relative |dP| {:.3e} at t = {:.2} over [0, {t_cmp:.2}]", worst.0, worst.1),
    });

    // 7: traveling-wave distance from the saved snapshots
    let v_inf = p.velocity(lim.p_inf);
    let tab = table(128, 128.0, &p);
    let fft = Fft3::new(tab.grid());
    let mut tw = Vec::new();
    for (file, t) in &files {
        let (h, _) = snapshot::load(file).unwrap();
        let d = analysis::traveling_wave_distance(&h, v_inf, &tab, &fft).unwrap();
        tw.push((*t, d * (1.0 + t)));
    }
    let (t, d): (Vec<f64>, Vec<f64>) = tw.iter().copied().unzip();
    let slope = analysis::decay_exponent(&t, &d, [TW_START, horizon]).unwrap();
    lines.push(Line {
        id: 7,
        name: "traveling-wave convergence",
        pass: slope.exponent <= TW_SLOPE_LIMIT,
        detail: format!(
            "log-log slope of (1+t)·dist {:.3} over {} snapshots, (1+t)·dist {:.3e} -> {:.3e}",
            slope.exponent,
            tw.len(),
            d.first().copied().unwrap_or(f64::NAN),
            d.last().copied().unwrap_or(f64::NAN)
        ),
    });
}

fn criterion_5(lines: &mut Vec<Line>) {
    let p = params();
    let v = p.velocity(p0(&p));
    let path = BallisticPath {
        position: vec3::ZERO,
        momentum: p0(&p),
        mass: p.particle_mass,
    };
    let ks = KernelSettings::default();
    let (amp, width, offset) = (C64::new(0.1, 0.05), 1.0, [1.0, 0.0, 2.0]);
    let beta0 = Beta0Spectrum::Gaussian {
        re: amp.re,
        im: amp.im,
        width,
        offset,
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    let vec_err = |a: Vec3, b: Vec3| vec3::norm(vec3::sub(a, b)) / vec3::norm(b);

    {
        let fine = SpectralOracle::new(192, 96.0, &p);
        let h0 = fine.gaussian(amp, width, offset);
        let mut e: f64 = 0.0;
        for t in [1.0, 5.0, 10.0] {
            let q = kernel_d1(t, &path, &beta0, &p, &ks).unwrap().value;
            e = e.max(vec_err(q, fine.d1(&h0, v, t)));
        }
        parts.push(format!("D1 {e:.1e}"));
        worst = worst.max(e);
    }
    let small = SpectralOracle::new(128, 96.0, &p);
    let mut e: f64 = 0.0;
    for t in [1.0, 5.0, 10.0] {
        let q = kernel_d2(t, &path, &p, &ks).unwrap().value;
        e = e.max(vec_err(q, small.d2(v, t)));
    }
    parts.push(format!("D2 {e:.1e}"));
    worst = worst.max(e);

    let large = SpectralOracle::new(172, 128.0, &p);
    let mut e: f64 = 0.0;
    for t in [1.0, 5.0, 10.0] {
        for s in [0.0, t / 2.0] {
            let q = kernel_k(t, s, &path, &p, &ks).unwrap().value;
            let (a, b) = (small.k(v, t - s), large.k(v, t - s));
            let mut diff = 0.0;
            let mut norm = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    let o = richardson(a[j][l], 96.0, b[j][l], 128.0, 5);
                    diff += (q[j][l] - o).powi(2);
                    norm += o * o;
                }
            }
            e = e.max((diff / norm).sqrt());
        }
    }
    parts.push(format!("K {e:.1e}"));
    worst = worst.max(e);
    lines.push(Line {
        id: 5,
        name: "kernel-propagator equivalence",
        pass: worst <= ORACLE_TOL,
        detail: format!("worst relative error {worst:.2e} ({})", parts.join(", ")),
    });
}

fn criterion_8(lines: &mut Vec<Line>) {
    let p = params();
    let tab = table(64, 64.0, &p);
    let grad_w = p.potential.grad_l2_norm_sq().sqrt();
    let mut worst: f64 = 0.0;
    for ratio in [0.0, 0.3, 0.6, 0.9] {
        let h = tab.steady_state([0.0, 0.0, ratio * p.sound_speed()]).unwrap();
        let f = tab.force(&h).unwrap();
        let scale = p.rho0.sqrt() * grad_w * h.l2_norm_sq().sqrt();
        worst = worst.max(vec3::norm(f) / scale);
    }
    lines.push(Line {
        id: 8,
        name: "orthogonality identity",
        pass: worst < ORTHOGONALITY_TOL,
        detail: format!("max relative steady-state force {worst:.2e}"),
    });
}

fn criterion_9(lines: &mut Vec<Line>) {
    let p = params();
    let ks = KernelSettings::default();
    let mut min_den = f64::INFINITY;
    let mut failures = Vec::new();
    let mut forms: f64 = 0.0;
    for ratio in [0.3, 0.6, 0.9] {
        let path = BallisticPath {
            position: vec3::ZERO,
            momentum: [0.0, 0.0, ratio * p.sound_speed() * p.particle_mass],
            mass: p.particle_mass,
        };
        for t in [1.0, 5.0, 10.0] {
            match kernel_d2(t, &path, &p, &ks) {
                Ok(half) => {
                    min_den = min_den.min(half.min_denominator);
                    let ext = kernel_d2_extended(t, &path, &p, &ks).unwrap();
                    min_den = min_den.min(ext.min_denominator);
                    let scale = vec3::norm(half.value).max(f64::MIN_POSITIVE);
                    forms = forms.max(vec3::norm(vec3::sub(half.value, ext.value)) / scale);
                }
                Err(e) => failures.push(format!("D2 v={ratio} t={t}: {e}")),
            }
            match kernel_k(t, t / 2.0, &path, &p, &ks) {
                Ok(k) => min_den = min_den.min(k.min_denominator),
                Err(e) => failures.push(format!("K v={ratio} t={t}: {e}")),
            }
        }
    }
    lines.push(Line {
        id: 9,
        name: "oscillatory quadrature validity",
        pass: failures.is_empty() && min_den > 0.0 && forms <= FORMS_TOL,
        detail: format!(
            "min denominator {min_den:.3e}, half vs extended D2 {forms:.2e}{}",
            if failures.is_empty() { String::new() } else { format!(", errors: {}", failures.join("; ")) }
        ),
    });
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();
    let clock = Instant::now();
    let stages: [(&str, Stage); 5] = [
        ("1-2", criterion_1_2),
        ("3,4,6,7", criteria_3_4_6_7),
        ("5", criterion_5),
        ("8", criterion_8),
        ("9", criterion_9),
    ];
    for (label, stage) in stages {
        let t = Instant::now();
        stage(&mut lines);
        eprintln!("criteria {label}: {:.1} s", t.elapsed().as_secs_f64());
    }
    lines.sort_by_key(|l| l.id);
    // straight to stdout so the summary shows without --nocapture
    let mut out = std::io::stdout().lock();
    writeln!(out, "\nacceptance ({:.0} s total)", clock.elapsed().as_secs_f64()).unwrap();
    for l in &lines {
        writeln!(
            out,
            "criterion {} [{}] {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        )
        .unwrap();
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert_eq!(lines.len(), 9);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
