//! Command implementations. Each command owns one run directory and writes
//! the exact configuration it used next to its artifacts.

use crate::config::{Beta0Config, RunConfig, Solver};
use crate::error::CliError;
use serde::Serialize;
use serde_json::json;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tracer_core::analysis::{self, AnalysisOptions, AnalysisReport};
use tracer_core::integrator::{run_direct, RunSettings};
use tracer_core::memory::{
    solve_reduced, BallisticPath, Beta0Spectrum, KernelTable, PathView, ReducedSettings,
};
use tracer_core::spectral::{io as snapshot, Fft3, ModeTable};
use tracer_core::vec3;
use tracer_core::{FieldState, ModelParams, ParticleState, SpectralGrid, Trajectory};

pub const CONFIG_FILE: &str = "config.ini";
pub const DIRECT_CSV: &str = "trajectory.csv";
pub const REDUCED_CSV: &str = "trajectory_reduced.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const SNAPSHOT_INDEX: &str = "index.csv";

/// What a command produced.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub run_dir: PathBuf,
    pub artifacts: Vec<String>,
}

/// Log sink honoring `--quiet`.
#[derive(Debug, Clone, Copy)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run_err(dir: &Path) -> impl Fn(tracer_core::Error) -> CliError + '_ {
    move |source| CliError::Run {
        run: dir.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
    writeln!(f).and_then(|_| f.flush()).map_err(io_err(path))
}

/// Create the run directory and record the configuration in it.
pub fn prepare_dir(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.serialize()).map_err(io_err(&path))
}

fn log_margin(cfg: &RunConfig, log: Log) {
    let ratio = cfg.speed_ratio();
    log.info(format!(
        "|v0|/c_s = {ratio:.6} (margin {:.3e}), units {}",
        1.0 - ratio,
        cfg.params.units_label()
    ));
}

fn mode_table(cfg: &RunConfig, dir: &Path) -> Result<ModeTable, CliError> {
    let grid = SpectralGrid::cubic(cfg.grid_n, cfg.box_len).map_err(run_err(dir))?;
    ModeTable::new(Arc::new(grid), &cfg.params).map_err(run_err(dir))
}

pub fn initial_state(cfg: &RunConfig) -> ParticleState {
    ParticleState::new(cfg.position, cfg.momentum)
}

/// Initial particle-frame field on the grid of `table`.
pub fn initial_field(cfg: &RunConfig, table: &ModeTable) -> tracer_core::Result<FieldState> {
    let grid = table.grid().clone();
    match cfg.beta0 {
        Beta0Config::Zero => Ok(FieldState::zeros(grid)),
        Beta0Config::Steady => table.steady_state(cfg.params.velocity(cfg.momentum)),
        Beta0Config::Gaussian { amplitude, width, center } => {
            FieldState::gaussian_bump(grid, amplitude, width, center, cfg.position)
        }
    }
}

/// The same initial field as an analytic spectrum for the kernel solvers.
pub fn beta0_spectrum(cfg: &RunConfig) -> Beta0Spectrum {
    match cfg.beta0 {
        Beta0Config::Zero => Beta0Spectrum::Zero,
        Beta0Config::Steady => Beta0Spectrum::Steady {
            velocity: cfg.params.velocity(cfg.momentum),
        },
        Beta0Config::Gaussian { amplitude, width, center } => Beta0Spectrum::Gaussian {
            re: amplitude.re,
            im: amplitude.im,
            width,
            offset: vec3::sub(center, cfg.position),
        },
    }
}

fn write_trajectory(path: &Path, traj: &Trajectory, dir: &Path) -> Result<(), CliError> {
    let mut f = create(path)?;
    traj.write_csv(&mut f).map_err(run_err(dir))?;
    f.flush().map_err(io_err(path))
}

/// Direct spectral run; writes the trajectory and field snapshots.
pub fn direct(cfg: &RunConfig, dir: &Path, log: Log) -> Result<(Trajectory, f64), CliError> {
    let table = mode_table(cfg, dir)?;
    let horizon = cfg.wrap_cutoff.horizon(table.grid(), &cfg.params);
    log.info(format!("direct: {0}^3 grid, box {1}, dt {2}, wrap horizon {horizon:.3}", cfg.grid_n, cfg.box_len, cfg.dt));
    let field = initial_field(cfg, &table).map_err(run_err(dir))?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let mut index = Vec::new();
    if cfg.snapshot_every > 0.0 {
        fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
    }
    let params = cfg.params;
    let mut next = 0usize;
    let tol = 1e-9 * cfg.dt;
    let settings = RunSettings {
        dt: cfg.dt,
        t_max: cfg.t_max,
        sample_every: cfg.sample_every,
        wrap_horizon: horizon,
    };
    let traj = run_direct(table, initial_state(cfg), field, settings, |s, f| {
        if cfg.snapshot_every > 0.0 && s.time + tol >= next as f64 * cfg.snapshot_every {
            let name = format!("snap_{next:05}.btf");
            snapshot::save(&snap_dir.join(&name), f, &params)?;
            index.push((name, s.time));
            next = (s.time / cfg.snapshot_every + 1e-9).floor() as usize + 1;
        }
        Ok(())
    })
    .map_err(run_err(dir))?;
    write_trajectory(&dir.join(DIRECT_CSV), &traj, dir)?;
    if cfg.snapshot_every > 0.0 {
        let path = snap_dir.join(SNAPSHOT_INDEX);
        let mut f = create(&path)?;
        writeln!(f, "file,t").map_err(io_err(&path))?;
        for (name, t) in &index {
            writeln!(f, "{name},{t:.16e}").map_err(io_err(&path))?;
        }
        f.flush().map_err(io_err(&path))?;
    }
    if let Some(d) = traj.energy_drift() {
        log.info(format!("direct: relative energy drift {d:.3e}"));
    }
    Ok((traj, horizon))
}

pub fn reduced_settings(cfg: &RunConfig) -> ReducedSettings {
    ReducedSettings {
        dt: cfg.reduced_dt,
        t_max: cfg.t_max,
        sample_every: 1,
        history: cfg.history,
        k_max: cfg.reduced_k_max,
        ..ReducedSettings::default()
    }
}

/// Reduced memory-kernel run; writes the trajectory and solver diagnostics.
pub fn reduced(cfg: &RunConfig, dir: &Path, log: Log) -> Result<Trajectory, CliError> {
    let settings = reduced_settings(cfg);
    log.info(format!("reduced: dt {}, t_max {}", settings.dt, settings.t_max));
    let run = solve_reduced(&initial_state(cfg), &beta0_spectrum(cfg), &cfg.params, &settings)
        .map_err(run_err(dir))?;
    write_trajectory(&dir.join(REDUCED_CSV), &run.trajectory, dir)?;
    write_json(
        &dir.join("reduced.json"),
        &json!({
            "nodes": run.nodes,
            "n_theta": run.n_theta,
            "n_alpha": run.n_alpha,
            "axisymmetric": run.axisymmetric,
            "max_iterations": run.max_iterations,
            "max_contraction": run.max_contraction,
        }),
    )?;
    log.info(format!(
        "reduced: {} nodes, at most {} fixed-point iterations, contraction {:.2e}",
        run.nodes, run.max_iterations, run.max_contraction
    ));
    Ok(run.trajectory)
}

/// `max |ΔP|` between two runs at the samples of `direct` up to `t_end`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub max_abs_dp: f64,
    /// Relative to `max |P|`.
    pub max_rel_dp: f64,
    pub t_worst: f64,
    pub t_end: f64,
    pub samples: usize,
}

pub fn compare(direct: &Trajectory, reduced: &Trajectory, t_end: f64) -> Comparison {
    let end = t_end.min(reduced.last().map_or(0.0, |s| s.time));
    let mut c = Comparison {
        max_abs_dp: 0.0,
        max_rel_dp: 0.0,
        t_worst: 0.0,
        t_end: end,
        samples: 0,
    };
    let mut p_scale = 0.0f64;
    for s in direct.samples.iter().filter(|s| s.time <= end + 1e-12) {
        let d = vec3::norm(vec3::sub(s.momentum, reduced.momentum(s.time)));
        p_scale = p_scale.max(vec3::norm(s.momentum));
        if d > c.max_abs_dp {
            c.max_abs_dp = d;
            c.t_worst = s.time;
        }
        c.samples += 1;
    }
    c.max_rel_dp = if p_scale > 0.0 { c.max_abs_dp / p_scale } else { c.max_abs_dp };
    c
}

/// `simulate`: direct, reduced or both, per `[run] solver`.
pub fn simulate(cfg: &RunConfig, dir: &Path, log: Log) -> Result<Outcome, CliError> {
    prepare_dir(dir, cfg)?;
    log_margin(cfg, log);
    let mut artifacts = vec![CONFIG_FILE.to_string()];
    let mut direct_run = None;
    if matches!(cfg.solver, Solver::Direct | Solver::Both) {
        direct_run = Some(direct(cfg, dir, log)?);
        artifacts.push(DIRECT_CSV.into());
        if cfg.snapshot_every > 0.0 {
            artifacts.push(format!("{SNAPSHOT_DIR}/{SNAPSHOT_INDEX}"));
        }
    }
    if matches!(cfg.solver, Solver::Reduced | Solver::Both) {
        let red = reduced(cfg, dir, log)?;
        artifacts.extend([REDUCED_CSV.to_string(), "reduced.json".into()]);
        if let Some((traj, horizon)) = &direct_run {
            let full = compare(traj, &red, f64::INFINITY);
            let unwrapped = compare(traj, &red, *horizon);
            log.info(format!(
                "compare: max|dP| {:.3e} (before wrap horizon {:.3e})",
                full.max_abs_dp, unwrapped.max_abs_dp
            ));
            write_json(
                &dir.join("comparison.json"),
                &json!({ "wrap_horizon": horizon, "full": full, "before_wrap": unwrapped }),
            )?;
            artifacts.push("comparison.json".into());
        }
    }
    Ok(Outcome {
        command: "simulate",
        run_dir: dir.to_path_buf(),
        artifacts,
    })
}

fn kernel_times(cfg: &RunConfig, t_end: f64) -> Vec<f64> {
    cfg.kernel_times.iter().copied().filter(|&t| t <= t_end + 1e-12).collect()
}

fn write_tables(table: &KernelTable, dir: &Path) -> Result<Vec<String>, CliError> {
    let mut out = vec!["kernel_d.csv".to_string(), "decay.json".to_string()];
    let path = dir.join("kernel_d.csv");
    let mut f = create(&path)?;
    table.write_d_csv(&mut f).map_err(run_err(dir))?;
    f.flush().map_err(io_err(&path))?;
    if table.has_k() {
        let path = dir.join("kernel_k.csv");
        let mut f = create(&path)?;
        table.write_k_csv(&mut f).map_err(run_err(dir))?;
        f.flush().map_err(io_err(&path))?;
        out.push("kernel_k.csv".into());
    }
    write_json(&dir.join("decay.json"), &table.decay_report())?;
    Ok(out)
}

fn build_table<P: PathView + Sync + ?Sized>(
    cfg: &RunConfig,
    times: &[f64],
    path: &P,
    dir: &Path,
    log: Log,
) -> Result<KernelTable, CliError> {
    log.info(format!(
        "kernel: {} times{}",
        times.len(),
        if cfg.kernel_with_k { " with K" } else { "" }
    ));
    KernelTable::build(
        times,
        path,
        &beta0_spectrum(cfg),
        &cfg.params,
        &cfg.kernel_settings(),
        cfg.kernel_with_k,
    )
    .map_err(run_err(dir))
}

/// `reduced`: reduced run plus kernel tables along its trajectory.
pub fn reduced_command(cfg: &RunConfig, dir: &Path, log: Log) -> Result<Outcome, CliError> {
    prepare_dir(dir, cfg)?;
    log_margin(cfg, log);
    let traj = reduced(cfg, dir, log)?;
    let mut artifacts = vec![CONFIG_FILE.to_string(), REDUCED_CSV.into(), "reduced.json".into()];
    let times = kernel_times(cfg, traj.last().map_or(0.0, |s| s.time));
    if times.len() >= 2 {
        let table = build_table(cfg, &times, &traj, dir, log)?;
        artifacts.extend(write_tables(&table, dir)?);
    } else {
        log.info("kernel tables skipped: fewer than two kernel times inside the run");
    }
    Ok(Outcome {
        command: "reduced",
        run_dir: dir.to_path_buf(),
        artifacts,
    })
}

/// `kernel`: `D₁`, `D₂` and optionally `K` along the ballistic path.
pub fn kernel_command(cfg: &RunConfig, dir: &Path, log: Log) -> Result<Outcome, CliError> {
    prepare_dir(dir, cfg)?;
    log_margin(cfg, log);
    let path = BallisticPath {
        position: cfg.position,
        momentum: cfg.momentum,
        mass: cfg.params.particle_mass,
    };
    let table = build_table(cfg, &cfg.kernel_times, &path, dir, log)?;
    let mut artifacts = vec![CONFIG_FILE.to_string()];
    artifacts.extend(write_tables(&table, dir)?);
    Ok(Outcome {
        command: "kernel",
        run_dir: dir.to_path_buf(),
        artifacts,
    })
}

fn read_snapshot_index(dir: &Path) -> Result<Vec<(PathBuf, f64)>, CliError> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let path = snap_dir.join(SNAPSHOT_INDEX);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (name, t) = l.split_once(',').ok_or_else(|| bad_index(&path, l))?;
            let t: f64 = t.trim().parse().map_err(|_| bad_index(&path, l))?;
            Ok((snap_dir.join(name.trim()), t))
        })
        .collect()
}

fn bad_index(path: &Path, line: &str) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad index line {line:?}")),
    }
}

/// Analyze a trajectory already held in memory. `snapshots` are
/// `(file, t)` pairs used for the traveling-wave distance.
pub fn analyze_trajectory(
    cfg: &RunConfig,
    traj: &Trajectory,
    snapshots: &[(PathBuf, f64)],
    dir: &Path,
) -> Result<AnalysisReport, CliError> {
    let table = mode_table(cfg, dir)?;
    let horizon = cfg.wrap_cutoff.horizon(table.grid(), &cfg.params);
    let norms = initial_field(cfg, &table).map_err(run_err(dir))?.norms();
    let window = cfg.analysis_window.unwrap_or_else(|| analysis::default_window(traj, horizon));
    let mut tw = Vec::new();
    if !snapshots.is_empty() {
        if let Ok(lim) = analysis::extrapolate_limits(traj, &cfg.params, window) {
            let v_inf = cfg.params.velocity(lim.p_inf);
            let fft = Fft3::new(table.grid());
            for (file, t) in snapshots {
                let (h, p) = snapshot::load(file).map_err(run_err(dir))?;
                let tab = if h.grid().same_as(table.grid()) && p == cfg.params {
                    table.clone()
                } else {
                    ModeTable::new(h.grid().clone(), &p).map_err(run_err(dir))?
                };
                let d = analysis::traveling_wave_distance(&h, v_inf, &tab, &fft).map_err(run_err(dir))?;
                tw.push((*t, d));
            }
        }
    }
    let opts = AnalysisOptions {
        wrap_horizon: horizon,
        window: Some(window),
        initial_norms: Some(norms),
        tw_distance: tw,
    };
    analysis::analyze(traj, &cfg.params, &opts).map_err(run_err(dir))
}

/// `analyze`: JSON report for the direct (or, failing that, reduced)
/// trajectory in `dir`.
pub fn analyze_command(cfg: Option<&RunConfig>, dir: &Path, log: Log) -> Result<Outcome, CliError> {
    let owned;
    let cfg = match cfg {
        Some(c) => c,
        None => {
            let path = dir.join(CONFIG_FILE);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            owned = crate::config::parse_config(&text)?;
            &owned
        }
    };
    let (csv, snapshots) = if dir.join(DIRECT_CSV).exists() {
        (dir.join(DIRECT_CSV), read_snapshot_index(dir)?)
    } else {
        (dir.join(REDUCED_CSV), Vec::new())
    };
    let traj = read_trajectory(&csv, &cfg.params)?;
    log.info(format!("analyze: {} samples from {}", traj.len(), csv.display()));
    let report = analyze_trajectory(cfg, &traj, &snapshots, dir)?;
    for (name, ok) in &report.checks {
        log.info(format!("  {name}: {}", if *ok { "ok" } else { "FAILED" }));
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok(Outcome {
        command: "analyze",
        run_dir: dir.to_path_buf(),
        artifacts: vec!["report.json".into()],
    })
}

pub fn read_trajectory(path: &Path, params: &ModelParams) -> Result<Trajectory, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    Trajectory::read_csv(BufReader::new(f), params).map_err(|source| CliError::Run {
        run: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub speed_ratio: f64,
    pub dir: PathBuf,
    pub ok: bool,
    pub error: Option<serde_json::Value>,
}

/// `sweep`: one `simulate` (+ `analyze` when a direct trajectory exists)
/// per speed in `[sweep] speeds`, `workers` runs at a time.
pub fn sweep(cfg: &RunConfig, root: &Path, workers: usize, log: Log) -> Result<Outcome, CliError> {
    prepare_dir(root, cfg)?;
    let jobs: Vec<(f64, PathBuf)> = cfg
        .sweep_speeds
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, root.join(format!("run_{i:03}_v{v:.3}"))))
        .collect();
    let one = |(v, dir): &(f64, PathBuf)| -> ManifestEntry {
        let run_cfg = cfg.with_speed_ratio(*v);
        let res = simulate(&run_cfg, dir, log).and_then(|out| {
            if out.artifacts.iter().any(|a| a == DIRECT_CSV) {
                analyze_command(Some(&run_cfg), dir, log)?;
            }
            Ok(())
        });
        if let Err(e) = &res {
            log.info(format!("sweep: v/c_s = {v}: {e}"));
            let _ = write_json(&dir.join("error.json"), &e.to_json());
        }
        ManifestEntry {
            speed_ratio: *v,
            dir: dir.strip_prefix(root).unwrap_or(dir).to_path_buf(),
            ok: res.is_ok(),
            error: res.err().map(|e| e.to_json()),
        }
    };
    let entries = run_pool(&jobs, workers, one);
    write_json(&root.join("manifest.json"), &json!({ "runs": entries }))?;
    let mut artifacts = vec![CONFIG_FILE.to_string(), "manifest.json".into()];
    artifacts.extend(jobs.iter().map(|(_, d)| d.strip_prefix(root).unwrap_or(d).display().to_string()));
    if let Some(bad) = entries.iter().find(|e| !e.ok) {
        return Err(CliError::Usage(format!(
            "{} of {} sweep runs failed (first: {})",
            entries.iter().filter(|e| !e.ok).count(),
            entries.len(),
            bad.dir.display()
        )));
    }
    Ok(Outcome {
        command: "sweep",
        run_dir: root.to_path_buf(),
        artifacts,
    })
}

#[cfg(feature = "parallel")]
fn run_pool<J: Sync, T: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| jobs.par_iter().map(&f).collect()),
        Err(_) => jobs.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_pool<J: Sync, T: Send>(jobs: &[J], _workers: usize, f: impl Fn(&J) -> T + Sync) -> Vec<T> {
    jobs.iter().map(f).collect()
}
