//! Flat INI-style run configuration with strict keys and line-numbered
//! errors.
//!
//! ```ini
//! [model]
//! particle_mass = 4
//! [initial]
//! speed = 0.5        # |v0| / c_s along `direction`
//! ```

use crate::error::CliError;
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use tracer_core::memory::{FilonSettings, HistoryWeighting, KernelSettings};
use tracer_core::spectral::WrapCutoff;
use tracer_core::vec3::{self, Vec3};
use tracer_core::{Error, ModelParams, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Direct,
    Reduced,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta0Config {
    Zero,
    /// Steady state co-moving with the initial velocity.
    Steady,
    Gaussian {
        amplitude: C64,
        width: f64,
        /// Lab-frame center.
        center: Vec3,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid_n: usize,
    pub box_len: f64,
    pub position: Vec3,
    pub momentum: Vec3,
    pub beta0: Beta0Config,
    pub dt: f64,
    pub t_max: f64,
    pub sample_every: usize,
    /// Snapshot spacing in time units; 0 disables snapshots.
    pub snapshot_every: f64,
    pub solver: Solver,
    pub wrap_cutoff: WrapCutoff,
    pub seed: u64,
    pub reduced_dt: f64,
    pub history: HistoryWeighting,
    pub reduced_k_max: Option<f64>,
    pub kernel_times: Vec<f64>,
    pub kernel_with_k: bool,
    pub kernel_n_theta: usize,
    pub kernel_n_alpha: usize,
    pub kernel_rel_tol: f64,
    /// `|v0|/c_s` values for `sweep`.
    pub sweep_speeds: Vec<f64>,
    pub analysis_window: Option<[f64; 2]>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = ModelParams::default();
        RunConfig {
            params,
            grid_n: 64,
            box_len: 64.0,
            position: vec3::ZERO,
            momentum: [0.0, 0.0, 0.5 * params.sound_speed() * params.particle_mass],
            beta0: Beta0Config::Zero,
            dt: 0.01,
            t_max: 30.0,
            sample_every: 10,
            snapshot_every: 1.0,
            solver: Solver::Direct,
            wrap_cutoff: WrapCutoff::Potential,
            seed: 0,
            reduced_dt: 0.02,
            history: HistoryWeighting::ForceHistory,
            reduced_k_max: None,
            kernel_times: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            kernel_with_k: false,
            kernel_n_theta: 64,
            kernel_n_alpha: 32,
            kernel_rel_tol: 1e-9,
            sweep_speeds: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            analysis_window: None,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["particle_mass", "boson_mass", "lambda", "rho0", "potential", "w0", "sigma"]),
    ("grid", &["n", "box"]),
    ("initial", &["position", "momentum", "speed", "direction", "beta0", "beta0_amplitude", "beta0_width", "beta0_center"]),
    ("run", &["dt", "t_max", "sample_every", "snapshot_every", "solver", "wrap_cutoff", "seed"]),
    ("reduced", &["dt", "history", "k_max"]),
    ("kernel", &["times", "with_k", "n_theta", "n_alpha", "rel_tol"]),
    ("sweep", &["speeds"]),
    ("analysis", &["window"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Doc {
    entries: BTreeMap<(String, String), Entry>,
}

fn err(line: Option<usize>, key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        line,
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Doc {
    fn parse(text: &str) -> Result<Doc, CliError> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split(['#', ';']).next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line), s, "unterminated section header"))?
                    .trim();
                if !KEYS.iter().any(|(sec, _)| *sec == name) {
                    return Err(err(Some(line), name, "unknown section"));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| err(Some(line), s, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            let sec = section
                .as_deref()
                .ok_or_else(|| err(Some(line), k, "key outside of a section"))?;
            let known = KEYS.iter().find(|(n, _)| *n == sec).map_or(&[][..], |(_, ks)| ks);
            if !known.contains(&k) {
                return Err(err(Some(line), k, format!("unknown key in [{sec}]")));
            }
            let slot = (sec.to_string(), k.to_string());
            if entries.contains_key(&slot) {
                return Err(err(Some(line), k, "duplicate key"));
            }
            entries.insert(slot, Entry { line, value: v.to_string() });
        }
        Ok(Doc { entries })
    }

    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.get(sec, key).map(|e| e.line)
    }

    fn parsed<T: std::str::FromStr>(&self, sec: &str, key: &str) -> Result<Option<T>, CliError> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| err(Some(e.line), key, format!("cannot parse `{}`", e.value))),
        }
    }

    fn list(&self, sec: &str, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| err(Some(e.line), key, format!("expected comma-separated numbers, got `{}`", e.value))),
        }
    }

    fn fixed<const N: usize>(&self, sec: &str, key: &str) -> Result<Option<[f64; N]>, CliError> {
        match self.list(sec, key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|_| err(self.line(sec, key), key, format!("expected {N} numbers"))),
        }
    }

    fn word(&self, sec: &str, key: &str, allowed: &[&str]) -> Result<Option<String>, CliError> {
        match self.get(sec, key) {
            None => Ok(None),
            Some(e) if allowed.contains(&e.value.as_str()) => Ok(Some(e.value.clone())),
            Some(e) => Err(err(Some(e.line), key, format!("expected one of {allowed:?}, got `{}`", e.value))),
        }
    }
}

/// Parse and validate a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let doc = Doc::parse(text)?;
    let mut c = RunConfig::default();
    let d = ModelParams::default();
    let PotentialSpec::Gaussian { amplitude: w0, width: sigma } = d.potential;
    doc.word("model", "potential", &["gaussian"])?;
    c.params = ModelParams {
        particle_mass: doc.parsed("model", "particle_mass")?.unwrap_or(d.particle_mass),
        boson_mass: doc.parsed("model", "boson_mass")?.unwrap_or(d.boson_mass),
        lambda: doc.parsed("model", "lambda")?.unwrap_or(d.lambda),
        rho0: doc.parsed("model", "rho0")?.unwrap_or(d.rho0),
        potential: PotentialSpec::gaussian(
            doc.parsed("model", "w0")?.unwrap_or(w0),
            doc.parsed("model", "sigma")?.unwrap_or(sigma),
        ),
    };
    if let Err(Error::InvalidParameter { name, reason }) = c.params.validate() {
        let key = match name {
            "amplitude" => "w0",
            "width" => "sigma",
            other => other,
        };
        return Err(err(doc.line("model", key), key, reason));
    }

    c.grid_n = doc.parsed("grid", "n")?.unwrap_or(c.grid_n);
    c.box_len = doc.parsed("grid", "box")?.unwrap_or(c.box_len);
    if c.grid_n < 2 || c.grid_n % 2 != 0 {
        return Err(err(doc.line("grid", "n"), "n", "must be an even number >= 2"));
    }
    if !(c.box_len.is_finite() && c.box_len > 0.0) {
        return Err(err(doc.line("grid", "box"), "box", "must be finite and > 0"));
    }

    c.position = doc.fixed::<3>("initial", "position")?.unwrap_or(vec3::ZERO);
    let momentum = doc.fixed::<3>("initial", "momentum")?;
    let speed: Option<f64> = doc.parsed("initial", "speed")?;
    let direction = doc.fixed::<3>("initial", "direction")?;
    c.momentum = match (momentum, speed) {
        (Some(_), Some(_)) => {
            return Err(err(doc.line("initial", "speed"), "speed", "give either `momentum` or `speed`, not both"))
        }
        (None, None) => return Err(err(None, "speed", "missing required key in [initial] (or give `momentum`)")),
        (Some(p), None) => {
            if direction.is_some() {
                return Err(err(doc.line("initial", "direction"), "direction", "only used together with `speed`"));
            }
            p
        }
        (None, Some(s)) => {
            if !(s.is_finite() && s >= 0.0) {
                return Err(err(doc.line("initial", "speed"), "speed", "must be finite and >= 0"));
            }
            let dir = direction.unwrap_or([0.0, 0.0, 1.0]);
            let n = vec3::norm(dir);
            if !(n > 0.0 && n.is_finite()) {
                return Err(err(doc.line("initial", "direction"), "direction", "must be a nonzero vector"));
            }
            vec3::scale(dir, s * c.params.sound_speed() * c.params.particle_mass / n)
        }
    };
    if !vec3::is_finite(c.momentum) || !vec3::is_finite(c.position) {
        return Err(err(doc.line("initial", "momentum"), "momentum", "must be finite"));
    }
    let beta0 = doc.word("initial", "beta0", &["zero", "steady", "gaussian"])?;
    let gaussian_keys = ["beta0_amplitude", "beta0_width", "beta0_center"];
    c.beta0 = match beta0.as_deref().unwrap_or("zero") {
        "gaussian" => {
            let [re, im] = doc.fixed::<2>("initial", "beta0_amplitude")?.unwrap_or([0.1, 0.0]);
            let width = doc.parsed("initial", "beta0_width")?.unwrap_or(1.0);
            if !(width > 0.0 && f64::is_finite(width)) {
                return Err(err(doc.line("initial", "beta0_width"), "beta0_width", "must be finite and > 0"));
            }
            let center = doc.fixed::<3>("initial", "beta0_center")?.unwrap_or([0.0, 0.0, 3.0]);
            Beta0Config::Gaussian {
                amplitude: C64::new(re, im),
                width,
                center,
            }
        }
        other => {
            if let Some(k) = gaussian_keys.iter().find(|k| doc.get("initial", k).is_some()) {
                return Err(err(doc.line("initial", k), k, "only used with beta0 = gaussian"));
            }
            if other == "steady" {
                Beta0Config::Steady
            } else {
                Beta0Config::Zero
            }
        }
    };

    c.dt = doc.parsed("run", "dt")?.unwrap_or(c.dt);
    c.t_max = doc.parsed("run", "t_max")?.unwrap_or(c.t_max);
    c.sample_every = doc.parsed("run", "sample_every")?.unwrap_or(c.sample_every);
    c.snapshot_every = doc.parsed("run", "snapshot_every")?.unwrap_or(c.snapshot_every);
    c.seed = doc.parsed("run", "seed")?.unwrap_or(c.seed);
    c.solver = match doc.word("run", "solver", &["direct", "reduced", "both"])?.as_deref() {
        Some("reduced") => Solver::Reduced,
        Some("both") => Solver::Both,
        _ => Solver::Direct,
    };
    c.wrap_cutoff = match doc.word("run", "wrap_cutoff", &["potential", "grid"])?.as_deref() {
        Some("grid") => WrapCutoff::Grid,
        _ => WrapCutoff::Potential,
    };
    positive(&doc, "run", "dt", c.dt)?;
    if !(c.t_max.is_finite() && c.t_max >= 0.0) {
        return Err(err(doc.line("run", "t_max"), "t_max", "must be finite and >= 0"));
    }
    if c.sample_every == 0 {
        return Err(err(doc.line("run", "sample_every"), "sample_every", "must be >= 1"));
    }
    if !(c.snapshot_every.is_finite() && c.snapshot_every >= 0.0) {
        return Err(err(doc.line("run", "snapshot_every"), "snapshot_every", "must be finite and >= 0"));
    }

    c.reduced_dt = doc.parsed("reduced", "dt")?.unwrap_or(c.reduced_dt);
    positive(&doc, "reduced", "dt", c.reduced_dt)?;
    c.history = match doc.word("reduced", "history", &["force", "momentum"])?.as_deref() {
        Some("momentum") => HistoryWeighting::MomentumHistory,
        _ => HistoryWeighting::ForceHistory,
    };
    c.reduced_k_max = doc.parsed("reduced", "k_max")?;
    if let Some(k) = c.reduced_k_max {
        positive(&doc, "reduced", "k_max", k)?;
    }

    if let Some(t) = doc.list("kernel", "times")? {
        if t.len() < 2 || t[0] < 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(err(doc.line("kernel", "times"), "times", "need >= 2 increasing nonnegative times"));
        }
        c.kernel_times = t;
    }
    c.kernel_with_k = doc.parsed("kernel", "with_k")?.unwrap_or(c.kernel_with_k);
    c.kernel_n_theta = doc.parsed("kernel", "n_theta")?.unwrap_or(c.kernel_n_theta);
    c.kernel_n_alpha = doc.parsed("kernel", "n_alpha")?.unwrap_or(c.kernel_n_alpha);
    c.kernel_rel_tol = doc.parsed("kernel", "rel_tol")?.unwrap_or(c.kernel_rel_tol);
    if c.kernel_n_theta < 2 {
        return Err(err(doc.line("kernel", "n_theta"), "n_theta", "must be >= 2"));
    }
    if c.kernel_n_alpha < 1 {
        return Err(err(doc.line("kernel", "n_alpha"), "n_alpha", "must be >= 1"));
    }
    positive(&doc, "kernel", "rel_tol", c.kernel_rel_tol)?;

    if let Some(s) = doc.list("sweep", "speeds")? {
        if s.is_empty() || s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(err(doc.line("sweep", "speeds"), "speeds", "need nonnegative finite speeds"));
        }
        c.sweep_speeds = s;
    }
    c.analysis_window = doc.fixed::<2>("analysis", "window")?;
    if let Some([lo, hi]) = c.analysis_window {
        if !(lo < hi) {
            return Err(err(doc.line("analysis", "window"), "window", "need lo < hi"));
        }
    }
    Ok(c)
}

fn positive(doc: &Doc, sec: &str, key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(err(doc.line(sec, key), key, format!("must be finite and > 0, got {v}")))
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// `|v0| / c_s`
    pub fn speed_ratio(&self) -> f64 {
        vec3::norm(self.params.velocity(self.momentum)) / self.params.sound_speed()
    }

    pub fn kernel_settings(&self) -> KernelSettings {
        KernelSettings {
            n_theta: self.kernel_n_theta,
            n_alpha: self.kernel_n_alpha,
            filon: FilonSettings {
                rel_tol: self.kernel_rel_tol,
                ..FilonSettings::default()
            },
        }
    }

    /// Same configuration with `|v0| = ratio · c_s` along the current
    /// direction (or z for a particle at rest).
    pub fn with_speed_ratio(&self, ratio: f64) -> RunConfig {
        let n = vec3::norm(self.momentum);
        let dir = if n > 0.0 { vec3::scale(self.momentum, 1.0 / n) } else { [0.0, 0.0, 1.0] };
        let mut c = self.clone();
        c.momentum = vec3::scale(dir, ratio * self.params.sound_speed() * self.params.particle_mass);
        c
    }

    /// Serialize every key; parsing the result gives back an equal config.
    pub fn serialize(&self) -> String {
        let p = &self.params;
        let PotentialSpec::Gaussian { amplitude, width } = p.potential;
        let mut s = String::new();
        let v3 = |v: Vec3| join(&v);
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "particle_mass = {}", p.particle_mass);
        let _ = writeln!(s, "boson_mass = {}", p.boson_mass);
        let _ = writeln!(s, "lambda = {}", p.lambda);
        let _ = writeln!(s, "rho0 = {}", p.rho0);
        let _ = writeln!(s, "potential = gaussian");
        let _ = writeln!(s, "w0 = {amplitude}");
        let _ = writeln!(s, "sigma = {width}");
        let _ = writeln!(s, "\n[grid]\nn = {}\nbox = {}", self.grid_n, self.box_len);
        let _ = writeln!(s, "\n[initial]");
        let _ = writeln!(s, "position = {}", v3(self.position));
        let _ = writeln!(s, "momentum = {}", v3(self.momentum));
        match self.beta0 {
            Beta0Config::Zero => {
                let _ = writeln!(s, "beta0 = zero");
            }
            Beta0Config::Steady => {
                let _ = writeln!(s, "beta0 = steady");
            }
            Beta0Config::Gaussian { amplitude, width, center } => {
                let _ = writeln!(s, "beta0 = gaussian");
                let _ = writeln!(s, "beta0_amplitude = {}", join(&[amplitude.re, amplitude.im]));
                let _ = writeln!(s, "beta0_width = {width}");
                let _ = writeln!(s, "beta0_center = {}", v3(center));
            }
        }
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "t_max = {}", self.t_max);
        let _ = writeln!(s, "sample_every = {}", self.sample_every);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let solver = match self.solver {
            Solver::Direct => "direct",
            Solver::Reduced => "reduced",
            Solver::Both => "both",
        };
        let _ = writeln!(s, "solver = {solver}");
        let wrap = match self.wrap_cutoff {
            WrapCutoff::Potential => "potential",
            WrapCutoff::Grid => "grid",
        };
        let _ = writeln!(s, "wrap_cutoff = {wrap}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[reduced]\ndt = {}", self.reduced_dt);
        let history = match self.history {
            HistoryWeighting::ForceHistory => "force",
            HistoryWeighting::MomentumHistory => "momentum",
        };
        let _ = writeln!(s, "history = {history}");
        if let Some(k) = self.reduced_k_max {
            let _ = writeln!(s, "k_max = {k}");
        }
        let _ = writeln!(s, "\n[kernel]");
        let _ = writeln!(s, "times = {}", join(&self.kernel_times));
        let _ = writeln!(s, "with_k = {}", self.kernel_with_k);
        let _ = writeln!(s, "n_theta = {}", self.kernel_n_theta);
        let _ = writeln!(s, "n_alpha = {}", self.kernel_n_alpha);
        let _ = writeln!(s, "rel_tol = {}", self.kernel_rel_tol);
        let _ = writeln!(s, "\n[sweep]\nspeeds = {}", join(&self.sweep_speeds));
        if let Some(w) = self.analysis_window {
            let _ = writeln!(s, "\n[analysis]\nwindow = {}", join(&w));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults_and_round_trips() {
        let c = parse_config("[initial]\nspeed = 0.5\n").unwrap();
        assert_eq!(c.momentum, [0.0, 0.0, 2.0]);
        assert_eq!(c.grid_n, 64);
        assert_eq!(c.dt, 0.01);
        let again = parse_config(&c.serialize()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn gaussian_round_trip() {
        let text = "[initial]\nmomentum = 0.1, 0.2, 0.3\nbeta0 = gaussian\nbeta0_amplitude = 0.2, -0.1\nbeta0_center = 1,2,3\n[analysis]\nwindow = 5, 9\n[reduced]\nk_max = 4.5\nhistory = momentum\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
    }

    #[test]
    fn negative_lambda_names_key_and_line() {
        let e = parse_config("[model]\nrho0 = 0.1\nlambda = -1\n[initial]\nspeed = 0.5\n").unwrap_err();
        match e {
            CliError::Config { line, key, .. } => {
                assert_eq!(key, "lambda");
                assert_eq!(line, Some(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse_config("[initial]\nspeed = 0.5\nfoo = 1\n").unwrap_err();
        assert!(matches!(e, CliError::Config { ref key, line: Some(3), .. } if key == "foo"), "{e:?}");
    }

    #[test]
    fn missing_speed_rejected() {
        let e = parse_config("[run]\ndt = 0.1\n").unwrap_err();
        assert!(matches!(e, CliError::Config { ref key, .. } if key == "speed"));
    }

    proptest::proptest! {
        #[test]
        fn serialize_parse_round_trip(
            mass in 0.5f64..50.0,
            rho0 in 0.0f64..1.0,
            p in proptest::array::uniform3(-1.0f64..1.0),
            dt in 1e-4f64..0.5,
            n in 1usize..64,
            speeds in proptest::collection::vec(0.0f64..0.99, 1..6),
            gaussian in proptest::bool::ANY,
            window in proptest::option::of((0.0f64..10.0, 10.5f64..40.0)),
        ) {
            let mut c = RunConfig::default();
            c.params.particle_mass = mass;
            c.params.rho0 = rho0;
            c.momentum = p;
            c.dt = dt;
            c.grid_n = 2 * n;
            c.sweep_speeds = speeds;
            c.analysis_window = window.map(|(a, b)| [a, b]);
            if gaussian {
                c.beta0 = Beta0Config::Gaussian { amplitude: C64::new(dt, -rho0), width: mass, center: p };
            }
            let again = parse_config(&c.serialize()).unwrap();
            proptest::prop_assert_eq!(c, again);
        }
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(parse_config("[initial]\nspeed = 0.5\nspeed = 0.6\n").is_err());
        assert!(parse_config("[initial]\nspeed 0.5\n").is_err());
        assert!(parse_config("speed = 0.5\n").is_err());
        assert!(parse_config("[nope]\n").is_err());
        assert!(parse_config("[initial]\nspeed = fast\n").is_err());
    }
}
