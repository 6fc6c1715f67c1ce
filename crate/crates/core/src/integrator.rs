//! Coupled particle–field time stepping and the trajectory record.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{FieldState, ModeTable, Propagator};
use crate::vec3::{self, Vec3};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Vec3,
    pub momentum: Vec3,
    pub time: f64,
}

impl ParticleState {
    pub fn new(position: Vec3, momentum: Vec3) -> Self {
        ParticleState {
            position,
            momentum,
            time: 0.0,
        }
    }

    pub fn at_rest(position: Vec3) -> Self {
        Self::new(position, vec3::ZERO)
    }
}

/// One recorded instant of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub position: Vec3,
    pub momentum: Vec3,
    /// Instantaneous force `Ṗ`.
    pub force: Vec3,
    /// Hamilton functional; NaN where the solver does not track the field.
    pub hamiltonian: f64,
    /// Past the periodic-box wrap horizon.
    pub wrapped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sound_speed: f64,
    pub particle_mass: f64,
    pub samples: Vec<Sample>,
}

pub const CSV_HEADER: &str = "t,X1,X2,X3,P1,P2,P3,speed_over_cs,H,F1,F2,F3,wrap_flag";

impl Trajectory {
    pub fn new(params: &ModelParams) -> Self {
        Trajectory {
            sound_speed: params.sound_speed(),
            particle_mass: params.particle_mass,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| vec3::norm(s.momentum) / self.particle_mass)
            .collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Append a sample; times must increase strictly.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(prev) = self.samples.last() {
            if !(s.time > prev.time) {
                return Err(Error::InvalidParameter {
                    name: "time",
                    reason: format!("samples must increase: {} after {}", s.time, prev.time),
                });
            }
        }
        self.samples.push(s);
        Ok(())
    }

    /// Largest `|H(t) - H(0)| / (|H(0)| + 1)`.
    pub fn energy_drift(&self) -> Option<f64> {
        let h0 = self.samples.first()?.hamiltonian;
        if !h0.is_finite() {
            return None;
        }
        Some(
            self.samples
                .iter()
                .map(|s| (s.hamiltonian - h0).abs() / (h0.abs() + 1.0))
                .fold(0.0, f64::max),
        )
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for s in &self.samples {
            let speed = vec3::norm(s.momentum) / self.particle_mass / self.sound_speed;
            let cols = [
                s.time,
                s.position[0],
                s.position[1],
                s.position[2],
                s.momentum[0],
                s.momentum[1],
                s.momentum[2],
                speed,
                s.hamiltonian,
                s.force[0],
                s.force[1],
                s.force[2],
            ];
            let mut line = cols
                .iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(",");
            line.push_str(if s.wrapped { ",1" } else { ",0" });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R, params: &ModelParams) -> Result<Trajectory> {
        let mut traj = Trajectory::new(params);
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != CSV_HEADER {
            return Err(Error::Format("trajectory CSV header".into()));
        }
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<&str> = line.split(',').collect();
            if v.len() != 13 {
                return Err(Error::Format(format!("line {}: expected 13 columns", n + 2)));
            }
            let f = |i: usize| -> Result<f64> {
                v[i].trim()
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad number {:?}", n + 2, v[i])))
            };
            traj.push(Sample {
                time: f(0)?,
                position: [f(1)?, f(2)?, f(3)?],
                momentum: [f(4)?, f(5)?, f(6)?],
                hamiltonian: f(8)?,
                force: [f(9)?, f(10)?, f(11)?],
                wrapped: v[12].trim() == "1",
            })?;
        }
        Ok(traj)
    }
}

/// Strang-split stepper: half kick, exact field drift at the mid-step
/// velocity, half kick.
#[derive(Debug, Clone)]
pub struct Stepper {
    propagator: Propagator,
}

impl Stepper {
    pub fn new(table: ModeTable, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and nonzero, got {dt}"),
            });
        }
        Ok(Stepper {
            propagator: Propagator::new(table, dt),
        })
    }

    pub fn table(&self) -> &ModeTable {
        self.propagator.table()
    }

    pub fn dt(&self) -> f64 {
        self.propagator.dt()
    }

    /// Advance one step. `force` must hold the force of the incoming field
    /// and is replaced by the force of the outgoing one.
    pub fn advance(&self, particle: &mut ParticleState, h: &mut FieldState, force: &mut Vec3) -> Result<()> {
        let params = self.table().params();
        let dt = self.dt();
        let half = vec3::axpy(particle.momentum, 0.5 * dt, *force);
        let v = params.velocity(half);
        let speed = vec3::norm(v);
        let cs = params.sound_speed();
        if !(speed < cs) {
            return Err(Error::LeftSubsonic {
                time: particle.time,
                speed,
                sound_speed: cs,
                position: particle.position,
                momentum: half,
            });
        }
        self.propagator.step(h, v)?;
        particle.position = vec3::axpy(particle.position, dt, v);
        *force = self.table().force(h)?;
        particle.momentum = vec3::axpy(half, 0.5 * dt, *force);
        particle.time += dt;
        Ok(())
    }
}

/// One Strang step (negative `dt` runs backwards).
pub fn step(
    particle: &ParticleState,
    h: &FieldState,
    dt: f64,
    params: &ModelParams,
) -> Result<(ParticleState, FieldState)> {
    let stepper = Stepper::new(ModeTable::new(h.grid().clone(), params)?, dt)?;
    let mut p = *particle;
    let mut f = h.clone();
    let mut force = stepper.table().force(&f)?;
    stepper.advance(&mut p, &mut f, &mut force)?;
    Ok((p, f))
}

/// Settings of a direct run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub t_max: f64,
    /// Record every `sample_every`-th step.
    pub sample_every: usize,
    pub wrap_horizon: f64,
}

/// Integrate from the given state to `t_max`, calling `observe` on every
/// recorded sample with the current field.
pub fn run_direct<F>(
    table: ModeTable,
    mut particle: ParticleState,
    mut field: FieldState,
    settings: RunSettings,
    mut observe: F,
) -> Result<Trajectory>
where
    F: FnMut(&Sample, &FieldState) -> Result<()>,
{
    if !(settings.dt > 0.0 && settings.t_max >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("need dt > 0 and t_max >= 0, got {} and {}", settings.dt, settings.t_max),
        });
    }
    let params = *table.params();
    let stepper = Stepper::new(table, settings.dt)?;
    let steps = (settings.t_max / settings.dt).round() as usize;
    let every = settings.sample_every.max(1);
    let t0 = particle.time;
    let mut traj = Trajectory::new(&params);
    let mut force = stepper.table().force(&field)?;
    let mut record = |p: &ParticleState, f: &FieldState, force: Vec3, traj: &mut Trajectory| -> Result<()> {
        let s = Sample {
            time: p.time,
            position: p.position,
            momentum: p.momentum,
            force,
            hamiltonian: stepper.table().hamiltonian(p, f)?,
            wrapped: p.time > settings.wrap_horizon,
        };
        observe(&s, f)?;
        traj.push(s)
    };
    record(&particle, &field, force, &mut traj)?;
    for n in 1..=steps {
        stepper.advance(&mut particle, &mut field, &mut force)?;
        // avoid accumulating rounding in the clock
        particle.time = t0 + n as f64 * settings.dt;
        if n % every == 0 || n == steps {
            record(&particle, &field, force, &mut traj)?;
        }
    }
    Ok(traj)
}
