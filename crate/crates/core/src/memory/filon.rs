//! Filon-type quadrature for `∫ f(ρ) e^{iTρ(√(1+ρ²) − μ)} dρ`.
//!
//! The phase `φ(ρ) = Tρ(√(1+ρ²) − μ)` is strictly increasing whenever
//! `|μ| < 1`, because
//!
//! `φ'(ρ)/T = √(1+ρ²) + ρ²/√(1+ρ²) − μ ≥ 1 − |μ|`.
//!
//! Each panel is mapped to the phase variable `s = φ(ρ)`, where the
//! integral becomes `∫ g(s) e^{is} ds` with `g = f/φ'`. The smooth factor is
//! interpolated by a degree-8 polynomial at Chebyshev–Lobatto points in `s`
//! and the product with `e^{is}` is integrated exactly, so the rule does not
//! need to resolve the oscillation.

use crate::error::{Error, Result};
use crate::par::Accumulate;
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

const NODES: usize = 9;

/// Dimensionless elapsed time `T = λτ` and drift `μ = u cos θ` of the phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    pub time: f64,
    pub drift: f64,
}

impl PhaseParams {
    pub fn new(time: f64, drift: f64) -> Self {
        PhaseParams { time, drift }
    }

    #[inline]
    pub fn phase(&self, rho: f64) -> f64 {
        self.time * rho * ((1.0 + rho * rho).sqrt() - self.drift)
    }

    /// `φ'(ρ)/T`, the denominator produced by integrating by parts.
    #[inline]
    pub fn denominator(&self, rho: f64) -> f64 {
        let r = (1.0 + rho * rho).sqrt();
        r + rho * rho / r - self.drift
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilonSettings {
    /// Successive refinements must agree to this relative tolerance.
    pub rel_tol: f64,
    pub max_refinements: usize,
    /// Largest panel width in `ρ`.
    pub max_rho_width: f64,
    /// Largest half-width of a panel in phase (radians).
    pub max_half_phase: f64,
}

impl Default for FilonSettings {
    fn default() -> Self {
        FilonSettings {
            rel_tol: 1e-9,
            max_refinements: 8,
            max_rho_width: 0.25,
            max_half_phase: 3.0,
        }
    }
}

/// Result of one oscillatory integral with the diagnostics the kernel
/// evaluators aggregate.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<T> {
    pub value: T,
    /// Smallest `φ'/T` met at any node.
    pub min_denominator: f64,
    pub refinements: usize,
    pub evaluations: usize,
}

/// Chebyshev–Lobatto points on `[-1, 1]`, ascending.
fn nodes() -> &'static [f64; NODES] {
    static X: OnceLock<[f64; NODES]> = OnceLock::new();
    X.get_or_init(|| {
        std::array::from_fn(|i| -(std::f64::consts::PI * i as f64 / (NODES - 1) as f64).cos())
    })
}

/// Inverse of the transposed Vandermonde matrix `V_ij = x_i^j`.
fn inverse_vandermonde_t() -> &'static [[f64; NODES]; NODES] {
    static M: OnceLock<[[f64; NODES]; NODES]> = OnceLock::new();
    M.get_or_init(|| {
        let x = nodes();
        // rows j, columns i: x_i^j
        let mut a = [[0.0; NODES]; NODES];
        for j in 0..NODES {
            for i in 0..NODES {
                a[j][i] = x[i].powi(j as i32);
            }
        }
        invert(a)
    })
}

fn invert(mut a: [[f64; NODES]; NODES]) -> [[f64; NODES]; NODES] {
    let mut inv = [[0.0; NODES]; NODES];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in 0..NODES {
        let p = (c..NODES)
            .max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))
            .unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..NODES {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..NODES {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..NODES {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
    }
    inv
}

/// `∫_{-1}^{1} x^j e^{ihx} dx` for `j < NODES`, by power series in `h`
/// (accurate for the panel sizes used here, `|h| ≲ 4`).
fn moments(h: f64) -> [C64; NODES] {
    let mut out = [C64::default(); NODES];
    for (j, o) in out.iter_mut().enumerate() {
        let mut term = C64::new(1.0, 0.0); // (ih)^n / n!
        let mut sum = C64::default();
        for n in 0..80 {
            let m = j + n;
            if m % 2 == 0 {
                sum += term * (2.0 / (m as f64 + 1.0));
            }
            term *= C64::new(0.0, h / (n as f64 + 1.0));
            if n > 2 && term.norm() < 1e-18 {
                break;
            }
        }
        *o = sum;
    }
    out
}

/// Weights `w_i` with `Σ w_i p(x_i) = ∫_{-1}^{1} p(x) e^{ihx} dx` for every
/// polynomial `p` of degree below `NODES`.
pub fn filon_weights(h: f64) -> [C64; NODES] {
    let mu = moments(h);
    let inv = inverse_vandermonde_t();
    std::array::from_fn(|i| {
        let mut s = C64::default();
        for j in 0..NODES {
            s += mu[j] * inv[i][j];
        }
        s
    })
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
}

/// Solve `φ(ρ) = s` on `[lo, hi]` where `φ` is increasing.
fn invert_phase(p: &PhaseParams, s: f64, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (p.phase(a) - s, p.phase(b) - s);
    if fa >= 0.0 {
        return a;
    }
    if fb <= 0.0 {
        return b;
    }
    let mut x = a + (b - a) * (-fa / (fb - fa));
    for _ in 0..100 {
        let f = p.phase(x) - s;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let d = p.time * p.denominator(x);
        let mut next = x - f / d;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

struct PanelResult<T> {
    value: T,
    mass: f64,
    min_den: f64,
}

fn sup_norm<const N: usize>(v: &[C64; N]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn integrate_panel<const N: usize, F>(
    f: &F,
    panel: Panel,
    phase: &PhaseParams,
) -> Result<PanelResult<[C64; N]>>
where
    F: Fn(f64) -> [C64; N],
{
    let x = nodes();
    let mut acc = [C64::default(); N];
    let mut mass = 0.0;
    let mut min_den = f64::INFINITY;
    if phase.time == 0.0 {
        let c = 0.5 * (panel.lo + panel.hi);
        let h = 0.5 * (panel.hi - panel.lo);
        let w = filon_weights(0.0);
        for i in 0..NODES {
            let rho = c + h * x[i];
            let den = phase.denominator(rho);
            min_den = min_den.min(den);
            let g = f(rho);
            let wi = w[i] * h;
            for (a, gi) in acc.iter_mut().zip(&g) {
                *a += wi * gi;
            }
            mass += wi.norm() * sup_norm(&g);
        }
        return Ok(PanelResult {
            value: acc,
            mass,
            min_den,
        });
    }
    let sa = phase.phase(panel.lo);
    let sb = phase.phase(panel.hi);
    let sc = 0.5 * (sa + sb);
    let hs = 0.5 * (sb - sa);
    let w = filon_weights(hs);
    for i in 0..NODES {
        let rho = match i {
            0 => panel.lo,
            _ if i == NODES - 1 => panel.hi,
            _ => invert_phase(phase, sc + hs * x[i], panel.lo, panel.hi),
        };
        let den = phase.denominator(rho);
        min_den = min_den.min(den);
        if !(den > 0.0) {
            return Err(Error::DenominatorNotPositive {
                rho,
                drift: phase.drift,
                value: den,
            });
        }
        let g = f(rho);
        let wi = w[i] * hs / (phase.time * den);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += wi * gi;
        }
        mass += wi.norm() * sup_norm(&g);
    }
    let carrier = C64::from_polar(1.0, sc);
    for a in acc.iter_mut() {
        *a *= carrier;
    }
    Ok(PanelResult {
        value: acc,
        mass,
        min_den,
    })
}

fn initial_panels(phase: &PhaseParams, lo: f64, hi: f64, s: &FilonSettings) -> Vec<Panel> {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let mut b = (a + s.max_rho_width).min(hi);
        if phase.time > 0.0 {
            let target = phase.phase(a) + 2.0 * s.max_half_phase;
            if phase.phase(b) > target {
                b = invert_phase(phase, target, a, b);
            }
        }
        if b <= a {
            b = hi;
        }
        out.push(Panel { lo: a, hi: b });
        a = b;
    }
    out
}

fn split(panels: &[Panel], phase: &PhaseParams) -> Vec<Panel> {
    let mut out = Vec::with_capacity(2 * panels.len());
    for p in panels {
        let mid = if phase.time > 0.0 {
            let s = 0.5 * (phase.phase(p.lo) + phase.phase(p.hi));
            invert_phase(phase, s, p.lo, p.hi)
        } else {
            0.5 * (p.lo + p.hi)
        };
        out.push(Panel { lo: p.lo, hi: mid });
        out.push(Panel { lo: mid, hi: p.hi });
    }
    out
}

fn sum_panels<const N: usize, F>(
    f: &F,
    panels: &[Panel],
    phase: &PhaseParams,
) -> Result<PanelResult<[C64; N]>>
where
    F: Fn(f64) -> [C64; N],
{
    let mut parts = Vec::with_capacity(panels.len());
    let mut mass = 0.0;
    let mut min_den = f64::INFINITY;
    for p in panels {
        let r = integrate_panel(f, *p, phase)?;
        parts.push(r.value);
        mass += r.mass;
        min_den = min_den.min(r.min_den);
    }
    Ok(PanelResult {
        value: crate::par::pairwise(&parts),
        mass,
        min_den,
    })
}

/// `∫_{lo}^{hi} f(ρ) e^{iφ(ρ)} dρ` for a vector-valued smooth `f`,
/// refining every panel until two successive estimates agree.
pub fn oscillatory_integral<const N: usize, F>(
    f: F,
    lo: f64,
    hi: f64,
    phase: PhaseParams,
    settings: &FilonSettings,
) -> Result<Outcome<[C64; N]>>
where
    F: Fn(f64) -> [C64; N],
    [C64; N]: Accumulate,
{
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho range",
            reason: format!("need finite lo <= hi, got [{lo}, {hi}]"),
        });
    }
    if !(phase.drift.abs() < 1.0) && phase.time > 0.0 {
        let value = 1.0 - phase.drift.abs();
        return Err(Error::DenominatorNotPositive {
            rho: 0.0,
            drift: phase.drift,
            value,
        });
    }
    let mut panels = initial_panels(&phase, lo, hi, settings);
    let mut prev = sum_panels(&f, &panels, &phase)?;
    let mut evaluations = panels.len() * NODES;
    let mut min_den = prev.min_den;
    for r in 1..=settings.max_refinements {
        panels = split(&panels, &phase);
        let next = sum_panels(&f, &panels, &phase)?;
        evaluations += panels.len() * NODES;
        min_den = min_den.min(next.min_den);
        let mut diff = [C64::default(); N];
        for i in 0..N {
            diff[i] = next.value[i] - prev.value[i];
        }
        let change = sup_norm(&diff);
        let bound = settings.rel_tol * sup_norm(&next.value).max(1e-6 * next.mass);
        if change <= bound || change <= 1e-15 * next.mass {
            return Ok(Outcome {
                value: next.value,
                min_denominator: min_den,
                refinements: r,
                evaluations,
            });
        }
        if r == settings.max_refinements {
            return Err(Error::QuadratureNonConvergence {
                refinements: r,
                estimate: sup_norm(&next.value),
                change,
                bound,
            });
        }
        prev = next;
    }
    unreachable!("loop returns on its last iteration")
}

/// `∫_0^{ρ_max} ρⁿ F(ρ) e^{iTρ(√(1+ρ²) − μ)} dρ` for a scalar integrand.
pub fn oscillatory_rho_integral<F>(
    f: F,
    n_power: i32,
    phase: PhaseParams,
    rho_max: f64,
    settings: &FilonSettings,
) -> Result<Outcome<C64>>
where
    F: Fn(f64) -> C64,
{
    let out = oscillatory_integral(
        |rho| [f(rho) * rho.powi(n_power)],
        0.0,
        rho_max,
        phase,
        settings,
    )?;
    Ok(Outcome {
        value: out.value[0],
        min_denominator: out.min_denominator,
        refinements: out.refinements,
        evaluations: out.evaluations,
    })
}
