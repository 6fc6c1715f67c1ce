//! Sampled kernel tables with cubic interpolation and decay reports.

use crate::error::{Error, Result};
use crate::memory::kernels::{kernel_d1, kernel_d2, kernel_k, Beta0Spectrum, KernelSettings, PathView};
use crate::model::ModelParams;
use crate::vec3::{self, Vec3};
use serde::Serialize;
use std::io::Write;

pub type Mat3 = [[f64; 3]; 3];

/// `D₁`, `D₂` on a time grid and `K` on the lower triangle `s_j ≤ t_i` of
/// the same grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub times: Vec<f64>,
    pub d1: Vec<Vec3>,
    pub d2: Vec<Vec3>,
    /// `k[i][j] = K(t_i, t_j)` for `j ≤ i`.
    pub k: Vec<Vec<Mat3>>,
    pub rho0: f64,
}

/// Weighted suprema over a table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayReport {
    /// `sup (1+t)³|D₁(t)|`
    pub d1: f64,
    /// `sup (1+t)³|D₂(t)|/ρ₀`
    pub d2: f64,
    /// `sup (1+t−s)³‖K(t,s)‖_F`
    pub k: f64,
}

fn frobenius(m: &Mat3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

impl KernelTable {
    /// Evaluate all kernels along `path` at the given increasing times.
    /// With `with_k = false` the `K` triangle is left empty.
    pub fn build<P: PathView + Sync + ?Sized>(
        times: &[f64],
        path: &P,
        beta0: &Beta0Spectrum,
        params: &ModelParams,
        settings: &KernelSettings,
        with_k: bool,
    ) -> Result<Self> {
        if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
            return Err(Error::InvalidParameter {
                name: "times",
                reason: "need at least two strictly increasing, nonnegative times".into(),
            });
        }
        let mut d1 = Vec::with_capacity(times.len());
        let mut d2 = Vec::with_capacity(times.len());
        let mut k = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            d1.push(kernel_d1(t, path, beta0, params, settings)?.value);
            d2.push(kernel_d2(t, path, params, settings)?.value);
            if with_k {
                let row = times[..=i]
                    .iter()
                    .map(|&s| kernel_k(t, s, path, params, settings).map(|v| v.value))
                    .collect::<Result<Vec<_>>>()?;
                k.push(row);
            }
        }
        Ok(KernelTable {
            times: times.to_vec(),
            d1,
            d2,
            k,
            rho0: params.rho0,
        })
    }

    pub fn has_k(&self) -> bool {
        !self.k.is_empty()
    }

    pub fn d1_at(&self, t: f64) -> Vec3 {
        interp_vec(&self.times, &self.d1, t)
    }

    pub fn d2_at(&self, t: f64) -> Vec3 {
        interp_vec(&self.times, &self.d2, t)
    }

    /// `K(t, s)`: cubic in `s` along four neighbouring rows, then cubic in
    /// `t`. `s` is clamped to each row's diagonal.
    pub fn k_at(&self, t: f64, s: f64) -> Option<Mat3> {
        if !self.has_k() {
            return None;
        }
        let rows = stencil(&self.times, t);
        let vals: Vec<[f64; 9]> = rows
            .iter()
            .map(|&i| {
                let ts = &self.times[..=i];
                let flat: Vec<[f64; 9]> = self.k[i].iter().map(flatten).collect();
                interp(ts, &flat, s.min(self.times[i]))
            })
            .collect();
        let tt: Vec<f64> = rows.iter().map(|&i| self.times[i]).collect();
        Some(unflatten(lagrange(&tt, &vals, t)))
    }

    pub fn decay_report(&self) -> DecayReport {
        let mut r = DecayReport { d1: 0.0, d2: 0.0, k: 0.0 };
        for (i, &t) in self.times.iter().enumerate() {
            let w = (1.0 + t).powi(3);
            r.d1 = r.d1.max(w * vec3::norm(self.d1[i]));
            if self.rho0 > 0.0 {
                r.d2 = r.d2.max(w * vec3::norm(self.d2[i]) / self.rho0);
            }
            if let Some(row) = self.k.get(i) {
                for (j, m) in row.iter().enumerate() {
                    r.k = r.k.max((1.0 + t - self.times[j]).powi(3) * frobenius(m));
                }
            }
        }
        r
    }

    /// CSV with columns `t, D1_1..D1_3, D2_1..D2_3`.
    pub fn write_d_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,D1_1,D1_2,D1_3,D2_1,D2_2,D2_3")?;
        for (i, t) in self.times.iter().enumerate() {
            let [a, b, c] = self.d1[i];
            let [d, e, f] = self.d2[i];
            writeln!(out, "{t:.16e},{a:.16e},{b:.16e},{c:.16e},{d:.16e},{e:.16e},{f:.16e}")?;
        }
        Ok(())
    }

    /// CSV with columns `t, s, K11..K33` (row-major) over the triangle.
    pub fn write_k_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "t,s")?;
        for j in 1..=3 {
            for l in 1..=3 {
                write!(out, ",K{j}{l}")?;
            }
        }
        writeln!(out)?;
        for (i, row) in self.k.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                write!(out, "{:.16e},{:.16e}", self.times[i], self.times[j])?;
                for x in m.iter().flatten() {
                    write!(out, ",{x:.16e}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

fn flatten(m: &Mat3) -> [f64; 9] {
    std::array::from_fn(|c| m[c / 3][c % 3])
}

fn unflatten(v: [f64; 9]) -> Mat3 {
    std::array::from_fn(|j| std::array::from_fn(|l| v[3 * j + l]))
}

/// Indices of up to four samples surrounding `t`.
fn stencil(xs: &[f64], t: f64) -> Vec<usize> {
    let n = xs.len();
    if n <= 4 {
        return (0..n).collect();
    }
    let i = xs.partition_point(|&x| x <= t).clamp(1, n - 1);
    let lo = i.saturating_sub(2).min(n - 4);
    (lo..lo + 4).collect()
}

fn lagrange<const N: usize>(xs: &[f64], ys: &[[f64; N]], t: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for (i, (&xi, yi)) in xs.iter().zip(ys).enumerate() {
        let mut l = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if j != i {
                l *= (t - xj) / (xi - xj);
            }
        }
        for (o, y) in out.iter_mut().zip(yi) {
            *o += l * y;
        }
    }
    out
}

fn interp<const N: usize>(xs: &[f64], ys: &[[f64; N]], t: f64) -> [f64; N] {
    if xs.len() == 1 {
        return ys[0];
    }
    let idx = stencil(xs, t);
    let x: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let y: Vec<[f64; N]> = idx.iter().map(|&i| ys[i]).collect();
    lagrange(&x, &y, t)
}

fn interp_vec(xs: &[f64], ys: &[Vec3], t: f64) -> Vec3 {
    interp(xs, ys, t)
}
