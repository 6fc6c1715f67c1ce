use crate::error::{Error, Result};
use crate::vec3::Vec3;
use std::f64::consts::PI;

/// Periodic box `[0, L₁) × [0, L₂) × [0, L₃)` with `N₁ × N₂ × N₃` Fourier
/// modes stored row-major (last index fastest) in FFT order.
///
/// Mode `k` carries weight `1/V` in Parseval sums, so that for real `f`, `g`
/// `∫ f g dx = (1/V) Σ_k conj(f̂(k)) ĝ(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    dims: [usize; 3],
    box_len: [f64; 3],
    axes: [Vec<f64>; 3],
}

impl SpectralGrid {
    pub fn new(dims: [usize; 3], box_len: [f64; 3]) -> Result<Self> {
        for (d, &n) in dims.iter().enumerate() {
            if n < 2 || n % 2 != 0 {
                return Err(Error::InvalidParameter {
                    name: "dims",
                    reason: format!("axis {d}: mode count must be even and >= 2, got {n}"),
                });
            }
        }
        for (d, &l) in box_len.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "box",
                    reason: format!("axis {d}: side length must be finite and > 0, got {l}"),
                });
            }
        }
        let axes = std::array::from_fn(|d| {
            let n = dims[d];
            let dk = 2.0 * PI / box_len[d];
            (0..n)
                .map(|i| {
                    let m = if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
                    m as f64 * dk
                })
                .collect()
        });
        Ok(SpectralGrid {
            dims,
            box_len,
            axes,
        })
    }

    /// `n³` modes on a cube of side `side`.
    pub fn cubic(n: usize, side: f64) -> Result<Self> {
        Self::new([n; 3], [side; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn box_len(&self) -> [f64; 3] {
        self.box_len
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.box_len.iter().product()
    }

    pub fn spacing(&self) -> Vec3 {
        std::array::from_fn(|d| self.box_len[d] / self.dims[d] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Parseval weight of one mode.
    pub fn mode_weight(&self) -> f64 {
        1.0 / self.volume()
    }

    /// Wavenumbers along one axis in FFT order.
    pub fn axis(&self, d: usize) -> &[f64] {
        &self.axes[d]
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i2 = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], i2]
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> Vec3 {
        let [i0, i1, i2] = self.unravel(idx);
        [self.axes[0][i0], self.axes[1][i1], self.axes[2][i2]]
    }

    /// Index of the mode at `-k`.
    pub fn mirror(&self, idx: usize) -> usize {
        let i = self.unravel(idx);
        let m = std::array::from_fn(|d| (self.dims[d] - i[d]) % self.dims[d]);
        self.index(m)
    }

    /// Modes that carry field content: `k ≠ 0` and no Nyquist component.
    ///
    /// On the Nyquist planes `k` and `-k` are the same lattice point, so a
    /// real field cannot carry an odd (e.g. gradient or advected) component
    /// there; those modes are held at zero together with `k = 0`.
    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        let i = self.unravel(idx);
        let nyquist = (0..3).any(|d| i[d] == self.dims[d] / 2);
        idx != 0 && !nyquist
    }

    /// Largest `|k|` among active modes.
    pub fn k_max(&self) -> f64 {
        let mut s = 0.0;
        for d in 0..3 {
            let kd = 2.0 * PI / self.box_len[d] * (self.dims[d] / 2 - 1) as f64;
            s += kd * kd;
        }
        s.sqrt()
    }

    /// Largest wavenumber resolved along every axis.
    pub fn k_axis_max(&self) -> f64 {
        (0..3)
            .map(|d| 2.0 * PI / self.box_len[d] * (self.dims[d] / 2 - 1) as f64)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_half_width(&self) -> f64 {
        0.5 * self.box_len.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Real-space point of the grid node with FFT-order index `idx`, mapped
    /// to the minimal-image cell centred on the origin.
    pub fn centered_position(&self, idx: usize) -> Vec3 {
        let i = self.unravel(idx);
        std::array::from_fn(|d| {
            let n = self.dims[d];
            let m = if i[d] < n / 2 { i[d] as i64 } else { i[d] as i64 - n as i64 };
            m as f64 * self.box_len[d] / n as f64
        })
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        self.dims == other.dims && self.box_len == other.box_len
    }
}
