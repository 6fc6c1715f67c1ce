//! Unnormalized 3D FFT on the grid layout, applied axis by axis.

use crate::par;
use crate::spectral::grid::SpectralGrid;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(grid: &SpectralGrid) -> Self {
        let dims = grid.dims();
        let mut planner = FftPlanner::new();
        Fft3 {
            dims,
            forward: std::array::from_fn(|d| planner.plan_fft_forward(dims[d])),
            inverse: std::array::from_fn(|d| planner.plan_fft_inverse(dims[d])),
        }
    }

    /// `X(k) = Σ_x x e^{-ik·x}`
    pub fn forward(&self, data: &mut [C64]) {
        self.apply(data, &self.forward);
    }

    /// `x = Σ_k X(k) e^{ik·x}` (no `1/N` factor)
    pub fn inverse(&self, data: &mut [C64]) {
        self.apply(data, &self.inverse);
    }

    fn apply(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [n0, n1, n2] = self.dims;
        assert_eq!(data.len(), n0 * n1 * n2);

        // last axis: contiguous rows
        par::for_each_chunk(data, n2 * n1, |_, plane| {
            let mut scratch = vec![C64::default(); plans[2].get_inplace_scratch_len()];
            plans[2].process_with_scratch(plane, &mut scratch);
        });

        // middle axis: strided within each plane
        par::for_each_chunk(data, n1 * n2, |_, plane| {
            let mut line = vec![C64::default(); n1];
            let mut scratch = vec![C64::default(); plans[1].get_inplace_scratch_len()];
            for i2 in 0..n2 {
                for i1 in 0..n1 {
                    line[i1] = plane[i1 * n2 + i2];
                }
                plans[1].process_with_scratch(&mut line, &mut scratch);
                for i1 in 0..n1 {
                    plane[i1 * n2 + i2] = line[i1];
                }
            }
        });

        // first axis: stride n1*n2; transform columns in blocks
        let stride = n1 * n2;
        let columns = par::map_indices(n1, |i1| {
            let mut out = vec![C64::default(); n0 * n2];
            let mut line = vec![C64::default(); n0];
            let mut scratch = vec![C64::default(); plans[0].get_inplace_scratch_len()];
            for i2 in 0..n2 {
                for i0 in 0..n0 {
                    line[i0] = data[i0 * stride + i1 * n2 + i2];
                }
                plans[0].process_with_scratch(&mut line, &mut scratch);
                for i0 in 0..n0 {
                    out[i0 * n2 + i2] = line[i0];
                }
            }
            out
        });
        for (i1, col) in columns.into_iter().enumerate() {
            for i0 in 0..n0 {
                let dst = i0 * stride + i1 * n2;
                data[dst..dst + n2].copy_from_slice(&col[i0 * n2..(i0 + 1) * n2]);
            }
        }
    }
}
