//! `BTF1` field snapshots.
//!
//! Layout, all numbers little-endian:
//!
//! ```text
//! b"BTF1"
//! 12 × f64   N₁ N₂ N₃  L₁ L₂ L₃  M m λ ρ₀ w0 σ
//! N × (f64, f64)   ĥ₁ as (re, im), modes row-major, last index fastest
//! N × (f64, f64)   ĥ₂
//! ```

use crate::error::{Error, Result};
use crate::model::{ModelParams, PotentialSpec};
use crate::spectral::field::FieldState;
use crate::spectral::grid::SpectralGrid;
use num_complex::Complex64 as C64;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

pub const MAGIC: &[u8; 4] = b"BTF1";

pub fn write_snapshot<W: Write>(out: &mut W, field: &FieldState, params: &ModelParams) -> Result<()> {
    let g = field.grid();
    let PotentialSpec::Gaussian { amplitude, width } = params.potential;
    let d = g.dims();
    let b = g.box_len();
    let header = [
        d[0] as f64,
        d[1] as f64,
        d[2] as f64,
        b[0],
        b[1],
        b[2],
        params.particle_mass,
        params.boson_mass,
        params.lambda,
        params.rho0,
        amplitude,
        width,
    ];
    let mut buf = Vec::with_capacity(4 + 8 * (header.len() + 4 * g.len()));
    buf.extend_from_slice(MAGIC);
    for x in header {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for z in field.h1().iter().chain(field.h2()) {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<(FieldState, ModelParams)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 4 + 12 * 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing BTF1 header".into()));
    }
    let f64_at = |pos: usize| f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
    let h: Vec<f64> = (0..12).map(|i| f64_at(4 + 8 * i)).collect();
    let mut dims = [0usize; 3];
    for d in 0..3 {
        if !(h[d] >= 2.0 && h[d].fract() == 0.0 && h[d] < 1e7) {
            return Err(Error::Format(format!("bad mode count {}", h[d])));
        }
        dims[d] = h[d] as usize;
    }
    let grid = Arc::new(SpectralGrid::new(dims, [h[3], h[4], h[5]])?);
    let params = ModelParams::new(h[6], h[7], h[8], h[9], PotentialSpec::gaussian(h[10], h[11]))?;
    let n = grid.len();
    let start = 4 + 12 * 8;
    if bytes.len() != start + 32 * n {
        return Err(Error::Format(format!(
            "expected {} bytes of mode data, found {}",
            32 * n,
            bytes.len() - start
        )));
    }
    let read = |offset: usize| -> Vec<C64> {
        (0..n)
            .map(|i| {
                let p = start + offset + 16 * i;
                C64::new(f64_at(p), f64_at(p + 8))
            })
            .collect()
    };
    let field = FieldState::from_modes(grid, read(0), read(16 * n))?;
    Ok((field, params))
}

pub fn save(path: &Path, field: &FieldState, params: &ModelParams) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(&mut f, field, params)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(FieldState, ModelParams)> {
    read_snapshot(&mut std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::field::steady_state_field;

    #[test]
    fn roundtrip() {
        let grid = Arc::new(SpectralGrid::new([4, 6, 8], [5.0, 6.0, 7.0]).unwrap());
        let p = ModelParams::default();
        let f = steady_state_field([0.1, 0.2, 0.3], &p, grid).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, &p).unwrap();
        assert_eq!(&buf[..4], b"BTF1");
        let (g, q) = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(g, f);
        assert_eq!(q, p);
        buf.pop();
        assert!(matches!(read_snapshot(&mut buf.as_slice()), Err(Error::Format(_))));
    }
}
