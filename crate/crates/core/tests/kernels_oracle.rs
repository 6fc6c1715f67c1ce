//! Filon kernels against the grid propagator on a moderate box.

mod common;

use common::{rel_err, SpectralOracle};
use num_complex::Complex64 as C64;
use tracer_core::memory::{kernel_d1, kernel_d2, BallisticPath, Beta0Spectrum, KernelSettings};
use tracer_core::vec3;
use tracer_core::ModelParams;

fn setup() -> (ModelParams, BallisticPath) {
    let p = ModelParams::default();
    let path = BallisticPath {
        position: [0.0; 3],
        momentum: [0.0, 0.0, 1.6],
        mass: p.particle_mass,
    };
    (p, path)
}

#[test]
fn d2_matches_grid_propagator() {
    let (p, path) = setup();
    let oracle = SpectralOracle::new(96, 64.0, &p);
    let v = p.velocity(path.momentum);
    for t in [0.5, 2.0, 4.0] {
        let q = kernel_d2(t, &path, &p, &KernelSettings::default()).unwrap().value;
        let o = oracle.d2(v, t);
        assert!(rel_err(q[2], o[2]) < 1e-6, "t={t}: {q:?} vs {o:?}");
        assert!(q[0].abs() + q[1].abs() < 1e-12 * o[2].abs());
    }
}

#[test]
fn d1_matches_grid_propagator_off_axis() {
    let (p, path) = setup();
    // spacing 0.5 resolves the Gaussian data well past its spectral cutoff
    let oracle = SpectralOracle::new(128, 64.0, &p);
    let v = p.velocity(path.momentum);
    let (amp, width, offset) = (C64::new(0.2, -0.1), 1.2, [0.5, -1.0, 1.5]);
    let h0 = oracle.gaussian(amp, width, offset);
    let beta0 = Beta0Spectrum::Gaussian {
        re: amp.re,
        im: amp.im,
        width,
        offset,
    };
    for t in [0.0, 1.0, 3.0] {
        let q = kernel_d1(t, &path, &beta0, &p, &KernelSettings::default()).unwrap().value;
        let o = oracle.d1(&h0, v, t);
        let err = vec3::norm(vec3::sub(q, o)) / vec3::norm(o);
        assert!(err < 1e-6, "t={t}: {q:?} vs {o:?} ({err:.2e})");
    }
}
