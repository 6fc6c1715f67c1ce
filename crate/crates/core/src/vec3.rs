//! Small helpers for `[f64; 3]` vectors.

pub type Vec3 = [f64; 3];

pub const ZERO: Vec3 = [0.0; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// `a + s * b`
#[inline]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn is_finite(a: Vec3) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Orthonormal frame `[e1, e2, e3]` with `e3` along `axis`.
///
/// A zero axis yields the lab frame.
pub fn frame_along(axis: Vec3) -> [Vec3; 3] {
    let n = norm(axis);
    if n == 0.0 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let e3 = scale(axis, 1.0 / n);
    // pick the lab axis least aligned with e3
    let helper = if e3[0].abs() <= e3[1].abs() && e3[0].abs() <= e3[2].abs() {
        [1.0, 0.0, 0.0]
    } else if e3[1].abs() <= e3[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = {
        let c = cross(helper, e3);
        scale(c, 1.0 / norm(c))
    };
    let e2 = cross(e3, e1);
    [e1, e2, e3]
}

/// True when `a` and `b` are parallel or antiparallel to relative `tol`
/// (zero vectors count as parallel to anything).
pub fn collinear(a: Vec3, b: Vec3, tol: f64) -> bool {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return true;
    }
    norm(cross(a, b)) <= tol * na * nb
}
