//! Fixed-size vector/matrix helpers.
//!
//! Velocities live in at most three components; grids with d = 2 simply keep
//! the third component at zero, which lets every routine work on `[f64; 3]`
//! without generics.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const ZERO_VEC: Vec3 = [0.0; 3];
pub const ZERO_MAT: Mat3 = [[0.0; 3]; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn add_assign(a: &mut Vec3, b: &Vec3) {
    a[0] += b[0];
    a[1] += b[1];
    a[2] += b[2];
}

/// a += s * (v ⊗ w), restricted to the leading `dim` block.
pub fn outer_add_assign(a: &mut Mat3, v: &Vec3, w: &Vec3, s: f64, dim: usize) {
    for (row, &vi) in v.iter().enumerate().take(dim) {
        for (col, &wj) in w.iter().enumerate().take(dim) {
            a[row][col] += s * vi * wj;
        }
    }
}

/// Scaled identity on the leading `dim` block.
pub fn identity(dim: usize, s: f64) -> Mat3 {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(dim) {
        row[i] = s;
    }
    m
}

/// Largest |a - b| entry over the leading `dim` block.
#[cfg_attr(not(test), allow(dead_code))]
pub fn max_abs_diff(a: &Mat3, b: &Mat3, dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst
}
