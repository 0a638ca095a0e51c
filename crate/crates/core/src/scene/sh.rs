//! Real spherical-harmonic basis up to degree 3 and its gradient with
//! respect to the (unit) direction.
//!
//! Color convention: `channel = max(0, sum_k coeff_k * Y_k(dir) + 0.5)`.

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of basis functions used for `degree`.
pub fn basis_len(degree: u8) -> usize {
    let d = degree.min(3) as usize + 1;
    d * d
}

/// Basis values `Y_k(d)` and their partial derivatives with respect to the
/// components of `d`, treating the basis as a polynomial in `(x, y, z)`.
/// Entries beyond `basis_len(degree)` are zero.
pub fn basis_with_grad(d: [f64; 3], degree: u8) -> ([f64; 16], [[f64; 3]; 16]) {
    let [x, y, z] = d;
    let mut v = [0.0; 16];
    let mut g = [[0.0; 3]; 16];
    v[0] = SH_C0;
    if degree >= 1 {
        v[1] = -SH_C1 * y;
        g[1] = [0.0, -SH_C1, 0.0];
        v[2] = SH_C1 * z;
        g[2] = [0.0, 0.0, SH_C1];
        v[3] = -SH_C1 * x;
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        v[4] = SH_C2[0] * x * y;
        g[4] = [SH_C2[0] * y, SH_C2[0] * x, 0.0];
        v[5] = SH_C2[1] * y * z;
        g[5] = [0.0, SH_C2[1] * z, SH_C2[1] * y];
        v[6] = SH_C2[2] * (2.0 * zz - xx - yy);
        g[6] = [SH_C2[2] * -2.0 * x, SH_C2[2] * -2.0 * y, SH_C2[2] * 4.0 * z];
        v[7] = SH_C2[3] * x * z;
        g[7] = [SH_C2[3] * z, 0.0, SH_C2[3] * x];
        v[8] = SH_C2[4] * (xx - yy);
        g[8] = [SH_C2[4] * 2.0 * x, SH_C2[4] * -2.0 * y, 0.0];
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        v[9] = SH_C3[0] * y * (3.0 * xx - yy);
        g[9] = [SH_C3[0] * 6.0 * x * y, SH_C3[0] * (3.0 * xx - 3.0 * yy), 0.0];
        v[10] = SH_C3[1] * x * y * z;
        g[10] = [SH_C3[1] * y * z, SH_C3[1] * x * z, SH_C3[1] * x * y];
        v[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
        g[11] = [
            SH_C3[2] * -2.0 * x * y,
            SH_C3[2] * (4.0 * zz - xx - 3.0 * yy),
            SH_C3[2] * 8.0 * y * z,
        ];
        v[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
        g[12] = [
            SH_C3[3] * -6.0 * x * z,
            SH_C3[3] * -6.0 * y * z,
            SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ];
        v[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
        g[13] = [
            SH_C3[4] * (4.0 * zz - 3.0 * xx - yy),
            SH_C3[4] * -2.0 * x * y,
            SH_C3[4] * 8.0 * x * z,
        ];
        v[14] = SH_C3[5] * z * (xx - yy);
        g[14] = [SH_C3[5] * 2.0 * x * z, SH_C3[5] * -2.0 * y * z, SH_C3[5] * (xx - yy)];
        v[15] = SH_C3[6] * x * (xx - 3.0 * yy);
        g[15] = [SH_C3[6] * (3.0 * xx - 3.0 * yy), SH_C3[6] * -6.0 * x * y, 0.0];
    }
    (v, g)
}
