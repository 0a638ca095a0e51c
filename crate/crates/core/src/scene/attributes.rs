use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Learnable parameters per Gaussian.
pub const PARAMS_PER_GAUSSIAN: usize = 59;
/// Spherical-harmonic coefficients per color channel (degrees 0..=3).
pub const SH_COEFFS_PER_CHANNEL: usize = 16;
pub const SH_FLOATS: usize = SH_COEFFS_PER_CHANNEL * 3;

/// Flat parameter offsets. The first [`SELECTION_CRITICAL_FLOATS`] entries are
/// exactly the attributes the frustum test reads.
pub mod offset {
    pub const POSITION: usize = 0;
    pub const LOG_SCALE: usize = 3;
    pub const ROTATION: usize = 6;
    pub const SH: usize = 10;
    pub const OPACITY: usize = 58;
}

pub const SELECTION_CRITICAL_FLOATS: usize = 10;
pub const NON_CRITICAL_FLOATS: usize = PARAMS_PER_GAUSSIAN - SELECTION_CRITICAL_FLOATS;

/// One Gaussian, stored unconstrained: scales as logs, opacity as a logit.
///
/// `sh_coeffs` is coefficient-major: entry `k * 3 + c` is coefficient `k`
/// of color channel `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianAttributes {
    pub position: [f32; 3],
    pub log_scale: [f32; 3],
    /// Quaternion in w, x, y, z order. Not necessarily unit length.
    pub rotation: [f32; 4],
    pub sh_coeffs: [f32; SH_FLOATS],
    pub opacity_logit: f32,
}

impl Default for GaussianAttributes {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            log_scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
            sh_coeffs: [0.0; SH_FLOATS],
            opacity_logit: 0.0,
        }
    }
}

/// The selection-critical slice of a Gaussian: position, log-scale, rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub position: [f32; 3],
    pub log_scale: [f32; 3],
    pub rotation: [f32; 4],
}

impl Geometry {
    pub fn from_floats(f: &[f32; SELECTION_CRITICAL_FLOATS]) -> Self {
        Self {
            position: [f[0], f[1], f[2]],
            log_scale: [f[3], f[4], f[5]],
            rotation: [f[6], f[7], f[8], f[9]],
        }
    }

    pub fn to_floats(&self) -> [f32; SELECTION_CRITICAL_FLOATS] {
        let mut out = [0.0; SELECTION_CRITICAL_FLOATS];
        out[0..3].copy_from_slice(&self.position);
        out[3..6].copy_from_slice(&self.log_scale);
        out[6..10].copy_from_slice(&self.rotation);
        out
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.position[0] as f64, self.position[1] as f64, self.position[2] as f64)
    }

    pub fn scale(&self) -> Vector3<f64> {
        Vector3::new(
            (self.log_scale[0] as f64).exp(),
            (self.log_scale[1] as f64).exp(),
            (self.log_scale[2] as f64).exp(),
        )
    }

    /// Rotation matrix from the renormalized quaternion.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_matrix(&self.rotation.map(|x| x as f64))
    }
}

/// Rotation matrix of `q` (w, x, y, z) after renormalization.
pub fn rotation_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let q = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    *q.to_rotation_matrix().matrix()
}

impl GaussianAttributes {
    pub fn geometry(&self) -> Geometry {
        Geometry { position: self.position, log_scale: self.log_scale, rotation: self.rotation }
    }

    pub fn set_geometry(&mut self, g: &Geometry) {
        self.position = g.position;
        self.log_scale = g.log_scale;
        self.rotation = g.rotation;
    }

    pub fn to_params(&self) -> [f32; PARAMS_PER_GAUSSIAN] {
        let mut p = [0.0; PARAMS_PER_GAUSSIAN];
        p[offset::POSITION..offset::POSITION + 3].copy_from_slice(&self.position);
        p[offset::LOG_SCALE..offset::LOG_SCALE + 3].copy_from_slice(&self.log_scale);
        p[offset::ROTATION..offset::ROTATION + 4].copy_from_slice(&self.rotation);
        p[offset::SH..offset::SH + SH_FLOATS].copy_from_slice(&self.sh_coeffs);
        p[offset::OPACITY] = self.opacity_logit;
        p
    }

    pub fn from_params(p: &[f32; PARAMS_PER_GAUSSIAN]) -> Self {
        let mut g = Self::default();
        g.position.copy_from_slice(&p[offset::POSITION..offset::POSITION + 3]);
        g.log_scale.copy_from_slice(&p[offset::LOG_SCALE..offset::LOG_SCALE + 3]);
        g.rotation.copy_from_slice(&p[offset::ROTATION..offset::ROTATION + 4]);
        g.sh_coeffs.copy_from_slice(&p[offset::SH..offset::SH + SH_FLOATS]);
        g.opacity_logit = p[offset::OPACITY];
        g
    }

    /// Parameters widened to f64 for rendering.
    pub fn to_params_f64(&self) -> [f64; PARAMS_PER_GAUSSIAN] {
        self.to_params().map(|x| x as f64)
    }

    /// The 49 non-critical floats (SH then opacity), the offloaded record payload.
    pub fn non_critical(&self) -> [f32; NON_CRITICAL_FLOATS] {
        let p = self.to_params();
        let mut out = [0.0; NON_CRITICAL_FLOATS];
        out.copy_from_slice(&p[SELECTION_CRITICAL_FLOATS..]);
        out
    }

    /// Reassemble from a device-resident geometry slice and an offloaded record.
    pub fn from_parts(geometry: &Geometry, record: &[f32; NON_CRITICAL_FLOATS]) -> Self {
        let mut p = [0.0; PARAMS_PER_GAUSSIAN];
        p[..SELECTION_CRITICAL_FLOATS].copy_from_slice(&geometry.to_floats());
        p[SELECTION_CRITICAL_FLOATS..].copy_from_slice(record);
        Self::from_params(&p)
    }
}

/// Byte layout of the split parameter storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeLayout {
    pub selection_critical_floats: u64,
    pub non_critical_floats: u64,
    pub param_bytes_per_float: u64,
    pub offload_record_bytes: u64,
    pub grad_record_bytes: u64,
}

/// Records are padded to whole cache lines.
pub const RECORD_ALIGN: u64 = 64;

pub fn pad_to(bytes: u64, align: u64) -> u64 {
    bytes.div_ceil(align) * align
}

impl Default for AttributeLayout {
    fn default() -> Self {
        let f = 4;
        Self {
            selection_critical_floats: SELECTION_CRITICAL_FLOATS as u64,
            non_critical_floats: NON_CRITICAL_FLOATS as u64,
            param_bytes_per_float: f,
            offload_record_bytes: pad_to(NON_CRITICAL_FLOATS as u64 * f, RECORD_ALIGN),
            grad_record_bytes: pad_to(PARAMS_PER_GAUSSIAN as u64 * f, RECORD_ALIGN),
        }
    }
}

impl AttributeLayout {
    /// Bytes of the device-resident slice of one Gaussian (unpadded).
    pub fn selection_critical_bytes(&self) -> u64 {
        self.selection_critical_floats * self.param_bytes_per_float
    }

    pub fn total_floats(&self) -> u64 {
        self.selection_critical_floats + self.non_critical_floats
    }
}
