use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole camera. Camera space is x right, y down, z forward; pixel `(u, v)`
/// covers `[u, u + 1) x [v, v + 1)` with centers at half-integers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub id: u64,
    /// Row-major rigid transform from world to camera coordinates.
    pub world_to_camera: [[f64; 4]; 4],
    pub focal: [f64; 2],
    pub principal_point: [f64; 2],
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
}

impl CameraView {
    /// Camera at `eye` looking at `target`. `up` only needs to be non-parallel
    /// to the viewing direction.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        id: u64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Self {
        let forward = (target - eye).normalize();
        // y points down in camera space
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(rot * eye);
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = rot[(r, c)];
            }
            m[r][3] = t[r];
        }
        m[3][3] = 1.0;
        Self {
            id,
            world_to_camera: m,
            focal: [focal, focal],
            principal_point: [width as f64 / 2.0, height as f64 / 2.0],
            width,
            height,
            near,
            far,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(Error::config(format!(
                "view {}: need 0 < near < far, got near={} far={}",
                self.id, self.near, self.far
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::config(format!("view {}: empty image", self.id)));
        }
        if !(self.focal[0] > 0.0 && self.focal[1] > 0.0)
            || !self.focal.iter().all(|f| f.is_finite())
        {
            return Err(Error::config(format!(
                "view {}: degenerate focal length {:?}",
                self.id, self.focal
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let m = &self.world_to_camera;
        Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
    }

    pub fn translation(&self) -> Vector3<f64> {
        let m = &self.world_to_camera;
        Vector3::new(m[0][3], m[1][3], m[2][3])
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let m = &self.world_to_camera;
        Matrix4::from_fn(|r, c| m[r][c])
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }

    /// Unit viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation().transpose() * Vector3::z()
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    /// Pinhole projection of a camera-space point; `None` when `z <= 0`.
    pub fn project(&self, pc: &Vector3<f64>) -> Option<[f64; 2]> {
        if pc.z <= 0.0 {
            return None;
        }
        Some([
            self.focal[0] * pc.x / pc.z + self.principal_point[0],
            self.focal[1] * pc.y / pc.z + self.principal_point[1],
        ])
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Same view with the camera moved by `offset` in world space.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        let t = self.translation() - self.rotation() * offset;
        for r in 0..3 {
            out.world_to_camera[r][3] = t[r];
        }
        out
    }
}
