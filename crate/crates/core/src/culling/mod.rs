//! View frusta, the k-sigma Gaussian/frustum test and per-view sparsity sets.

mod sparsity;

use nalgebra::{Matrix3, Vector3};

use crate::scene::{CameraView, GaussianAttributes, Geometry, Scene};
use crate::{Error, Result};

pub use sparsity::{read_sets, sparsity_stats, write_sets, CdfPoint, SparsityReport, SparsitySet};

/// Default culling radius in standard deviations.
pub const DEFAULT_K: f64 = 3.0;

/// Half-space `normal . x + offset >= 0`, `normal` unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.offset
    }
}

/// Six inward-facing planes in world space, ordered left, right, top,
/// bottom, near, far.
#[derive(Clone, Debug, PartialEq)]
pub struct Frustum {
    pub planes: [Plane; 6],
}

impl Frustum {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) >= 0.0)
    }
}

/// The frustum bounding pixels `[0, width] x [0, height]` between the near
/// and far depths.
pub fn frustum_from_view(view: &CameraView) -> Result<Frustum> {
    view.validate()?;
    let [fx, fy] = view.focal;
    let [cx, cy] = view.principal_point;
    let (w, h) = (view.width as f64, view.height as f64);
    // camera-space planes; all side planes pass through the camera center
    let cam_planes = [
        (Vector3::new(fx, 0.0, cx), 0.0),
        (Vector3::new(-fx, 0.0, w - cx), 0.0),
        (Vector3::new(0.0, fy, cy), 0.0),
        (Vector3::new(0.0, -fy, h - cy), 0.0),
        (Vector3::new(0.0, 0.0, 1.0), -view.near),
        (Vector3::new(0.0, 0.0, -1.0), view.far),
    ];
    let rot = view.rotation();
    let t = view.translation();
    let planes = cam_planes.map(|(n, d)| {
        let len = n.norm();
        let (n, d) = (n / len, d / len);
        // n . (R x + t) + d  =  (R^T n) . x + (n . t + d)
        Plane { normal: rot.transpose() * n, offset: n.dot(&t) + d }
    });
    Ok(Frustum { planes })
}

/// Whether the k-sigma ellipsoid of `g` reaches the inside of every plane.
/// Exact per plane, so conservative (a superset) for the whole frustum.
pub fn geometry_in_frustum(g: &Geometry, f: &Frustum, k: f64) -> bool {
    ellipsoid_in_frustum(&g.center(), &g.rotation_matrix(), &g.scale(), f, k)
}

/// The same test for an ellipsoid with center `mu`, axes `rot` and
/// per-axis standard deviations `scale`.
pub fn ellipsoid_in_frustum(mu: &Vector3<f64>, rot: &Matrix3<f64>, scale: &Vector3<f64>, f: &Frustum, k: f64) -> bool {
    f.planes.iter().all(|pl| {
        // support radius of the ellipsoid along the plane normal: k * |S R^T n|
        let local = rot.transpose() * pl.normal;
        let r = k * local.component_mul(scale).norm();
        pl.signed_distance(mu) >= -r
    })
}

pub fn gaussian_in_frustum(g: &GaussianAttributes, f: &Frustum, k: f64) -> bool {
    geometry_in_frustum(&g.geometry(), f, k)
}

/// Culls from the selection-critical attributes alone.
pub fn cull_geometries(geoms: &[Geometry], view: &CameraView, k: f64) -> Result<SparsitySet> {
    check_k(k)?;
    let f = frustum_from_view(view)?;
    let indices = geoms
        .iter()
        .enumerate()
        .filter(|(_, g)| geometry_in_frustum(g, &f, k))
        .map(|(i, _)| i as u32)
        .collect();
    Ok(SparsitySet::from_sorted(view.id, indices, geoms.len() as u64))
}

pub fn cull(scene: &Scene, view: &CameraView, k: f64) -> Result<SparsitySet> {
    check_k(k)?;
    let f = frustum_from_view(view)?;
    let indices = scene
        .gaussians
        .iter()
        .enumerate()
        .filter(|(_, g)| gaussian_in_frustum(g, &f, k))
        .map(|(i, _)| i as u32)
        .collect();
    Ok(SparsitySet::from_sorted(view.id, indices, scene.len() as u64))
}

/// Culls every view of the scene.
pub fn cull_all(scene: &Scene, k: f64) -> Result<Vec<SparsitySet>> {
    scene.views.iter().map(|v| cull(scene, v, k)).collect()
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("culling radius k must be positive, got {k}")))
    }
}
