//! Differentiable splat rasterizer evaluated per pixel in `f64`.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Image;
use crate::culling::{ellipsoid_in_frustum, frustum_from_view, SparsitySet};
use crate::scene::sh::{basis_len, basis_with_grad};
use crate::scene::{offset, rotation_matrix, CameraView, Scene, PARAMS_PER_GAUSSIAN};
use crate::{Error, Result};

/// All 59 parameters of one Gaussian in storage order.
pub type Params = [f64; PARAMS_PER_GAUSSIAN];

/// Added to every projected covariance, in pixels squared.
pub const COV_REGULARIZER: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub sh_degree: u8,
    /// Splats are truncated beyond this Mahalanobis radius; also the
    /// culling radius used to decide which Gaussians are rasterized.
    pub sigma_cutoff: f64,
    pub background: [f64; 3],
    /// Evaluate every Gaussian at every pixel instead of only inside its
    /// screen-space bounding box. Same image, slower.
    pub per_pixel: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { sh_degree: 3, sigma_cutoff: 3.0, background: [0.0; 3], per_pixel: false }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > 3 {
            return Err(Error::config(format!("sh_degree must be 0..=3, got {}", self.sh_degree)));
        }
        if !(self.sigma_cutoff > 0.0 && self.sigma_cutoff.is_finite()) {
            return Err(Error::config(format!("sigma_cutoff must be positive, got {}", self.sigma_cutoff)));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-Gaussian projection state shared by the forward and backward passes.
struct Prep {
    local: usize,
    mu_c: Vector3<f64>,
    mean2d: Vector2<f64>,
    j: Matrix2x3<f64>,
    m: Matrix2x3<f64>,
    cov3: Matrix3<f64>,
    conic: Matrix2<f64>,
    rot: Matrix3<f64>,
    scale: Vector3<f64>,
    qhat: [f64; 4],
    qnorm: f64,
    sig: f64,
    raw_color: [f64; 3],
    color: [f64; 3],
    dir: Vector3<f64>,
    dir_len: f64,
    basis: [f64; 16],
    basis_grad: [[f64; 3]; 16],
    /// Inclusive pixel ranges `x0..=x1`, `y0..=y1`; empty when `x0 > x1`.
    bbox: (i64, i64, i64, i64),
}

#[derive(Clone, Copy)]
struct Contrib {
    prep: u32,
    alpha: f64,
    t: f64,
}

/// A forward pass kept for differentiation.
pub struct Rendered {
    pub image: Image,
    /// Input positions of the Gaussians that passed the frustum test.
    pub visible: Vec<usize>,
    preps: Vec<Prep>,
    lists: Vec<Vec<Contrib>>,
    sh_degree: u8,
    background: [f64; 3],
}

fn prepare(local: usize, p: &Params, view: &CameraView, cfg: &RenderConfig) -> Prep {
    let w = view.rotation();
    let mu = Vector3::new(p[offset::POSITION], p[offset::POSITION + 1], p[offset::POSITION + 2]);
    let mu_c = w * mu + view.translation();
    let scale = Vector3::new(
        p[offset::LOG_SCALE].exp(),
        p[offset::LOG_SCALE + 1].exp(),
        p[offset::LOG_SCALE + 2].exp(),
    );
    let q = [p[offset::ROTATION], p[offset::ROTATION + 1], p[offset::ROTATION + 2], p[offset::ROTATION + 3]];
    let qnorm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let qhat = q.map(|x| x / qnorm);
    let rot = rotation_matrix(&q);
    let l = rot * Matrix3::from_diagonal(&scale);
    let cov3 = l * l.transpose();

    let [fx, fy] = view.focal;
    let (x, y, z) = (mu_c.x, mu_c.y, mu_c.z);
    let j = Matrix2x3::new(fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z));
    let m = j * w;
    let cov2 = m * cov3 * m.transpose() + Matrix2::identity() * COV_REGULARIZER;
    let conic = cov2.try_inverse().expect("regularized covariance is invertible");
    let mean2d = Vector2::new(fx * x / z + view.principal_point[0], fy * y / z + view.principal_point[1]);

    let v = mu - view.center();
    let dir_len = v.norm();
    let dir = v / dir_len;
    let (basis, basis_grad) = basis_with_grad([dir.x, dir.y, dir.z], cfg.sh_degree);
    let mut raw_color = [0.5; 3];
    for (k, b) in basis.iter().enumerate().take(basis_len(cfg.sh_degree)) {
        for (ch, rc) in raw_color.iter_mut().enumerate() {
            *rc += b * p[offset::SH + 3 * k + ch];
        }
    }
    let color = raw_color.map(|c| c.max(0.0));

    let bbox = if cfg.per_pixel {
        (0, view.width as i64 - 1, 0, view.height as i64 - 1)
    } else {
        let c = cfg.sigma_cutoff;
        let (ex, ey) = (c * cov2[(0, 0)].sqrt(), c * cov2[(1, 1)].sqrt());
        // one pixel of slack; the exact cutoff is applied per pixel
        let x0 = ((mean2d.x - ex - 0.5).floor() as i64).max(0);
        let x1 = ((mean2d.x + ex - 0.5).ceil() as i64).min(view.width as i64 - 1);
        let y0 = ((mean2d.y - ey - 0.5).floor() as i64).max(0);
        let y1 = ((mean2d.y + ey - 0.5).ceil() as i64).min(view.height as i64 - 1);
        (x0, x1, y0, y1)
    };

    Prep {
        local,
        mu_c,
        mean2d,
        j,
        m,
        cov3,
        conic,
        rot,
        scale,
        qhat,
        qnorm,
        sig: sigmoid(p[offset::OPACITY]),
        raw_color,
        color,
        dir,
        dir_len,
        basis,
        basis_grad,
        bbox,
    }
}

/// Renders Gaussians given by their parameters. A Gaussian is rasterized
/// only when its `sigma_cutoff` ellipsoid passes the view frustum test and
/// its center lies beyond the near plane; `ids` break depth ties.
pub fn render_params(ids: &[u32], params: &[Params], view: &CameraView, cfg: &RenderConfig) -> Result<Rendered> {
    cfg.validate()?;
    if ids.len() != params.len() {
        return Err(Error::inconsistent("one id per parameter record required"));
    }
    let frustum = frustum_from_view(view)?;
    let mut preps = Vec::new();
    let mut visible = Vec::new();
    for (local, p) in params.iter().enumerate() {
        let mu = Vector3::new(p[0], p[1], p[2]);
        let scale = Vector3::new(p[3].exp(), p[4].exp(), p[5].exp());
        let rot = rotation_matrix(&[p[6], p[7], p[8], p[9]]);
        if !ellipsoid_in_frustum(&mu, &rot, &scale, &frustum, cfg.sigma_cutoff) {
            continue;
        }
        if view.to_camera(&mu).z < view.near {
            continue;
        }
        visible.push(local);
        preps.push(prepare(local, p, view, cfg));
    }
    preps.sort_by(|a, b| a.mu_c.z.total_cmp(&b.mu_c.z).then(ids[a.local].cmp(&ids[b.local])));

    let (w, h) = (view.width as usize, view.height as usize);
    let cut2 = cfg.sigma_cutoff * cfg.sigma_cutoff;
    let mut lists: Vec<Vec<Contrib>> = vec![Vec::new(); w * h];
    for (pi, pr) in preps.iter().enumerate() {
        let (x0, x1, y0, y1) = pr.bbox;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let d = Vector2::new(px as f64 + 0.5, py as f64 + 0.5) - pr.mean2d;
                let q = (d.transpose() * pr.conic * d)[0];
                if q > cut2 {
                    continue;
                }
                let alpha = pr.sig * (-0.5 * q).exp();
                lists[py as usize * w + px as usize].push(Contrib { prep: pi as u32, alpha, t: 0.0 });
            }
        }
    }

    let mut image = Image::new(view.width, view.height);
    for (pix, list) in lists.iter_mut().enumerate() {
        let mut t = 1.0;
        let mut c = [0.0; 3];
        for e in list.iter_mut() {
            e.t = t;
            let col = preps[e.prep as usize].color;
            for ch in 0..3 {
                c[ch] += col[ch] * e.alpha * t;
            }
            t *= 1.0 - e.alpha;
        }
        for ch in 0..3 {
            image.data[3 * pix + ch] = c[ch] + t * cfg.background[ch];
        }
    }
    visible.sort_unstable();
    Ok(Rendered { image, visible, preps, lists, sh_degree: cfg.sh_degree, background: cfg.background })
}

/// Analytic gradients of `sum(loss_grad * image)` for every input record;
/// zero for Gaussians that were not rasterized.
pub fn backward_params(
    rendered: &Rendered,
    params: &[Params],
    view: &CameraView,
    loss_grad: &Image,
) -> Result<Vec<Params>> {
    let img = &rendered.image;
    if (loss_grad.width, loss_grad.height) != (img.width, img.height) {
        return Err(Error::inconsistent("loss gradient has the wrong size"));
    }
    let np = rendered.preps.len();
    let mut g_color = vec![[0.0f64; 3]; np];
    let mut g_opacity = vec![0.0f64; np];
    let mut g_mean2d = vec![Vector2::<f64>::zeros(); np];
    let mut g_conic = vec![Matrix2::<f64>::zeros(); np];

    let w = img.width as usize;
    for (pix, list) in rendered.lists.iter().enumerate() {
        let g = [loss_grad.data[3 * pix], loss_grad.data[3 * pix + 1], loss_grad.data[3 * pix + 2]];
        if g == [0.0; 3] {
            continue;
        }
        let center = Vector2::new((pix % w) as f64 + 0.5, (pix / w) as f64 + 0.5);
        // color seen behind the current splat, normalized by its transmittance
        let mut rest = rendered.background;
        for e in list.iter().rev() {
            let pi = e.prep as usize;
            let pr = &rendered.preps[pi];
            let mut dl_dalpha = 0.0;
            for ch in 0..3 {
                g_color[pi][ch] += e.t * e.alpha * g[ch];
                dl_dalpha += e.t * (pr.color[ch] - rest[ch]) * g[ch];
                rest[ch] = pr.color[ch] * e.alpha + (1.0 - e.alpha) * rest[ch];
            }
            g_opacity[pi] += dl_dalpha * e.alpha * (1.0 - pr.sig);
            let dl_dq = -0.5 * e.alpha * dl_dalpha;
            let d = center - pr.mean2d;
            g_mean2d[pi] += -2.0 * dl_dq * (pr.conic * d);
            g_conic[pi] += dl_dq * d * d.transpose();
        }
    }

    let wrot = view.rotation();
    let [fx, fy] = view.focal;
    let nb = basis_len(rendered.sh_degree);
    let mut out = vec![[0.0; PARAMS_PER_GAUSSIAN]; params.len()];
    for (pi, pr) in rendered.preps.iter().enumerate() {
        let p = &params[pr.local];
        let o = &mut out[pr.local];
        let mut g_mu = Vector3::zeros();

        // view-dependent color
        let mut g_dir = Vector3::zeros();
        for ch in 0..3 {
            if pr.raw_color[ch] <= 0.0 {
                continue;
            }
            let gr = g_color[pi][ch];
            for k in 0..nb {
                o[offset::SH + 3 * k + ch] = pr.basis[k] * gr;
                let coeff = p[offset::SH + 3 * k + ch];
                g_dir += coeff * gr * Vector3::from(pr.basis_grad[k]);
            }
        }
        g_mu += (g_dir - pr.dir * pr.dir.dot(&g_dir)) / pr.dir_len;

        o[offset::OPACITY] = g_opacity[pi];

        // conic -> projected covariance -> 3D covariance and projection
        let g_cov2 = -(pr.conic * g_conic[pi] * pr.conic);
        let g_cov3 = pr.m.transpose() * g_cov2 * pr.m;
        let g_m = 2.0 * g_cov2 * pr.m * pr.cov3;
        let g_j = g_m * wrot.transpose();

        let (x, y, z) = (pr.mu_c.x, pr.mu_c.y, pr.mu_c.z);
        let mut g_muc = pr.j.transpose() * g_mean2d[pi];
        let z2 = z * z;
        let z3 = z2 * z;
        g_muc.x += g_j[(0, 2)] * (-fx / z2);
        g_muc.y += g_j[(1, 2)] * (-fy / z2);
        g_muc.z += g_j[(0, 0)] * (-fx / z2)
            + g_j[(0, 2)] * (2.0 * fx * x / z3)
            + g_j[(1, 1)] * (-fy / z2)
            + g_j[(1, 2)] * (2.0 * fy * y / z3);
        g_mu += wrot.transpose() * g_muc;
        for a in 0..3 {
            o[offset::POSITION + a] = g_mu[a];
        }

        // cov3 = L L^T with L = R diag(s)
        let l = pr.rot * Matrix3::from_diagonal(&pr.scale);
        let g_l = (g_cov3 + g_cov3.transpose()) * l;
        let mut g_rot = Matrix3::zeros();
        for jx in 0..3 {
            let mut gs = 0.0;
            for i in 0..3 {
                gs += g_l[(i, jx)] * pr.rot[(i, jx)];
                g_rot[(i, jx)] = g_l[(i, jx)] * pr.scale[jx];
            }
            o[offset::LOG_SCALE + jx] = gs * pr.scale[jx];
        }
        let g_qhat = quat_grad(&pr.qhat, &g_rot);
        let dot: f64 = (0..4).map(|k| pr.qhat[k] * g_qhat[k]).sum();
        for k in 0..4 {
            o[offset::ROTATION + k] = (g_qhat[k] - pr.qhat[k] * dot) / pr.qnorm;
        }
    }
    Ok(out)
}

/// Gradient with respect to a unit quaternion `(w, x, y, z)` of a loss with
/// gradient `g` on its rotation matrix.
fn quat_grad(q: &[f64; 4], g: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = *q;
    let dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dx = Matrix3::new(0.0, 2.0 * y, 2.0 * z, 2.0 * y, -4.0 * x, -2.0 * w, 2.0 * z, 2.0 * w, -4.0 * x);
    let dy = Matrix3::new(-4.0 * y, 2.0 * x, 2.0 * w, 2.0 * x, 0.0, 2.0 * z, -2.0 * w, 2.0 * z, -4.0 * y);
    let dz = Matrix3::new(-4.0 * z, -2.0 * w, 2.0 * x, 2.0 * w, -4.0 * z, 2.0 * y, 2.0 * x, 2.0 * y, 0.0);
    [dw, dx, dy, dz].map(|d| d.component_mul(g).sum())
}

/// Per-Gaussian gradients over a subset; entries align with `indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub n_total: u64,
    pub indices: Vec<u32>,
    pub values: Vec<Params>,
}

impl Gradients {
    pub fn dense(&self) -> Vec<Params> {
        let mut out = vec![[0.0; PARAMS_PER_GAUSSIAN]; self.n_total as usize];
        for (&g, v) in self.indices.iter().zip(&self.values) {
            out[g as usize] = *v;
        }
        out
    }
}

fn subset_params(scene: &Scene, subset: &SparsitySet) -> Result<Vec<Params>> {
    if subset.n_total != scene.len() as u64 {
        return Err(Error::inconsistent(format!(
            "subset built for {} Gaussians, scene has {}",
            subset.n_total,
            scene.len()
        )));
    }
    Ok(subset.indices().iter().map(|&g| scene.gaussians[g as usize].to_params_f64()).collect())
}

pub fn render(scene: &Scene, subset: &SparsitySet, view: &CameraView, cfg: &RenderConfig) -> Result<Image> {
    let params = subset_params(scene, subset)?;
    Ok(render_params(subset.indices(), &params, view, cfg)?.image)
}

/// Renders every Gaussian of the scene.
pub fn render_all(scene: &Scene, view: &CameraView, cfg: &RenderConfig) -> Result<Image> {
    let all = SparsitySet::new(view.id, (0..scene.len() as u32).collect(), scene.len() as u64)?;
    render(scene, &all, view, cfg)
}

pub fn backward(
    scene: &Scene,
    subset: &SparsitySet,
    view: &CameraView,
    cfg: &RenderConfig,
    loss_grad: &Image,
) -> Result<Gradients> {
    let params = subset_params(scene, subset)?;
    let r = render_params(subset.indices(), &params, view, cfg)?;
    let values = backward_params(&r, &params, view, loss_grad)?;
    Ok(Gradients { n_total: subset.n_total, indices: subset.indices().to_vec(), values })
}
