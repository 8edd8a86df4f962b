//! Software depth rasterizer: normalized n-by-n depth patches from a triangle
//! mesh and an on-sphere camera pose.
//!
//! Pinhole camera, no distortion, no sensor noise (background noise is a
//! separate augmentation step). Depth within the bounding cube
//! `[z_c - cube_half, z_c + cube_half]` maps linearly to `[0, 1]`; values
//! beyond the cube are clipped, background pixels are exactly 1.0.

use crate::error::{Error, Result};
use crate::geometry::{look_at_matrix, mat3_tmul_vec};
use crate::meshio::TriMesh;
use crate::viewsphere::View;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RenderConfig {
    /// Patch side length in pixels.
    pub patch_size: usize,
    /// Camera distance to the object origin in meters.
    pub camera_distance: f64,
    /// Half side of the clipping cube in meters (0.2 => a 40 cm cube).
    pub cube_half: f64,
    /// Pinhole focal length in pixels.
    pub focal: f64,
}

impl RenderConfig {
    /// Narrow-FOV pinhole defaults for a given patch size (focal = 1.5 n).
    pub fn with_patch_size(n: usize) -> RenderConfig {
        RenderConfig {
            patch_size: n,
            camera_distance: 0.6,
            cube_half: 0.2,
            focal: 1.5 * n as f64,
        }
    }

    /// Full-fidelity preset: 64x64 patches.
    pub fn paper() -> RenderConfig {
        RenderConfig::with_patch_size(64)
    }

    /// CPU-friendly preset: 32x32 patches.
    pub fn desk() -> RenderConfig {
        RenderConfig::with_patch_size(32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 8 {
            return Err(Error::Config(format!("patch size {} below minimum 8", self.patch_size)));
        }
        if self.cube_half <= 0.0 {
            return Err(Error::Config("cube_half must be positive".into()));
        }
        if self.camera_distance <= self.cube_half {
            return Err(Error::Config(format!(
                "camera distance {} must exceed cube half {}",
                self.camera_distance, self.cube_half
            )));
        }
        if self.focal <= 0.0 {
            return Err(Error::Config("focal length must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized depth patch plus hit mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPatch {
    pub n: usize,
    /// Row-major pixel values in [0, 1]; non-hit pixels are exactly 1.0.
    pub pixels: Vec<f32>,
    /// Row-major hit mask: true where a mesh surface was rasterized.
    pub mask: Vec<bool>,
    /// Set when no triangle touched the patch at all.
    pub out_of_view: bool,
}

impl DepthPatch {
    pub fn background(n: usize) -> DepthPatch {
        DepthPatch { n, pixels: vec![1.0; n * n], mask: vec![false; n * n], out_of_view: true }
    }

    pub fn value(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.n + col]
    }

    pub fn hit(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.n + col]
    }
}

/// Fraction of mask pixels that are true.
pub fn occupancy_fraction(p: &DepthPatch) -> f64 {
    if p.mask.is_empty() {
        return 0.0;
    }
    p.mask.iter().filter(|&&m| m).count() as f64 / p.mask.len() as f64
}

#[derive(Clone, Copy)]
struct Projected {
    u: f64,
    v: f64,
    depth: f64,
}

fn cross2(ax: f64, ay: f64, bx: f64, by: f64, qx: f64, qy: f64) -> f64 {
    (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
}

/// Shared-edge pixels belong to exactly one triangle: boundary pixels count as
/// inside only on top edges (horizontal, pointing +u) and left edges
/// (pointing -v), with v growing downward and positive-area winding.
fn edge_accepts(w: f64, ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    if w > 0.0 {
        return true;
    }
    if w < 0.0 {
        return false;
    }
    let ex = bx - ax;
    let ey = by - ay;
    (ey == 0.0 && ex > 0.0) || ey < 0.0
}

/// Renders the mesh from a view-sphere camera into a normalized depth patch.
///
/// The camera sits at `camera_distance * view.vertex`, looks at the origin and
/// rolls about its optical axis. If the mesh misses the image entirely the
/// result is all background with `out_of_view` set.
pub fn rasterize(mesh: &TriMesh, view: &View, cfg: &RenderConfig) -> Result<DepthPatch> {
    cfg.validate()?;
    let n = cfg.patch_size;
    let eye = view.vertex.scale(cfg.camera_distance);
    let cam = look_at_matrix(eye, view.roll)?;

    let near = cfg.camera_distance - cfg.cube_half;
    let span = 2.0 * cfg.cube_half;
    let center = n as f64 / 2.0;

    // World to camera, then pinhole projection (u right, v down).
    let projected: Vec<Projected> = mesh
        .vertices
        .iter()
        .map(|&w| {
            let p = mat3_tmul_vec(&cam, w.sub(eye));
            let depth = -p.z;
            Projected {
                u: center + cfg.focal * p.x / depth,
                v: center - cfg.focal * p.y / depth,
                depth,
            }
        })
        .collect();

    let mut depth_buf = vec![f64::INFINITY; n * n];
    let mut patch = DepthPatch::background(n);

    for tri in &mesh.triangles {
        let mut p0 = projected[tri[0] as usize];
        let mut p1 = projected[tri[1] as usize];
        let p2 = projected[tri[2] as usize];
        if p0.depth <= 1e-9 || p1.depth <= 1e-9 || p2.depth <= 1e-9 {
            continue;
        }
        let mut area2 = cross2(p0.u, p0.v, p1.u, p1.v, p2.u, p2.v);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            std::mem::swap(&mut p0, &mut p1);
            area2 = -area2;
        }

        let umin = p0.u.min(p1.u).min(p2.u).floor().max(0.0) as usize;
        let umax = p0.u.max(p1.u).max(p2.u).ceil().min(n as f64) as usize;
        let vmin = p0.v.min(p1.v).min(p2.v).floor().max(0.0) as usize;
        let vmax = p0.v.max(p1.v).max(p2.v).ceil().min(n as f64) as usize;
        if umin >= umax || vmin >= vmax {
            continue;
        }

        let inv_d0 = 1.0 / p0.depth;
        let inv_d1 = 1.0 / p1.depth;
        let inv_d2 = 1.0 / p2.depth;

        for row in vmin..vmax {
            let qy = row as f64 + 0.5;
            for col in umin..umax {
                let qx = col as f64 + 0.5;
                let w0 = cross2(p1.u, p1.v, p2.u, p2.v, qx, qy);
                let w1 = cross2(p2.u, p2.v, p0.u, p0.v, qx, qy);
                let w2 = cross2(p0.u, p0.v, p1.u, p1.v, qx, qy);
                if !(edge_accepts(w0, p1.u, p1.v, p2.u, p2.v)
                    && edge_accepts(w1, p2.u, p2.v, p0.u, p0.v)
                    && edge_accepts(w2, p0.u, p0.v, p1.u, p1.v))
                {
                    continue;
                }
                // Perspective-correct depth: inverse depth is affine in screen space.
                let inv_d = (w0 * inv_d0 + w1 * inv_d1 + w2 * inv_d2) / area2;
                let depth = 1.0 / inv_d;
                let idx = row * n + col;
                if depth < depth_buf[idx] {
                    depth_buf[idx] = depth;
                    let val = (depth - near) / span;
                    let val = if val < 0.0 {
                        0.0
                    } else if val > 1.0 {
                        1.0
                    } else {
                        val
                    };
                    patch.pixels[idx] = val as f32;
                    patch.mask[idx] = true;
                }
            }
        }
    }

    patch.out_of_view = !patch.mask.iter().any(|&m| m);
    Ok(patch)
}
