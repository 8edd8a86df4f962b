//! Procedural test-object meshes and a minimal text mesh parser.
//!
//! All coordinates are meters. Every mesh must fit the 0.4 m bounding cube
//! that the renderer clips against, so `scale` is the maximum extent of the
//! generated object.
//!
//! The surfaces of revolution (cylinder, bowl) generate their rings one
//! quadrant at a time and complete them by exact 90-degree rotations
//! (x, y) -> (-y, x). When the tessellation is a multiple of four the vertex
//! set is then bitwise invariant under quarter turns about z, which is what
//! makes the rotation-invariance render checks exact.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// Maximum object extent accepted anywhere in the pipeline (the bounding cube).
pub const MAX_EXTENT: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Box,
    Pyramid,
    Cylinder,
    Lshape,
    Bowl,
}

impl std::fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PrimitiveKind::Box => "box",
            PrimitiveKind::Pyramid => "pyramid",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Lshape => "lshape",
            PrimitiveKind::Bowl => "bowl",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for PrimitiveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(PrimitiveKind::Box),
            "pyramid" => Ok(PrimitiveKind::Pyramid),
            "cylinder" => Ok(PrimitiveKind::Cylinder),
            "lshape" => Ok(PrimitiveKind::Lshape),
            "bowl" => Ok(PrimitiveKind::Bowl),
            other => Err(Error::Config(format!("unknown object kind '{other}'"))),
        }
    }
}

impl TriMesh {
    /// Axis-aligned extent (max - min) per axis; zero for an empty mesh.
    pub fn extents(&self) -> [f64; 3] {
        if self.vertices.is_empty() {
            return [0.0; 3];
        }
        let mut min = [f64::MAX; 3];
        let mut max = [f64::MIN; 3];
        for v in &self.vertices {
            for (i, c) in [v.x, v.y, v.z].into_iter().enumerate() {
                min[i] = min[i].min(c);
                max[i] = max[i].max(c);
            }
        }
        [max[0] - min[0], max[1] - min[1], max[2] - min[2]]
    }

    pub fn translated(&self, d: Vec3) -> TriMesh {
        TriMesh {
            name: self.name.clone(),
            vertices: self.vertices.iter().map(|v| v.add(d)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Index bounds, degenerate triangles and the bounding-cube extent.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            for &idx in t {
                if idx >= n {
                    return Err(Error::Config(format!(
                        "triangle {i} references vertex {idx} but the mesh has {n} vertices"
                    )));
                }
            }
            let a = self.vertices[t[0] as usize];
            let b = self.vertices[t[1] as usize];
            let c = self.vertices[t[2] as usize];
            let area = b.sub(a).cross(c.sub(a)).norm() * 0.5;
            if area <= 1e-12 {
                return Err(Error::Config(format!("triangle {i} is degenerate (area {area})")));
            }
        }
        let ext = self.extents();
        if ext.iter().any(|&e| e > MAX_EXTENT + 1e-9) {
            return Err(Error::Config(format!(
                "mesh extent {ext:?} exceeds the {MAX_EXTENT} m bounding cube"
            )));
        }
        Ok(())
    }
}

/// Ring of `m` points at the given radius and height, exactly symmetric under
/// quarter turns when `m` is a multiple of four.
fn ring_points(radius: f64, z: f64, m: usize) -> Vec<Vec3> {
    if m % 4 == 0 {
        let q = m / 4;
        let mut pts = vec![Vec3::ZERO; m];
        for j in 0..q {
            let a = std::f64::consts::TAU * j as f64 / m as f64;
            let (x, y) = (radius * a.cos(), radius * a.sin());
            pts[j] = Vec3::new(x, y, z);
            pts[j + q] = Vec3::new(-y, x, z);
            pts[j + 2 * q] = Vec3::new(-x, -y, z);
            pts[j + 3 * q] = Vec3::new(y, -x, z);
        }
        pts
    } else {
        (0..m)
            .map(|j| {
                let a = std::f64::consts::TAU * j as f64 / m as f64;
                Vec3::new(radius * a.cos(), radius * a.sin(), z)
            })
            .collect()
    }
}

/// Axis-aligned rectangular box centered at the origin.
pub fn cuboid(name: &str, extents: [f64; 3]) -> TriMesh {
    let h = [extents[0] / 2.0, extents[1] / 2.0, extents[2] / 2.0];
    let mut vertices = Vec::with_capacity(8);
    for &z in &[-h[2], h[2]] {
        for &y in &[-h[1], h[1]] {
            for &x in &[-h[0], h[0]] {
                vertices.push(Vec3::new(x, y, z));
            }
        }
    }
    // Bottom z- (0 1 2 3), top z+ (4 5 6 7); x fastest, then y.
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // bottom
        [4, 5, 7, 6], // top
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriMesh { name: name.into(), vertices, triangles }
}

fn pyramid(scale: f64) -> TriMesh {
    // Rectangular base with the apex offset along +x, so no rotation about z
    // maps the mesh onto itself.
    let hx = scale / 2.0;
    let hy = 0.35 * scale;
    let zb = -0.4 * scale;
    let zt = 0.4 * scale;
    let vertices = vec![
        Vec3::new(-hx, -hy, zb),
        Vec3::new(hx, -hy, zb),
        Vec3::new(hx, hy, zb),
        Vec3::new(-hx, hy, zb),
        Vec3::new(0.15 * scale, 0.0, zt),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [0, 1, 4],
        [1, 2, 4],
        [2, 3, 4],
        [3, 0, 4],
    ];
    TriMesh { name: "pyramid".into(), vertices, triangles }
}

fn cylinder(scale: f64, m: usize) -> TriMesh {
    let radius = 0.35 * scale;
    let hz = scale / 2.0;
    let mut vertices = ring_points(radius, -hz, m);
    vertices.extend(ring_points(radius, hz, m));
    let bottom_center = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, 0.0, -hz));
    let top_center = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, 0.0, hz));

    let mut triangles = Vec::with_capacity(4 * m);
    for j in 0..m as u32 {
        let jn = (j + 1) % m as u32;
        let (b0, b1) = (j, jn);
        let (t0, t1) = (j + m as u32, jn + m as u32);
        triangles.push([b0, b1, t1]);
        triangles.push([b0, t1, t0]);
        triangles.push([bottom_center, b1, b0]);
        triangles.push([top_center, t0, t1]);
    }
    TriMesh { name: "cylinder".into(), vertices, triangles }
}

fn lshape(scale: f64) -> TriMesh {
    let s = scale;
    // L cross-section: the unit square minus its upper-right quadrant.
    let profile = [
        (-0.5 * s, -0.5 * s),
        (0.5 * s, -0.5 * s),
        (0.5 * s, 0.0),
        (0.0, 0.0),
        (0.0, 0.5 * s),
        (-0.5 * s, 0.5 * s),
    ];
    let hz = 0.25 * s;
    let mut vertices = Vec::with_capacity(12);
    for &(x, y) in &profile {
        vertices.push(Vec3::new(x, y, -hz));
    }
    for &(x, y) in &profile {
        vertices.push(Vec3::new(x, y, hz));
    }
    let mut triangles = Vec::new();
    // The fan from corner 0 stays inside this particular L outline.
    for k in 1..5u32 {
        triangles.push([0, k + 1, k]); // bottom
        triangles.push([6, 6 + k, 6 + k + 1]); // top
    }
    for j in 0..6u32 {
        let jn = (j + 1) % 6;
        triangles.push([j, jn, jn + 6]);
        triangles.push([j, jn + 6, j + 6]);
    }
    TriMesh { name: "lshape".into(), vertices, triangles }
}

fn bowl(scale: f64, m: usize) -> TriMesh {
    let outer = scale / 2.0;
    let inner = 0.78 * outer;
    let nlat = (m / 2).max(4);
    let zshift = outer / 2.0;

    let mut vertices = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    // Outer shell: bottom pole up to the rim circle at z = 0 (before shift).
    let outer_pole = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, 0.0, -outer + zshift));
    let mut outer_rings = Vec::new();
    for j in 1..=nlat {
        let phi = -std::f64::consts::FRAC_PI_2 * (1.0 - j as f64 / nlat as f64);
        let start = vertices.len() as u32;
        vertices.extend(ring_points(outer * phi.cos(), outer * phi.sin() + zshift, m));
        outer_rings.push(start);
    }
    fan(&mut triangles, outer_pole, outer_rings[0], m, false);
    for w in outer_rings.windows(2) {
        band(&mut triangles, w[0], w[1], m);
    }

    // Inner shell: rim circle at z = 0 down to the inner pole.
    let mut inner_rings = Vec::new();
    for j in 0..nlat {
        let phi = -std::f64::consts::FRAC_PI_2 * (j as f64 / nlat as f64);
        let start = vertices.len() as u32;
        vertices.extend(ring_points(inner * phi.cos(), inner * phi.sin() + zshift, m));
        inner_rings.push(start);
    }
    let inner_pole = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, 0.0, -inner + zshift));
    for w in inner_rings.windows(2) {
        band(&mut triangles, w[0], w[1], m);
    }
    fan(&mut triangles, inner_pole, inner_rings[nlat - 1], m, true);

    // Flat rim annulus joining the two shells.
    band(&mut triangles, outer_rings[nlat - 1], inner_rings[0], m);

    TriMesh { name: "bowl".into(), vertices, triangles }
}

fn fan(tris: &mut Vec<[u32; 3]>, apex: u32, ring_start: u32, m: usize, flip: bool) {
    for j in 0..m as u32 {
        let jn = (j + 1) % m as u32;
        let (a, b) = (ring_start + j, ring_start + jn);
        if flip {
            tris.push([apex, b, a]);
        } else {
            tris.push([apex, a, b]);
        }
    }
}

fn band(tris: &mut Vec<[u32; 3]>, ring_a: u32, ring_b: u32, m: usize) {
    for j in 0..m as u32 {
        let jn = (j + 1) % m as u32;
        tris.push([ring_a + j, ring_a + jn, ring_b + jn]);
        tris.push([ring_a + j, ring_b + jn, ring_b + j]);
    }
}

/// Builds one of the procedural test objects.
///
/// `scale` is the object's maximum extent in meters and must lie in
/// `(0, 0.4]`; `tessellation` controls the ring resolution of the curved
/// kinds and must be at least 3 (values that are multiples of four keep the
/// surfaces of revolution exactly quarter-turn symmetric).
pub fn gen_primitive(kind: PrimitiveKind, scale: f64, tessellation: usize) -> Result<TriMesh> {
    if !(scale > 0.0 && scale <= MAX_EXTENT) {
        return Err(Error::Config(format!("scale {scale} out of range (0, {MAX_EXTENT}]")));
    }
    let curved = matches!(kind, PrimitiveKind::Cylinder | PrimitiveKind::Bowl);
    if curved && tessellation < 3 {
        return Err(Error::Config(format!(
            "tessellation {tessellation} too small for {kind} (minimum 3)"
        )));
    }
    let mesh = match kind {
        PrimitiveKind::Box => cuboid("box", [0.65 * scale, 0.4 * scale, scale]),
        PrimitiveKind::Pyramid => pyramid(scale),
        PrimitiveKind::Cylinder => cylinder(scale, tessellation),
        PrimitiveKind::Lshape => lshape(scale),
        PrimitiveKind::Bowl => bowl(scale, tessellation),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// The viewpoint sampling each primitive needs to keep its patches unique:
/// the box is 180-degree symmetric about z, and the surfaces of revolution
/// look the same from every azimuth.
pub fn default_sampling(kind: PrimitiveKind) -> crate::viewsphere::SamplingKind {
    use crate::viewsphere::SamplingKind::*;
    match kind {
        PrimitiveKind::Box => Symmetric,
        PrimitiveKind::Pyramid | PrimitiveKind::Lshape => Regular,
        PrimitiveKind::Cylinder | PrimitiveKind::Bowl => RotationInvariant,
    }
}

/// Parses the common text mesh format: `v x y z` vertex lines and
/// `f i j k ...` face lines with 1-based indices. Polygons are
/// fan-triangulated, `i/t/n` face entries keep the leading index, and any
/// other line type is ignored.
pub fn parse_mesh_str(input: &str, name: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<u32>)> = Vec::new();

    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: "vertex line needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad coordinate '{tok}'"),
                    })?;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or(tok);
                    let i: i64 = head.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad face index '{tok}'"),
                    })?;
                    if i < 1 {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("face index {i} must be positive (1-based)"),
                        });
                    }
                    idx.push((i - 1) as u32);
                }
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "face needs at least three indices".into(),
                    });
                }
                faces.push((lineno, idx));
            }
            _ => {}
        }
    }

    let mut triangles = Vec::new();
    for (lineno, idx) in faces {
        for &i in &idx {
            if i as usize >= vertices.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!(
                        "face index {} out of range (mesh has {} vertices)",
                        i + 1,
                        vertices.len()
                    ),
                });
            }
        }
        for k in 1..idx.len() - 1 {
            triangles.push([idx[0], idx[k], idx[k + 1]]);
        }
    }

    let mesh = TriMesh { name: name.into(), vertices, triangles };
    mesh.validate()?;
    Ok(mesh)
}

pub fn parse_mesh_file(path: &Path) -> Result<TriMesh> {
    let input = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into());
    parse_mesh_str(&input, &name)
}

/// Writes the mesh in the same text format `parse_mesh_file` reads.
pub fn write_mesh_file(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Every edge of a closed mesh must be shared by exactly two triangles.
pub fn is_watertight(mesh: &TriMesh) -> bool {
    let mut edge_count: HashMap<(u32, u32), u32> = HashMap::new();
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edge_count.values().all(|&c| c == 2)
}
