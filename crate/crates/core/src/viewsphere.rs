//! Viewpoint generation: recursive icosahedron subdivision, upper-hemisphere
//! filtering, in-plane rotation sweeps and the reduced samplings used for
//! symmetric and rotation-invariant objects.
//!
//! The canonical icosahedron orientation puts one vertex at the +z pole and
//! one at the -z pole, with two pentagonal rings between them. That makes the
//! hemisphere filter and the symmetric azimuth restriction well defined.

use crate::error::{Error, Result};
use crate::geometry::{deg_to_rad, Vec3};
use std::collections::HashMap;

/// Default in-plane rotation sweep: -45 to 45 degrees, stride 15 (7 rolls).
pub const DEFAULT_SWEEP: RollSweep = RollSweep { start_deg: -45.0, end_deg: 45.0, stride_deg: 15.0 };

pub const MAX_LEVEL: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RollSweep {
    pub start_deg: f64,
    pub end_deg: f64,
    pub stride_deg: f64,
}

impl RollSweep {
    /// Roll angles in radians: start, start+stride, ..., up to end inclusive.
    pub fn rolls(&self) -> Vec<f64> {
        assert!(self.stride_deg > 0.0 && self.start_deg <= self.end_deg);
        let count = ((self.end_deg - self.start_deg) / self.stride_deg).floor() as usize + 1;
        (0..count)
            .map(|i| deg_to_rad(self.start_deg + i as f64 * self.stride_deg))
            .collect()
    }
}

/// Triangulated unit sphere obtained by subdividing an icosahedron `level` times.
#[derive(Debug, Clone)]
pub struct Icosphere {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub level: u32,
}

impl Icosphere {
    pub fn vertex_count_for(level: u32) -> usize {
        10 * 4usize.pow(level) + 2
    }

    pub fn face_count_for(level: u32) -> usize {
        20 * 4usize.pow(level)
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = std::collections::HashSet::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }
}

/// Builds the canonical icosphere at the given subdivision level (0..=6).
pub fn build_icosphere(level: u32) -> Result<Icosphere> {
    if level > MAX_LEVEL {
        return Err(Error::Config(format!(
            "subdivision level {level} out of range 0..={MAX_LEVEL}"
        )));
    }
    let mut sphere = base_icosahedron();
    for _ in 0..level {
        sphere = subdivide(&sphere);
    }
    sphere.level = level;
    Ok(sphere)
}

fn base_icosahedron() -> Icosphere {
    // Two poles plus two pentagonal rings at z = +-1/sqrt(5).
    let zr = 1.0 / 5.0f64.sqrt();
    let rr = 2.0 / 5.0f64.sqrt();
    let mut vertices = vec![Vec3::new(0.0, 0.0, 1.0)];
    for k in 0..5 {
        let a = std::f64::consts::TAU * k as f64 / 5.0;
        vertices.push(Vec3::new(rr * a.cos(), rr * a.sin(), zr));
    }
    for k in 0..5 {
        let a = std::f64::consts::TAU * (k as f64 + 0.5) / 5.0;
        vertices.push(Vec3::new(rr * a.cos(), rr * a.sin(), -zr));
    }
    vertices.push(Vec3::new(0.0, 0.0, -1.0));

    let mut faces = Vec::with_capacity(20);
    for k in 0..5u32 {
        let t0 = 1 + k;
        let t1 = 1 + (k + 1) % 5;
        let b0 = 6 + k;
        let b1 = 6 + (k + 1) % 5;
        faces.push([0, t0, t1]);
        faces.push([t0, b0, t1]);
        faces.push([b0, b1, t1]);
        faces.push([11, b1, b0]);
    }
    Icosphere { vertices, faces, level: 0 }
}

fn subdivide(s: &Icosphere) -> Icosphere {
    let mut vertices = s.vertices.clone();
    let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
    let mut faces = Vec::with_capacity(s.faces.len() * 4);

    let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
        let key = (a.min(b), a.max(b));
        if let Some(&idx) = midpoints.get(&key) {
            return idx;
        }
        let m = vertices[a as usize].add(vertices[b as usize]).scale(0.5);
        let m = m.normalized().expect("midpoint of distinct unit vectors is nonzero");
        let idx = vertices.len() as u32;
        vertices.push(m);
        midpoints.insert(key, idx);
        idx
    };

    for f in &s.faces {
        let [a, b, c] = *f;
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    Icosphere { vertices, faces, level: s.level + 1 }
}

/// Upper-hemisphere vertices (z >= -1e-9), sorted by z descending then azimuth
/// ascending for a deterministic order. The equator is included.
pub fn hemisphere(s: &Icosphere) -> Vec<Vec3> {
    let mut vs: Vec<Vec3> = s.vertices.iter().copied().filter(|v| v.z >= -1e-9).collect();
    sort_views(&mut vs);
    vs
}

fn sort_views(vs: &mut [Vec3]) {
    vs.sort_by(|a, b| {
        b.z.partial_cmp(&a.z)
            .unwrap()
            .then(a.azimuth().partial_cmp(&b.azimuth()).unwrap())
    });
}

/// Vertices on the azimuth-0 meridian arc from the +z pole down to the equator.
pub fn meridian_arc(s: &Icosphere) -> Vec<Vec3> {
    let mut vs: Vec<Vec3> = s
        .vertices
        .iter()
        .copied()
        .filter(|v| v.z >= -1e-9 && v.y.abs() <= 1e-9 && v.x >= -1e-9)
        .collect();
    sort_views(&mut vs);
    vs
}

/// A camera viewpoint: unit sphere vertex plus in-plane roll (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub vertex: Vec3,
    pub roll: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    /// Full upper hemisphere with the complete roll sweep.
    Regular,
    /// Azimuth restricted to [0, 180) degrees, full roll sweep (objects with a
    /// 180-degree rotational symmetry).
    Symmetric,
    /// Single meridian arc from pole to equator, roll fixed to 0 (surfaces of
    /// revolution, whose depth images do not depend on azimuth).
    RotationInvariant,
}

impl std::fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplingKind::Regular => "regular",
            SamplingKind::Symmetric => "symmetric",
            SamplingKind::RotationInvariant => "rotation_invariant",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct ViewSet {
    pub views: Vec<View>,
    pub kind: SamplingKind,
}

/// Crosses every vertex with every roll of the sweep.
pub fn inplane_sweep(vertices: &[Vec3], sweep: &RollSweep) -> Vec<View> {
    let rolls = sweep.rolls();
    let mut views = Vec::with_capacity(vertices.len() * rolls.len());
    for &vertex in vertices {
        for &roll in &rolls {
            views.push(View { vertex, roll });
        }
    }
    views
}

fn filter_kind(vertices: Vec<Vec3>, kind: SamplingKind) -> Vec<Vec3> {
    match kind {
        SamplingKind::Regular => vertices,
        SamplingKind::Symmetric => vertices
            .into_iter()
            .filter(|v| v.azimuth() < std::f64::consts::PI - 1e-12)
            .collect(),
        SamplingKind::RotationInvariant => vertices
            .into_iter()
            .filter(|v| v.y.abs() <= 1e-9 && v.x >= -1e-9)
            .collect(),
    }
}

/// Training viewpoints for an object of the given sampling kind.
pub fn sampling_for(kind: SamplingKind, level: u32, sweep: &RollSweep) -> Result<ViewSet> {
    let sphere = build_icosphere(level)?;
    let vertices = filter_kind(hemisphere(&sphere), kind);
    let views = match kind {
        SamplingKind::RotationInvariant => {
            vertices.into_iter().map(|vertex| View { vertex, roll: 0.0 }).collect()
        }
        _ => inplane_sweep(&vertices, sweep),
    };
    Ok(ViewSet { views, kind })
}

/// Held-out viewpoints: vertices of level `level + 1` that do not exist at
/// `level`, i.e. the midpoints of the training icosphere's edges. They are
/// guaranteed to lie between training poses, standing in for unseen real views.
pub fn test_views_for(kind: SamplingKind, level: u32, sweep: &RollSweep) -> Result<ViewSet> {
    let fine = build_icosphere(level + 1)?;
    let coarse_count = Icosphere::vertex_count_for(level);
    // Subdivision appends edge midpoints after the original vertices.
    let new_vertices: Vec<Vec3> = fine.vertices[coarse_count..].to_vec();
    let mut vertices: Vec<Vec3> = new_vertices.into_iter().filter(|v| v.z >= -1e-9).collect();
    sort_views(&mut vertices);
    let vertices = filter_kind(vertices, kind);
    let views = match kind {
        SamplingKind::RotationInvariant => {
            vertices.into_iter().map(|vertex| View { vertex, roll: 0.0 }).collect()
        }
        _ => inplane_sweep(&vertices, sweep),
    };
    Ok(ViewSet { views, kind })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_and_face_counts() {
        for (level, v, f) in [(0, 12, 20), (1, 42, 80), (2, 162, 320), (3, 642, 1280)] {
            let s = build_icosphere(level).unwrap();
            assert_eq!(s.vertices.len(), v);
            assert_eq!(s.faces.len(), f);
            assert_eq!(s.vertices.len(), Icosphere::vertex_count_for(level));
            assert_eq!(s.faces.len(), Icosphere::face_count_for(level));
        }
        assert!(build_icosphere(7).is_err());
    }

    #[test]
    fn euler_characteristic_is_two() {
        for level in 0..=3 {
            let s = build_icosphere(level).unwrap();
            let v = s.vertices.len() as i64;
            let e = s.edge_count() as i64;
            let f = s.faces.len() as i64;
            assert_eq!(v - e + f, 2, "level {level}");
        }
    }

    #[test]
    fn vertices_unit_and_distinct() {
        for level in 0..=3 {
            let s = build_icosphere(level).unwrap();
            for v in &s.vertices {
                assert!((v.norm() - 1.0).abs() <= 1e-9);
            }
        }
        // No duplicate vertices at level 2: minimum pairwise angle strictly positive.
        let s = build_icosphere(2).unwrap();
        assert!(min_pairwise_angle(&s.vertices) > 1e-6);
    }

    fn min_pairwise_angle(vs: &[Vec3]) -> f64 {
        let mut min = f64::MAX;
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let d = vs[i].dot(vs[j]).clamp(-1.0, 1.0).acos();
                if d < min {
                    min = d;
                }
            }
        }
        min
    }

    #[test]
    fn min_angle_decreases_with_level() {
        let mut prev = f64::MAX;
        for level in 0..=3 {
            let s = build_icosphere(level).unwrap();
            let m = min_pairwise_angle(&s.vertices);
            assert!(m < prev, "level {level}: {m} !< {prev}");
            prev = m;
        }
    }

    #[test]
    fn hemisphere_counts_by_enumeration() {
        // Level 0 canonical orientation: +z pole, ring at z = +1/sqrt(5),
        // ring at z = -1/sqrt(5), -z pole. Exactly 6 vertices have z >= 0.
        let s = build_icosphere(0).unwrap();
        let h = hemisphere(&s);
        assert_eq!(h.len(), 6);
        assert!(h.iter().any(|v| (v.z - 1.0).abs() < 1e-12));
        assert!(h.iter().all(|v| v.z < 1.0 + 1e-12 && v.z > -1e-9));
        // The -z pole is excluded.
        assert!(!h.iter().any(|v| v.z < -0.5));

        // Independent enumeration oracle at each level: count by direct filter.
        for level in 0..=3 {
            let s = build_icosphere(level).unwrap();
            let expect = s.vertices.iter().filter(|v| v.z >= -1e-9).count();
            assert_eq!(hemisphere(&s).len(), expect);
            for v in &s.vertices {
                if v.z < -1e-9 {
                    assert!(!hemisphere(&s).contains(v));
                }
            }
        }
    }

    #[test]
    fn hemisphere_counts_frozen() {
        // Antipodally symmetric construction: (V - equator)/2 + equator.
        let counts: Vec<usize> =
            (0..=3).map(|l| hemisphere(&build_icosphere(l).unwrap()).len()).collect();
        assert_eq!(counts, vec![6, 26, 91, 341]);
    }

    #[test]
    fn sweep_examples() {
        let one = vec![Vec3::new(0.0, 0.0, 1.0)];
        let views = inplane_sweep(&one, &DEFAULT_SWEEP);
        assert_eq!(views.len(), 7);
        let rolls_deg: Vec<f64> =
            views.iter().map(|v| (v.roll.to_degrees()).round()).collect();
        assert_eq!(rolls_deg, vec![-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0]);

        let single = RollSweep { start_deg: 0.0, end_deg: 0.0, stride_deg: 15.0 };
        assert_eq!(inplane_sweep(&one, &single).len(), 1);
        assert_eq!(inplane_sweep(&one, &single)[0].roll, 0.0);

        let s = build_icosphere(3).unwrap();
        let views = inplane_sweep(&s.vertices, &DEFAULT_SWEEP);
        assert_eq!(views.len(), 642 * 7);
    }

    #[test]
    fn sampling_kinds() {
        let regular = sampling_for(SamplingKind::Regular, 3, &DEFAULT_SWEEP).unwrap();
        assert_eq!(regular.views.len(), 7 * 341);

        let ri = sampling_for(SamplingKind::RotationInvariant, 3, &DEFAULT_SWEEP).unwrap();
        for v in &ri.views {
            assert!(v.roll == 0.0);
            assert!(v.vertex.y.abs() <= 1e-9 && v.vertex.x >= -1e-9);
        }
        // Oracle: the meridian arc of the level-3 sphere.
        let arc = meridian_arc(&build_icosphere(3).unwrap());
        assert_eq!(ri.views.len(), arc.len());
        assert!(ri.views.len() >= 4);

        // Symmetric sampling never repeats (elevation, azimuth mod 180, roll).
        let sym = sampling_for(SamplingKind::Symmetric, 2, &DEFAULT_SWEEP).unwrap();
        let mut seen = std::collections::HashSet::new();
        for v in &sym.views {
            let az = v.vertex.azimuth().rem_euclid(std::f64::consts::PI);
            let key = (
                (v.vertex.z * 1e9).round() as i64,
                (az * 1e9).round() as i64,
                (v.roll * 1e9).round() as i64,
            );
            assert!(seen.insert(key), "duplicate symmetric view {key:?}");
        }
    }

    #[test]
    fn symmetric_is_half_the_azimuths() {
        let sphere = build_icosphere(2).unwrap();
        let hemi = hemisphere(&sphere);
        let sym: Vec<&Vec3> =
            hemi.iter().filter(|v| v.azimuth() < std::f64::consts::PI - 1e-12).collect();
        assert!(sym.len() < hemi.len());
        assert!(sym.len() > hemi.len() / 3);
    }

    #[test]
    fn deterministic_construction() {
        let a = build_icosphere(2).unwrap();
        let b = build_icosphere(2).unwrap();
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (va, vb) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(va.x.to_bits(), vb.x.to_bits());
            assert_eq!(va.y.to_bits(), vb.y.to_bits());
            assert_eq!(va.z.to_bits(), vb.z.to_bits());
        }
        assert_eq!(a.faces, b.faces);
    }

    #[test]
    fn test_views_disjoint_from_training() {
        for kind in [SamplingKind::Regular, SamplingKind::RotationInvariant] {
            let train = sampling_for(kind, 1, &DEFAULT_SWEEP).unwrap();
            let test = test_views_for(kind, 1, &DEFAULT_SWEEP).unwrap();
            assert!(!test.views.is_empty());
            for tv in &test.views {
                for trv in &train.views {
                    let d = tv.vertex.dot(trv.vertex).clamp(-1.0, 1.0).acos();
                    assert!(d > 1e-6, "test vertex coincides with a training vertex");
                }
            }
        }
    }
}
