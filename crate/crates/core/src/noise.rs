//! Deterministic gradient-lattice noise and multi-octave fractal composition,
//! used to fill synthetic backgrounds so clean renders get training twins with
//! cluttered backgrounds.

use crate::render::DepthPatch;

/// 12-direction gradient set of the classic 2D simplex construction.
const GRAD: [(f64, f64); 12] = [
    (1.0, 1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (0.0, 1.0),
    (0.0, -1.0),
];

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds several stream identifiers into one reproducible sub-seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x6A09_E667_F3BC_C909;
    let mut out = 0;
    for &p in parts {
        state ^= p.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        out = splitmix64(&mut state);
    }
    out
}

/// Per-sample augmentation seed: fresh noise for every anchor in every epoch,
/// reproducible from the global seed.
pub fn sample_seed(global: u64, sample_index: u64, epoch: u64) -> u64 {
    derive_seed(&[global, sample_index, epoch])
}

/// Seeded 2D simplex noise. Values lie in [-1, 1], are continuous, and vanish
/// at the corners of the simplex grid.
pub struct SimplexNoise {
    perm: [u8; 512],
}

impl SimplexNoise {
    pub fn new(seed: u64) -> SimplexNoise {
        let mut table: [u8; 256] = [0; 256];
        for (i, t) in table.iter_mut().enumerate() {
            *t = i as u8;
        }
        let mut state = seed;
        // Fisher-Yates driven by splitmix64.
        for i in (1..256usize).rev() {
            let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
            table.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        SimplexNoise { perm }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        const F2: f64 = 0.366_025_403_784_438_6; // (sqrt(3) - 1) / 2
        const G2: f64 = 0.211_324_865_405_187_1; // (3 - sqrt(3)) / 6

        let s = (x + y) * F2;
        let i = (x + s).floor();
        let j = (y + s).floor();
        let t = (i + j) * G2;
        let x0 = x - (i - t);
        let y0 = y - (j - t);

        let (i1, j1) = if x0 > y0 { (1.0, 0.0) } else { (0.0, 1.0) };
        let x1 = x0 - i1 + G2;
        let y1 = y0 - j1 + G2;
        let x2 = x0 - 1.0 + 2.0 * G2;
        let y2 = y0 - 1.0 + 2.0 * G2;

        let ii = (i as i64).rem_euclid(256) as usize;
        let jj = (j as i64).rem_euclid(256) as usize;
        let gi0 = self.perm[ii + self.perm[jj] as usize] as usize % 12;
        let gi1 =
            self.perm[ii + i1 as usize + self.perm[jj + j1 as usize] as usize] as usize % 12;
        let gi2 = self.perm[ii + 1 + self.perm[jj + 1] as usize] as usize % 12;

        let mut total = 0.0;
        for ((gx, gy), (px, py)) in
            [GRAD[gi0], GRAD[gi1], GRAD[gi2]].into_iter().zip([(x0, y0), (x1, y1), (x2, y2)])
        {
            let t = 0.5 - px * px - py * py;
            if t > 0.0 {
                let t2 = t * t;
                total += t2 * t2 * (gx * px + gy * py);
            }
        }
        (70.0 * total).clamp(-1.0, 1.0)
    }
}

/// One-off sample; build a [`SimplexNoise`] for hot loops.
pub fn simplex2(x: f64, y: f64, seed: u64) -> f64 {
    SimplexNoise::new(seed).sample(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    pub octaves: u32,
    pub persistence: f64,
    /// Base frequency in cycles per unit patch coordinate.
    pub base_frequency: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(seed: u64) -> NoiseConfig {
        NoiseConfig { octaves: 4, persistence: 0.5, base_frequency: 4.0, seed }
    }

    pub fn with_seed(&self, seed: u64) -> NoiseConfig {
        NoiseConfig { seed, ..*self }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.octaves < 1 {
            return Err(crate::Error::Config("octaves must be >= 1".into()));
        }
        if !(self.persistence > 0.0 && self.persistence <= 1.0) {
            return Err(crate::Error::Config(format!(
                "persistence {} out of range (0, 1]",
                self.persistence
            )));
        }
        Ok(())
    }

    /// Geometric sum of the octave amplitudes; the fractal sum divides by it.
    pub fn amplitude_normalizer(&self) -> f64 {
        (0..self.octaves).map(|o| self.persistence.powi(o as i32)).sum()
    }
}

/// Multi-octave simplex composition with doubling frequency, normalized back
/// into [-1, 1].
pub struct Fractal {
    noise: SimplexNoise,
    cfg: NoiseConfig,
    normalizer: f64,
}

impl Fractal {
    pub fn new(cfg: NoiseConfig) -> Fractal {
        Fractal { noise: SimplexNoise::new(cfg.seed), normalizer: cfg.amplitude_normalizer(), cfg }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        let mut amp = 1.0;
        let mut freq = self.cfg.base_frequency;
        for _ in 0..self.cfg.octaves {
            sum += amp * self.noise.sample(freq * x, freq * y);
            amp *= self.cfg.persistence;
            freq *= 2.0;
        }
        sum / self.normalizer
    }
}

/// One-off fractal sample.
pub fn fractal(x: f64, y: f64, cfg: &NoiseConfig) -> f64 {
    Fractal::new(*cfg).sample(x, y)
}

/// Replaces background pixels with fractal noise mapped to [0, 1]; object
/// pixels and the mask are untouched.
pub fn augment(patch: &DepthPatch, cfg: &NoiseConfig) -> DepthPatch {
    let field = Fractal::new(*cfg);
    let n = patch.n;
    let mut out = patch.clone();
    for row in 0..n {
        let y = (row as f64 + 0.5) / n as f64;
        for col in 0..n {
            let idx = row * n + col;
            if !out.mask[idx] {
                let x = (col as f64 + 0.5) / n as f64;
                let v = (field.sample(x, y) + 1.0) / 2.0;
                out.pixels[idx] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshio::{gen_primitive, PrimitiveKind};
    use crate::render::{rasterize, RenderConfig};
    use crate::viewsphere::View;
    use crate::geometry::Vec3;

    #[test]
    fn simplex_deterministic() {
        let a = simplex2(1.37, -2.21, 42);
        let b = simplex2(1.37, -2.21, 42);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn simplex_range_scan() {
        // 10^6 samples stay in [-1, 1] and actually use a good part of it.
        let noise = SimplexNoise::new(7);
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for i in 0..1000 {
            for j in 0..1000 {
                let v = noise.sample(i as f64 * 0.097 - 50.0, j as f64 * 0.089 - 44.0);
                assert!((-1.0..=1.0).contains(&v));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        assert!(lo < -0.5 && hi > 0.5, "suspicious amplitude range [{lo}, {hi}]");
    }

    #[test]
    fn simplex_zero_at_lattice_points() {
        const G2: f64 = 0.211_324_865_405_187_1;
        let noise = SimplexNoise::new(3);
        for i in -5i64..5 {
            for j in -5i64..5 {
                let t = (i + j) as f64 * G2;
                let v = noise.sample(i as f64 - t, j as f64 - t);
                assert!(v.abs() < 1e-12, "lattice ({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn seed_changes_the_field() {
        let a = SimplexNoise::new(1);
        let b = SimplexNoise::new(2);
        let mut max_diff: f64 = 0.0;
        for r in 0..64 {
            for c in 0..64 {
                let (x, y) = (c as f64 * 0.11, r as f64 * 0.13);
                max_diff = max_diff.max((a.sample(x, y) - b.sample(x, y)).abs());
            }
        }
        assert!(max_diff > 0.1);
    }

    #[test]
    fn fractal_single_octave_equals_simplex() {
        let cfg = NoiseConfig { octaves: 1, ..NoiseConfig::new(9) };
        let noise = SimplexNoise::new(9);
        for k in 0..50 {
            let (x, y) = (k as f64 * 0.031, k as f64 * 0.017);
            let f = fractal(x, y, &cfg);
            let s = noise.sample(cfg.base_frequency * x, cfg.base_frequency * y);
            assert_eq!(f.to_bits(), s.to_bits());
        }
    }

    #[test]
    fn fractal_normalizer_geometric_sum() {
        let cfg = NoiseConfig::new(0);
        assert!((cfg.amplitude_normalizer() - 1.875).abs() < 1e-12);
        for k in 0..100 {
            let v = fractal(k as f64 * 0.037, k as f64 * 0.023, &cfg);
            assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn more_octaves_add_high_frequency_content() {
        // Spectral proxy: difference to the field's own 2x-downsampled copy,
        // measured relative to the field's standard deviation (the octave
        // normalizer shrinks absolute amplitude, so the high-frequency SHARE
        // is what grows with the octave count).
        let detail = |octaves: u32| -> f64 {
            let cfg = NoiseConfig { octaves, ..NoiseConfig::new(5) };
            let f = Fractal::new(cfg);
            let n = 64usize;
            let img: Vec<f64> = (0..n * n)
                .map(|i| f.sample((i % n) as f64 / n as f64, (i / n) as f64 / n as f64))
                .collect();
            let mean = img.iter().sum::<f64>() / img.len() as f64;
            let std =
                (img.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / img.len() as f64).sqrt();
            let mut acc = 0.0;
            for r in 0..n {
                for c in 0..n {
                    let (r2, c2) = (r / 2 * 2, c / 2 * 2);
                    let blur = (img[r2 * n + c2]
                        + img[r2 * n + c2 + 1]
                        + img[(r2 + 1) * n + c2]
                        + img[(r2 + 1) * n + c2 + 1])
                        / 4.0;
                    acc += (img[r * n + c] - blur).abs();
                }
            }
            acc / (n * n) as f64 / std
        };
        let (d1, d2, d4) = (detail(1), detail(2), detail(4));
        assert!(d4 > d2 && d2 > d1, "detail not increasing: {d1} {d2} {d4}");
    }

    #[test]
    fn augment_preserves_object_pixels() {
        let mesh = gen_primitive(PrimitiveKind::Pyramid, 0.2, 8).unwrap();
        let cfg = RenderConfig::desk();
        let patch =
            rasterize(&mesh, &View { vertex: Vec3::new(0.0, 0.0, 1.0), roll: 0.2 }, &cfg).unwrap();
        let noisy = augment(&patch, &NoiseConfig::new(11));
        assert_eq!(patch.mask, noisy.mask);
        let mut changed = 0;
        for i in 0..patch.pixels.len() {
            if patch.mask[i] {
                assert_eq!(patch.pixels[i].to_bits(), noisy.pixels[i].to_bits());
            } else if patch.pixels[i] != noisy.pixels[i] {
                changed += 1;
            }
            assert!((0.0..=1.0).contains(&noisy.pixels[i]));
        }
        assert!(changed > 0);
    }

    #[test]
    fn augment_edge_cases() {
        // All-hit mask: output equals input.
        let mut full = DepthPatch::background(16);
        for (i, m) in full.mask.iter_mut().enumerate() {
            *m = true;
            full.pixels[i] = 0.5;
        }
        let out = augment(&full, &NoiseConfig::new(1));
        assert_eq!(out.pixels, full.pixels);

        // All-background: output is the pure noise field in [0, 1].
        let empty = DepthPatch::background(16);
        let out = augment(&empty, &NoiseConfig::new(1));
        assert!(out.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(out.pixels.iter().any(|&v| v != 1.0));

        // Fixed seed: byte-identical output across runs.
        let again = augment(&empty, &NoiseConfig::new(1));
        for (a, b) in out.pixels.iter().zip(&again.pixels) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        let a = sample_seed(7, 0, 0);
        let b = sample_seed(7, 0, 0);
        assert_eq!(a, b);
        assert_ne!(sample_seed(7, 0, 0), sample_seed(7, 1, 0));
        assert_ne!(sample_seed(7, 0, 0), sample_seed(7, 0, 1));
        assert_ne!(sample_seed(7, 0, 0), sample_seed(8, 0, 0));
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig { octaves: 0, ..NoiseConfig::new(0) }.validate().is_err());
        assert!(NoiseConfig { persistence: 0.0, ..NoiseConfig::new(0) }.validate().is_err());
        assert!(NoiseConfig::new(0).validate().is_ok());
    }
}
