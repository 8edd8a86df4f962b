//! The convolutional model: an n x n depth patch maps to a d-dimensional
//! descriptor (output of the last fully connected layer) and a raw 4-vector
//! pose regressed by a linear head on that descriptor.

pub mod adam;
pub mod layers;

pub use adam::AdamState;
pub use layers::{Conv, Fc, Layer, LayerCache, MaxPool, Real, Relu};

use crate::error::{Error, Result};
use crate::render::DepthPatch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

const WEIGHTS_MAGIC: &[u8; 4] = b"PMW1";
const WEIGHTS_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// conv(c1, 8x8) -> pool2 -> relu -> conv(c2, 5x5) -> pool2 -> relu -> fc -> relu -> fc(d).
    Baseline,
    /// Pools replaced by stride-2 convolutions plus two extra 3x3 conv layers.
    Deeper,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    pub arch: Arch,
    pub input_n: usize,
    pub descriptor_dim: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub fc_units: usize,
    pub seed: u64,
}

impl NetConfig {
    /// Full-size configuration: 64x64 input, descriptor d = 64.
    pub fn paper(seed: u64) -> NetConfig {
        NetConfig {
            arch: Arch::Baseline,
            input_n: 64,
            descriptor_dim: 64,
            conv1_filters: 16,
            conv2_filters: 7,
            fc_units: 256,
            seed,
        }
    }

    /// CPU-trainable preset: 32x32 input with halved convolution widths.
    pub fn desk(seed: u64) -> NetConfig {
        NetConfig {
            arch: Arch::Baseline,
            input_n: 32,
            descriptor_dim: 64,
            conv1_filters: 8,
            conv2_filters: 4,
            fc_units: 128,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.descriptor_dim < 2 {
            return Err(Error::Config("descriptor dimension must be >= 2".into()));
        }
        if self.input_n < 8 {
            return Err(Error::Config(format!("input size {} below minimum 8", self.input_n)));
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 || self.fc_units == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter gradients in network declaration order, plus the input gradient.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    /// (grad_weights, grad_bias) per parameterized layer: trunk order, then pose head.
    pub per_layer: Vec<(Vec<T>, Vec<T>)>,
    pub input: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Gradients<T> {
        let per_layer = net
            .parameterized_layers()
            .iter()
            .map(|(w, b)| (vec![T::zero(); w.len()], vec![T::zero(); b.len()]))
            .collect();
        Gradients { per_layer, input: Vec::new() }
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for ((w, b), (ow, ob)) in self.per_layer.iter_mut().zip(&other.per_layer) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += *y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += *y;
            }
        }
    }

    /// Flat view in the same order as [`Network::param_refs`].
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.per_layer.len() * 2);
        for (w, b) in &self.per_layer {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}

/// Forward-pass result: descriptor, raw (unnormalized) pose, and the cache the
/// backward pass consumes.
#[derive(Debug)]
pub struct Forward<T> {
    pub descriptor: Vec<T>,
    pub pose_raw: [T; 4],
    pub cache: Cache<T>,
}

#[derive(Debug)]
pub struct Cache<T> {
    trunk: Vec<LayerCache<T>>,
    descriptor: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    pub cfg: NetConfig,
    pub trunk: Vec<Layer<T>>,
    pub pose_head: Fc<T>,
}

fn build_trunk<T: Real>(cfg: &NetConfig) -> Result<Vec<Layer<T>>> {
    let n = cfg.input_n;
    let (c1, c2) = (cfg.conv1_filters, cfg.conv2_filters);
    let mut layers: Vec<Layer<T>> = Vec::new();
    let mut ch = 1usize;
    let mut h = n;
    let mut w = n;

    let mut push_conv = |layers: &mut Vec<Layer<T>>,
                         ch: &mut usize,
                         h: &mut usize,
                         w: &mut usize,
                         out_c: usize,
                         k: usize,
                         stride: usize,
                         pad: usize|
     -> Result<()> {
        let conv = Conv::new(*ch, *h, *w, out_c, k, stride, pad)?;
        *ch = out_c;
        *h = conv.out_h;
        *w = conv.out_w;
        layers.push(Layer::Conv(conv));
        Ok(())
    };

    match cfg.arch {
        Arch::Baseline => {
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c1, 8, 1, 0)?;
            let pool = MaxPool::new(ch, h, w, 2);
            h = pool.out_h;
            w = pool.out_w;
            layers.push(Layer::Pool(pool));
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c2, 5, 1, 0)?;
            let pool = MaxPool::new(ch, h, w, 2);
            h = pool.out_h;
            w = pool.out_w;
            layers.push(Layer::Pool(pool));
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
        }
        Arch::Deeper => {
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c1, 8, 1, 0)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c1, 3, 2, 1)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c2, 5, 1, 0)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c2, 3, 2, 1)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c2, 3, 1, 1)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
            push_conv(&mut layers, &mut ch, &mut h, &mut w, c2, 3, 1, 1)?;
            layers.push(Layer::Relu(Relu { len: ch * h * w }));
        }
    }

    let flat = ch * h * w;
    if flat == 0 {
        return Err(Error::Config(format!(
            "input size {n} collapses to zero spatial extent in the {:?} architecture",
            cfg.arch
        )));
    }
    layers.push(Layer::Fc(Fc::new(flat, cfg.fc_units)));
    layers.push(Layer::Relu(Relu { len: cfg.fc_units }));
    layers.push(Layer::Fc(Fc::new(cfg.fc_units, cfg.descriptor_dim)));
    Ok(layers)
}

impl<T: Real> Network<T> {
    /// Builds the network and initializes weights uniformly in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` (biases zero) from the config seed.
    pub fn new(cfg: NetConfig) -> Result<Network<T>> {
        cfg.validate()?;
        let trunk = build_trunk::<T>(&cfg)?;
        let pose_head = Fc::new(cfg.descriptor_dim, 4);
        let mut net = Network { cfg, trunk, pose_head };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fan_ins: Vec<usize> = net
            .trunk
            .iter()
            .filter_map(|l| l.fan_in())
            .chain([net.pose_head.in_dim])
            .collect();
        let mut idx = 0;
        for (w, _b) in net.parameterized_layers_mut() {
            let bound = 1.0 / (fan_ins[idx] as f64).sqrt();
            for v in w.iter_mut() {
                *v = T::from_f64(rng.random_range(-bound..bound));
            }
            idx += 1;
        }
        Ok(net)
    }

    fn parameterized_layers(&self) -> Vec<(&[T], &[T])> {
        let mut out: Vec<(&[T], &[T])> = self.trunk.iter().filter_map(|l| l.params()).collect();
        out.push((&self.pose_head.weights, &self.pose_head.bias));
        out
    }

    fn parameterized_layers_mut(&mut self) -> Vec<(&mut Vec<T>, &mut Vec<T>)> {
        let mut out: Vec<(&mut Vec<T>, &mut Vec<T>)> =
            self.trunk.iter_mut().filter_map(|l| l.params_mut()).collect();
        out.push((&mut self.pose_head.weights, &mut self.pose_head.bias));
        out
    }

    /// Parameter slices in declaration order (weights then bias per layer).
    pub fn param_refs(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for (w, b) in self.parameterized_layers() {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn param_muts(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for (w, b) in self.parameterized_layers_mut() {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_refs().iter().map(|p| p.len()).sum()
    }

    /// Runs the trunk and pose head on a depth patch.
    pub fn forward(&self, patch: &DepthPatch) -> Result<Forward<T>> {
        if patch.n != self.cfg.input_n {
            return Err(Error::Config(format!(
                "patch size {} does not match network input {}",
                patch.n, self.cfg.input_n
            )));
        }
        let input: Vec<T> = patch.pixels.iter().map(|&p| T::from_f32v(p)).collect();
        self.forward_raw(&input)
    }

    /// Forward pass on a raw input vector (length input_n^2).
    pub fn forward_raw(&self, input: &[T]) -> Result<Forward<T>> {
        if input.len() != self.cfg.input_n * self.cfg.input_n {
            return Err(Error::Config(format!(
                "input length {} does not match {}x{}",
                input.len(),
                self.cfg.input_n,
                self.cfg.input_n
            )));
        }
        let mut act = input.to_vec();
        let mut trunk_cache = Vec::with_capacity(self.trunk.len());
        for layer in &self.trunk {
            let (out, cache) = layer.forward(&act);
            trunk_cache.push(cache);
            act = out;
        }
        let descriptor = act;
        let pose_vec = self.pose_head.forward(&descriptor);
        let pose_raw = [pose_vec[0], pose_vec[1], pose_vec[2], pose_vec[3]];
        Ok(Forward {
            descriptor: descriptor.clone(),
            pose_raw,
            cache: Cache { trunk: trunk_cache, descriptor },
        })
    }

    /// Backpropagates descriptor and raw-pose gradients to every parameter.
    pub fn backward(
        &self,
        cache: &Cache<T>,
        grad_descriptor: &[T],
        grad_pose_raw: &[T; 4],
    ) -> Gradients<T> {
        let (pose_gw, pose_gb, pose_gin) =
            self.pose_head.backward(&cache.descriptor, grad_pose_raw.as_slice());
        let mut grad: Vec<T> =
            grad_descriptor.iter().zip(&pose_gin).map(|(&a, &b)| a + b).collect();

        let mut per_layer_rev: Vec<(Vec<T>, Vec<T>)> = Vec::new();
        for (layer, cache) in self.trunk.iter().zip(&cache.trunk).rev() {
            let (gin, params) = layer.backward(cache, &grad);
            if let Some(p) = params {
                per_layer_rev.push(p);
            }
            grad = gin;
        }
        per_layer_rev.reverse();
        per_layer_rev.push((pose_gw, pose_gb));
        Gradients { per_layer: per_layer_rev, input: grad }
    }
}

fn write_f32s<W: Write>(w: &mut W, data: &[f32]) -> std::io::Result<()> {
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Format(format!("truncated weight file reading {what}")))
}

/// Saves the network: magic, config block, then little-endian f32 weights and
/// biases per parameterized layer in declaration order.
pub fn save_weights(net: &Network<f32>, path: &Path) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    let c = &net.cfg;
    out.push(match c.arch {
        Arch::Baseline => 0u8,
        Arch::Deeper => 1u8,
    });
    for v in [c.input_n, c.descriptor_dim, c.conv1_filters, c.conv2_filters, c.fc_units] {
        out.extend_from_slice(&(v as u16).to_le_bytes());
    }
    out.extend_from_slice(&c.seed.to_le_bytes());
    let layers = net.parameterized_layers();
    out.extend_from_slice(&(layers.len() as u16).to_le_bytes());
    for (w, b) in layers {
        out.extend_from_slice(&(w.len() as u32).to_le_bytes());
        write_f32s(&mut out, w)?;
        out.extend_from_slice(&(b.len() as u32).to_le_bytes());
        write_f32s(&mut out, b)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads a weight file, validating magic, version and the parameter shapes
/// implied by the stored config.
pub fn load_weights(path: &Path) -> Result<Network<f32>> {
    let data = std::fs::read(path)?;
    let mut r = std::io::Cursor::new(data);
    let mut magic = [0u8; 4];
    read_exact_or_format(&mut r, &mut magic, "magic")?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected PMW1")));
    }
    let mut u16buf = [0u8; 2];
    read_exact_or_format(&mut r, &mut u16buf, "version")?;
    let version = u16::from_le_bytes(u16buf);
    if version != WEIGHTS_VERSION {
        return Err(Error::Format(format!("unsupported weight version {version}")));
    }
    let mut byte = [0u8; 1];
    read_exact_or_format(&mut r, &mut byte, "arch")?;
    let arch = match byte[0] {
        0 => Arch::Baseline,
        1 => Arch::Deeper,
        other => return Err(Error::Format(format!("unknown architecture tag {other}"))),
    };
    let mut fields = [0usize; 5];
    for f in fields.iter_mut() {
        read_exact_or_format(&mut r, &mut u16buf, "config")?;
        *f = u16::from_le_bytes(u16buf) as usize;
    }
    let mut u64buf = [0u8; 8];
    read_exact_or_format(&mut r, &mut u64buf, "seed")?;
    let cfg = NetConfig {
        arch,
        input_n: fields[0],
        descriptor_dim: fields[1],
        conv1_filters: fields[2],
        conv2_filters: fields[3],
        fc_units: fields[4],
        seed: u64::from_le_bytes(u64buf),
    };
    let mut net = Network::<f32>::new(cfg)?;

    read_exact_or_format(&mut r, &mut u16buf, "layer count")?;
    let layer_count = u16::from_le_bytes(u16buf) as usize;
    let expected = net.parameterized_layers().len();
    if layer_count != expected {
        return Err(Error::Format(format!(
            "weight file has {layer_count} parameterized layers, config implies {expected}"
        )));
    }
    let mut u32buf = [0u8; 4];
    for (w, b) in net.parameterized_layers_mut() {
        for vec in [w, b] {
            read_exact_or_format(&mut r, &mut u32buf, "parameter count")?;
            let len = u32::from_le_bytes(u32buf) as usize;
            if len != vec.len() {
                return Err(Error::Format(format!(
                    "parameter block of {len} values where the architecture needs {}",
                    vec.len()
                )));
            }
            for v in vec.iter_mut() {
                read_exact_or_format(&mut r, &mut u32buf, "parameters")?;
                *v = f32::from_le_bytes(u32buf);
            }
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after parameters", rest.len())));
    }
    Ok(net)
}
