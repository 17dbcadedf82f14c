//! The shallow CNN: four 3×3 convolutions with ReLU, 2×2 max pooling after
//! the second and fourth, two dropout-regularized hidden dense layers and a
//! softmax output.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{dropout_mask, relu_backward, relu_inplace, softmax_rows, Conv, Dense, MaxPool};
use super::tensor::Scalar;
use crate::error::{Error, Result};
use crate::feature_encoder::{FeatureCube, CHANNELS, DEFAULT_IL, DEFAULT_K};

pub const DEFAULT_CLASSES: usize = 13;
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// (IL, K, channels); the network sees channels × IL × K.
    pub input: (usize, usize, usize),
    pub conv_channels: Vec<usize>,
    /// Conv layers (0-based) followed by a 2×2 max pool.
    pub pool_after: Vec<usize>,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub keep_prob: f64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            input: (DEFAULT_IL, DEFAULT_K, CHANNELS),
            conv_channels: vec![64; 4],
            pool_after: vec![1, 3],
            hidden: vec![256, 256],
            classes: DEFAULT_CLASSES,
            keep_prob: 0.8,
        }
    }
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let (il, k, ch) = self.input;
        if il == 0 || k == 0 || ch == 0 || self.classes < 2 {
            return Err(Error::ParameterDomain(format!(
                "input {:?} and {} classes must be non-empty",
                self.input, self.classes
            )));
        }
        if self.conv_channels.contains(&0) || self.hidden.contains(&0) {
            return Err(Error::ParameterDomain("layer widths must be >= 1".into()));
        }
        if self.pool_after.iter().any(|&p| p >= self.conv_channels.len()) {
            return Err(Error::ParameterDomain("pool placed after a missing conv layer".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::ParameterDomain(format!("keep_prob {} outside (0, 1]", self.keep_prob)));
        }
        Ok(())
    }

    /// Spatial size after the conv stack.
    pub fn conv_output(&self) -> (usize, usize, usize) {
        let (mut h, mut w) = (self.input.0, self.input.1);
        for i in 0..self.conv_channels.len() {
            if self.pool_after.contains(&i) {
                h = h.div_ceil(2);
                w = w.div_ceil(2);
            }
        }
        (*self.conv_channels.last().unwrap_or(&self.input.2), h, w)
    }

    pub fn flat_len(&self) -> usize {
        let (c, h, w) = self.conv_output();
        c * h * w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub convs: Vec<Conv<T>>,
    pub dense: Vec<Dense<T>>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    batch: usize,
    /// Input to each conv layer.
    conv_in: Vec<Vec<T>>,
    /// Output of each conv layer after ReLU.
    conv_out: Vec<Vec<T>>,
    pool_arg: Vec<Option<Vec<usize>>>,
    /// Input to each dense layer.
    dense_in: Vec<Vec<T>>,
    /// Hidden outputs after ReLU, before dropout.
    hidden_out: Vec<Vec<T>>,
    masks: Vec<Option<Vec<T>>>,
    pub probs: Vec<T>,
}

/// Parameter gradients in [`Network::tensors`] order.
pub type Grads<T> = Vec<Vec<T>>;

impl<T: Scalar> Network<T> {
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let (il, k, ch) = spec.input;
        let (mut h, mut w, mut cin) = (il, k, ch);
        let mut convs = Vec::new();
        for (i, &cout) in spec.conv_channels.iter().enumerate() {
            convs.push(Conv::zeros(cin, cout, h, w));
            cin = cout;
            if spec.pool_after.contains(&i) {
                h = h.div_ceil(2);
                w = w.div_ceil(2);
            }
        }
        let mut dense = Vec::new();
        let mut nin = cin * h * w;
        for &n in spec.hidden.iter().chain(std::iter::once(&spec.classes)) {
            dense.push(Dense::zeros(nin, n));
            nin = n;
        }
        Ok(Self { spec, convs, dense })
    }

    /// He-normal weights, zero biases.
    pub fn init<R: Rng>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for c in net.convs.iter_mut() {
            let n = Normal::new(0.0, (2.0 / (c.cin * 9) as f64).sqrt()).expect("positive std");
            c.weight.iter_mut().for_each(|v| *v = T::of(n.sample(rng)));
        }
        for d in net.dense.iter_mut() {
            let n = Normal::new(0.0, (2.0 / d.nin as f64).sqrt()).expect("positive std");
            d.weight.iter_mut().for_each(|v| *v = T::of(n.sample(rng)));
        }
        Ok(net)
    }

    pub fn input_len(&self) -> usize {
        let (il, k, ch) = self.spec.input;
        il * k * ch
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    /// Tensor names in storage order, with shapes.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![c.cout, c.cin, 3, 3]));
            out.push((format!("conv{}.bias", i + 1), vec![c.cout]));
        }
        for (i, d) in self.dense.iter().enumerate() {
            out.push((format!("fc{}.weight", i + 1), vec![d.nout, d.nin]));
            out.push((format!("fc{}.bias", i + 1), vec![d.nout]));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for c in &self.convs {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        for d in &self.dense {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for c in self.convs.iter_mut() {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for d in self.dense.iter_mut() {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect()
    }

    /// Forward pass over `batch` inputs laid out `[batch][channel][IL][K]`.
    /// In train mode hidden activations are dropped with masks drawn from
    /// `rng`.
    pub fn forward_tape<R: Rng>(&self, x: &[T], batch: usize, mode: Mode, rng: &mut R) -> Result<Tape<T>> {
        if batch == 0 || x.len() != batch * self.input_len() {
            return Err(Error::Structural(format!(
                "input has {} values, want {} x {}",
                x.len(),
                batch,
                self.input_len()
            )));
        }
        let mut tape = Tape {
            batch,
            conv_in: Vec::new(),
            conv_out: Vec::new(),
            pool_arg: Vec::new(),
            dense_in: Vec::new(),
            hidden_out: Vec::new(),
            masks: Vec::new(),
            probs: Vec::new(),
        };
        let mut a = x.to_vec();
        for (i, c) in self.convs.iter().enumerate() {
            let mut z = c.forward(&a, batch);
            relu_inplace(&mut z);
            tape.conv_in.push(std::mem::take(&mut a));
            if self.spec.pool_after.contains(&i) {
                let pool = MaxPool { c: c.cout, h: c.h, w: c.w };
                let (p, arg) = pool.forward(&z, batch);
                tape.pool_arg.push(Some(arg));
                a = p;
            } else {
                tape.pool_arg.push(None);
                a = z.clone();
            }
            tape.conv_out.push(z);
        }
        let last = self.dense.len() - 1;
        for (i, d) in self.dense.iter().enumerate() {
            let mut z = d.forward(&a, batch);
            tape.dense_in.push(std::mem::take(&mut a));
            if i == last {
                softmax_rows(&mut z, d.nout);
                tape.probs = z;
                break;
            }
            relu_inplace(&mut z);
            let mask = (mode == Mode::Train && self.spec.keep_prob < 1.0)
                .then(|| dropout_mask::<T, R>(z.len(), self.spec.keep_prob, rng));
            a = match &mask {
                Some(m) => z.iter().zip(m).map(|(&v, &k)| v * k).collect(),
                None => z.clone(),
            };
            tape.hidden_out.push(z);
            tape.masks.push(mask);
        }
        Ok(tape)
    }

    /// Gradients of the mean cross-entropy over the batch.
    pub fn backward(&self, tape: &Tape<T>, labels: &[usize]) -> Result<Grads<T>> {
        let batch = tape.batch;
        let c = self.classes();
        if labels.len() != batch || labels.iter().any(|&l| l >= c) {
            return Err(Error::Structural(format!("labels {labels:?} do not fit {batch} x {c}")));
        }
        let mut grads = self.zero_grads();
        let inv = T::of(1.0 / batch as f64);
        let mut g: Vec<T> = tape.probs.clone();
        for (row, &l) in g.chunks_mut(c).zip(labels) {
            row[l] = row[l] - T::one();
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
        let nconv = self.convs.len();
        for i in (0..self.dense.len()).rev() {
            if i < self.dense.len() - 1 {
                if let Some(m) = &tape.masks[i] {
                    g.iter_mut().zip(m).for_each(|(v, &k)| *v = *v * k);
                }
                relu_backward(&tape.hidden_out[i], &mut g);
            }
            let (dw, rest) = grads[2 * (nconv + i)..].split_at_mut(1);
            g = self.dense[i].backward(&tape.dense_in[i], &g, batch, &mut dw[0], &mut rest[0]);
        }
        for i in (0..nconv).rev() {
            let conv = &self.convs[i];
            if let Some(arg) = &tape.pool_arg[i] {
                let pool = MaxPool { c: conv.cout, h: conv.h, w: conv.w };
                g = pool.backward(&g, arg, batch);
            }
            relu_backward(&tape.conv_out[i], &mut g);
            let (dw, rest) = grads[2 * i..].split_at_mut(1);
            match conv.backward(&tape.conv_in[i], &g, batch, &mut dw[0], &mut rest[0], i > 0) {
                Some(dx) => g = dx,
                None => break,
            }
        }
        Ok(grads)
    }

    /// Class probabilities, `[batch][classes]`.
    pub fn forward<R: Rng>(&self, x: &[T], batch: usize, mode: Mode, rng: &mut R) -> Result<Vec<T>> {
        Ok(self.forward_tape(x, batch, mode, rng)?.probs)
    }

    /// Inference-mode probabilities for one input.
    pub fn infer(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward(x, 1, Mode::Infer, &mut NoRng)
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let cv = |v: &[T]| v.iter().map(|&x| U::of(x.to_f64())).collect::<Vec<U>>();
        Network {
            spec: self.spec.clone(),
            convs: self
                .convs
                .iter()
                .map(|c| Conv {
                    cin: c.cin,
                    cout: c.cout,
                    h: c.h,
                    w: c.w,
                    weight: cv(&c.weight),
                    bias: cv(&c.bias),
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    nin: d.nin,
                    nout: d.nout,
                    weight: cv(&d.weight),
                    bias: cv(&d.bias),
                })
                .collect(),
        }
    }
}

/// Placeholder generator for inference, where no random draws happen.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference draws no random numbers")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("inference draws no random numbers")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("inference draws no random numbers")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("inference draws no random numbers")
    }
}

/// `−ln p[label]` with `p` floored at 1e−12.
pub fn loss(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Mean cross-entropy of a `[batch][classes]` probability block.
pub fn batch_loss<T: Scalar>(probs: &[T], labels: &[usize], classes: usize) -> f64 {
    let total: f64 = probs
        .chunks(classes)
        .zip(labels)
        .map(|(row, &l)| -row[l].to_f64().max(PROB_FLOOR).ln())
        .sum();
    total / labels.len().max(1) as f64
}

/// Cube values reordered to `[channel][IL][K]`.
pub fn cube_to_input<T: Scalar>(cube: &FeatureCube) -> Vec<T> {
    let (il, k) = (cube.il, cube.k);
    let mut out = vec![T::zero(); CHANNELS * il * k];
    for l in 0..il {
        for kk in 0..k {
            for ch in 0..CHANNELS {
                out[(ch * il + l) * k + kk] = T::of(cube.get(l, kk, ch) as f64);
            }
        }
    }
    out
}

/// Predicted class and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub confidence: f64,
}

pub fn argmax_prediction<T: Scalar>(probs: &[T]) -> Prediction {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Prediction {
        class: best,
        confidence: probs[best].to_f64(),
    }
}

impl Network<f32> {
    pub fn predict(&self, cube: &FeatureCube) -> Result<Prediction> {
        let (il, k, _) = self.spec.input;
        if cube.il != il || cube.k != k {
            return Err(Error::Structural(format!(
                "cube is {}x{}, network expects {il}x{k}",
                cube.il, cube.k
            )));
        }
        let probs = self.infer(&cube_to_input(cube))?;
        Ok(argmax_prediction(&probs))
    }
}
