//! Adam training with a piecewise-constant learning-rate schedule.

use super::network::{batch_loss, Grads, Mode, Network};
use super::tensor::Scalar;
use crate::error::{Error, Result};
use crate::seed;

/// `(step, lr)` breakpoints; the rate of the last breakpoint at or before a
/// step applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub breakpoints: Vec<(u64, f64)>,
}

impl Schedule {
    pub fn new(breakpoints: Vec<(u64, f64)>) -> Result<Self> {
        let s = Self { breakpoints };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(lr: f64) -> Self {
        Self {
            breakpoints: vec![(0, lr)],
        }
    }

    /// 15000 steps: 1e−4, then 1e−5 / 1e−6 / 1e−7 from steps 5000 / 8000 / 11000.
    pub fn reference() -> Self {
        Self {
            breakpoints: vec![(0, 1e-4), (5000, 1e-5), (8000, 1e-6), (11000, 1e-7)],
        }
    }

    /// The reference schedule scaled to 3000 steps.
    pub fn desk() -> Self {
        Self {
            breakpoints: vec![(0, 1e-4), (1000, 1e-5), (1600, 1e-6), (2200, 1e-7)],
        }
    }

    /// Breakpoints stretched from a `from`-step run to a `to`-step run.
    pub fn scaled(&self, from: u64, to: u64) -> Result<Self> {
        if from == 0 || to == 0 {
            return Err(Error::ParameterDomain("schedule lengths must be > 0".into()));
        }
        let mut bp: Vec<(u64, f64)> = Vec::with_capacity(self.breakpoints.len());
        for &(s, lr) in &self.breakpoints {
            let t = (s as u128 * to as u128 / from as u128) as u64;
            match bp.last_mut() {
                Some(last) if last.0 == t => last.1 = lr,
                _ => bp.push((t, lr)),
            }
        }
        Self::new(bp)
    }

    pub fn validate(&self) -> Result<()> {
        match self.breakpoints.first() {
            Some((0, _)) => {}
            _ => return Err(Error::ParameterDomain("schedule must start at step 0".into())),
        }
        if self.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::ParameterDomain("schedule steps must be strictly increasing".into()));
        }
        if self.breakpoints.iter().any(|&(_, lr)| !(lr.is_finite() && lr > 0.0)) {
            return Err(Error::ParameterDomain("learning rates must be finite and > 0".into()));
        }
        Ok(())
    }

    pub fn lr(&self, step: u64) -> f64 {
        self.breakpoints
            .iter()
            .rev()
            .find(|(s, _)| *s <= step)
            .map_or(self.breakpoints[0].1, |&(_, lr)| lr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: Schedule,
    pub keep_prob: f64,
    /// Share of training samples drawn from negative (random-motion)
    /// recordings; 0 samples recordings uniformly.
    pub negative_share: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn reference() -> Self {
        Self {
            steps: 15_000,
            batch_size: 128,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule: Schedule::reference(),
            keep_prob: 0.8,
            negative_share: 0.25,
            seed: 0,
        }
    }

    pub fn desk() -> Self {
        Self {
            steps: 3000,
            batch_size: 32,
            schedule: Schedule::desk(),
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch_size == 0 {
            return Err(Error::ParameterDomain("batch size must be >= 1".into()));
        }
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if !(unit(self.beta1) && unit(self.beta2) && self.epsilon > 0.0) {
            return Err(Error::ParameterDomain("Adam betas must be in [0, 1) and epsilon > 0".into()));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::ParameterDomain(format!("keep_prob {} outside (0, 1]", self.keep_prob)));
        }
        if !(0.0..1.0).contains(&self.negative_share) {
            return Err(Error::ParameterDomain(format!("negative_share {} outside [0, 1)", self.negative_share)));
        }
        Ok(())
    }
}

/// First and second moment estimates per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    /// Updates applied so far.
    pub step: u64,
}

impl AdamState {
    pub fn new<T: Scalar>(net: &Network<T>) -> Self {
        let zeros: Vec<Vec<f32>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One Adam update with learning rate `lr`.
pub fn adam_update<T: Scalar>(
    net: &mut Network<T>,
    grads: &Grads<T>,
    state: &mut AdamState,
    config: &TrainConfig,
    lr: f64,
) {
    let t = (state.step + 1) as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 / (1.0 - b1.powi(t));
    let c2 = 1.0 / (1.0 - b2.powi(t));
    for (((p, g), m), v) in net
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g[i].to_f64();
            let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
            let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let upd = lr * (mi * c1) / ((vi * c2).sqrt() + config.epsilon);
            p[i] = T::of(p[i].to_f64() - upd);
        }
    }
    state.step += 1;
}

/// Outcome of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

/// Network, optimizer state and configuration. The dropout stream for step
/// `s` is derived from `(seed, s)`, so a resumed run continues exactly.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub net: Network<T>,
    pub adam: AdamState,
    pub config: TrainConfig,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(mut net: Network<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        net.spec.keep_prob = config.keep_prob;
        let adam = AdamState::new(&net);
        Ok(Self { net, adam, config })
    }

    pub fn step(&self) -> u64 {
        self.adam.step
    }

    /// Gradient of the mean batch loss, then an Adam update at the scheduled rate.
    pub fn backward_step(&mut self, inputs: &[T], labels: &[usize]) -> Result<StepReport> {
        if labels.is_empty() {
            return Err(Error::Structural("empty batch".into()));
        }
        let step = self.adam.step;
        let mut rng = seed::rng(self.config.seed, 0x6472_6f70_0000_0000 ^ step);
        let tape = self.net.forward_tape(inputs, labels.len(), Mode::Train, &mut rng)?;
        let loss = batch_loss(&tape.probs, labels, self.net.classes());
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("loss {loss} at step {step}")));
        }
        let grads = self.net.backward(&tape, labels)?;
        for (name, g) in self.net.tensor_shapes().iter().zip(&grads) {
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "gradient of {} is {:?} at step {step}",
                    name.0, bad
                )));
            }
        }
        let lr = self.config.schedule.lr(step);
        adam_update(&mut self.net, &grads, &mut self.adam, &self.config, lr);
        Ok(StepReport { step, loss, lr })
    }
}
