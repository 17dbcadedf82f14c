//! The per-cycle loop and the classification context.
//!
//! The cycle loop runs RD processing, top-K selection, AoA, encoding and the
//! tail detector strictly in order. Detected tails are handed by value over a
//! bounded queue to a second thread that runs the CNN, so the cycle loop
//! never waits for inference.

use std::sync::mpsc::{sync_channel, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::aoa::point_angles;
use crate::classifier::{Checkpoint, Prediction};
use crate::error::{Error, Result};
use crate::feature_encoder::{encode_cycle, FeatureCube, FeatureEncoder, FeatureFrame, Normalization};
use crate::had::{rwm, DetectionEvent, HadDetector};
use crate::radar_model::{BeatFrame, RadarParams};
use crate::rd_processing::{top_k, RdProcessor};

use super::config::PipelineConfig;

/// Bound of the hand-off queue to the classification context.
pub const QUEUE_DEPTH: usize = 64;

/// Stateless per-frame feature extraction.
#[derive(Debug)]
pub struct FeatureExtractor {
    rd: RdProcessor,
    k: usize,
    beta: f64,
}

impl FeatureExtractor {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rd: RdProcessor::new(config.radar)?,
            k: config.k,
            beta: config.had.beta,
        })
    }

    pub fn params(&self) -> &RadarParams {
        self.rd.params()
    }

    /// Raw (unnormalized) feature row block and RWM value of one frame.
    pub fn extract(&self, frame: &BeatFrame) -> Result<(FeatureFrame, f64)> {
        let spectrum = self.rd.spectrum(frame)?;
        let points = top_k(&spectrum, self.k)?;
        let angles = point_angles(&points, self.params().spacing_wavelengths);
        let x = rwm(&points, self.beta, self.params());
        Ok((encode_cycle(&points, &angles)?, x))
    }
}

/// Result of one cycle of the loop.
#[derive(Debug, Clone)]
pub struct CycleStep {
    pub event: Option<(DetectionEvent, Option<FeatureCube>)>,
    pub encoder: Duration,
    pub had: Duration,
}

/// Cycle loop state: extractor, cube buffer and detector.
#[derive(Debug)]
pub struct CycleProcessor {
    extractor: FeatureExtractor,
    encoder: FeatureEncoder,
    had: HadDetector,
}

impl CycleProcessor {
    pub fn new(config: &PipelineConfig, normalization: Normalization) -> Result<Self> {
        Ok(Self {
            extractor: FeatureExtractor::new(config)?,
            encoder: FeatureEncoder::with_lag(config.il, config.k, config.had.short_window, normalization),
            had: HadDetector::new(config.had)?,
        })
    }

    /// Advances the loop by one frame. A detection carries the normalized
    /// cube ending at the tail cycle, or `None` when too little history was
    /// buffered to fill it.
    pub fn process(&mut self, frame: &BeatFrame) -> Result<CycleStep> {
        let t0 = Instant::now();
        let (features, x) = self.extractor.extract(frame)?;
        self.encoder.push(features)?;
        let t1 = Instant::now();
        let event = self.had.push(x);
        let t2 = Instant::now();
        let event = event.map(|e| (e, self.encoder.snapshot_ending_at(e.tail_cycle, true).ok()));
        Ok(CycleStep {
            event,
            encoder: t1 - t0,
            had: t2 - t1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamEvent {
    pub event: DetectionEvent,
    /// `None` in detection-only runs, for unfilled cubes, or when the queue
    /// was full.
    pub prediction: Option<Prediction>,
}

/// Mean wall time per stage, milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub cycles: u64,
    pub inferences: u64,
    pub encoder_ms: f64,
    pub had_ms: f64,
    pub cnn_ms: f64,
}

impl Timings {
    /// Encoder + HAD + CNN, the cost of a cycle that triggers classification.
    pub fn overall_ms(&self) -> f64 {
        self.encoder_ms + self.had_ms + self.cnn_ms
    }

    pub fn per_cycle_ms(&self) -> f64 {
        self.encoder_ms + self.had_ms
    }

    pub fn merge(&mut self, o: &Timings) {
        let wc = |a: f64, na: u64, b: f64, nb: u64| {
            if na + nb == 0 {
                0.0
            } else {
                (a * na as f64 + b * nb as f64) / (na + nb) as f64
            }
        };
        self.encoder_ms = wc(self.encoder_ms, self.cycles, o.encoder_ms, o.cycles);
        self.had_ms = wc(self.had_ms, self.cycles, o.had_ms, o.cycles);
        self.cnn_ms = wc(self.cnn_ms, self.inferences, o.cnn_ms, o.inferences);
        self.cycles += o.cycles;
        self.inferences += o.inferences;
    }

    pub fn report(&self) -> String {
        format!(
            "timing.encoder_ms={:.4}\ntiming.had_ms={:.4}\ntiming.cnn_ms={:.4}\ntiming.overall_ms={:.4}\ntiming.cycles={}\ntiming.inferences={}\n",
            self.encoder_ms,
            self.had_ms,
            self.cnn_ms,
            self.overall_ms(),
            self.cycles,
            self.inferences
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamReport {
    pub events: Vec<StreamEvent>,
    pub timings: Timings,
    /// Cycles whose processing overran the PRI in realtime mode.
    pub deadline_misses: Vec<u64>,
    /// Events not classified because the queue was full.
    pub dropped: u64,
}

impl StreamReport {
    pub fn event_log(&self, class_names: &[&str]) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&format!("event tail={} decision={}", e.event.tail_cycle, e.event.decision_cycle));
            match e.prediction {
                Some(p) => s.push_str(&format!(
                    " class={} confidence={:.4}\n",
                    class_names.get(p.class).copied().unwrap_or("?"),
                    p.confidence
                )),
                None => s.push_str(" class=none\n"),
            }
        }
        s
    }
}

/// Runs the two-context pipeline over `frames`. Without a model the run is
/// detection-only.
pub fn run_stream<I>(frames: I, config: &PipelineConfig, model: Option<Arc<Checkpoint>>) -> Result<StreamReport>
where
    I: IntoIterator<Item = BeatFrame>,
{
    let norm = model.as_ref().map_or(Normalization::identity(), |m| m.normalization);
    let mut proc = CycleProcessor::new(config, norm)?;
    let (tx, rx) = sync_channel::<(usize, FeatureCube)>(QUEUE_DEPTH);
    let worker = model.map(|m| {
        thread::spawn(move || -> Result<Vec<(usize, Prediction, Duration)>> {
            let mut out = Vec::new();
            for (idx, cube) in rx {
                let t = Instant::now();
                let p = m.network.predict(&cube)?;
                out.push((idx, p, t.elapsed()));
            }
            Ok(out)
        })
    });

    let mut report = StreamReport::default();
    let (mut enc, mut had) = (Duration::ZERO, Duration::ZERO);
    let pri = Duration::from_secs_f64(config.radar.pri_s);
    let start = Instant::now();
    for (i, frame) in frames.into_iter().enumerate() {
        let step = proc.process(&frame)?;
        enc += step.encoder;
        had += step.had;
        report.timings.cycles += 1;
        if let Some((event, cube)) = step.event {
            let idx = report.events.len();
            report.events.push(StreamEvent { event, prediction: None });
            if let (Some(cube), Some(_)) = (cube, worker.as_ref()) {
                match tx.try_send((idx, cube)) {
                    Ok(()) => {}
                    Err(TrySendError::Full(_)) => report.dropped += 1,
                    Err(TrySendError::Disconnected(_)) => {
                        return Err(Error::NotReady("classification context stopped".into()))
                    }
                }
            }
        }
        if config.realtime {
            let deadline = start + pri * (i as u32 + 1);
            let now = Instant::now();
            if now > deadline {
                report.deadline_misses.push(frame.cycle_index);
            } else {
                thread::sleep(deadline - now);
            }
        }
    }
    drop(tx);
    let n = report.timings.cycles.max(1) as f64;
    report.timings.encoder_ms = enc.as_secs_f64() * 1e3 / n;
    report.timings.had_ms = had.as_secs_f64() * 1e3 / n;
    if let Some(w) = worker {
        let results = w
            .join()
            .map_err(|_| Error::NotReady("classification context panicked".into()))??;
        let mut cnn = Duration::ZERO;
        for (idx, p, d) in &results {
            report.events[*idx].prediction = Some(*p);
            cnn += *d;
        }
        report.timings.inferences = results.len() as u64;
        if !results.is_empty() {
            report.timings.cnn_ms = cnn.as_secs_f64() * 1e3 / results.len() as f64;
        }
    }
    Ok(report)
}
