//! Synthetic datasets, train/validation splits and classifier training.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::{
    batch_loss, cube_to_input, Checkpoint, Mode, Network, NetworkSpec, TrainConfig, Trainer,
};
use crate::error::{Error, Result};
use crate::eval_metrics::{confusion, ConfusionMatrix};
use crate::feature_encoder::{magnitude_quantile, FeatureCube, FeatureFrame, Normalization};
use crate::gesture_sim::{synth_recording, GestureClass, Recording};
use crate::radar_model::BeatFrame;
use crate::seed;

use super::config::PipelineConfig;
use super::recording::{
    labels_path, labels_to_text, manifest_to_text, read_labels, read_manifest, LabelSegment, ManifestEntry,
    RecordingFile, MANIFEST_NAME,
};
use super::stream::FeatureExtractor;

/// Cube end offsets drawn around the true gesture end during training.
pub const TRAIN_END_JITTER: (i64, i64) = (-2, 4);

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub classes: Vec<GestureClass>,
    pub per_class: usize,
    pub seed: u64,
    pub snr_db: f64,
}

impl DatasetSpec {
    pub fn all_classes(per_class: usize, seed: u64, snr_db: f64) -> Self {
        Self {
            classes: GestureClass::ALL.to_vec(),
            per_class,
            seed,
            snr_db,
        }
    }

    /// `(class, recording seed)` for every recording, class-major.
    pub fn items(&self) -> Vec<(GestureClass, u64)> {
        let mut out = Vec::with_capacity(self.classes.len() * self.per_class);
        for &c in &self.classes {
            for i in 0..self.per_class {
                out.push((c, seed::derive(self.seed, (c.code() as u64) << 32 | i as u64)));
            }
        }
        out
    }
}

/// Features of a whole recording, kept in memory for training.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedRecording {
    pub label: GestureClass,
    pub span: (u64, u64),
    pub seed: u64,
    pub noise_std: f64,
    /// Unnormalized, one per cycle.
    pub frames: Vec<FeatureFrame>,
    pub rwm: Vec<f64>,
}

pub fn process_frames(frames: &[BeatFrame], extractor: &FeatureExtractor) -> Result<(Vec<FeatureFrame>, Vec<f64>)> {
    let mut out = Vec::with_capacity(frames.len());
    let mut xs = Vec::with_capacity(frames.len());
    for f in frames {
        let (ff, x) = extractor.extract(f)?;
        out.push(ff);
        xs.push(x);
    }
    Ok((out, xs))
}

pub fn process_recording(rec: &Recording, extractor: &FeatureExtractor) -> Result<ProcessedRecording> {
    let (frames, rwm) = process_frames(&rec.frames, extractor)?;
    Ok(ProcessedRecording {
        label: rec.label,
        span: (rec.gesture_span.0 as u64, rec.gesture_span.1 as u64),
        seed: rec.seed,
        noise_std: rec.noise_std,
        frames,
        rwm,
    })
}

/// Synthesizes and processes every recording of `spec` without touching disk.
pub fn synth_processed(spec: &DatasetSpec, config: &PipelineConfig) -> Result<Vec<ProcessedRecording>> {
    let extractor = FeatureExtractor::new(config)?;
    spec.items()
        .into_iter()
        .map(|(class, s)| process_recording(&synth_recording(class, s, &config.radar, spec.snr_db)?, &extractor))
        .collect()
}

/// Writes recordings, label sidecars and `manifest.txt` into `dir`.
pub fn write_dataset(spec: &DatasetSpec, config: &PipelineConfig, dir: &Path) -> Result<Vec<ManifestEntry>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::new();
    for (i, (class, s)) in spec.items().into_iter().enumerate() {
        let rec = synth_recording(class, s, &config.radar, spec.snr_db)?;
        let name = format!("rec_{i:05}.rgr");
        let path = dir.join(&name);
        RecordingFile {
            params: config.radar,
            frames: rec.frames,
        }
        .write(&path)?;
        let (start, end) = (rec.gesture_span.0 as u64, rec.gesture_span.1 as u64);
        let labels = [LabelSegment {
            class,
            start_cycle: start,
            end_cycle: end,
        }];
        let lp = labels_path(&path);
        std::fs::write(&lp, labels_to_text(&labels)).map_err(|e| Error::io(&lp, e))?;
        manifest.push(ManifestEntry {
            file: name,
            class,
            seed: s,
            start_cycle: start,
            end_cycle: end,
            noise_std: rec.noise_std,
        });
    }
    let mp = dir.join(MANIFEST_NAME);
    std::fs::write(&mp, manifest_to_text(&manifest)).map_err(|e| Error::io(&mp, e))?;
    Ok(manifest)
}

/// Reads and processes every recording listed in `dir/manifest.txt`.
pub fn load_processed(dir: &Path, config: &PipelineConfig) -> Result<Vec<ProcessedRecording>> {
    let extractor = FeatureExtractor::new(config)?;
    read_manifest(dir)?
        .iter()
        .map(|e| {
            let path = dir.join(&e.file);
            let file = RecordingFile::read(&path)?;
            if file.params != config.radar {
                return Err(Error::Format(format!("{} was recorded with other radar parameters", e.file)));
            }
            let labels = read_labels(&path)?;
            let seg = labels
                .first()
                .ok_or_else(|| Error::Format(format!("{} has no label segment", e.file)))?;
            let (frames, rwm) = process_frames(&file.frames, &extractor)?;
            Ok(ProcessedRecording {
                label: seg.class,
                span: (seg.start_cycle, seg.end_cycle),
                seed: e.seed,
                noise_std: e.noise_std,
                frames,
                rwm,
            })
        })
        .collect()
}

/// Stratified split: a seeded `val_fraction` of each class goes to validation.
pub fn split(labels: &[GestureClass], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seed::rng(seed, 0x73_706c_6974);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in GestureClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * val_fraction).round() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Magnitudes scaled by their 99th percentile over the given recordings.
pub fn fit_normalization(recs: &[ProcessedRecording], idx: &[usize], config: &PipelineConfig) -> Result<Normalization> {
    let q = magnitude_quantile(idx.iter().flat_map(|&i| recs[i].frames.iter()), 0.99)
        .ok_or_else(|| Error::NotReady("no frames to fit the normalization".into()))?;
    Normalization::physical(&config.radar, q.max(f32::MIN_POSITIVE))
}

/// Normalized cube of `il` cycles ending at `end` (clamped into the recording).
pub fn cube_ending_at(rec: &ProcessedRecording, end: i64, il: usize, k: usize, norm: &Normalization) -> Result<FeatureCube> {
    let last = rec.frames.len() as i64 - 1;
    if il == 0 || last < il as i64 - 1 {
        return Err(Error::NotReady(format!("recording has {} cycles, need {il}", rec.frames.len())));
    }
    let end = end.clamp(il as i64 - 1, last);
    let lo = (end + 1) as usize - il;
    FeatureCube::from_frames(&rec.frames[lo..=end as usize], k, Some(norm))
}

pub fn spec_for(config: &PipelineConfig, classes: usize) -> NetworkSpec {
    NetworkSpec {
        input: (config.il, config.k, crate::feature_encoder::CHANNELS),
        classes,
        ..NetworkSpec::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    /// `(step, mean loss over the preceding interval)`.
    pub log: Vec<(u64, f64)>,
    pub losses: Vec<f64>,
    pub final_loss: f64,
}

/// Trains (or resumes) a classifier on `train` indices. `on_log` receives a
/// line every `log_every` steps.
pub fn train_classifier(
    recs: &[ProcessedRecording],
    train: &[usize],
    norm: Normalization,
    config: &PipelineConfig,
    tc: &TrainConfig,
    resume: Option<&Checkpoint>,
    log_every: u64,
    mut on_log: impl FnMut(&str),
) -> Result<(Checkpoint, TrainSummary)> {
    if train.is_empty() {
        return Err(Error::NotReady("empty training set".into()));
    }
    let mut trainer = match resume {
        Some(ck) => {
            let mut t = Trainer::new(ck.network.clone(), tc.clone())?;
            if let Some(a) = &ck.optimizer {
                t.adam = a.clone();
            }
            t
        }
        None => {
            let net = Network::<f32>::init(spec_for(config, GestureClass::COUNT), &mut seed::rng(tc.seed, 0x696e_6974))?;
            Trainer::new(net, tc.clone())?
        }
    };
    let norm = resume.map_or(norm, |c| c.normalization);
    let (il, k) = (config.il, config.k);
    let mut summary = TrainSummary {
        log: Vec::new(),
        losses: Vec::new(),
        final_loss: f64::NAN,
    };
    let (neg, pos): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| !recs[i].label.is_gesture());
    let stratified = tc.negative_share > 0.0 && !neg.is_empty() && !pos.is_empty();
    let mut acc = (0.0, 0u64);
    while trainer.step() < tc.steps {
        let step = trainer.step();
        let mut rng = seed::rng(tc.seed, 0x6261_7463_6800_0000 ^ step);
        let mut inputs = Vec::with_capacity(tc.batch_size * trainer.net.input_len());
        let mut labels = Vec::with_capacity(tc.batch_size);
        for _ in 0..tc.batch_size {
            let pool = match stratified {
                true if rng.gen_bool(tc.negative_share) => &neg,
                true => &pos,
                false => train,
            };
            let r = &recs[pool[rng.gen_range(0..pool.len())]];
            let delta = rng.gen_range(TRAIN_END_JITTER.0..=TRAIN_END_JITTER.1);
            let cube = cube_ending_at(r, r.span.1 as i64 + delta, il, k, &norm)?;
            inputs.extend(cube_to_input::<f32>(&cube));
            labels.push(r.label.code() as usize);
        }
        let rep = trainer.backward_step(&inputs, &labels)?;
        summary.losses.push(rep.loss);
        acc.0 += rep.loss;
        acc.1 += 1;
        if (step + 1) % log_every == 0 || step + 1 == tc.steps {
            let mean = acc.0 / acc.1 as f64;
            summary.log.push((step + 1, mean));
            on_log(&format!("step={} loss={:.6} lr={:e}", step + 1, mean, rep.lr));
            acc = (0.0, 0);
        }
        summary.final_loss = rep.loss;
    }
    let mut ck = Checkpoint::new(trainer.net, norm);
    ck.optimizer = Some(trainer.adam);
    ck.metadata.insert("steps".into(), tc.steps.to_string());
    ck.metadata.insert("final_loss".into(), format!("{}", summary.final_loss));
    ck.metadata.insert("seed".into(), tc.seed.to_string());
    ck.metadata.insert("batch_size".into(), tc.batch_size.to_string());
    Ok((ck, summary))
}

/// Accuracy and confusion of `net` on cubes ending at each true gesture end.
pub fn offline_accuracy(
    net: &Network<f32>,
    recs: &[ProcessedRecording],
    idx: &[usize],
    norm: &Normalization,
    config: &PipelineConfig,
) -> Result<(f64, ConfusionMatrix)> {
    let mut labels = Vec::with_capacity(idx.len());
    let mut preds = Vec::with_capacity(idx.len());
    for &i in idx {
        let r = &recs[i];
        let cube = cube_ending_at(r, r.span.1 as i64, config.il, config.k, norm)?;
        labels.push(r.label.code() as usize);
        preds.push(net.predict(&cube)?.class);
    }
    let m = confusion(&labels, &preds, net.classes())?;
    Ok((m.accuracy(), m))
}

/// Mean inference-mode loss over cubes at the true ends.
pub fn offline_loss(
    net: &Network<f32>,
    recs: &[ProcessedRecording],
    idx: &[usize],
    norm: &Normalization,
    config: &PipelineConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        let r = &recs[i];
        let cube = cube_ending_at(r, r.span.1 as i64, config.il, config.k, norm)?;
        let p = net.forward(&cube_to_input::<f32>(&cube), 1, Mode::Infer, &mut seed::rng(0, 0))?;
        total += batch_loss(&p, &[r.label.code() as usize], net.classes());
    }
    Ok(total / idx.len().max(1) as f64)
}
