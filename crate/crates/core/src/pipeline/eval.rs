//! Streaming evaluation against labelled recordings, and γ1 calibration.
//!
//! An event matches a labelled gesture when its tail lies in
//! `[end − 3, end + L1 + 3]`. Per gesture recording the first matching event
//! decides the outcome: no match is a miss by the detector, a match
//! classified as random motion is a miss by the classifier, anything else is
//! a detection. Per-class recall counts both kinds of miss against the true
//! class. A random-motion recording is a false alarm when any of its events
//! is classified as a gesture (or, detection-only, when any event fires).

use std::sync::Arc;

use crate::classifier::Checkpoint;
use crate::error::{Error, Result};
use crate::eval_metrics::{class_report, rates, render_report, ClassCounts, ClassReport, ConfusionMatrix, DetectionMatrix};
use crate::gesture_sim::GestureClass;
use crate::had::calibrate_gamma1;
use crate::radar_model::{synth_beat_frame_at, BeatFrame};
use crate::seed;

use super::config::PipelineConfig;
use super::recording::LabelSegment;
use super::stream::{run_stream, FeatureExtractor, StreamEvent, Timings};

pub const MATCH_SLACK: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub matrix: DetectionMatrix,
    /// Gesture classes only (codes 0–11).
    pub class_counts: Vec<ClassCounts>,
    /// Label × prediction over detected events, all 13 classes.
    pub confusion: ConfusionMatrix,
    /// Events on gesture recordings that matched no label.
    pub unmatched_events: u64,
    pub detection_only: bool,
    pub timings: Timings,
    pub deadline_misses: u64,
}

impl EvalReport {
    pub fn new(detection_only: bool) -> Self {
        Self {
            matrix: DetectionMatrix::default(),
            class_counts: vec![ClassCounts::default(); GestureClass::COUNT - 1],
            confusion: ConfusionMatrix::new(GestureClass::COUNT),
            unmatched_events: 0,
            detection_only,
            timings: Timings::default(),
            deadline_misses: 0,
        }
    }

    pub fn class_report(&self) -> ClassReport {
        class_report(&self.class_counts)
    }

    pub fn render(&self) -> String {
        let names = GestureClass::names();
        let mut s = String::new();
        s.push_str(&format!("mode={}\n", if self.detection_only { "detection" } else { "full" }));
        if self.detection_only {
            let m = &self.matrix;
            s.push_str(&format!(
                "true_positives={}\nmd_from_had={}\ntrue_gestures={}\nfalse_alarms={}\nnegative_samples={}\n",
                m.true_positives, m.md_from_had, m.true_gestures, m.false_alarms, m.negative_samples
            ));
            if let Ok(r) = rates(m) {
                s.push_str(&format!("far={:.6}\nmdr={:.6}\n", r.far, r.mdr));
            }
        } else {
            s.push_str(&render_report(&names[..GestureClass::COUNT - 1], &self.class_report(), Some(&self.matrix)));
            for (i, name) in names.iter().enumerate() {
                let row: Vec<String> = self.confusion.row(i).iter().map(|c| c.to_string()).collect();
                s.push_str(&format!("confusion.{name}={}\n", row.join(",")));
            }
        }
        s.push_str(&format!("unmatched_events={}\n", self.unmatched_events));
        s.push_str(&format!("deadline_misses={}\n", self.deadline_misses));
        s.push_str(&self.timings.report());
        s
    }
}

/// Folds one recording's events into `report`.
pub fn score_recording(
    report: &mut EvalReport,
    labels: &[LabelSegment],
    events: &[StreamEvent],
    short_window: usize,
) -> Result<()> {
    let rm = GestureClass::RandomMotion.code() as usize;
    let mut used = vec![false; events.len()];
    for seg in labels {
        let lo = seg.end_cycle.saturating_sub(MATCH_SLACK);
        let hi = seg.end_cycle + short_window as u64 + MATCH_SLACK;
        let in_span = |e: &StreamEvent| (lo..=hi).contains(&e.event.tail_cycle);
        if seg.class.is_gesture() {
            let label = seg.class.code() as usize;
            report.matrix.true_gestures += 1;
            match events.iter().position(in_span) {
                None => {
                    report.matrix.md_from_had += 1;
                    report.class_counts[label].fn_ += 1;
                }
                Some(j) => {
                    used[j] = true;
                    match events[j].prediction {
                        _ if report.detection_only => report.matrix.true_positives += 1,
                        None => {
                            report.matrix.md_from_classifier += 1;
                            report.class_counts[label].fn_ += 1;
                        }
                        Some(p) => {
                            report.confusion.add(label, p.class)?;
                            if p.class == rm {
                                report.matrix.md_from_classifier += 1;
                                report.class_counts[label].fn_ += 1;
                            } else {
                                report.matrix.true_positives += 1;
                                if p.class == label {
                                    report.class_counts[label].tp += 1;
                                } else {
                                    report.class_counts[label].fn_ += 1;
                                    report.class_counts[p.class].fp += 1;
                                }
                            }
                        }
                    }
                }
            }
        } else {
            report.matrix.negative_samples += 1;
            let mut alarm = false;
            for (j, e) in events.iter().enumerate() {
                used[j] = true;
                if report.detection_only {
                    alarm = true;
                    continue;
                }
                if let Some(p) = e.prediction {
                    report.confusion.add(rm, p.class)?;
                    if p.class != rm {
                        alarm = true;
                        report.class_counts[p.class].fp += 1;
                    }
                }
            }
            if alarm {
                report.matrix.false_alarms += 1;
            } else {
                report.matrix.true_negatives += 1;
            }
        }
    }
    report.unmatched_events += used.iter().filter(|u| !**u).count() as u64;
    report.matrix.check()
}

/// Streams every `(frames, labels)` pair and accumulates the scores.
pub fn evaluate<I>(recordings: I, config: &PipelineConfig, model: Option<Arc<Checkpoint>>) -> Result<EvalReport>
where
    I: IntoIterator<Item = Result<(Vec<BeatFrame>, Vec<LabelSegment>)>>,
{
    if !config.had.is_calibrated() {
        return Err(Error::NotReady("had.gamma1 is not calibrated".into()));
    }
    let mut report = EvalReport::new(model.is_none());
    for item in recordings {
        let (frames, labels) = item?;
        let run = run_stream(frames, config, model.clone())?;
        score_recording(&mut report, &labels, &run.events, config.had.short_window)?;
        report.timings.merge(&run.timings);
        report.deadline_misses += run.deadline_misses.len() as u64;
    }
    Ok(report)
}

/// Noise-only frames at `noise_std` for cycles `0..cycles`.
pub fn noise_frames(config: &PipelineConfig, noise_std: f64, cycles: usize, seed: u64) -> impl Iterator<Item = Result<BeatFrame>> + '_ {
    (0..cycles).map(move |c| synth_beat_frame_at(&[], &config.radar, noise_std, seed::derive(seed, c as u64), c as u64))
}

/// Noise RWM stream used for calibration.
pub fn noise_rwm(config: &PipelineConfig, noise_std: f64, cycles: usize, seed: u64) -> Result<Vec<f64>> {
    let ex = FeatureExtractor::new(config)?;
    noise_frames(config, noise_std, cycles, seed)
        .map(|f| ex.extract(&f?).map(|(_, x)| x))
        .collect()
}

pub const CALIBRATION_WINDOWS: usize = 1000;
pub const CALIBRATION_QUANTILE: f64 = 0.95;
pub const CALIBRATION_FACTOR: f64 = 3.0;

/// γ1 from [`CALIBRATION_WINDOWS`] long windows of pure noise.
pub fn calibrate(config: &PipelineConfig, noise_std: f64, seed: u64) -> Result<f64> {
    let l2 = config.had.long_window;
    let xs = noise_rwm(config, noise_std, CALIBRATION_WINDOWS + l2 - 1, seed)?;
    calibrate_gamma1(&xs, l2, CALIBRATION_QUANTILE, CALIBRATION_FACTOR)
}
