//! Classification and detection scores.
//!
//! Averaged F1 follows the real-time evaluation convention: it is the F1 of
//! the class-averaged precision and recall, not the mean of per-class F1.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A denominator was zero and the affected score was set to 0.
    pub degenerate: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn f1_score(precision: f64, recall: f64) -> (f64, bool) {
    ratio(2.0 * precision * recall, precision + recall)
}

pub fn prf1(tp: u64, fp: u64, fn_: u64) -> Prf1 {
    let (precision, d1) = ratio(tp as f64, (tp + fp) as f64);
    let (recall, d2) = ratio(tp as f64, (tp + fn_) as f64);
    let (f1, d3) = f1_score(precision, recall);
    Prf1 {
        precision,
        recall,
        f1,
        degenerate: d1 || d2 || d3 || tp == 0,
    }
}

/// Per-class tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub per_class: Vec<Prf1>,
    /// Macro precision and recall, and the F1 of those two.
    pub average: Prf1,
    /// Arithmetic mean of the per-class F1 values.
    pub mean_class_f1: f64,
}

pub fn class_report(counts: &[ClassCounts]) -> ClassReport {
    let per_class: Vec<Prf1> = counts.iter().map(|c| prf1(c.tp, c.fp, c.fn_)).collect();
    let n = per_class.len().max(1) as f64;
    let precision = per_class.iter().map(|s| s.precision).sum::<f64>() / n;
    let recall = per_class.iter().map(|s| s.recall).sum::<f64>() / n;
    let (f1, degenerate) = f1_score(precision, recall);
    ClassReport {
        mean_class_f1: per_class.iter().map(|s| s.f1).sum::<f64>() / n,
        average: Prf1 {
            precision,
            recall,
            f1,
            degenerate: degenerate || per_class.is_empty(),
        },
        per_class,
    }
}

/// Gesture detection outcomes over a labelled test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionMatrix {
    pub true_positives: u64,
    pub md_from_had: u64,
    pub md_from_classifier: u64,
    pub true_gestures: u64,
    pub false_alarms: u64,
    pub true_negatives: u64,
    pub negative_samples: u64,
}

impl DetectionMatrix {
    pub fn check(&self) -> Result<()> {
        if self.true_positives + self.md_from_had + self.md_from_classifier != self.true_gestures {
            return Err(Error::Structural(format!(
                "TP {} + MD(HAD) {} + MD(classifier) {} != gestures {}",
                self.true_positives, self.md_from_had, self.md_from_classifier, self.true_gestures
            )));
        }
        if self.false_alarms + self.true_negatives != self.negative_samples {
            return Err(Error::Structural(format!(
                "FA {} + TN {} != negatives {}",
                self.false_alarms, self.true_negatives, self.negative_samples
            )));
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &DetectionMatrix) {
        self.true_positives += other.true_positives;
        self.md_from_had += other.md_from_had;
        self.md_from_classifier += other.md_from_classifier;
        self.true_gestures += other.true_gestures;
        self.false_alarms += other.false_alarms;
        self.true_negatives += other.true_negatives;
        self.negative_samples += other.negative_samples;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub far: f64,
    pub mdr: f64,
    pub degenerate: bool,
}

pub fn rates(m: &DetectionMatrix) -> Result<Rates> {
    m.check()?;
    let (far, d1) = ratio(m.false_alarms as f64, m.negative_samples as f64);
    let (mdr, d2) = ratio(
        (m.md_from_had + m.md_from_classifier) as f64,
        m.true_gestures as f64,
    );
    Ok(Rates {
        far,
        mdr,
        degenerate: d1 || d2,
    })
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, label: usize, prediction: usize) -> Result<()> {
        if label >= self.classes || prediction >= self.classes {
            return Err(Error::Structural(format!(
                "class ({label}, {prediction}) outside [0, {})",
                self.classes
            )));
        }
        self.counts[label * self.classes + prediction] += 1;
        Ok(())
    }

    pub fn get(&self, label: usize, prediction: usize) -> u64 {
        self.counts[label * self.classes + prediction]
    }

    pub fn row(&self, label: usize) -> &[u64] {
        &self.counts[label * self.classes..(label + 1) * self.classes]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.classes).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        ratio(diag as f64, self.total() as f64).0
    }
}

pub fn confusion(labels: &[usize], predictions: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::Structural(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut m = ConfusionMatrix::new(classes);
    for (&l, &p) in labels.iter().zip(predictions) {
        m.add(l, p)?;
    }
    Ok(m)
}

/// `name=value` lines, one metric per line.
pub fn render_report(
    class_names: &[&str],
    classes: &ClassReport,
    matrix: Option<&DetectionMatrix>,
) -> String {
    let mut s = String::new();
    for (name, score) in class_names.iter().zip(&classes.per_class) {
        let _ = writeln!(s, "precision.{name}={:.6}", score.precision);
        let _ = writeln!(s, "recall.{name}={:.6}", score.recall);
        let _ = writeln!(s, "f1.{name}={:.6}", score.f1);
    }
    let _ = writeln!(s, "precision.avg={:.6}", classes.average.precision);
    let _ = writeln!(s, "recall.avg={:.6}", classes.average.recall);
    let _ = writeln!(s, "f1.avg={:.6}", classes.average.f1);
    let _ = writeln!(s, "f1.mean_class={:.6}", classes.mean_class_f1);
    if let Some(m) = matrix {
        let _ = writeln!(s, "true_positives={}", m.true_positives);
        let _ = writeln!(s, "md_from_had={}", m.md_from_had);
        let _ = writeln!(s, "md_from_classifier={}", m.md_from_classifier);
        let _ = writeln!(s, "true_gestures={}", m.true_gestures);
        let _ = writeln!(s, "false_alarms={}", m.false_alarms);
        let _ = writeln!(s, "true_negatives={}", m.true_negatives);
        let _ = writeln!(s, "negative_samples={}", m.negative_samples);
        if let Ok(r) = rates(m) {
            let _ = writeln!(s, "far={:.6}", r.far);
            let _ = writeln!(s, "mdr={:.6}", r.mdr);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_class() {
        let s = prf1(60, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        assert!(!s.degenerate);
    }

    #[test]
    fn zero_true_positives() {
        let s = prf1(0, 3, 4);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert!(s.degenerate);
        assert!(prf1(0, 0, 0).degenerate);
    }

    #[test]
    fn published_average_f1() {
        let (f1, _) = f1_score(0.9390, 0.9444);
        assert_eq!(format!("{:.2}", f1 * 100.0), "94.17");
    }

    #[test]
    fn published_far_mdr() {
        let m = DetectionMatrix {
            true_positives: 1388,
            md_from_had: 26,
            md_from_classifier: 26,
            true_gestures: 1440,
            false_alarms: 25,
            true_negatives: 399,
            negative_samples: 424,
        };
        let r = rates(&m).unwrap();
        assert_eq!(format!("{:.2}", r.far * 100.0), "5.90");
        assert_eq!(format!("{:.2}", r.mdr * 100.0), "3.61");
    }

    #[test]
    fn rate_edge_cases() {
        assert_eq!(
            rates(&DetectionMatrix {
                true_positives: 5,
                true_gestures: 5,
                true_negatives: 2,
                negative_samples: 2,
                ..Default::default()
            })
            .unwrap(),
            Rates { far: 0.0, mdr: 0.0, degenerate: false }
        );
        let r = rates(&DetectionMatrix {
            md_from_had: 7,
            md_from_classifier: 3,
            true_gestures: 10,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.mdr, 1.0);
        assert!(r.degenerate);
        let broken = DetectionMatrix {
            true_positives: 1,
            true_gestures: 2,
            ..Default::default()
        };
        assert!(rates(&broken).is_err());
    }

    #[test]
    fn confusion_counts() {
        let m = confusion(&[0, 1, 0], &[0, 1, 1], 2).unwrap();
        assert_eq!(m.row(0), &[1, 1]);
        assert_eq!(m.row(1), &[0, 1]);
        let d = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(d.get(2, 2), 2);
        assert_eq!(d.total(), (0..3).map(|c| d.get(c, c)).sum::<u64>());
        assert!(confusion(&[3], &[0], 3).is_err());
        assert!(confusion(&[0, 1], &[0], 3).is_err());
    }

    #[test]
    fn report_lines() {
        let rep = class_report(&[ClassCounts { tp: 1, fp: 1, fn_: 0 }]);
        let text = render_report(&["check"], &rep, None);
        assert!(text.contains("precision.check=0.500000\n"));
        assert!(text.lines().all(|l| l.split_once('=').is_some()));
    }

    proptest! {
        #[test]
        fn f1_bounds(tp in 0u64..200, fp in 0u64..200, fneg in 0u64..200) {
            let s = prf1(tp, fp, fneg);
            prop_assert!(s.f1 >= 0.0);
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-15);
            if s.precision + s.recall > 0.0 {
                prop_assert!((s.f1 - 2.0 * s.precision * s.recall / (s.precision + s.recall)).abs() < 1e-15);
            }
        }

        #[test]
        fn row_sums_ignore_predictions(labels in proptest::collection::vec(0usize..5, 1..60), seed in 0u64..1000) {
            let preds: Vec<usize> = labels.iter().enumerate().map(|(i, _)| ((i as u64 * 7 + seed) % 5) as usize).collect();
            let mut rev = preds.clone();
            rev.reverse();
            let a = confusion(&labels, &preds, 5).unwrap();
            let b = confusion(&labels, &rev, 5).unwrap();
            prop_assert_eq!(a.row_sums(), b.row_sums());
            let counts: Vec<u64> = (0..5).map(|c| labels.iter().filter(|&&l| l == c).count() as u64).collect();
            prop_assert_eq!(a.row_sums(), counts);
        }
    }
}
