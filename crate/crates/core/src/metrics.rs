//! Accuracy, confusion matrix and average keypoint distance.

use std::fmt::Write as _;

use crate::error::{GloveError, Result};
use crate::frame::Frame;
use crate::kinematics::{distance, PointCloud15, NUM_KEYPOINTS};
use crate::models::{GestureClassifier, HandReconstructor};
use crate::Exec;

/// Mean and population standard deviation of per-marker distances, mm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdStats {
    pub mean: f64,
    pub std: f64,
}

fn check_lengths(pred: &[PointCloud15], truth: &[PointCloud15]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(GloveError::Shape(format!("{} predictions for {} ground-truth clouds", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(GloveError::Shape("no clouds to compare".into()));
    }
    Ok(())
}

fn marker_distances<'a>(pred: &'a [PointCloud15], truth: &'a [PointCloud15]) -> impl Iterator<Item = f64> + 'a {
    pred.iter()
        .zip(truth)
        .flat_map(|(p, t)| p.points().iter().zip(t.points()).map(|(a, b)| distance(a, b)))
}

/// Average Euclidean distance over every frame and marker.
pub fn average_distance(pred: &[PointCloud15], truth: &[PointCloud15]) -> Result<AdStats> {
    check_lengths(pred, truth)?;
    let n = (pred.len() * NUM_KEYPOINTS) as f64;
    let mean = marker_distances(pred, truth).sum::<f64>() / n;
    let var = marker_distances(pred, truth).map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok(AdStats { mean, std: var.sqrt() })
}

/// Mean error of each keypoint across frames, mm.
pub fn per_keypoint_errors(pred: &[PointCloud15], truth: &[PointCloud15]) -> Result<[f64; NUM_KEYPOINTS]> {
    check_lengths(pred, truth)?;
    let mut sums = [0.0; NUM_KEYPOINTS];
    for (p, t) in pred.iter().zip(truth) {
        for (s, (a, b)) in sums.iter_mut().zip(p.points().iter().zip(t.points())) {
            *s += distance(a, b);
        }
    }
    Ok(sums.map(|s| s / pred.len() as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// `None` for classes absent from the test data.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are true labels, columns predictions.
    pub confusion: Vec<Vec<u64>>,
}

impl ClassificationMetrics {
    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != pred.len() || truth.is_empty() {
            return Err(GloveError::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes || p >= classes {
                return Err(GloveError::Lookup(format!("label {} outside {classes} classes", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let correct: u64 = (0..classes).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        Ok(ClassificationMetrics { accuracy: correct as f64 / truth.len() as f64, per_class_accuracy, confusion })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionMetrics {
    pub ad: AdStats,
    pub per_keypoint: [f64; NUM_KEYPOINTS],
}

impl ReconstructionMetrics {
    pub fn from_predictions(pred: &[PointCloud15], truth: &[PointCloud15]) -> Result<Self> {
        Ok(ReconstructionMetrics { ad: average_distance(pred, truth)?, per_keypoint: per_keypoint_errors(pred, truth)? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub frames: usize,
    pub classification: Option<ClassificationMetrics>,
    pub reconstruction: Option<ReconstructionMetrics>,
}

impl EvalReport {
    /// `key = value` lines, then the confusion matrix as a CSV block.
    /// Floats use the shortest round-trip form, so equal reports are equal bytes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "frames = {}", self.frames).unwrap();
        if let Some(r) = &self.reconstruction {
            writeln!(s, "ad_mean_mm = {}", r.ad.mean).unwrap();
            writeln!(s, "ad_std_mm = {}", r.ad.std).unwrap();
            for (k, e) in r.per_keypoint.iter().enumerate() {
                writeln!(s, "keypoint_{k}_mm = {e}").unwrap();
            }
        }
        if let Some(c) = &self.classification {
            writeln!(s, "accuracy = {}", c.accuracy).unwrap();
            for (k, a) in c.per_class_accuracy.iter().enumerate() {
                match a {
                    Some(a) => writeln!(s, "class_{k}_accuracy = {a}").unwrap(),
                    None => writeln!(s, "class_{k}_accuracy = none").unwrap(),
                }
            }
            writeln!(s, "\n[confusion]").unwrap();
            for row in &c.confusion {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                writeln!(s, "{}", cells.join(",")).unwrap();
            }
        }
        s
    }
}

fn labels(frames: &[Frame]) -> Result<Vec<usize>> {
    frames
        .iter()
        .map(|f| f.label.map(usize::from).ok_or_else(|| GloveError::param("test frame without a label")))
        .collect()
}

pub fn evaluate_classifier(model: &GestureClassifier, frames: &[Frame], exec: Exec) -> Result<EvalReport> {
    let truth = labels(frames)?;
    let pred = model.predict_frames(frames, exec)?;
    let classes = crate::gestures::NUM_GESTURES;
    Ok(EvalReport {
        frames: frames.len(),
        classification: Some(ClassificationMetrics::from_predictions(&truth, &pred, classes)?),
        reconstruction: None,
    })
}

pub fn targets(frames: &[Frame]) -> Result<Vec<PointCloud15>> {
    frames
        .iter()
        .map(|f| f.target_cloud().unwrap_or_else(|| Err(GloveError::param("test frame without a target"))))
        .collect()
}

/// Scores a test stream, windowed exactly as it would be live.
pub fn evaluate_reconstructor(model: &HandReconstructor, frames: &[Frame], exec: Exec) -> Result<EvalReport> {
    let truth = targets(frames)?;
    let pred = model.predict_frames(frames, exec)?;
    Ok(EvalReport {
        frames: frames.len(),
        classification: None,
        reconstruction: Some(ReconstructionMetrics::from_predictions(&pred, &truth)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(f: impl Fn(usize) -> [f64; 3]) -> PointCloud15 {
        PointCloud15::new(std::array::from_fn(f)).unwrap()
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let a = vec![cloud(|k| [k as f64, 2.0, -1.0])];
        assert_eq!(average_distance(&a, &a).unwrap(), AdStats { mean: 0.0, std: 0.0 });
        assert!(average_distance(&a, &[]).is_err());
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let truth = [0, 0, 1, 2, 2, 2];
        let pred = [0, 1, 1, 2, 0, 2];
        let m = ClassificationMetrics::from_predictions(&truth, &pred, 4).unwrap();
        assert_eq!(m.confusion[2].iter().sum::<u64>(), 3);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.per_class_accuracy[3], None);
        assert_eq!(m.per_class_accuracy[0], Some(0.5));
        assert!(ClassificationMetrics::from_predictions(&[5], &[0], 4).is_err());
    }

    #[test]
    fn report_text_has_every_field() {
        let m = ClassificationMetrics::from_predictions(&[0, 1], &[0, 1], 2).unwrap();
        let a = vec![cloud(|_| [0.0; 3])];
        let r = ReconstructionMetrics::from_predictions(&a, &a).unwrap();
        let text = EvalReport { frames: 2, classification: Some(m), reconstruction: Some(r) }.to_text();
        assert!(text.contains("accuracy = 1\n"));
        assert!(text.contains("keypoint_14_mm = 0\n"));
        assert!(text.ends_with("[confusion]\n1,0\n0,1\n"));
    }
}
