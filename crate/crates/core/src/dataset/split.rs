use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GloveError, Result};
use crate::frame::Frame;

pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub enum SplitKind {
    /// Held-out subjects (0-based run indices) form the test set.
    BySubject { holdout: Vec<usize> },
    BySegment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Frame>,
    pub validation: Vec<Frame>,
    pub test: Vec<Frame>,
    pub kind: SplitKind,
}

/// Contiguous per-subject runs, found where the timestamp stops increasing.
pub fn subject_runs(frames: &[Frame]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..frames.len() {
        if frames[i].timestamp_ns <= frames[i - 1].timestamp_ns {
            runs.push(start..i);
            start = i;
        }
    }
    if !frames.is_empty() {
        runs.push(start..frames.len());
    }
    runs
}

/// Held-out subjects become the test set; the rest is split 8:2 by stratified
/// sampling over labels. Both partitions keep the original frame order.
pub fn split_gesture_dataset(frames: &[Frame], holdout: &[usize], seed: u64) -> Result<DatasetSplit> {
    let runs = subject_runs(frames);
    if let Some(&bad) = holdout.iter().find(|&&h| h >= runs.len()) {
        return Err(GloveError::param(format!("holdout subject {bad} not in data ({} subjects)", runs.len())));
    }
    let mut is_test = vec![false; runs.len()];
    holdout.iter().for_each(|&h| is_test[h] = true);
    if is_test.iter().all(|&t| t) {
        return Err(GloveError::param("holdout set covers every subject"));
    }

    let mut test = Vec::new();
    let mut strata: BTreeMap<Option<u16>, Vec<usize>> = BTreeMap::new();
    for (run, &held) in runs.iter().zip(&is_test) {
        for i in run.clone() {
            if held {
                test.push(frames[i].clone());
            } else {
                strata.entry(frames[i].label).or_default().push(i);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_val = vec![false; frames.len()];
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let n_val = (members.len() as f64 * VALIDATION_FRACTION).round() as usize;
        members[..n_val].iter().for_each(|&i| in_val[i] = true);
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (run, &held) in runs.iter().zip(&is_test) {
        if held {
            continue;
        }
        for i in run.clone() {
            if in_val[i] {
                validation.push(frames[i].clone());
            } else {
                train.push(frames[i].clone());
            }
        }
    }
    Ok(DatasetSplit { train, validation, test, kind: SplitKind::BySubject { holdout: holdout.to_vec() } })
}

/// Cuts a continuous recording into train, validation and test segments.
pub fn split_reconstruction_dataset(frames: &[Frame], segment_lengths: [usize; 3]) -> Result<DatasetSplit> {
    let total: usize = segment_lengths.iter().sum();
    if total != frames.len() {
        return Err(GloveError::param(format!(
            "segments {segment_lengths:?} cover {total} frames, dataset has {}",
            frames.len()
        )));
    }
    let (a, b) = (segment_lengths[0], segment_lengths[0] + segment_lengths[1]);
    Ok(DatasetSplit {
        train: frames[..a].to_vec(),
        validation: frames[a..b].to_vec(),
        test: frames[b..].to_vec(),
        kind: SplitKind::BySegment,
    })
}
