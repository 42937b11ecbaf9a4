//! Synthetic dataset generation, splitting, preprocessing and storage.

pub mod format;
pub mod generate;
pub mod preprocess;
pub mod split;

pub use generate::{
    generate_gesture_dataset, generate_reconstruction_dataset, make_subjects, pose_trajectory, Sex,
    SubjectProfile, TrajectoryConfig,
};
pub use preprocess::{fit_preprocess, MovingAverage, PreprocessState, StreamPreprocessor, DEFAULT_WINDOW};
pub use split::{split_gesture_dataset, split_reconstruction_dataset, subject_runs, DatasetSplit, SplitKind};

/// Nanosecond timestamp of frame `index` at a nominal rate.
pub fn frame_timestamp(index: usize, fps: f64) -> u64 {
    (index as f64 * 1e9 / fps).round() as u64
}
