//! TOML pipeline configuration. Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use capglove::dataset::DEFAULT_WINDOW;
use capglove::{ChannelMap, GestureLibrary, NoiseConfig};
use serde::Deserialize;
use tinynn::loss::LossKind;
use tinynn::train::TrainConfig;

use crate::error::{PipelineError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Gesture,
    Recon,
}

impl Task {
    pub fn channels(self) -> usize {
        match self {
            Task::Gesture => capglove::NUM_INTRA,
            Task::Recon => capglove::NUM_CHANNELS,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gesture" => Ok(Task::Gesture),
            "recon" | "reconstruction" => Ok(Task::Recon),
            other => Err(PipelineError::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Built-in presets when absent.
    pub gesture_library: Option<PathBuf>,
    /// Built-in map when absent.
    pub channel_map: Option<PathBuf>,
    pub dataset: PathBuf,
    pub weights: PathBuf,
    pub report: PathBuf,
    pub history: PathBuf,
}

impl Paths {
    /// Default file names under `dir`.
    pub fn under(dir: &Path, task: Task) -> Self {
        let stem = match task {
            Task::Gesture => "gesture",
            Task::Recon => "recon",
        };
        Paths {
            gesture_library: None,
            channel_map: None,
            dataset: dir.join(format!("{stem}.cgds")),
            weights: dir.join(format!("{stem}.cgwt")),
            report: dir.join(format!("{stem}_report.txt")),
            history: dir.join(format!("{stem}_history.csv")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub subjects: usize,
    pub frames_per_gesture: usize,
    /// 0-based subjects held out for testing.
    pub holdout: Vec<usize>,
    /// Training, validation and test frames of the reconstruction recording.
    pub segments: [usize; 3],
    pub filter_window: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            subjects: 6,
            frames_per_gesture: 200,
            holdout: vec![4, 5],
            segments: [3000, 1000, 500],
            filter_window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
}

impl TrainSection {
    pub fn defaults(task: Task) -> Self {
        match task {
            Task::Gesture => TrainSection { learning_rate: 1e-4, max_epochs: 300, patience: 100, batch_size: 512 },
            Task::Recon => TrainSection { learning_rate: 1e-3, max_epochs: 150, patience: 100, batch_size: 32 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub snr_db: f64,
    pub quantization_ff: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseConfig::default();
        NoiseSection { snr_db: n.snr_db, quantization_ff: n.quantization_step_ff }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSection {
    /// Frames replayed from the start of the dataset; 0 replays all.
    pub max_frames: usize,
    /// Wall-clock pacing at `fps`; off replays as fast as possible.
    pub paced: bool,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection { max_frames: 1200, paced: true }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Task,
    seed: Option<u64>,
    fps: Option<f64>,
    paths: Paths,
    #[serde(default)]
    data: DataConfig,
    train: Option<TrainSection>,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    stream: StreamSection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub task: Task,
    pub seed: u64,
    pub fps: f64,
    pub paths: Paths,
    pub data: DataConfig,
    pub train: TrainSection,
    pub noise: NoiseSection,
    pub stream: StreamSection,
}

impl PipelineConfig {
    /// Desk-scale defaults writing into `dir`.
    pub fn desk(task: Task, dir: &Path, seed: u64) -> Self {
        PipelineConfig {
            task,
            seed,
            fps: 120.0,
            paths: Paths::under(dir, task),
            data: DataConfig::default(),
            train: TrainSection::defaults(task),
            noise: NoiseSection::default(),
            stream: StreamSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let cfg = PipelineConfig {
            task: raw.task,
            seed: raw.seed.unwrap_or(0),
            fps: raw.fps.unwrap_or(120.0),
            paths: raw.paths,
            data: raw.data,
            train: raw.train.unwrap_or_else(|| TrainSection::defaults(raw.task)),
            noise: raw.noise,
            stream: raw.stream,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths.rebase(dir);
        }
        cfg.check_inputs()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if self.data.subjects == 0 || self.data.frames_per_gesture == 0 || self.data.filter_window == 0 {
            return bad("subjects, frames_per_gesture and filter_window must be positive".into());
        }
        if let Some(h) = self.data.holdout.iter().find(|&&h| h >= self.data.subjects) {
            return bad(format!("holdout subject {h} outside 0..{}", self.data.subjects));
        }
        self.train_config().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.noise_config().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Referenced input files must exist.
    pub fn check_inputs(&self) -> Result<()> {
        for p in [&self.paths.gesture_library, &self.paths.channel_map].into_iter().flatten() {
            if !p.is_file() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let (loss, dropout_rate) = match self.task {
            Task::Gesture => (LossKind::CrossEntropy, capglove::models::classifier::DROPOUT),
            Task::Recon => (LossKind::MeanSquaredError, capglove::models::reconstructor::DROPOUT),
        };
        TrainConfig {
            learning_rate: self.train.learning_rate,
            max_epochs: self.train.max_epochs,
            early_stopping_patience: self.train.patience,
            batch_size: self.train.batch_size,
            dropout_rate,
            loss,
            seed: self.seed,
        }
    }

    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { snr_db: self.noise.snr_db, quantization_step_ff: self.noise.quantization_ff, seed: 0 }
    }

    pub fn gesture_library(&self) -> Result<GestureLibrary> {
        match &self.paths.gesture_library {
            None => Ok(GestureLibrary::standard()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                Ok(GestureLibrary::parse(&text)?)
            }
        }
    }

    pub fn channel_map(&self) -> Result<ChannelMap> {
        match &self.paths.channel_map {
            None => Ok(ChannelMap::standard()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                Ok(ChannelMap::parse_table(&text)?)
            }
        }
    }
}

impl Paths {
    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [&mut self.dataset, &mut self.weights, &mut self.report, &mut self.history] {
            fix(p);
        }
        for p in [&mut self.gesture_library, &mut self.channel_map].into_iter().flatten() {
            fix(p);
        }
    }
}
