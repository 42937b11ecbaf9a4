use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use capglove::baselines::{LinearReadout, MeanPose};
use capglove::dataset::format::{load_dataset, save_dataset, write_csv};
use capglove::dataset::{
    fit_preprocess, generate_gesture_dataset, generate_reconstruction_dataset, make_subjects,
    split_gesture_dataset, split_reconstruction_dataset, DatasetSplit, TrajectoryConfig,
};
use capglove::metrics::{average_distance, evaluate_classifier, evaluate_reconstructor, targets};
use capglove::models::reconstructor::fit_target_stats;
use capglove::models::{load_weights, save_weights, KIND_CLASSIFIER, KIND_RECONSTRUCTOR};
use capglove::{Exec, Frame, GestureClassifier, HandReconstructor, SensingMode};
use tinynn::train::{train, TrainOutcome};
use tinynn::weights::WeightFile;

use crate::config::{PipelineConfig, Task};
use crate::error::{at, PipelineError, Result};

/// Independent seed streams derived from the run seed.
pub mod seeds {
    pub fn subjects(seed: u64) -> u64 {
        seed
    }
    pub fn split(seed: u64) -> u64 {
        seed.wrapping_add(1)
    }
    pub fn init(seed: u64) -> u64 {
        seed.wrapping_add(2)
    }
    pub fn trajectory(seed: u64) -> u64 {
        seed.wrapping_add(3)
    }
}

fn mode(task: Task) -> SensingMode {
    match task {
        Task::Gesture => SensingMode::IntraOnly,
        Task::Recon => SensingMode::Full,
    }
}

pub fn generate(cfg: &PipelineConfig) -> Result<Vec<Frame>> {
    let map = cfg.channel_map()?;
    let noise = cfg.noise_config();
    match cfg.task {
        Task::Gesture => {
            let subjects = make_subjects(cfg.data.subjects, seeds::subjects(cfg.seed));
            let lib = cfg.gesture_library()?;
            Ok(generate_gesture_dataset(&subjects, &lib, &map, cfg.data.frames_per_gesture, cfg.fps, &noise, Exec::default())?)
        }
        Task::Recon => {
            let subject = &make_subjects(1, seeds::subjects(cfg.seed))[0];
            Ok(generate_reconstruction_dataset(
                subject,
                &map,
                cfg.data.segments,
                cfg.fps,
                &noise,
                &TrajectoryConfig::default(),
                seeds::trajectory(cfg.seed),
            )?)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    pub channels: usize,
    pub duration_s: f64,
    /// Per-channel (min, mean, max).
    pub channel_stats: Vec<(f64, f64, f64)>,
}

impl SimulateSummary {
    fn of(frames: &[Frame], fps: f64, channels: usize) -> Self {
        let channel_stats = (0..channels)
            .map(|c| {
                let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
                for f in frames {
                    let v = f.channels[c] as f64;
                    lo = lo.min(v);
                    hi = hi.max(v);
                    sum += v;
                }
                (lo, sum / frames.len().max(1) as f64, hi)
            })
            .collect();
        SimulateSummary { frames: frames.len(), channels, duration_s: frames.len() as f64 / fps, channel_stats }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("frames = {}\nchannels = {}\nduration_s = {:.3}\n", self.frames, self.channels, self.duration_s);
        s.push_str("channel,min,mean,max\n");
        for (c, (lo, mean, hi)) in self.channel_stats.iter().enumerate() {
            writeln!(s, "{c},{lo:.6},{mean:.6},{hi:.6}").unwrap();
        }
        s
    }
}

pub fn simulate(cfg: &PipelineConfig) -> Result<SimulateSummary> {
    let frames = generate(cfg)?;
    let path = &cfg.paths.dataset;
    create_parent(path)?;
    save_dataset(path, mode(cfg.task), &frames).map_err(at(path))?;
    Ok(SimulateSummary::of(&frames, cfg.fps, cfg.task.channels()))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e)),
        _ => Ok(()),
    }
}

/// Loads the configured dataset and checks it matches the task.
pub fn load_task_dataset(cfg: &PipelineConfig) -> Result<Vec<Frame>> {
    let path = &cfg.paths.dataset;
    let (m, frames) = load_dataset(path).map_err(at(path))?;
    if m != mode(cfg.task) {
        return Err(PipelineError::Config(format!(
            "{} holds {}-channel frames but task {:?} needs {}",
            path.display(),
            m.channels(),
            cfg.task,
            cfg.task.channels()
        )));
    }
    Ok(frames)
}

pub fn split(cfg: &PipelineConfig, frames: &[Frame]) -> Result<DatasetSplit> {
    Ok(match cfg.task {
        Task::Gesture => split_gesture_dataset(frames, &cfg.data.holdout, seeds::split(cfg.seed))?,
        Task::Recon => split_reconstruction_dataset(frames, cfg.data.segments)?,
    })
}

/// Freshly initialised model for `split`, as training would start it.
pub fn initial_model(cfg: &PipelineConfig, split: &DatasetSplit) -> Result<Model> {
    let prep = fit_preprocess(&split.train, cfg.data.filter_window)?;
    Ok(match cfg.task {
        Task::Gesture => Model::Gesture(GestureClassifier::new(prep, seeds::init(cfg.seed))?),
        Task::Recon => {
            let (mean, std) = fit_target_stats(&split.train)?;
            Model::Recon(HandReconstructor::new(prep, mean, std, seeds::init(cfg.seed))?)
        }
    })
}

#[derive(Clone, Debug)]
pub enum Model {
    Gesture(GestureClassifier),
    Recon(HandReconstructor),
}

impl Model {
    pub fn to_weight_file(&self) -> WeightFile {
        match self {
            Model::Gesture(m) => m.to_weight_file(),
            Model::Recon(m) => m.to_weight_file(),
        }
    }

    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let path = &cfg.paths.weights;
        let wf = load_weights(path).map_err(at(path))?;
        match (cfg.task, wf.kind) {
            (Task::Gesture, KIND_CLASSIFIER) => Ok(Model::Gesture(GestureClassifier::from_weight_file(&wf)?)),
            (Task::Recon, KIND_RECONSTRUCTOR) => Ok(Model::Recon(HandReconstructor::from_weight_file(&wf)?)),
            (task, kind) => Err(PipelineError::Config(format!(
                "{} holds model kind {kind}, which does not fit task {task:?}",
                path.display()
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub model: Model,
}

pub fn train_model(cfg: &PipelineConfig) -> Result<TrainRun> {
    let frames = load_task_dataset(cfg)?;
    let split = split(cfg, &frames)?;
    let tc = cfg.train_config();
    let exec = Exec::default();
    let (outcome, model) = match initial_model(cfg, &split)? {
        Model::Gesture(mut m) => {
            let (tr, va) = (m.samples(&split.train)?, m.samples(&split.validation)?);
            (train(&mut m, &tr, &va, &tc, exec)?, Model::Gesture(m))
        }
        Model::Recon(mut m) => {
            let (tr, va) = (m.samples(&split.train)?, m.samples(&split.validation)?);
            (train(&mut m, &tr, &va, &tc, exec)?, Model::Recon(m))
        }
    };
    let path = &cfg.paths.weights;
    create_parent(path)?;
    save_weights(path, &model.to_weight_file()).map_err(at(path))?;
    write_history(&cfg.paths.history, &outcome)?;
    Ok(TrainRun { outcome, model })
}

fn write_history(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    create_parent(path)?;
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for r in &outcome.history {
        writeln!(text, "{},{},{}", r.epoch, r.train_loss, r.val_loss).unwrap();
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Scores the test partition and writes the report. Reconstruction reports
/// also carry the mean-pose and linear-readout baselines.
pub fn evaluate(cfg: &PipelineConfig) -> Result<String> {
    let model = Model::load(cfg)?;
    let frames = load_task_dataset(cfg)?;
    let split = split(cfg, &frames)?;
    let exec = Exec::default();
    let text = match &model {
        Model::Gesture(m) => evaluate_classifier(m, &split.test, exec)?.to_text(),
        Model::Recon(m) => {
            let mut text = evaluate_reconstructor(m, &split.test, exec)?.to_text();
            let truth = targets(&split.test)?;
            let mean = MeanPose::fit(&split.train)?.predict(truth.len());
            let linear = LinearReadout::fit(m.preprocess(), &split.train)?.predict(&split.test)?;
            writeln!(text, "baseline_mean_pose_ad_mm = {}", average_distance(&mean, &truth)?.mean).unwrap();
            writeln!(text, "baseline_linear_ad_mm = {}", average_distance(&linear, &truth)?.mean).unwrap();
            text
        }
    };
    let path = &cfg.paths.report;
    create_parent(path)?;
    std::fs::write(path, &text).map_err(|e| PipelineError::io(path, e))?;
    Ok(text)
}

pub fn export_csv(cfg: &PipelineConfig, out: &Path) -> Result<usize> {
    let frames = load_task_dataset(cfg)?;
    create_parent(out)?;
    let file = File::create(out).map_err(|e| PipelineError::io(out, e))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, mode(cfg.task), &frames).map_err(at(out))?;
    w.flush().map_err(|e| PipelineError::io(out, e))?;
    Ok(frames.len())
}
