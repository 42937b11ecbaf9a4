//! The two task networks and their weight-file persistence.

pub mod classifier;
pub mod reconstructor;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tinynn::weights::WeightFile;
use tinynn::{ModelParams, Tensor};

use crate::dataset::PreprocessState;
use crate::error::{GloveError, Result};

pub use classifier::{GestureClassifier, GestureSample};
pub use reconstructor::{HandReconstructor, ReconSample, SlidingWindow};

pub const KIND_CLASSIFIER: u8 = 1;
pub const KIND_RECONSTRUCTOR: u8 = 2;

/// Rows of logits or predictions evaluated per parallel task.
pub(crate) const EVAL_CHUNK: usize = 256;

pub(crate) fn vector(values: &[f32]) -> Tensor<f32> {
    Tensor::from_vec(&[values.len()], values.to_vec()).expect("rank-1 shape matches")
}

pub(crate) fn prep_tensors(prep: &PreprocessState) -> Vec<(String, Tensor<f32>)> {
    vec![
        ("prep.window".into(), vector(&[prep.window as f32])),
        ("prep.min".into(), vector(&prep.min)),
        ("prep.max".into(), vector(&prep.max)),
    ]
}

pub(crate) fn required<'a>(wf: &'a WeightFile, name: &str) -> Result<&'a Tensor<f32>> {
    wf.get(name).ok_or_else(|| GloveError::format("weight file", format!("missing tensor {name}")))
}

pub(crate) fn prep_from(wf: &WeightFile, channels: usize) -> Result<PreprocessState> {
    let window = required(wf, "prep.window")?.data();
    let min = required(wf, "prep.min")?.data().to_vec();
    let max = required(wf, "prep.max")?.data().to_vec();
    if window.len() != 1 || !(window[0] >= 1.0) || min.len() != channels || max.len() != channels {
        return Err(GloveError::format("weight file", "inconsistent preprocessing tensors"));
    }
    Ok(PreprocessState { window: window[0] as usize, min, max })
}

/// Copies every named parameter out of `wf`; tensors outside `params` must
/// carry one of the `extra` prefixes.
pub(crate) fn load_params(params: &mut ModelParams<f32>, wf: &WeightFile, extra: &[&str]) -> Result<()> {
    for (name, t) in &wf.tensors {
        if params.id_of(name).is_some() {
            params.load(name, t.clone())?;
        } else if !extra.iter().any(|p| name.starts_with(p)) {
            return Err(GloveError::format("weight file", format!("unexpected tensor {name}")));
        }
    }
    for p in params.iter() {
        required(wf, &p.name)?;
    }
    Ok(())
}

pub(crate) fn param_tensors(params: &ModelParams<f32>) -> Vec<(String, Tensor<f32>)> {
    params.iter().map(|p| (p.name.clone(), p.value.clone())).collect()
}

pub fn save_weights(path: &Path, wf: &WeightFile) -> Result<()> {
    wf.write_to(BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<WeightFile> {
    Ok(WeightFile::read_from(BufReader::new(File::open(path)?))?)
}

/// Index of the largest logit; ties resolve to the lowest index.
pub fn argmax(logits: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Generator handed to evaluation-mode passes, which draw nothing from it.
pub(crate) fn eval_rng() -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(0)
}
