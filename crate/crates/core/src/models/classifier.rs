//! CNN-MLP gesture classifier: Conv1d(1→64, k=2) → ReLU → flatten(832) →
//! FC(832→128) → ReLU → dropout(0.2) → FC(128→30).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinynn::activation::{dropout, relu, relu_backward, DropoutMask};
use tinynn::conv::Conv1d;
use tinynn::linear::Linear;
use tinynn::loss::{cross_entropy_parts, LossKind};
use tinynn::train::Network;
use tinynn::weights::WeightFile;
use tinynn::{Exec, Grads, ModelParams, Tensor};

use super::{argmax, load_params, param_tensors, prep_from, prep_tensors, EVAL_CHUNK, KIND_CLASSIFIER};
use crate::channels::NUM_INTRA;
use crate::dataset::PreprocessState;
use crate::error::{GloveError, Result};
use crate::frame::Frame;
use crate::gestures::NUM_GESTURES;

pub const CONV_CHANNELS: usize = 64;
pub const KERNEL_SIZE: usize = 2;
pub const CONV_LEN: usize = NUM_INTRA - KERNEL_SIZE + 1;
pub const FLATTEN: usize = CONV_CHANNELS * CONV_LEN;
pub const HIDDEN: usize = 128;
pub const DROPOUT: f64 = 0.2;

/// One preprocessed 14-channel frame and its gesture label.
#[derive(Clone, Debug, PartialEq)]
pub struct GestureSample {
    pub x: [f32; NUM_INTRA],
    pub label: u16,
}

#[derive(Clone, Debug)]
pub struct GestureClassifier {
    params: ModelParams<f32>,
    conv: Conv1d,
    fc1: Linear,
    fc2: Linear,
    prep: PreprocessState,
}

struct Cache {
    x: Tensor<f32>,
    conv_out: Tensor<f32>,
    flat: Tensor<f32>,
    pre1: Tensor<f32>,
    mask: DropoutMask<f32>,
    hidden: Tensor<f32>,
}

impl GestureClassifier {
    pub fn new(prep: PreprocessState, seed: u64) -> Result<Self> {
        if prep.channels() != NUM_INTRA {
            return Err(GloveError::Shape(format!(
                "classifier takes {NUM_INTRA} channels, preprocessing has {}",
                prep.channels()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        let conv = Conv1d::new(&mut params, "conv", 1, CONV_CHANNELS, KERNEL_SIZE, &mut rng);
        let fc1 = Linear::new(&mut params, "fc1", FLATTEN, HIDDEN, &mut rng);
        let fc2 = Linear::new(&mut params, "fc2", HIDDEN, NUM_GESTURES, &mut rng);
        Ok(GestureClassifier { params, conv, fc1, fc2, prep })
    }

    pub fn preprocess(&self) -> &PreprocessState {
        &self.prep
    }

    fn forward<R: Rng + ?Sized>(&self, x: Tensor<f32>, training: bool, rng: &mut R) -> Result<(Tensor<f32>, Cache)> {
        let batch = x.shape()[0];
        let conv_out = self.conv.forward(&self.params, &x)?;
        let flat = relu(&conv_out).reshape(&[batch, FLATTEN])?;
        let pre1 = self.fc1.forward(&self.params, &flat)?;
        let (hidden, mask) = dropout(&relu(&pre1), DROPOUT, training, rng)?;
        let logits = self.fc2.forward(&self.params, &hidden)?;
        Ok((logits, Cache { x, conv_out, flat, pre1, mask, hidden }))
    }

    fn backward(&self, cache: &Cache, dlogits: &Tensor<f32>, g: &mut Grads<f32>) -> Result<()> {
        let dhidden = self.fc2.backward(&self.params, &cache.hidden, dlogits, g);
        let dpre1 = relu_backward(&cache.pre1, &cache.mask.backward(&dhidden));
        let dflat = self.fc1.backward(&self.params, &cache.flat, &dpre1, g);
        let dconv = relu_backward(&cache.conv_out, &dflat.reshape(cache.conv_out.shape())?);
        self.conv.backward(&self.params, &cache.x, &dconv, g);
        Ok(())
    }

    fn batch_input<'a>(rows: impl ExactSizeIterator<Item = &'a [f32]>) -> Result<Tensor<f32>> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * NUM_INTRA);
        for r in rows {
            if r.len() != NUM_INTRA {
                return Err(GloveError::Shape(format!("classifier input has {} values, expected {NUM_INTRA}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor::from_vec(&[n, 1, NUM_INTRA], data)?)
    }

    /// Evaluation-mode logits for one preprocessed frame.
    pub fn classify(&self, frame14: &[f32]) -> Result<Vec<f32>> {
        let x = Self::batch_input(std::iter::once(frame14))?;
        let (logits, _) = self.forward(x, false, &mut super::eval_rng())?;
        Ok(logits.into_data())
    }

    /// Logits for many preprocessed frames, one row each.
    pub fn logits_batch(&self, rows: &[&[f32]], exec: Exec) -> Result<Vec<Vec<f32>>> {
        let chunks: Vec<&[&[f32]]> = rows.chunks(EVAL_CHUNK).collect();
        let parts = exec.map(&chunks, |_, chunk| -> Result<Vec<Vec<f32>>> {
            let x = Self::batch_input(chunk.iter().copied())?;
            let (logits, _) = self.forward(x, false, &mut super::eval_rng())?;
            Ok(logits.data().chunks_exact(NUM_GESTURES).map(<[f32]>::to_vec).collect())
        });
        let mut out = Vec::with_capacity(rows.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Preprocesses raw labeled frames into training samples.
    pub fn samples(&self, frames: &[Frame]) -> Result<Vec<GestureSample>> {
        samples_from(&self.prep, frames)
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut tensors = param_tensors(&self.params);
        tensors.extend(prep_tensors(&self.prep));
        WeightFile { kind: KIND_CLASSIFIER, tensors }
    }

    pub fn from_weight_file(wf: &WeightFile) -> Result<Self> {
        if wf.kind != KIND_CLASSIFIER {
            return Err(GloveError::format("weight file", format!("kind {} is not a classifier", wf.kind)));
        }
        let mut model = Self::new(prep_from(wf, NUM_INTRA)?, 0)?;
        load_params(&mut model.params, wf, &["prep."])?;
        Ok(model)
    }

    /// Predicted labels for raw frames, preprocessed as one stream.
    pub fn predict_frames(&self, frames: &[Frame], exec: Exec) -> Result<Vec<usize>> {
        let pre = self.prep.apply(frames)?;
        let rows: Vec<&[f32]> = pre.iter().map(|f| f.channels.as_slice()).collect();
        Ok(self.logits_batch(&rows, exec)?.iter().map(|l| argmax(l)).collect())
    }
}

pub fn samples_from(prep: &PreprocessState, frames: &[Frame]) -> Result<Vec<GestureSample>> {
    prep.apply(frames)?
        .into_iter()
        .map(|f| {
            let label = f.label.ok_or_else(|| GloveError::param("gesture frame without a label"))?;
            let x = f
                .channels
                .as_slice()
                .try_into()
                .map_err(|_| GloveError::Shape(format!("{} channels, expected {NUM_INTRA}", f.channels.len())))?;
            Ok(GestureSample { x, label })
        })
        .collect()
}

impl Network<f32> for GestureClassifier {
    type Sample = GestureSample;

    fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams<f32> {
        &mut self.params
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::CrossEntropy
    }

    fn train_chunk(
        &self,
        samples: &[&GestureSample],
        scale: f64,
        grads: &mut Grads<f32>,
        rng: &mut ChaCha8Rng,
    ) -> tinynn::Result<f64> {
        let x = Self::batch_input(samples.iter().map(|s| s.x.as_slice())).map_err(to_nn)?;
        let labels: Vec<usize> = samples.iter().map(|s| s.label as usize).collect();
        let (logits, cache) = self.forward(x, true, rng).map_err(to_nn)?;
        let (loss, dlogits) = cross_entropy_parts(&logits, &labels)?;
        let dlogits = dlogits.map(|v| v * scale as f32);
        self.backward(&cache, &dlogits, grads).map_err(to_nn)?;
        Ok(loss)
    }

    fn eval_chunk(&self, samples: &[&GestureSample]) -> tinynn::Result<f64> {
        let x = Self::batch_input(samples.iter().map(|s| s.x.as_slice())).map_err(to_nn)?;
        let labels: Vec<usize> = samples.iter().map(|s| s.label as usize).collect();
        let (logits, _) = self.forward(x, false, &mut super::eval_rng()).map_err(to_nn)?;
        Ok(cross_entropy_parts(&logits, &labels)?.0)
    }
}

pub(crate) fn to_nn(e: GloveError) -> tinynn::NnError {
    match e {
        GloveError::Nn(inner) => inner,
        other => tinynn::NnError::Parameter(other.to_string()),
    }
}
