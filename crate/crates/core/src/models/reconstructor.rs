//! Transformer hand reconstructor: input projection 28→64, learned
//! positional embedding over the 3-frame window, three encoder layers (two
//! heads, feed-forward width 64), mean pooling over time, FC 64→45.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinynn::encoder::{EncoderCache, EncoderLayer};
use tinynn::linear::Linear;
use tinynn::loss::{mse_parts, LossKind};
use tinynn::train::Network;
use tinynn::weights::WeightFile;
use tinynn::{Exec, Grads, ModelParams, ParamId, Tensor};

use super::classifier::to_nn;
use super::{eval_rng, load_params, param_tensors, prep_from, prep_tensors, required, vector, EVAL_CHUNK, KIND_RECONSTRUCTOR};
use crate::channels::NUM_CHANNELS;
use crate::dataset::PreprocessState;
use crate::error::{GloveError, Result};
use crate::frame::{Frame, TARGET_LEN};
use crate::kinematics::PointCloud15;

pub const WINDOW: usize = 3;
pub const MODEL_DIM: usize = 64;
pub const HEADS: usize = 2;
pub const FF_HIDDEN: usize = 64;
pub const LAYERS: usize = 3;
pub const DROPOUT: f64 = 0.1;
pub const WINDOW_LEN: usize = WINDOW * NUM_CHANNELS;
/// Smallest target spread treated as varying; flatter coordinates keep unit scale.
const MIN_TARGET_STD: f64 = 1e-6;

/// Keeps the last three frames; until three have arrived the first frame
/// is repeated to fill the window. A non-increasing timestamp restarts it.
#[derive(Clone, Debug, Default)]
pub struct SlidingWindow {
    frames: VecDeque<Vec<f32>>,
    last_ts: Option<u64>,
}

impl SlidingWindow {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the flattened window, oldest frame first, and whether it is
    /// still warming up.
    pub fn push(&mut self, timestamp_ns: u64, channels: &[f32]) -> (Vec<f32>, bool) {
        if self.last_ts.is_some_and(|t| timestamp_ns <= t) {
            self.frames.clear();
        }
        self.last_ts = Some(timestamp_ns);
        if self.frames.len() == WINDOW {
            self.frames.pop_front();
        }
        self.frames.push_back(channels.to_vec());
        let warm_up = self.frames.len() < WINDOW;
        let mut out = Vec::with_capacity(WINDOW * channels.len());
        for _ in self.frames.len()..WINDOW {
            out.extend_from_slice(&self.frames[0]);
        }
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        (out, warm_up)
    }
}

/// Windows over preprocessed frames, one per frame.
pub fn windows(frames: &[Frame]) -> Vec<(Vec<f32>, bool)> {
    let mut w = SlidingWindow::new();
    frames.iter().map(|f| w.push(f.timestamp_ns, &f.channels)).collect()
}

/// One 3×28 window and its z-scored target.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconSample {
    pub window: Vec<f32>,
    pub target: [f32; TARGET_LEN],
}

#[derive(Clone, Debug)]
pub struct HandReconstructor {
    params: ModelParams<f32>,
    proj: Linear,
    pos: ParamId,
    encoders: Vec<EncoderLayer>,
    head: Linear,
    prep: PreprocessState,
    target_mean: Vec<f32>,
    target_std: Vec<f32>,
}

struct Cache {
    x: Tensor<f32>,
    encoders: Vec<EncoderCache<f32>>,
    pooled: Tensor<f32>,
}

/// Per-coordinate mean and standard deviation of the training targets.
pub fn fit_target_stats(frames: &[Frame]) -> Result<(Vec<f32>, Vec<f32>)> {
    let targets: Vec<&[f32; TARGET_LEN]> = frames.iter().filter_map(|f| f.target.as_ref()).collect();
    if targets.is_empty() || targets.len() != frames.len() {
        return Err(GloveError::param("every reconstruction frame needs a target"));
    }
    let n = targets.len() as f64;
    let mut mean = vec![0.0f64; TARGET_LEN];
    for t in &targets {
        mean.iter_mut().zip(t.iter()).for_each(|(m, &v)| *m += v as f64);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; TARGET_LEN];
    for t in &targets {
        var.iter_mut().zip(t.iter().zip(&mean)).for_each(|(s, (&v, m))| *s += (v as f64 - m).powi(2));
    }
    let std = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > MIN_TARGET_STD { sd as f32 } else { 1.0 }
        })
        .collect();
    Ok((mean.into_iter().map(|m| m as f32).collect(), std))
}

impl HandReconstructor {
    pub fn new(prep: PreprocessState, target_mean: Vec<f32>, target_std: Vec<f32>, seed: u64) -> Result<Self> {
        if prep.channels() != NUM_CHANNELS {
            return Err(GloveError::Shape(format!(
                "reconstructor takes {NUM_CHANNELS} channels, preprocessing has {}",
                prep.channels()
            )));
        }
        if target_mean.len() != TARGET_LEN || target_std.len() != TARGET_LEN || target_std.iter().any(|&s| !(s > 0.0)) {
            return Err(GloveError::param("target statistics must hold 45 values with positive spread"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ModelParams::new();
        let proj = Linear::new(&mut params, "proj", NUM_CHANNELS, MODEL_DIM, &mut rng);
        let pos = params.add_xavier("pos", &[1, WINDOW, MODEL_DIM], WINDOW, MODEL_DIM, &mut rng);
        let encoders = (0..LAYERS)
            .map(|i| EncoderLayer::new(&mut params, &format!("encoder{i}"), MODEL_DIM, HEADS, FF_HIDDEN, DROPOUT, &mut rng))
            .collect::<tinynn::Result<Vec<_>>>()?;
        let head = Linear::new(&mut params, "head", MODEL_DIM, TARGET_LEN, &mut rng);
        Ok(HandReconstructor { params, proj, pos, encoders, head, prep, target_mean, target_std })
    }

    pub fn preprocess(&self) -> &PreprocessState {
        &self.prep
    }

    fn forward<R: Rng + ?Sized>(&self, x: Tensor<f32>, training: bool, rng: &mut R) -> Result<(Tensor<f32>, Cache)> {
        let batch = x.shape()[0];
        let mut h = self.proj.forward(&self.params, &x)?;
        let pos = self.params.value(self.pos).data();
        for row in h.data_mut().chunks_exact_mut(WINDOW * MODEL_DIM) {
            row.iter_mut().zip(pos).for_each(|(v, &p)| *v += p);
        }
        let mut caches = Vec::with_capacity(LAYERS);
        for enc in &self.encoders {
            let (next, cache) = enc.forward(&self.params, &h, training, rng)?;
            h = next;
            caches.push(cache);
        }
        let scale = 1.0 / WINDOW as f32;
        let mut pooled = vec![0.0f32; batch * MODEL_DIM];
        for (out, seq) in pooled.chunks_exact_mut(MODEL_DIM).zip(h.data().chunks_exact(WINDOW * MODEL_DIM)) {
            for step in seq.chunks_exact(MODEL_DIM) {
                out.iter_mut().zip(step).for_each(|(o, &v)| *o += v);
            }
            out.iter_mut().for_each(|o| *o *= scale);
        }
        let pooled = Tensor::from_vec(&[batch, MODEL_DIM], pooled)?;
        let y = self.head.forward(&self.params, &pooled)?;
        Ok((y, Cache { x, encoders: caches, pooled }))
    }

    fn backward(&self, cache: &Cache, dy: &Tensor<f32>, g: &mut Grads<f32>) -> Result<()> {
        let batch = dy.shape()[0];
        let dpooled = self.head.backward(&self.params, &cache.pooled, dy, g);
        let scale = 1.0 / WINDOW as f32;
        let mut dh = Vec::with_capacity(batch * WINDOW * MODEL_DIM);
        for row in dpooled.data().chunks_exact(MODEL_DIM) {
            for _ in 0..WINDOW {
                dh.extend(row.iter().map(|&v| v * scale));
            }
        }
        let mut dh = Tensor::from_vec(&[batch, WINDOW, MODEL_DIM], dh)?;
        for (enc, c) in self.encoders.iter().zip(&cache.encoders).rev() {
            dh = enc.backward(&self.params, c, &dh, g);
        }
        let dpos = g.get_mut(self.pos);
        for row in dh.data().chunks_exact(WINDOW * MODEL_DIM) {
            dpos.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
        }
        self.proj.backward(&self.params, &cache.x, &dh, g);
        Ok(())
    }

    fn batch_input<'a>(rows: impl ExactSizeIterator<Item = &'a [f32]>) -> Result<Tensor<f32>> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * WINDOW_LEN);
        for r in rows {
            if r.len() != WINDOW_LEN {
                return Err(GloveError::Shape(format!(
                    "window holds {} values, expected {WINDOW} × {NUM_CHANNELS}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor::from_vec(&[n, WINDOW, NUM_CHANNELS], data)?)
    }

    fn denormalize(&self, row: &[f32]) -> Result<PointCloud15> {
        let mm: Vec<f32> = row
            .iter()
            .zip(self.target_mean.iter().zip(&self.target_std))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect();
        PointCloud15::from_flat(&mm)
    }

    /// Keypoints in mm from exactly three consecutive preprocessed frames.
    pub fn reconstruct(&self, frames: &[&[f32]]) -> Result<PointCloud15> {
        if frames.len() != WINDOW {
            return Err(GloveError::Shape(format!("window of {} frames, expected {WINDOW}", frames.len())));
        }
        let flat = frames.concat();
        Ok(self.predict_windows(&[&flat], Exec::Sequential)?.remove(0))
    }

    pub fn predict_windows(&self, windows: &[&[f32]], exec: Exec) -> Result<Vec<PointCloud15>> {
        let chunks: Vec<&[&[f32]]> = windows.chunks(EVAL_CHUNK).collect();
        let parts = exec.map(&chunks, |_, chunk| -> Result<Vec<PointCloud15>> {
            let x = Self::batch_input(chunk.iter().copied())?;
            let (y, _) = self.forward(x, false, &mut eval_rng())?;
            y.data().chunks_exact(TARGET_LEN).map(|r| self.denormalize(r)).collect()
        });
        let mut out = Vec::with_capacity(windows.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Predictions for a raw recording, preprocessed and windowed as a stream.
    pub fn predict_frames(&self, frames: &[Frame], exec: Exec) -> Result<Vec<PointCloud15>> {
        let pre = self.prep.apply(frames)?;
        let w = windows(&pre);
        let rows: Vec<&[f32]> = w.iter().map(|(v, _)| v.as_slice()).collect();
        self.predict_windows(&rows, exec)
    }

    pub fn samples(&self, frames: &[Frame]) -> Result<Vec<ReconSample>> {
        let pre = self.prep.apply(frames)?;
        windows(&pre)
            .into_iter()
            .zip(frames)
            .map(|((window, _), f)| {
                let t = f.target.as_ref().ok_or_else(|| GloveError::param("reconstruction frame without a target"))?;
                let mut target = [0.0f32; TARGET_LEN];
                for (k, o) in target.iter_mut().enumerate() {
                    *o = (t[k] - self.target_mean[k]) / self.target_std[k];
                }
                Ok(ReconSample { window, target })
            })
            .collect()
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let mut tensors = param_tensors(&self.params);
        tensors.extend(prep_tensors(&self.prep));
        tensors.push(("target.mean".into(), vector(&self.target_mean)));
        tensors.push(("target.std".into(), vector(&self.target_std)));
        WeightFile { kind: KIND_RECONSTRUCTOR, tensors }
    }

    pub fn from_weight_file(wf: &WeightFile) -> Result<Self> {
        if wf.kind != KIND_RECONSTRUCTOR {
            return Err(GloveError::format("weight file", format!("kind {} is not a reconstructor", wf.kind)));
        }
        let prep = prep_from(wf, NUM_CHANNELS)?;
        let mean = required(wf, "target.mean")?.data().to_vec();
        let std = required(wf, "target.std")?.data().to_vec();
        let mut model = Self::new(prep, mean, std, 0)?;
        load_params(&mut model.params, wf, &["prep.", "target."])?;
        Ok(model)
    }
}

impl Network<f32> for HandReconstructor {
    type Sample = ReconSample;

    fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ModelParams<f32> {
        &mut self.params
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::MeanSquaredError
    }

    fn train_chunk(
        &self,
        samples: &[&ReconSample],
        scale: f64,
        grads: &mut Grads<f32>,
        rng: &mut ChaCha8Rng,
    ) -> tinynn::Result<f64> {
        let x = Self::batch_input(samples.iter().map(|s| s.window.as_slice())).map_err(to_nn)?;
        let (y, cache) = self.forward(x, true, rng).map_err(to_nn)?;
        let (loss, dy) = mse_parts(&y, &targets(samples))?;
        let dy = dy.map(|v| v * scale as f32);
        self.backward(&cache, &dy, grads).map_err(to_nn)?;
        Ok(loss)
    }

    fn eval_chunk(&self, samples: &[&ReconSample]) -> tinynn::Result<f64> {
        let x = Self::batch_input(samples.iter().map(|s| s.window.as_slice())).map_err(to_nn)?;
        let (y, _) = self.forward(x, false, &mut eval_rng()).map_err(to_nn)?;
        Ok(mse_parts(&y, &targets(samples))?.0)
    }
}

fn targets(samples: &[&ReconSample]) -> Tensor<f32> {
    let data = samples.iter().flat_map(|s| s.target).collect();
    Tensor::from_vec(&[samples.len(), TARGET_LEN], data).expect("45 values per sample")
}
