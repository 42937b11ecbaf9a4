//! Causal moving-average filter followed by per-channel min-max scaling.
//! The batch and streaming paths share [`MovingAverage`], so they agree bit
//! for bit.

use std::collections::VecDeque;

use crate::error::{GloveError, Result};
use crate::frame::Frame;

pub const DEFAULT_WINDOW: usize = 5;

/// Mean of the current and up to `window − 1` previous frames. A timestamp
/// that does not increase starts a new recording and clears the history.
#[derive(Clone, Debug)]
pub struct MovingAverage {
    window: usize,
    history: VecDeque<Vec<f32>>,
    last_ts: Option<u64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(GloveError::param("moving-average window must be at least 1"));
        }
        Ok(MovingAverage { window, history: VecDeque::with_capacity(window), last_ts: None })
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.last_ts = None;
    }

    pub fn push(&mut self, timestamp_ns: u64, channels: &[f32]) -> Vec<f32> {
        if self.last_ts.is_some_and(|t| timestamp_ns <= t)
            || self.history.front().is_some_and(|h| h.len() != channels.len())
        {
            self.history.clear();
        }
        self.last_ts = Some(timestamp_ns);
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(channels.to_vec());
        let n = self.history.len() as f64;
        (0..channels.len())
            .map(|c| (self.history.iter().map(|h| h[c] as f64).sum::<f64>() / n) as f32)
            .collect()
    }
}

pub fn moving_average(frames: &[Frame], window: usize) -> Result<Vec<Vec<f32>>> {
    let mut ma = MovingAverage::new(window)?;
    Ok(frames.iter().map(|f| ma.push(f.timestamp_ns, &f.channels)).collect())
}

/// Filter window and per-channel training ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessState {
    pub window: usize,
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

/// Fits min-max statistics on the filtered training frames.
pub fn fit_preprocess(train: &[Frame], window: usize) -> Result<PreprocessState> {
    let first = train.first().ok_or_else(|| GloveError::param("cannot fit preprocessing on no frames"))?;
    let n = first.channels.len();
    if let Some(f) = train.iter().find(|f| f.channels.len() != n) {
        return Err(GloveError::Shape(format!("mixed channel counts {n} and {}", f.channels.len())));
    }
    let mut min = vec![f32::INFINITY; n];
    let mut max = vec![f32::NEG_INFINITY; n];
    for row in moving_average(train, window)? {
        for (c, v) in row.into_iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    Ok(PreprocessState { window, min, max })
}

impl PreprocessState {
    pub fn channels(&self) -> usize {
        self.min.len()
    }

    /// Maps filtered values to [−1, 1] over the training range; a channel
    /// that never varied maps to 0.
    pub fn normalize(&self, filtered: &[f32]) -> Vec<f32> {
        filtered
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let range = hi as f64 - lo as f64;
                if range > 0.0 {
                    (2.0 * (v as f64 - lo as f64) / range - 1.0) as f32
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply(&self, frames: &[Frame]) -> Result<Vec<Frame>> {
        let mut stream = self.streamer()?;
        frames
            .iter()
            .map(|f| {
                let channels = stream.push(f)?;
                Ok(Frame { channels, ..f.clone() })
            })
            .collect()
    }

    pub fn streamer(&self) -> Result<StreamPreprocessor<'_>> {
        Ok(StreamPreprocessor { state: self, filter: MovingAverage::new(self.window)? })
    }

    /// Little-endian dump of the window and statistics.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.window as u64).to_le_bytes().to_vec();
        for v in self.min.iter().chain(&self.max) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Frame-at-a-time preprocessing for live streams.
#[derive(Clone, Debug)]
pub struct StreamPreprocessor<'a> {
    state: &'a PreprocessState,
    filter: MovingAverage,
}

impl StreamPreprocessor<'_> {
    pub fn push(&mut self, frame: &Frame) -> Result<Vec<f32>> {
        if frame.channels.len() != self.state.channels() {
            return Err(GloveError::Shape(format!(
                "frame has {} channels, preprocessing expects {}",
                frame.channels.len(),
                self.state.channels()
            )));
        }
        let filtered = self.filter.push(frame.timestamp_ns, &frame.channels);
        Ok(self.state.normalize(&filtered))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(ts: u64, channels: Vec<f32>) -> Frame {
        Frame { timestamp_ns: ts, channels, label: None, target: None, saturated: false }
    }

    #[test]
    fn impulse_response_grows_its_prefix() {
        let mut ma = MovingAverage::new(5).unwrap();
        let out: Vec<f32> = (0..6).map(|t| ma.push(t, &[if t == 0 { 1.0 } else { 0.0 }])[0]).collect();
        let expect = [1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 0.0];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-7, "{out:?}");
        }
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let frames: Vec<Frame> = (0..20).map(|t| frame(t, vec![0.25; 14])).collect();
        let state = fit_preprocess(&frames, 5).unwrap();
        for f in state.apply(&frames).unwrap() {
            assert!(f.channels.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn training_data_lands_in_unit_interval() {
        let frames: Vec<Frame> = (0..200)
            .map(|t| frame(t, (0..14).map(|c| ((t * (c + 3)) as f32 * 0.37).sin()).collect()))
            .collect();
        let state = fit_preprocess(&frames, 5).unwrap();
        let out = state.apply(&frames).unwrap();
        assert!(out.iter().flat_map(|f| &f.channels).all(|v| (-1.0..=1.0).contains(v)));
        assert!(out.iter().any(|f| f.channels[0] == 1.0));
    }

    #[test]
    fn timestamp_reset_restarts_the_filter() {
        let mut ma = MovingAverage::new(5).unwrap();
        ma.push(10, &[4.0]);
        assert_eq!(ma.push(0, &[2.0]), vec![2.0]);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        assert!(fit_preprocess(&[], 5).is_err());
        assert!(MovingAverage::new(0).is_err());
    }
}
