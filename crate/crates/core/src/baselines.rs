//! Reference predictors for the reconstruction task.

use nalgebra::{DMatrix, DVector};

use crate::dataset::PreprocessState;
use crate::error::{GloveError, Result};
use crate::frame::{Frame, TARGET_LEN};
use crate::kinematics::PointCloud15;
use crate::metrics::targets;
use crate::models::reconstructor::{windows, WINDOW_LEN};

/// Always predicts the mean training pose.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanPose {
    pub mean: PointCloud15,
}

impl MeanPose {
    pub fn fit(train: &[Frame]) -> Result<Self> {
        let clouds = targets(train)?;
        if clouds.is_empty() {
            return Err(GloveError::param("no training targets"));
        }
        let mut sum = [[0.0f64; 3]; 15];
        for c in &clouds {
            for (s, p) in sum.iter_mut().zip(c.points()) {
                (0..3).for_each(|a| s[a] += p[a]);
            }
        }
        let n = clouds.len() as f64;
        Ok(MeanPose { mean: PointCloud15::new(sum.map(|p| p.map(|v| v / n)))? })
    }

    pub fn predict(&self, frames: usize) -> Vec<PointCloud15> {
        vec![self.mean; frames]
    }
}

/// Ridge-stabilised least squares from the flattened 3-frame window (plus a
/// bias) straight to the 45 coordinates.
#[derive(Clone, Debug)]
pub struct LinearReadout {
    prep: PreprocessState,
    /// (WINDOW_LEN + 1) × 45.
    weights: DMatrix<f64>,
}

const RIDGE: f64 = 1e-6;

fn features(prep: &PreprocessState, frames: &[Frame]) -> Result<DMatrix<f64>> {
    let pre = prep.apply(frames)?;
    let rows = windows(&pre);
    Ok(DMatrix::from_fn(rows.len(), WINDOW_LEN + 1, |i, j| {
        if j == WINDOW_LEN { 1.0 } else { rows[i].0[j] as f64 }
    }))
}

impl LinearReadout {
    pub fn fit(prep: &PreprocessState, train: &[Frame]) -> Result<Self> {
        let x = features(prep, train)?;
        let clouds = targets(train)?;
        let y = DMatrix::from_fn(clouds.len(), TARGET_LEN, |i, j| clouds[i].points()[j / 3][j % 3]);
        let mut gram = x.transpose() * &x;
        let scale = gram.diagonal().mean().max(1.0);
        for k in 0..WINDOW_LEN {
            gram[(k, k)] += RIDGE * scale;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| GloveError::param("least-squares system is not positive definite"))?;
        let weights = chol.solve(&(x.transpose() * y));
        Ok(LinearReadout { prep: prep.clone(), weights })
    }

    pub fn predict(&self, frames: &[Frame]) -> Result<Vec<PointCloud15>> {
        let y = features(&self.prep, frames)? * &self.weights;
        (0..y.nrows())
            .map(|i| {
                let row = DVector::from_iterator(TARGET_LEN, y.row(i).iter().copied());
                PointCloud15::new(std::array::from_fn(|k| [row[3 * k], row[3 * k + 1], row[3 * k + 2]]))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64) -> Frame {
        let c: Vec<f32> = (0..28).map(|k| ((t as f32) * 0.1 + k as f32).sin()).collect();
        let target = std::array::from_fn(|j| 2.0 * c[j % 28] - 0.5 * c[(j + 3) % 28] + j as f32);
        Frame { timestamp_ns: t, channels: c, label: None, target: Some(target), saturated: false }
    }

    #[test]
    fn readout_recovers_a_linear_map_of_the_current_frame() {
        let frames: Vec<Frame> = (0..400).map(frame).collect();
        let prep = PreprocessState { window: 1, min: vec![-1.0; 28], max: vec![1.0; 28] };
        let model = LinearReadout::fit(&prep, &frames).unwrap();
        let pred = model.predict(&frames).unwrap();
        let truth = targets(&frames).unwrap();
        let ad = crate::metrics::average_distance(&pred, &truth).unwrap();
        assert!(ad.mean < 1e-3, "{ad:?}");
    }

    #[test]
    fn mean_pose_is_the_average_target() {
        let frames: Vec<Frame> = (0..10).map(frame).collect();
        let m = MeanPose::fit(&frames).unwrap();
        let expect: f64 = frames.iter().map(|f| f.target.unwrap()[0] as f64).sum::<f64>() / 10.0;
        assert!((m.mean.points()[0][0] - expect).abs() < 1e-9);
        assert_eq!(m.predict(3).len(), 3);
    }
}
