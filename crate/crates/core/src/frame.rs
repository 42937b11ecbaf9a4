use crate::error::{GloveError, Result};
use crate::kinematics::{PointCloud15, NUM_KEYPOINTS};

pub const TARGET_LEN: usize = 3 * NUM_KEYPOINTS;

/// One timestamped sample of relative-capacitance channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub timestamp_ns: u64,
    /// 14 or 28 values of ΔC/C0.
    pub channels: Vec<f32>,
    pub label: Option<u16>,
    /// Keypoint cloud in mm, flattened point-major.
    pub target: Option<[f32; TARGET_LEN]>,
    /// An inter-digit gap was clamped by the collision guard.
    pub saturated: bool,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != 14 && self.channels.len() != 28 {
            return Err(GloveError::Shape(format!("frame has {} channels", self.channels.len())));
        }
        if self.channels.iter().any(|v| !v.is_finite()) {
            return Err(GloveError::param(format!("non-finite channel at t = {} ns", self.timestamp_ns)));
        }
        Ok(())
    }

    pub fn target_cloud(&self) -> Option<Result<PointCloud15>> {
        self.target.as_ref().map(|t| PointCloud15::from_flat(t))
    }
}
