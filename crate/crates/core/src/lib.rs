//! Digital twin of a liquid-metal capacitive sensing glove.
//!
//! Poses drive forward kinematics and a capacitive sensor model; synthetic
//! datasets feed a CNN-MLP gesture classifier and a transformer hand
//! reconstructor built on [`tinynn`].

pub mod baselines;
pub mod channels;
pub mod dataset;
pub mod error;
pub mod frame;
pub mod gestures;
pub mod kinematics;
pub mod metrics;
pub mod models;
pub mod sensor;

pub use channels::{ChannelMap, NUM_CHANNELS, NUM_INTER, NUM_INTRA};
pub use error::{GloveError, Result};
pub use frame::Frame;
pub use gestures::GestureLibrary;
pub use kinematics::{forward_kinematics, interpolate_poses, Digit, HandGeometry, HandPose, PointCloud15};
pub use metrics::{average_distance, AdStats, EvalReport};
pub use models::{GestureClassifier, HandReconstructor};
pub use sensor::{NoiseConfig, SensingMode, Sensor};
pub use tinynn::Exec;
