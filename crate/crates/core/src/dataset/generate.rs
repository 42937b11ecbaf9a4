use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tinynn::Exec;

use super::frame_timestamp;
use crate::channels::ChannelMap;
use crate::error::{GloveError, Result};
use crate::frame::Frame;
use crate::gestures::GestureLibrary;
use crate::kinematics::{forward_kinematics, Digit, HandGeometry, HandPose, DOFS, NUM_DOFS};
use crate::sensor::{NoiseConfig, NoiseSource, SensingMode, Sensor};

pub const OSCILLATION_AMPLITUDE: f64 = 0.05;
pub const OSCILLATION_HZ: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sex {
    Female,
    Male,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectProfile {
    pub id: u32,
    pub hand_length_mm: f64,
    pub sex: Sex,
    pub noise_seed: u64,
}

impl SubjectProfile {
    pub fn geometry(&self) -> Result<HandGeometry> {
        let (lo, hi) = HandGeometry::SUBJECT_RANGE;
        if !(lo..=hi).contains(&self.hand_length_mm) {
            return Err(GloveError::param(format!(
                "subject {} hand length {} mm outside [{lo}, {hi}]",
                self.id, self.hand_length_mm
            )));
        }
        HandGeometry::with_hand_length(self.hand_length_mm)
    }
}

/// `n` subjects with hand lengths drawn uniformly from the adult range.
pub fn make_subjects(n: usize, seed: u64) -> Vec<SubjectProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = HandGeometry::SUBJECT_RANGE;
    (0..n)
        .map(|i| SubjectProfile {
            id: i as u32 + 1,
            hand_length_mm: rng.random_range(lo..=hi),
            sex: if i % 2 == 0 { Sex::Male } else { Sex::Female },
            noise_seed: rng.next_u64(),
        })
        .collect()
}

fn check_subjects(subjects: &[SubjectProfile]) -> Result<()> {
    if subjects.is_empty() {
        return Err(GloveError::param("no subjects"));
    }
    for (i, s) in subjects.iter().enumerate() {
        s.geometry()?;
        if subjects[..i].iter().any(|o| o.id == s.id) {
            return Err(GloveError::param(format!("duplicate subject id {}", s.id)));
        }
    }
    Ok(())
}

fn check_fps(fps: f64) -> Result<()> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(GloveError::param(format!("fps {fps}")));
    }
    Ok(())
}

/// Pose of frame `i` of a gesture: held for the first half, then a sinusoid
/// on every joint around the preset.
fn gesture_frame_pose(preset: &HandPose, i: usize, frames: usize, fps: f64) -> HandPose {
    let half = frames / 2;
    if i < half {
        return *preset;
    }
    let t = (i - half) as f64 / fps;
    let offset = OSCILLATION_AMPLITUDE * (2.0 * PI * OSCILLATION_HZ * t).sin();
    HandPose::clamped(preset.angles().map(|a| a + offset))
}

/// Labeled 14-channel frames, subject-major then gesture-major. Timestamps
/// restart at zero for every subject.
pub fn generate_gesture_dataset(
    subjects: &[SubjectProfile],
    lib: &GestureLibrary,
    map: &ChannelMap,
    frames_per_gesture: usize,
    fps: f64,
    noise: &NoiseConfig,
    exec: Exec,
) -> Result<Vec<Frame>> {
    check_subjects(subjects)?;
    check_fps(fps)?;
    if frames_per_gesture == 0 || !frames_per_gesture.is_multiple_of(2) {
        return Err(GloveError::param(format!("frames per gesture {frames_per_gesture} must be even and positive")));
    }
    let per_subject = exec.map(subjects, |_, subject| -> Result<Vec<Frame>> {
        let sensor = Sensor::new(map.clone(), subject.geometry()?)?;
        let mut source = NoiseSource::new(&NoiseConfig { seed: subject.noise_seed, ..*noise })?;
        let mut frames = Vec::with_capacity(lib.len() * frames_per_gesture);
        for label in 0..lib.len() {
            let preset = lib.pose(label).expect("label in range");
            for i in 0..frames_per_gesture {
                let pose = gesture_frame_pose(preset, i, frames_per_gesture, fps);
                let ts = frame_timestamp(frames.len(), fps);
                let mut frame = sensor.measure_frame(&pose, &mut source, SensingMode::IntraOnly, ts);
                frame.label = Some(label as u16);
                frames.push(frame);
            }
        }
        Ok(frames)
    });
    let mut out = Vec::new();
    for frames in per_subject {
        out.extend(frames?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryConfig {
    /// Correlation time of the per-joint random walk, s.
    pub time_constant_s: f64,
    /// Low-pass time constant applied on top, s.
    pub smoothing_s: f64,
    /// Weight of neighbouring digits' flexion on each abduction.
    pub coupling: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig { time_constant_s: 0.3, smoothing_s: 0.15, coupling: 0.4 }
    }
}

fn neighbours(d: Digit) -> &'static [Digit] {
    match d {
        Digit::Thumb => &[Digit::Index],
        Digit::Index => &[Digit::Thumb, Digit::Middle],
        Digit::Middle => &[Digit::Index, Digit::Ring],
        Digit::Ring => &[Digit::Middle, Digit::Little],
        Digit::Little => &[Digit::Ring],
    }
}

/// Smooth random hand motion: a unit-variance Ornstein–Uhlenbeck process per
/// joint, low-pass filtered, with each abduction pulled towards the
/// neighbouring digits as they flex, then squashed into the joint ranges.
pub fn pose_trajectory(n: usize, fps: f64, cfg: &TrajectoryConfig, seed: u64) -> Vec<HandPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / fps;
    let decay = (-dt / cfg.time_constant_s).exp();
    let kick = (1.0 - decay * decay).sqrt();
    let alpha = 1.0 - (-dt / cfg.smoothing_s).exp();
    let mut z: [f64; NUM_DOFS] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let mut y = z;
    let mut poses = Vec::with_capacity(n);
    for _ in 0..n {
        for (zk, yk) in z.iter_mut().zip(y.iter_mut()) {
            let xi: f64 = rng.sample(StandardNormal);
            *zk = decay * *zk + kick * xi;
            *yk += alpha * (*zk - *yk);
        }
        let mut latent = y;
        for d in Digit::ALL {
            let nb = neighbours(d);
            let pull: f64 = nb.iter().map(|&o| y[o.flexion_dofs()[0]]).sum::<f64>() / nb.len() as f64;
            latent[d.abduction_dof()] -= cfg.coupling * pull;
        }
        let angles = std::array::from_fn(|k| {
            let dof = &DOFS[k];
            dof.min + (dof.max - dof.min) * 0.5 * (1.0 + latent[k].tanh())
        });
        poses.push(HandPose::clamped(angles));
    }
    poses
}

/// 28-channel frames with keypoint targets along one continuous trajectory
/// covering all segments back to back.
pub fn generate_reconstruction_dataset(
    subject: &SubjectProfile,
    map: &ChannelMap,
    segment_lengths: [usize; 3],
    fps: f64,
    noise: &NoiseConfig,
    trajectory: &TrajectoryConfig,
    seed: u64,
) -> Result<Vec<Frame>> {
    check_fps(fps)?;
    if segment_lengths.contains(&0) {
        return Err(GloveError::param(format!("segment lengths {segment_lengths:?} must be positive")));
    }
    let geom = subject.geometry()?;
    let sensor = Sensor::new(map.clone(), geom.clone())?;
    let mut source = NoiseSource::new(&NoiseConfig { seed: subject.noise_seed, ..*noise })?;
    let total: usize = segment_lengths.iter().sum();
    let poses = pose_trajectory(total, fps, trajectory, seed);
    Ok(poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut frame = sensor.measure_frame(pose, &mut source, SensingMode::Full, frame_timestamp(i, fps));
            frame.target = Some(forward_kinematics(pose, &geom).to_flat());
            frame
        })
        .collect())
}
