//! Pose to relative-capacitance forward model.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channels::{electrode_gap, ChannelMap, ElectrodeSpec, NUM_INTER, NUM_INTRA};
use crate::error::{GloveError, Result};
use crate::frame::Frame;
use crate::kinematics::{HandGeometry, HandPose};

/// Relative capacitance change per unit strain.
pub const GAUGE_FACTOR: f64 = 0.45;
/// Calibrated strain ceiling.
pub const MAX_STRAIN: f64 = 0.30;
/// Strain per radian of joint flexion: 90° maps to the strain ceiling.
pub const K_BEND: f64 = MAX_STRAIN / FRAC_PI_2;
/// Channel value at full flexion; the reference signal for SNR.
pub const FULL_FLEX_RELCAP: f64 = GAUGE_FACTOR * MAX_STRAIN;
pub const INTRA_BASELINE_PF: f64 = 1.0;
pub const PERMITTIVITY_PF_PER_MM: f64 = 0.4;
pub const ELECTRODE_WIDTH_MM: f64 = 1.0;
/// Closest allowed electrode spacing before the reading saturates.
pub const MIN_GAP_MM: f64 = 1.0;

/// `C = εA/d`.
pub fn parallel_plate_capacitance(epsilon: f64, area: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(GloveError::Singularity(distance));
    }
    if !(epsilon > 0.0) || !(area >= 0.0) {
        return Err(GloveError::param(format!("epsilon {epsilon}, area {area}")));
    }
    Ok(epsilon * area / distance)
}

/// `(C − C0) / C0`.
pub fn relative_capacitance(c: f64, c0: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(GloveError::param(format!("baseline capacitance {c0}")));
    }
    Ok((c - c0) / c0)
}

pub fn strain_to_relcap(strain: f64) -> Result<f64> {
    if !(0.0..=MAX_STRAIN).contains(&strain) {
        return Err(GloveError::param(format!("strain {strain} outside [0, {MAX_STRAIN}]")));
    }
    Ok(GAUGE_FACTOR * strain)
}

pub fn joint_to_strain(theta: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(GloveError::param(format!("flexion {theta} outside [0, π/2]")));
    }
    Ok((K_BEND * theta).min(MAX_STRAIN))
}

/// Strain on an electrode: bend contributions of every joint it spans,
/// clamped to the calibrated ceiling.
pub fn electrode_strain(pose: &HandPose, spec: &ElectrodeSpec) -> f64 {
    let s: f64 = spec.span.iter().map(|&dof| K_BEND * pose.angle(dof)).sum();
    s.clamp(0.0, MAX_STRAIN)
}

/// Rounds an absolute capacitance to the readout resolution.
pub fn quantize(c_pf: f64, step_pf: f64) -> f64 {
    if step_pf > 0.0 {
        (c_pf / step_pf).round() * step_pf
    } else {
        c_pf
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SensingMode {
    IntraOnly,
    Full,
}

impl SensingMode {
    pub fn channels(self) -> usize {
        match self {
            SensingMode::IntraOnly => NUM_INTRA,
            SensingMode::Full => NUM_INTRA + NUM_INTER,
        }
    }

    pub fn from_channels(n: usize) -> Option<Self> {
        match n {
            NUM_INTRA => Some(SensingMode::IntraOnly),
            28 => Some(SensingMode::Full),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub snr_db: f64,
    /// Readout resolution in fF; 0 disables quantization.
    pub quantization_step_ff: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { snr_db: 60.0, quantization_step_ff: 3.0, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        NoiseConfig { snr_db: f64::INFINITY, quantization_step_ff: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr_db > 0.0) {
            return Err(GloveError::param(format!("snr_db {} must be positive", self.snr_db)));
        }
        if !(self.quantization_step_ff >= 0.0 && self.quantization_step_ff.is_finite()) {
            return Err(GloveError::param(format!("quantization step {} fF", self.quantization_step_ff)));
        }
        Ok(())
    }

    /// Noise standard deviation in relative-capacitance units.
    pub fn sigma(&self) -> f64 {
        FULL_FLEX_RELCAP * 10f64.powf(-self.snr_db / 20.0)
    }
}

/// Per-stream noise generator.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
    step_pf: f64,
}

impl NoiseSource {
    pub fn new(cfg: &NoiseConfig) -> Result<Self> {
        cfg.validate()?;
        let sigma = cfg.sigma();
        let normal = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| GloveError::param(e.to_string()))?)
        } else {
            None
        };
        Ok(NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            normal,
            step_pf: cfg.quantization_step_ff / 1000.0,
        })
    }

    /// Adds noise to a relative reading and quantizes its absolute value.
    pub fn apply(&mut self, relcap: f64, baseline_pf: f64) -> f64 {
        let noisy = match &self.normal {
            Some(n) => relcap + n.sample(&mut self.rng),
            None => relcap,
        };
        if self.step_pf > 0.0 {
            quantize(baseline_pf * (1.0 + noisy), self.step_pf) / baseline_pf - 1.0
        } else {
            noisy
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reading {
    pub values: Vec<f64>,
    /// Some inter-digit gap hit the collision guard.
    pub saturated: bool,
}

/// The channel map bound to one hand, with flat-pose baselines.
#[derive(Clone, Debug)]
pub struct Sensor {
    map: ChannelMap,
    geom: HandGeometry,
    rest_gap: Vec<f64>,
    baseline_pf: Vec<f64>,
}

impl Sensor {
    pub fn new(map: ChannelMap, geom: HandGeometry) -> Result<Self> {
        geom.validate()?;
        let flat = HandPose::flat();
        let mut rest_gap = Vec::with_capacity(NUM_INTER);
        let mut baseline_pf: Vec<f64> = map.intra().iter().map(|e| e.baseline_pf).collect();
        for e in map.inter() {
            let d0 = electrode_gap(&flat, &geom, &e.a, &e.b);
            baseline_pf.push(parallel_plate_capacitance(PERMITTIVITY_PF_PER_MM, e.overlap_area(), d0)?);
            rest_gap.push(d0);
        }
        Ok(Sensor { map, geom, rest_gap, baseline_pf })
    }

    pub fn map(&self) -> &ChannelMap {
        &self.map
    }

    pub fn geometry(&self) -> &HandGeometry {
        &self.geom
    }

    /// Flat-pose capacitance of every channel on this hand, pF.
    pub fn baselines_pf(&self) -> &[f64] {
        &self.baseline_pf
    }

    pub fn rest_gaps(&self) -> &[f64] {
        &self.rest_gap
    }

    pub fn intra_channels(&self, pose: &HandPose) -> [f64; NUM_INTRA] {
        let mut out = [0.0; NUM_INTRA];
        for (o, e) in out.iter_mut().zip(self.map.intra()) {
            *o = GAUGE_FACTOR * electrode_strain(pose, &e.a);
        }
        out
    }

    /// Unclamped electrode-midpoint gap of inter channel `k` (0-based within
    /// the inter block), mm.
    pub fn inter_gap(&self, pose: &HandPose, k: usize) -> f64 {
        let e = &self.map.inter()[k];
        electrode_gap(pose, &self.geom, &e.a, &e.b)
    }

    pub fn inter_channels(&self, pose: &HandPose) -> ([f64; NUM_INTER], bool) {
        let mut out = [0.0; NUM_INTER];
        let mut saturated = false;
        for (k, (o, e)) in out.iter_mut().zip(self.map.inter()).enumerate() {
            let d = self.inter_gap(pose, k);
            if d < MIN_GAP_MM {
                saturated = true;
            }
            let c0 = self.baseline_pf[NUM_INTRA + k];
            let c = PERMITTIVITY_PF_PER_MM * e.overlap_area() / d.max(MIN_GAP_MM);
            *o = (c - c0) / c0;
        }
        (out, saturated)
    }

    pub fn noiseless(&self, pose: &HandPose, mode: SensingMode) -> Reading {
        let mut values = self.intra_channels(pose).to_vec();
        let mut saturated = false;
        if mode == SensingMode::Full {
            let (inter, sat) = self.inter_channels(pose);
            values.extend_from_slice(&inter);
            saturated = sat;
        }
        Reading { values, saturated }
    }

    pub fn measure_frame(
        &self,
        pose: &HandPose,
        noise: &mut NoiseSource,
        mode: SensingMode,
        timestamp_ns: u64,
    ) -> Frame {
        let reading = self.noiseless(pose, mode);
        let channels = reading
            .values
            .iter()
            .zip(&self.baseline_pf)
            .map(|(&r, &c0)| noise.apply(r, c0) as f32)
            .collect();
        Frame { timestamp_ns, channels, label: None, target: None, saturated: reading.saturated }
    }
}
