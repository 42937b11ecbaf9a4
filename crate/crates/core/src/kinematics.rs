//! Hand geometry, the 19-DOF pose and forward kinematics.
//!
//! Frame: origin at the wrist, `+y` from wrist towards the fingers, `+x`
//! towards the thumb side, `+z` out of the back of the hand. Flexion curls a
//! digit towards `-z`; abduction rotates it about `z` at its base.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{GloveError, Result};

pub const NUM_DOFS: usize = 19;
pub const NUM_KEYPOINTS: usize = 15;
pub const KEYPOINTS_PER_DIGIT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Digit {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl Digit {
    pub const ALL: [Digit; 5] = [Digit::Thumb, Digit::Index, Digit::Middle, Digit::Ring, Digit::Little];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Digit::Thumb => "thumb",
            Digit::Index => "index",
            Digit::Middle => "middle",
            Digit::Ring => "ring",
            Digit::Little => "little",
        }
    }

    pub fn from_name(name: &str) -> Option<Digit> {
        Digit::ALL.into_iter().find(|d| d.name() == name)
    }

    /// Pose indices of the flexion joints, proximal first.
    pub fn flexion_dofs(self) -> &'static [usize] {
        match self {
            Digit::Thumb => &[0, 1],
            Digit::Index => &[3, 4, 5],
            Digit::Middle => &[7, 8, 9],
            Digit::Ring => &[11, 12, 13],
            Digit::Little => &[15, 16, 17],
        }
    }

    pub fn abduction_dof(self) -> usize {
        match self {
            Digit::Thumb => 2,
            d => 3 + 4 * (d.index() - 1) + 3,
        }
    }

    /// Direction of positive abduction along `x`: the thumb and index spread
    /// towards `+x`, the other fingers towards `-x`.
    fn abduction_sign(self) -> f64 {
        match self {
            Digit::Thumb | Digit::Index => 1.0,
            _ => -1.0,
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dof {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
}

const fn flex(name: &'static str) -> Dof {
    Dof { name, min: 0.0, max: FRAC_PI_2 }
}

const fn abduct(name: &'static str) -> Dof {
    Dof { name, min: -0.35, max: 0.35 }
}

pub const DOFS: [Dof; NUM_DOFS] = [
    flex("thumb.cmc"),
    flex("thumb.mcp"),
    Dof { name: "thumb.abduct", min: 0.0, max: 1.2 },
    flex("index.mcp"),
    flex("index.pip"),
    flex("index.dip"),
    abduct("index.abduct"),
    flex("middle.mcp"),
    flex("middle.pip"),
    flex("middle.dip"),
    abduct("middle.abduct"),
    flex("ring.mcp"),
    flex("ring.pip"),
    flex("ring.dip"),
    abduct("ring.abduct"),
    flex("little.mcp"),
    flex("little.pip"),
    flex("little.dip"),
    abduct("little.abduct"),
];

pub fn dof_index(name: &str) -> Option<usize> {
    DOFS.iter().position(|d| d.name == name)
}

/// Joint angles in radians, ordered as [`DOFS`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandPose {
    angles: [f64; NUM_DOFS],
}

impl HandPose {
    pub fn new(angles: [f64; NUM_DOFS]) -> Result<Self> {
        for (a, dof) in angles.iter().zip(&DOFS) {
            if !(dof.min..=dof.max).contains(a) {
                return Err(GloveError::param(format!(
                    "{} = {a} outside [{}, {}]",
                    dof.name, dof.min, dof.max
                )));
            }
        }
        Ok(HandPose { angles })
    }

    /// Clamps every angle into its range. NaN maps to the lower bound.
    pub fn clamped(mut angles: [f64; NUM_DOFS]) -> Self {
        for (a, dof) in angles.iter_mut().zip(&DOFS) {
            *a = if a.is_nan() { dof.min } else { a.clamp(dof.min, dof.max) };
        }
        HandPose { angles }
    }

    pub fn flat() -> Self {
        HandPose { angles: [0.0; NUM_DOFS] }
    }

    pub fn angles(&self) -> &[f64; NUM_DOFS] {
        &self.angles
    }

    pub fn angle(&self, dof: usize) -> f64 {
        self.angles[dof]
    }

    pub fn with(mut self, dof: usize, value: f64) -> Result<Self> {
        self.angles[dof] = value;
        HandPose::new(self.angles)
    }

    /// Largest absolute per-angle difference.
    pub fn distance(&self, other: &HandPose) -> f64 {
        self.angles
            .iter()
            .zip(&other.angles)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn interpolate_poses(a: &HandPose, b: &HandPose, t: f64) -> Result<HandPose> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GloveError::param(format!("interpolation parameter {t} outside [0, 1]")));
    }
    let mut angles = [0.0; NUM_DOFS];
    for (i, out) in angles.iter_mut().enumerate() {
        let (x, y) = (a.angles[i], b.angles[i]);
        *out = if t == 1.0 { y } else { x + (y - x) * t };
    }
    Ok(HandPose { angles })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitGeometry {
    /// MCP (CMC for the thumb) position in the palm plane, mm.
    pub base: [f64; 2],
    /// Phalanx lengths, proximal first, mm. Three for fingers, two for the thumb.
    pub phalanges: Vec<f64>,
    /// Rest direction in the palm plane, radians from `+y` towards `+x`.
    pub splay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandGeometry {
    /// Wrist crease to middle fingertip, mm.
    pub hand_length: f64,
    pub digits: [DigitGeometry; 5],
}

impl HandGeometry {
    pub const REFERENCE_LENGTH: f64 = 175.0;
    pub const SUBJECT_RANGE: (f64, f64) = (160.0, 190.0);

    /// Default adult hand at [`Self::REFERENCE_LENGTH`].
    pub fn reference() -> Self {
        let digit = |base: [f64; 2], phalanges: &[f64], splay: f64| DigitGeometry {
            base,
            phalanges: phalanges.to_vec(),
            splay,
        };
        HandGeometry {
            hand_length: Self::REFERENCE_LENGTH,
            digits: [
                digit([30.0, 25.0], &[38.0, 30.0], 0.3),
                digit([22.0, 77.0], &[40.0, 25.0, 20.0], 0.05),
                digit([0.0, 80.0], &[45.0, 28.0, 22.0], 0.0),
                digit([-19.0, 76.0], &[42.0, 27.0, 21.0], -0.05),
                digit([-36.0, 68.0], &[33.0, 20.0, 18.0], -0.12),
            ],
        }
    }

    /// Reference hand scaled to `hand_length` mm.
    pub fn with_hand_length(hand_length: f64) -> Result<Self> {
        if !(hand_length.is_finite() && hand_length > 0.0) {
            return Err(GloveError::param(format!("hand length {hand_length} mm")));
        }
        Ok(Self::reference().scaled(hand_length / Self::REFERENCE_LENGTH))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        g.hand_length *= factor;
        for d in &mut g.digits {
            d.base = [d.base[0] * factor, d.base[1] * factor];
            d.phalanges.iter_mut().for_each(|l| *l *= factor);
        }
        g
    }

    pub fn digit(&self, digit: Digit) -> &DigitGeometry {
        &self.digits[digit.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for (digit, g) in Digit::ALL.iter().zip(&self.digits) {
            if g.phalanges.len() != digit.flexion_dofs().len() {
                return Err(GloveError::param(format!(
                    "{digit} needs {} phalanges, got {}",
                    digit.flexion_dofs().len(),
                    g.phalanges.len()
                )));
            }
            if g.phalanges.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
                return Err(GloveError::param(format!("{digit} phalanx lengths {:?}", g.phalanges)));
            }
        }
        Ok(())
    }
}

impl Default for HandGeometry {
    fn default() -> Self {
        Self::reference()
    }
}

/// Joint positions along one digit: the base followed by the far end of each
/// phalanx.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DigitChain {
    points: [[f64; 3]; 4],
    len: usize,
}

impl DigitChain {
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points[..self.len]
    }

    pub fn keypoints(&self) -> &[[f64; 3]] {
        &self.points[self.len - KEYPOINTS_PER_DIGIT..self.len]
    }

    /// Point at arc length `s` from the base, clamped to the tip.
    pub fn point_along(&self, s: f64) -> [f64; 3] {
        let mut remaining = s.max(0.0);
        let pts = self.points();
        for w in pts.windows(2) {
            let seg = distance(&w[0], &w[1]);
            if remaining <= seg {
                let t = remaining / seg;
                return [
                    w[0][0] + (w[1][0] - w[0][0]) * t,
                    w[0][1] + (w[1][1] - w[0][1]) * t,
                    w[0][2] + (w[1][2] - w[0][2]) * t,
                ];
            }
            remaining -= seg;
        }
        pts[pts.len() - 1]
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn digit_chain(pose: &HandPose, geom: &HandGeometry, digit: Digit) -> DigitChain {
    let g = geom.digit(digit);
    let heading = g.splay + digit.abduction_sign() * pose.angle(digit.abduction_dof());
    let (ux, uy) = (heading.sin(), heading.cos());
    let mut points = [[0.0; 3]; 4];
    points[0] = [g.base[0], g.base[1], 0.0];
    let mut phi = 0.0;
    for (i, (&dof, &len)) in digit.flexion_dofs().iter().zip(&g.phalanges).enumerate() {
        phi += pose.angle(dof);
        let (s, c) = phi.sin_cos();
        let p = points[i];
        points[i + 1] = [p[0] + len * c * ux, p[1] + len * c * uy, p[2] - len * s];
    }
    DigitChain { points, len: g.phalanges.len() + 1 }
}

/// 15 wrist-relative keypoints, digit-major (thumb first); per digit the
/// proximal joint, the distal joint and the tip. For fingers these are PIP,
/// DIP and tip; for the thumb CMC, MCP and tip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCloud15 {
    points: [[f64; 3]; NUM_KEYPOINTS],
}

impl PointCloud15 {
    pub fn new(points: [[f64; 3]; NUM_KEYPOINTS]) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GloveError::param("point cloud has non-finite coordinates"));
        }
        Ok(PointCloud15 { points })
    }

    pub fn from_flat(values: &[f32]) -> Result<Self> {
        if values.len() != 3 * NUM_KEYPOINTS {
            return Err(GloveError::Shape(format!("expected 45 coordinates, got {}", values.len())));
        }
        let mut points = [[0.0; 3]; NUM_KEYPOINTS];
        for (p, c) in points.iter_mut().zip(values.chunks_exact(3)) {
            *p = [c[0] as f64, c[1] as f64, c[2] as f64];
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[[f64; 3]; NUM_KEYPOINTS] {
        &self.points
    }

    pub fn point(&self, digit: Digit, k: usize) -> [f64; 3] {
        self.points[digit.index() * KEYPOINTS_PER_DIGIT + k]
    }

    pub fn tip(&self, digit: Digit) -> [f64; 3] {
        self.point(digit, KEYPOINTS_PER_DIGIT - 1)
    }

    pub fn to_flat(&self) -> [f32; 3 * NUM_KEYPOINTS] {
        let mut out = [0.0; 3 * NUM_KEYPOINTS];
        for (o, v) in out.iter_mut().zip(self.points.iter().flatten()) {
            *o = *v as f32;
        }
        out
    }
}

pub fn forward_kinematics(pose: &HandPose, geom: &HandGeometry) -> PointCloud15 {
    let mut points = [[0.0; 3]; NUM_KEYPOINTS];
    for digit in Digit::ALL {
        let chain = digit_chain(pose, geom, digit);
        let start = digit.index() * KEYPOINTS_PER_DIGIT;
        points[start..start + KEYPOINTS_PER_DIGIT].copy_from_slice(chain.keypoints());
    }
    PointCloud15 { points }
}
