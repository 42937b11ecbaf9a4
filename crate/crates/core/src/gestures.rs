//! The 30-entry gesture preset library.

use crate::error::{GloveError, Result};
use crate::kinematics::{HandPose, NUM_DOFS};

pub const NUM_GESTURES: usize = 30;
/// Smallest allowed max-abs angle difference between two presets, radians.
pub const MIN_SEPARATION: f64 = 0.15;

const STANDARD: &str = include_str!("../config/gestures.csv");

#[derive(Clone, Debug, PartialEq)]
pub struct GestureLibrary {
    entries: Vec<(String, HandPose)>,
}

impl GestureLibrary {
    /// The library shipped in `config/gestures.csv`.
    pub fn standard() -> Self {
        Self::parse(STANDARD).expect("shipped gesture library is valid")
    }

    /// Parses `id, 19 angles` records; `#` starts a comment. Labels follow
    /// file order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, HandPose)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |detail: String| GloveError::format("gesture library", format!("line {}: {detail}", lineno + 1));
            let mut fields = line.split(',').map(str::trim);
            let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(|| bad("missing id".into()))?;
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
                .collect::<Result<_>>()?;
            let angles: [f64; NUM_DOFS] = values
                .try_into()
                .map_err(|v: Vec<f64>| bad(format!("expected {NUM_DOFS} angles, got {}", v.len())))?;
            let pose = HandPose::new(angles).map_err(|e| bad(e.to_string()))?;
            if entries.iter().any(|(other, _)| other == id) {
                return Err(bad(format!("duplicate id {id}")));
            }
            entries.push((id.to_string(), pose));
        }
        if entries.len() != NUM_GESTURES {
            return Err(GloveError::format(
                "gesture library",
                format!("expected {NUM_GESTURES} gestures, got {}", entries.len()),
            ));
        }
        for (i, (a, pa)) in entries.iter().enumerate() {
            for (b, pb) in &entries[i + 1..] {
                let d = pa.distance(pb);
                if d < MIN_SEPARATION {
                    return Err(GloveError::format(
                        "gesture library",
                        format!("{a} and {b} differ by only {d:.3} rad"),
                    ));
                }
            }
        }
        Ok(GestureLibrary { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn label_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|(other, _)| other == id)
    }

    pub fn id(&self, label: usize) -> Option<&str> {
        self.entries.get(label).map(|(id, _)| id.as_str())
    }

    pub fn pose(&self, label: usize) -> Option<&HandPose> {
        self.entries.get(label).map(|(_, p)| p)
    }

    pub fn gesture_pose(&self, id: &str) -> Result<HandPose> {
        self.label_of(id)
            .map(|l| self.entries[l].1)
            .ok_or_else(|| GloveError::Lookup(id.to_string()))
    }
}
