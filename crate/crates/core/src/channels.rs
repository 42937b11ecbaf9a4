//! The 28-channel measurement map.
//!
//! Channels 0..14 are intra-module (one per flexion joint, digit-major,
//! proximal first). Channels 14..28 are inter-module: two between thumb and
//! index, then four per adjacent finger pair pairing the (long, long),
//! (long, short), (short, long) and (short, short) electrodes.

use std::fmt::Write as _;

use crate::error::{GloveError, Result};
use crate::kinematics::{digit_chain, Digit, HandGeometry, HandPose, DOFS};
use crate::sensor::{parallel_plate_capacitance, ELECTRODE_WIDTH_MM, INTRA_BASELINE_PF, PERMITTIVITY_PF_PER_MM};

pub const NUM_INTRA: usize = 14;
pub const NUM_INTER: usize = 14;
pub const NUM_CHANNELS: usize = NUM_INTRA + NUM_INTER;

/// Rest lengths of each module's electrodes in mm, longest first.
pub fn module_electrodes(digit: Digit) -> &'static [f64] {
    match digit {
        Digit::Thumb => &[50.0, 35.0, 20.0],
        Digit::Index | Digit::Middle | Digit::Ring => &[60.0, 45.0, 30.0, 15.0],
        Digit::Little => &[45.0, 34.0, 23.0, 12.0],
    }
}

const INTER_PAIRS: [(Digit, Digit); 4] = [
    (Digit::Thumb, Digit::Index),
    (Digit::Index, Digit::Middle),
    (Digit::Middle, Digit::Ring),
    (Digit::Ring, Digit::Little),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeSpec {
    pub module: Digit,
    pub index: usize,
    pub rest_length: f64,
    /// Pose indices of the joints this electrode is stretched over.
    pub span: Vec<usize>,
}

impl ElectrodeSpec {
    fn new(module: Digit, index: usize, span: Vec<usize>) -> Result<Self> {
        let rest_length = *module_electrodes(module).get(index).ok_or_else(|| {
            GloveError::param(format!("{module} module has no electrode {index}"))
        })?;
        Ok(ElectrodeSpec { module, index, rest_length, span })
    }

    /// Joints whose position along the digit lies under the electrode.
    fn spanning(module: Digit, index: usize, geom: &HandGeometry) -> Result<Self> {
        let mut e = Self::new(module, index, Vec::new())?;
        let mut joint_at = 0.0;
        for (&dof, len) in module.flexion_dofs().iter().zip(&geom.digit(module).phalanges) {
            if joint_at < e.rest_length {
                e.span.push(dof);
            }
            joint_at += len;
        }
        Ok(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Intra,
    Inter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelRole {
    /// Pose index of the sensed joint.
    Joint(usize),
    Pair(Digit, Digit),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelEntry {
    pub id: usize,
    pub kind: ChannelKind,
    pub a: ElectrodeSpec,
    pub b: ElectrodeSpec,
    pub role: ChannelRole,
    /// Flat-pose capacitance on the reference hand, pF.
    pub baseline_pf: f64,
}

impl ChannelEntry {
    /// Plate overlap in mm²: the shorter electrode times the trace width.
    pub fn overlap_area(&self) -> f64 {
        self.a.rest_length.min(self.b.rest_length) * ELECTRODE_WIDTH_MM
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMap {
    entries: Vec<ChannelEntry>,
}

fn inter_electrodes(a: Digit, b: Digit) -> Vec<(usize, usize)> {
    let short = |d: Digit| module_electrodes(d).len() - 1;
    if a == Digit::Thumb {
        vec![(0, 0), (short(a), short(b))]
    } else {
        vec![(0, 0), (0, short(b)), (short(a), 0), (short(a), short(b))]
    }
}

/// Distance between the midpoints of two electrodes on their digits.
pub(crate) fn electrode_gap(pose: &HandPose, geom: &HandGeometry, a: &ElectrodeSpec, b: &ElectrodeSpec) -> f64 {
    let pa = digit_chain(pose, geom, a.module).point_along(a.rest_length / 2.0);
    let pb = digit_chain(pose, geom, b.module).point_along(b.rest_length / 2.0);
    crate::kinematics::distance(&pa, &pb)
}

impl ChannelMap {
    pub fn standard() -> Self {
        Self::build().expect("standard channel map is consistent")
    }

    fn build() -> Result<Self> {
        let geom = HandGeometry::reference();
        let mut entries = Vec::with_capacity(NUM_CHANNELS);
        for digit in Digit::ALL {
            for (j, &dof) in digit.flexion_dofs().iter().enumerate() {
                entries.push(ChannelEntry {
                    id: entries.len(),
                    kind: ChannelKind::Intra,
                    a: ElectrodeSpec::new(digit, j, vec![dof])?,
                    b: ElectrodeSpec::new(digit, j + 1, vec![dof])?,
                    role: ChannelRole::Joint(dof),
                    baseline_pf: INTRA_BASELINE_PF,
                });
            }
        }
        for (da, db) in INTER_PAIRS {
            for (ea, eb) in inter_electrodes(da, db) {
                let a = ElectrodeSpec::spanning(da, ea, &geom)?;
                let b = ElectrodeSpec::spanning(db, eb, &geom)?;
                let mut entry = ChannelEntry {
                    id: entries.len(),
                    kind: ChannelKind::Inter,
                    a,
                    b,
                    role: ChannelRole::Pair(da, db),
                    baseline_pf: 0.0,
                };
                let gap = electrode_gap(&HandPose::flat(), &geom, &entry.a, &entry.b);
                entry.baseline_pf = parallel_plate_capacitance(PERMITTIVITY_PF_PER_MM, entry.overlap_area(), gap)?;
                entries.push(entry);
            }
        }
        let map = ChannelMap { entries };
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<()> {
        let bad = |d: String| GloveError::format("channel map", d);
        if self.entries.len() != NUM_CHANNELS {
            return Err(bad(format!("expected {NUM_CHANNELS} channels, got {}", self.entries.len())));
        }
        let intra = self.entries.iter().filter(|e| e.kind == ChannelKind::Intra).count();
        if intra != NUM_INTRA {
            return Err(bad(format!("expected {NUM_INTRA} intra channels, got {intra}")));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let expect_kind = if i < NUM_INTRA { ChannelKind::Intra } else { ChannelKind::Inter };
            if e.id != i || e.kind != expect_kind {
                return Err(bad(format!("channel {i} out of order")));
            }
            if !(e.baseline_pf.is_finite() && e.baseline_pf > 0.0) {
                return Err(bad(format!("channel {i} baseline {} pF", e.baseline_pf)));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[ChannelEntry] {
        &self.entries
    }

    pub fn intra(&self) -> &[ChannelEntry] {
        &self.entries[..NUM_INTRA]
    }

    pub fn inter(&self) -> &[ChannelEntry] {
        &self.entries[NUM_INTRA..]
    }

    /// UTF-8 table: `channel_id, kind, module_a, electrode_a, module_b,
    /// electrode_b, joint_or_pair, C0_pF`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# channel_id, kind, module_a, electrode_a, module_b, electrode_b, joint_or_pair, C0_pF\n");
        for e in &self.entries {
            let (kind, role) = match e.role {
                ChannelRole::Joint(dof) => ("intra", DOFS[dof].name.to_string()),
                ChannelRole::Pair(a, b) => ("inter", format!("{a}-{b}")),
            };
            writeln!(
                out,
                "{}, {kind}, {}, {}, {}, {}, {role}, {:?}",
                e.id, e.a.module, e.a.index, e.b.module, e.b.index, e.baseline_pf
            )
            .expect("writing to a String");
        }
        out
    }

    /// Parses [`Self::to_table`] output. Electrode lengths come from the
    /// module definitions; spans are recomputed on the reference hand.
    pub fn parse_table(text: &str) -> Result<Self> {
        let geom = HandGeometry::reference();
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |d: String| GloveError::format("channel map", format!("line {}: {d}", lineno + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, got {}", f.len())));
            }
            let id: usize = f[0].parse().map_err(|e| bad(format!("id: {e}")))?;
            let digit = |s: &str| Digit::from_name(s).ok_or_else(|| bad(format!("unknown module {s:?}")));
            let index = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("electrode {s:?}: {e}")));
            let (ma, ia, mb, ib) = (digit(f[2])?, index(f[3])?, digit(f[4])?, index(f[5])?);
            let baseline_pf: f64 = f[7].parse().map_err(|e| bad(format!("C0: {e}")))?;
            let (kind, role, a, b) = match f[1] {
                "intra" => {
                    let dof = crate::kinematics::dof_index(f[6])
                        .filter(|d| ma.flexion_dofs().contains(d))
                        .ok_or_else(|| bad(format!("unknown joint {:?}", f[6])))?;
                    let a = ElectrodeSpec::new(ma, ia, vec![dof]).map_err(|e| bad(e.to_string()))?;
                    let b = ElectrodeSpec::new(mb, ib, vec![dof]).map_err(|e| bad(e.to_string()))?;
                    (ChannelKind::Intra, ChannelRole::Joint(dof), a, b)
                }
                "inter" => {
                    let (pa, pb) = f[6].split_once('-').ok_or_else(|| bad(format!("pair {:?}", f[6])))?;
                    let role = ChannelRole::Pair(digit(pa)?, digit(pb)?);
                    let a = ElectrodeSpec::spanning(ma, ia, &geom).map_err(|e| bad(e.to_string()))?;
                    let b = ElectrodeSpec::spanning(mb, ib, &geom).map_err(|e| bad(e.to_string()))?;
                    (ChannelKind::Inter, role, a, b)
                }
                other => return Err(bad(format!("unknown kind {other:?}"))),
            };
            entries.push(ChannelEntry { id, kind, a, b, role, baseline_pf });
        }
        let map = ChannelMap { entries };
        map.validate()?;
        Ok(map)
    }
}

impl Default for ChannelMap {
    fn default() -> Self {
        Self::standard()
    }
}
