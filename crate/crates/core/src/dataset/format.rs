//! `CGDS` dataset files and their CSV mirror.
//!
//! Layout (little-endian): magic `CGDS`, version `u16`, mode `u8` (14 or
//! 28), frame count `u64`, then one record per frame: timestamp `u64` ns,
//! channels as `f32`, label `u16` (`0xFFFF` for none), flags `u8`, and 45
//! `f32` target coordinates when flag bit 0 is set. Flag bit 1 marks a
//! saturated inter-digit gap.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{GloveError, Result};
use crate::frame::{Frame, TARGET_LEN};
use crate::sensor::SensingMode;

pub const MAGIC: &[u8; 4] = b"CGDS";
pub const VERSION: u16 = 1;
pub const NO_LABEL: u16 = 0xFFFF;
const FLAG_TARGET: u8 = 1;
const FLAG_SATURATED: u8 = 2;

pub fn record_len(channels: usize, has_target: bool) -> usize {
    8 + 4 * channels + 2 + 1 + if has_target { 4 * TARGET_LEN } else { 0 }
}

pub fn encode_record(frame: &Frame, out: &mut Vec<u8>) {
    out.extend_from_slice(&frame.timestamp_ns.to_le_bytes());
    for v in &frame.channels {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&frame.label.unwrap_or(NO_LABEL).to_le_bytes());
    let mut flags = 0;
    if frame.target.is_some() {
        flags |= FLAG_TARGET;
    }
    if frame.saturated {
        flags |= FLAG_SATURATED;
    }
    out.push(flags);
    if let Some(t) = &frame.target {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.bytes.len() < N {
            return Err(GloveError::format("dataset record", "truncated"));
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}

/// Decodes one record holding `channels` values.
pub fn decode_record(bytes: &[u8], channels: usize) -> Result<Frame> {
    let mut c = Cursor { bytes };
    let timestamp_ns = u64::from_le_bytes(c.take()?);
    let values = (0..channels).map(|_| c.f32()).collect::<Result<Vec<f32>>>()?;
    let label = match u16::from_le_bytes(c.take()?) {
        NO_LABEL => None,
        l => Some(l),
    };
    let [flags] = c.take::<1>()?;
    if flags & !(FLAG_TARGET | FLAG_SATURATED) != 0 {
        return Err(GloveError::format("dataset record", format!("unknown flags {flags:#04x}")));
    }
    let target = if flags & FLAG_TARGET != 0 {
        let mut t = [0.0; TARGET_LEN];
        for v in &mut t {
            *v = c.f32()?;
        }
        Some(t)
    } else {
        None
    };
    if !c.bytes.is_empty() {
        return Err(GloveError::format("dataset record", format!("{} trailing bytes", c.bytes.len())));
    }
    let frame = Frame { timestamp_ns, channels: values, label, target, saturated: flags & FLAG_SATURATED != 0 };
    frame.validate()?;
    Ok(frame)
}

/// Recovers the channel count from a record's length.
pub fn channels_for_record_len(len: usize) -> Option<usize> {
    [14, 28]
        .into_iter()
        .find(|&n| record_len(n, false) == len || record_len(n, true) == len)
}

fn check_mode(mode: SensingMode, frames: &[Frame]) -> Result<()> {
    match frames.iter().find(|f| f.channels.len() != mode.channels()) {
        Some(f) => Err(GloveError::Shape(format!(
            "frame with {} channels in a {}-channel dataset",
            f.channels.len(),
            mode.channels()
        ))),
        None => Ok(()),
    }
}

pub fn write_dataset<W: Write>(mut w: W, mode: SensingMode, frames: &[Frame]) -> Result<()> {
    check_mode(mode, frames)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[mode.channels() as u8])?;
    w.write_all(&(frames.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(record_len(28, true));
    for f in frames {
        buf.clear();
        encode_record(f, &mut buf);
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<(SensingMode, Vec<Frame>)> {
    let mut header = [0u8; 15];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(GloveError::format("dataset", format!("bad magic {:?}", &header[..4])));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(GloveError::format("dataset", format!("unsupported version {version}")));
    }
    let mode = SensingMode::from_channels(header[6] as usize)
        .ok_or_else(|| GloveError::format("dataset", format!("mode {}", header[6])))?;
    let count = u64::from_le_bytes(header[7..15].try_into().expect("8 bytes"));
    let n = mode.channels();
    let base = record_len(n, false);
    let mut frames = Vec::with_capacity(count.min(1 << 22) as usize);
    let mut buf = vec![0u8; record_len(n, true)];
    for _ in 0..count {
        r.read_exact(&mut buf[..base])?;
        let len = if buf[base - 1] & FLAG_TARGET != 0 {
            r.read_exact(&mut buf[base..])?;
            buf.len()
        } else {
            base
        };
        frames.push(decode_record(&buf[..len], n)?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(GloveError::format("dataset", "data after the last record"));
    }
    Ok((mode, frames))
}

pub fn save_dataset(path: &Path, mode: SensingMode, frames: &[Frame]) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), mode, frames)
}

pub fn load_dataset(path: &Path) -> Result<(SensingMode, Vec<Frame>)> {
    read_dataset(BufReader::new(File::open(path)?))
}

/// Same columns as the binary records; empty cells for absent fields.
pub fn write_csv<W: Write>(mut w: W, mode: SensingMode, frames: &[Frame]) -> Result<()> {
    check_mode(mode, frames)?;
    let mut header = vec!["timestamp_ns".to_string()];
    header.extend((0..mode.channels()).map(|c| format!("ch{c}")));
    header.push("label".into());
    header.push("saturated".into());
    for k in 0..TARGET_LEN / 3 {
        for axis in ["x", "y", "z"] {
            header.push(format!("p{k}_{axis}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for f in frames {
        let mut row = vec![f.timestamp_ns.to_string()];
        row.extend(f.channels.iter().map(f32::to_string));
        row.push(f.label.map(|l| l.to_string()).unwrap_or_default());
        row.push(u8::from(f.saturated).to_string());
        match &f.target {
            Some(t) => row.extend(t.iter().map(f32::to_string)),
            None => row.extend(std::iter::repeat_n(String::new(), TARGET_LEN)),
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
