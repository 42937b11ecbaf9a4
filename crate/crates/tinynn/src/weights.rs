//! `CGWT` weight files.
//!
//! Layout (little-endian): magic `CGWT`, version `u16`, model kind `u8`,
//! tensor count `u32`, then per tensor: name length `u32`, UTF-8 name, rank
//! `u8`, `rank × u32` dims, `f32` values.

use std::io::{Read, Write};

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"CGWT";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightFile {
    pub kind: u8,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl WeightFile {
    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.kind])?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[t.rank() as u8])?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u16(&mut r)?;
        if version != VERSION {
            return Err(NnError::Format(format!("unsupported version {version}")));
        }
        let kind = read_u8(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| NnError::Format("tensor name is not UTF-8".into()))?;
            let rank = read_u8(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u32(&mut r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            tensors.push((name, Tensor::from_vec(&shape, data)?));
        }
        Ok(WeightFile { kind, tensors })
    }
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_magic() {
        let err = WeightFile::read_from(&b"CGDS\x01\x00"[..]).unwrap_err();
        assert!(matches!(err, NnError::Format(_)));
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let wf = WeightFile {
            kind: 1,
            tensors: vec![
                ("a.weight".into(), Tensor::from_vec(&[2, 3], vec![1.0, -0.0, 2.5, 1e-30, 3.0, -7.0]).unwrap()),
                ("scalar".into(), Tensor::from_vec(&[1], vec![f32::MIN_POSITIVE]).unwrap()),
            ],
        };
        let mut first = Vec::new();
        wf.write_to(&mut first).unwrap();
        let back = WeightFile::read_from(&first[..]).unwrap();
        let mut second = Vec::new();
        back.write_to(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(back, wf);
    }
}
