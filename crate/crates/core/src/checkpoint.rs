//! Binary policy checkpoints.
//!
//! Layout (little-endian): magic `CNQ1`, u32 version, u32 d, u32 inputDim,
//! u32 hidden, W1 (hidden × inputDim) row-major f32, W2 (d × hidden)
//! row-major f32, u8 hasAdam, then when present the Adam first moments of
//! W1 and W2 followed by the second moments of W1 and W2 (same layouts),
//! and finally u64 Adam step count (0 without Adam state).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::policy::{AdamState, PolicyParams};

pub const MAGIC: &[u8; 4] = b"CNQ1";
pub const VERSION: u32 = 1;

fn put_matrix(out: &mut Vec<u8>, m: &Array2<f64>) {
    for v in m.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

pub fn encode(params: &PolicyParams, adam: Option<&AdamState>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, params.d() as u32, params.input_dim() as u32, params.hidden() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_matrix(&mut out, &params.w1);
    put_matrix(&mut out, &params.w2);
    match adam {
        Some(a) => {
            out.push(1);
            for m in [&a.m_w1, &a.m_w2, &a.v_w1, &a.v_w2] {
                put_matrix(&mut out, m);
            }
            out.extend_from_slice(&a.step.to_le_bytes());
        }
        None => {
            out.push(0);
            out.extend_from_slice(&0u64.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let bytes = self.take(rows * cols * 4)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint("non-finite weight".into()));
        }
        Ok(Array2::from_shape_vec((rows, cols), vals).expect("sized"))
    }
}

pub fn decode(buf: &[u8]) -> Result<(PolicyParams, Option<AdamState>)> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let d = r.u32()? as usize;
    let input_dim = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let w1 = r.matrix(hidden, input_dim)?;
    let w2 = r.matrix(d, hidden)?;
    let params = PolicyParams { w1, w2 };
    let has_adam = r.take(1)?[0];
    let adam = match has_adam {
        0 => None,
        1 => {
            let mut a = AdamState::new(&params);
            a.m_w1 = r.matrix(hidden, input_dim)?;
            a.m_w2 = r.matrix(d, hidden)?;
            a.v_w1 = r.matrix(hidden, input_dim)?;
            a.v_w2 = r.matrix(d, hidden)?;
            Some(a)
        }
        other => return Err(Error::Checkpoint(format!("bad hasAdam flag {other}"))),
    };
    let step = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
    let adam = adam.map(|mut a| {
        a.step = step;
        a
    });
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok((params, adam))
}

pub fn save(path: impl AsRef<Path>, params: &PolicyParams, adam: Option<&AdamState>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(params, adam)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(PolicyParams, Option<AdamState>)> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{adam_ascent_step, Gradients};

    #[test]
    fn header_layout() {
        let p = PolicyParams::init(4, 3, 2, 0);
        let bytes = encode(&p, None);
        assert_eq!(&bytes[..4], b"CNQ1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 20 + 4 * (12 + 6) + 1 + 8);
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()) as f64, p.w1[[0, 0]]);
    }

    #[test]
    fn round_trip_with_adam_is_byte_identical() {
        let mut p = PolicyParams::init(4, 3, 2, 9);
        let mut adam = AdamState::new(&p);
        let g = Gradients {
            w1: ndarray::Array2::from_elem((3, 4), 0.3),
            w2: ndarray::Array2::from_elem((2, 3), -0.1),
        };
        adam_ascent_step(&mut p, &mut adam, &g, 0.01).unwrap();
        let bytes = encode(&p, Some(&adam));
        let (p2, a2) = decode(&bytes).unwrap();
        assert_eq!(p2, p);
        assert_eq!(a2.as_ref(), Some(&adam));
        assert_eq!(encode(&p2, a2.as_ref()), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let p = PolicyParams::init(2, 2, 2, 0);
        let bytes = encode(&p, None);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }
}
