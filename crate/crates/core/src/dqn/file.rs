//! The `CRLM` model file.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `CRLM` |
//! | 4 | 2 | version (u16, currently 1) |
//! | 6 | 1 | feature count (u8, 6) |
//! | 7 | 1 | reserved (u8): K the model was trained with, 0 if unknown |
//! | 8 | 52 | 6 x (f32 mu, f32 sigma), then f32 clamp |
//! | 60 | ... | W1, W2, Wa, Wv, each as u32 rows, u32 cols, rows x cols f32 weights (row-major), rows f32 bias |
//! | end-4 | 4 | CRC-32 (IEEE) of all preceding bytes |

use std::io::{Read, Write};

use super::model::{DuelingModel, Layout};
use crate::error::ModelError;
use crate::features::{NormParams, N_FEATURES};

pub const MAGIC: [u8; 4] = *b"CRLM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 8 + 4 * (2 * N_FEATURES + 1);

pub fn model_to_bytes(model: &DuelingModel<f32>) -> Vec<u8> {
    let l = model.layout();
    let p = model.params();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (p.len() + 8) + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(N_FEATURES as u8);
    out.push(model.k_trained);
    for f in 0..N_FEATURES {
        out.extend_from_slice(&model.norm.mu[f].to_le_bytes());
        out.extend_from_slice(&model.norm.sigma[f].to_le_bytes());
    }
    out.extend_from_slice(&model.norm.clamp.to_le_bytes());
    let layers = [
        (l.h1, N_FEATURES, l.w1(), l.b1()),
        (l.h2, l.h1, l.w2(), l.b2()),
        (1, l.h2, l.wa(), l.ba()..l.ba() + 1),
        (1, l.h2, l.wv(), l.bv()..l.bv() + 1),
    ];
    for (rows, cols, w, b) in layers {
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in &p[w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &p[b] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn save_model<W: Write>(model: &DuelingModel<f32>, mut sink: W) -> Result<(), ModelError> {
    sink.write_all(&model_to_bytes(model))?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(mut source: R) -> Result<DuelingModel<f32>, ModelError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let needed = self.pos + n;
        if needed > self.bytes.len() {
            return Err(ModelError::Truncated { needed, found: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..needed];
        self.pos = needed;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, ModelError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, out: &mut Vec<f32>) -> Result<(), ModelError> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| ModelError::Malformed("layer too large".into()))?)?;
        out.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        Ok(())
    }
}

/// Parses a model file. The structure is checked first (so a short file is
/// reported as truncated), then the checksum, then the values.
pub fn model_from_bytes(bytes: &[u8]) -> Result<DuelingModel<f32>, ModelError> {
    if bytes.len() < 4 {
        return Err(ModelError::Truncated { needed: 4, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let mut c = Cursor { bytes, pos: 4 };
    let version = u16::from_le_bytes(c.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(ModelError::Version(version));
    }
    let fc = c.take(1)?[0];
    if fc as usize != N_FEATURES {
        return Err(ModelError::Malformed(format!("feature count {fc}, expected {N_FEATURES}")));
    }
    let k_trained = c.take(1)?[0];
    let mut norm = NormParams::default();
    for f in 0..N_FEATURES {
        norm.mu[f] = c.f32()?;
        norm.sigma[f] = c.f32()?;
    }
    norm.clamp = c.f32()?;

    let mut params = Vec::new();
    let mut shapes = [(0usize, 0usize); 4];
    for shape in &mut shapes {
        let rows = c.u32()? as usize;
        let cols = c.u32()? as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| ModelError::Malformed("layer too large".into()))?;
        c.f32s(n, &mut params)?;
        c.f32s(rows, &mut params)?;
        *shape = (rows, cols);
    }
    let body_end = c.pos;
    let stored = c.u32()?;
    if c.pos != bytes.len() {
        return Err(ModelError::Malformed(format!("{} trailing bytes after checksum", bytes.len() - c.pos)));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(ModelError::Checksum { stored, computed });
    }

    let (h1, h2) = (shapes[0].0, shapes[1].0);
    let expected = [(h1, N_FEATURES), (h2, h1), (1, h2), (1, h2)];
    if shapes != expected || h1 == 0 || h2 == 0 {
        return Err(ModelError::Malformed(format!("layer shapes {shapes:?} do not form a dueling network")));
    }
    if !params.iter().all(|v| v.is_finite()) {
        return Err(ModelError::NonFinite("weights"));
    }
    let norm_ok = norm.mu.iter().all(|v| v.is_finite())
        && norm.sigma.iter().all(|v| v.is_finite() && *v > 0.0)
        && norm.clamp.is_finite()
        && norm.clamp > 0.0;
    if !norm_ok {
        return Err(ModelError::NonFinite("normalization constants"));
    }
    Ok(DuelingModel::from_params(Layout { h1, h2 }, params, norm, k_trained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::model::{HIDDEN1, HIDDEN2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> DuelingModel<f32> {
        let mut m = DuelingModel::init(HIDDEN1, HIDDEN2, &mut ChaCha8Rng::seed_from_u64(11));
        m.norm = NormParams { mu: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], sigma: [0.5; 6], clamp: 8.0 };
        m.k_trained = 16;
        m
    }

    #[test]
    fn save_load_save_is_identical() {
        let bytes = model_to_bytes(&model());
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, model());
        assert_eq!(model_to_bytes(&back), bytes);
        assert_eq!(bytes.len(), HEADER_LEN + 4 * (9282 + 8) + 4);
    }

    #[test]
    fn flipped_weight_byte_fails_checksum() {
        let mut bytes = model_to_bytes(&model());
        bytes[HEADER_LEN + 100] ^= 0x40;
        assert!(matches!(model_from_bytes(&bytes), Err(ModelError::Checksum { .. })));
    }

    #[test]
    fn error_kinds_are_distinct() {
        let bytes = model_to_bytes(&model());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(model_from_bytes(&bad), Err(ModelError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(model_from_bytes(&bad), Err(ModelError::Version(9))));
        for cut in [2, 7, 30, HEADER_LEN + 10, bytes.len() - 1] {
            assert!(
                matches!(model_from_bytes(&bytes[..cut]), Err(ModelError::Truncated { .. })),
                "cut at {cut}"
            );
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(model_from_bytes(&long), Err(ModelError::Malformed(_))));
    }
}
