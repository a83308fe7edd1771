//! Binary request/response codec. All multi-byte integers are little-endian.
//!
//! Request (`16 + 24·K` bytes):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `CRLQ` |
//! | 4 | 1 | version (1) |
//! | 5 | 1 | K, 1..=64 |
//! | 6 | 1 | flags, bit 0 = shadow |
//! | 7 | 1 | reserved, 0 |
//! | 8 | 8 | needed bytes (u64) |
//! | 16 | 24·K | K x 6 normalized f32 features, candidate-major |
//!
//! Response (16 bytes): magic `CRLR`, version u8, status u8, reserved u16,
//! mask u64 (bit i evicts candidate i).

use thiserror::Error;

use crate::dqn::MAX_K;
use crate::features::N_FEATURES;

pub const REQUEST_MAGIC: [u8; 4] = *b"CRLQ";
pub const RESPONSE_MAGIC: [u8; 4] = *b"CRLR";
pub const PROTOCOL_VERSION: u8 = 1;
pub const REQUEST_HEADER_LEN: usize = 16;
pub const RESPONSE_LEN: usize = 16;
pub const ROW_BYTES: usize = 4 * N_FEATURES;
pub const MAX_REQUEST_LEN: usize = REQUEST_HEADER_LEN + MAX_K * ROW_BYTES;

pub const FLAG_SHADOW: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("message is {found} bytes, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("K = {0} is outside 1..=64")]
    KOutOfRange(u8),
    #[error("unknown flag bits {0:#04x}")]
    Flags(u8),
    #[error("reserved field is {0}, expected 0")]
    Reserved(u16),
    #[error("feature {index} is not finite")]
    NonFinite { index: usize },
    #[error("unknown status {0}")]
    Status(u8),
    #[error("mask {mask:#x} selects candidates at or beyond K = {k}")]
    MaskBeyondK { mask: u64, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestHeader {
    pub k: u8,
    pub shadow: bool,
    pub needed: u64,
}

impl RequestHeader {
    pub fn message_len(&self) -> usize {
        request_len(self.k as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvictRequest {
    pub k: u8,
    pub shadow: bool,
    pub needed: u64,
    /// `k * 6` values, candidate-major.
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    ModelUnavailable = 1,
    BadRequest = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvictResponse {
    pub status: Status,
    pub mask: u64,
}

pub fn request_len(k: usize) -> usize {
    REQUEST_HEADER_LEN + k * ROW_BYTES
}

/// Writes a request into `out` (cleared first).
pub fn encode_request_into(
    needed: u64,
    features: &[f32],
    shadow: bool,
    out: &mut Vec<u8>,
) -> Result<(), ProtocolError> {
    let k = features.len() / N_FEATURES;
    if features.len() % N_FEATURES != 0 {
        return Err(ProtocolError::Length { expected: k * N_FEATURES, found: features.len() });
    }
    if !(1..=MAX_K).contains(&k) {
        return Err(ProtocolError::KOutOfRange(k.min(255) as u8));
    }
    if let Some(index) = features.iter().position(|v| !v.is_finite()) {
        return Err(ProtocolError::NonFinite { index });
    }
    out.clear();
    out.extend_from_slice(&REQUEST_MAGIC);
    out.push(PROTOCOL_VERSION);
    out.push(k as u8);
    out.push(if shadow { FLAG_SHADOW } else { 0 });
    out.push(0);
    out.extend_from_slice(&needed.to_le_bytes());
    for v in features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn encode_request(req: &EvictRequest) -> Result<Vec<u8>, ProtocolError> {
    if req.features.len() != req.k as usize * N_FEATURES {
        return Err(ProtocolError::Length { expected: req.k as usize * N_FEATURES, found: req.features.len() });
    }
    let mut out = Vec::with_capacity(request_len(req.k as usize));
    encode_request_into(req.needed, &req.features, req.shadow, &mut out)?;
    Ok(out)
}

/// Validates the fixed header. `bytes` must hold at least the header.
pub fn decode_request_header(bytes: &[u8]) -> Result<RequestHeader, ProtocolError> {
    if bytes.len() < REQUEST_HEADER_LEN {
        return Err(ProtocolError::Length { expected: REQUEST_HEADER_LEN, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != REQUEST_MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    if bytes[4] != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(bytes[4]));
    }
    let k = bytes[5];
    if !(1..=MAX_K).contains(&(k as usize)) {
        return Err(ProtocolError::KOutOfRange(k));
    }
    let flags = bytes[6];
    if flags & !FLAG_SHADOW != 0 {
        return Err(ProtocolError::Flags(flags));
    }
    if bytes[7] != 0 {
        return Err(ProtocolError::Reserved(bytes[7] as u16));
    }
    let needed = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    Ok(RequestHeader { k, shadow: flags & FLAG_SHADOW != 0, needed })
}

/// Decodes a complete request, writing the features into `features`
/// (cleared first). Nothing is written unless the whole message is valid.
pub fn decode_request_into(bytes: &[u8], features: &mut Vec<f32>) -> Result<RequestHeader, ProtocolError> {
    let h = decode_request_header(bytes)?;
    let expected = h.message_len();
    if bytes.len() != expected {
        return Err(ProtocolError::Length { expected, found: bytes.len() });
    }
    let body = &bytes[REQUEST_HEADER_LEN..];
    let value = |i: usize| f32::from_le_bytes(body[4 * i..4 * i + 4].try_into().unwrap());
    let n = h.k as usize * N_FEATURES;
    if let Some(index) = (0..n).find(|&i| !value(i).is_finite()) {
        return Err(ProtocolError::NonFinite { index });
    }
    features.clear();
    features.extend((0..n).map(value));
    Ok(h)
}

pub fn decode_request(bytes: &[u8]) -> Result<EvictRequest, ProtocolError> {
    let mut features = Vec::new();
    let h = decode_request_into(bytes, &mut features)?;
    Ok(EvictRequest { k: h.k, shadow: h.shadow, needed: h.needed, features })
}

pub fn encode_response(resp: &EvictResponse) -> [u8; RESPONSE_LEN] {
    let mut out = [0u8; RESPONSE_LEN];
    out[..4].copy_from_slice(&RESPONSE_MAGIC);
    out[4] = PROTOCOL_VERSION;
    out[5] = resp.status as u8;
    out[8..].copy_from_slice(&resp.mask.to_le_bytes());
    out
}

/// Decodes a response. With `k` known, mask bits at or above `k` are an
/// error.
pub fn decode_response(bytes: &[u8], k: Option<usize>) -> Result<EvictResponse, ProtocolError> {
    if bytes.len() != RESPONSE_LEN {
        return Err(ProtocolError::Length { expected: RESPONSE_LEN, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != RESPONSE_MAGIC {
        return Err(ProtocolError::BadMagic(magic));
    }
    if bytes[4] != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(bytes[4]));
    }
    let status = match bytes[5] {
        0 => Status::Ok,
        1 => Status::ModelUnavailable,
        2 => Status::BadRequest,
        s => return Err(ProtocolError::Status(s)),
    };
    let reserved = u16::from_le_bytes([bytes[6], bytes[7]]);
    if reserved != 0 {
        return Err(ProtocolError::Reserved(reserved));
    }
    let mask = u64::from_le_bytes(bytes[8..].try_into().unwrap());
    if let Some(k) = k {
        if k < 64 && mask >> k != 0 {
            return Err(ProtocolError::MaskBeyondK { mask, k });
        }
    }
    Ok(EvictResponse { status, mask })
}
