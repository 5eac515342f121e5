use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::WireError;

pub const MAGIC: [u8; 4] = *b"ANTP";

/// magic 4 + type 1 + epoch 4 + layer 1 + interval 4 + length 8
pub const HEADER_LEN: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum MessageType {
    Activations = 1,
    Gradients = 2,
    FetchWeights = 3,
    Weights = 4,
    PushGrad = 5,
    Broadcast = 6,
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        Ok(match b {
            1 => Self::Activations,
            2 => Self::Gradients,
            3 => Self::FetchWeights,
            4 => Self::Weights,
            5 => Self::PushGrad,
            6 => Self::Broadcast,
            _ => return Err(WireError::UnknownType(b)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub msg_type: MessageType,
    pub epoch: u32,
    pub layer: u8,
    pub interval: u32,
    /// Bytes, always a multiple of 4.
    pub payload_len: u64,
}

/// A framed message; `payload` is row-major `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub msg_type: MessageType,
    pub epoch: u32,
    pub layer: u8,
    pub interval: u32,
    pub payload: Vec<f32>,
}

impl Message {
    /// Bitwise equality, so NaN payloads compare as sent.
    pub fn bitwise_eq(&self, other: &Message) -> bool {
        self.msg_type == other.msg_type
            && self.epoch == other.epoch
            && self.layer == other.layer
            && self.interval == other.interval
            && self.payload.len() == other.payload.len()
            && self
                .payload
                .iter()
                .zip(&other.payload)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + msg.payload.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&msg.epoch.to_le_bytes());
    out.push(msg.layer);
    out.extend_from_slice(&msg.interval.to_le_bytes());
    out.extend_from_slice(&((msg.payload.len() as u64) * 4).to_le_bytes());
    for x in &msg.payload {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_header(bytes: &[u8]) -> Result<Header, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let msg_type = MessageType::try_from(bytes[4])?;
    let epoch = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let layer = bytes[9];
    let interval = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let payload_len = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
    if payload_len >= 1 << 63 || usize::try_from(payload_len).is_err() {
        return Err(WireError::LengthOverflow(payload_len));
    }
    if payload_len % 4 != 0 {
        return Err(WireError::Misaligned(payload_len));
    }
    Ok(Header {
        msg_type,
        epoch,
        layer,
        interval,
        payload_len,
    })
}

/// Decodes one frame from the front of `bytes`; returns it with the number
/// of bytes consumed.
pub fn decode_message(bytes: &[u8]) -> Result<(Message, usize), WireError> {
    let h = decode_header(bytes)?;
    let len = h.payload_len as usize;
    let total = HEADER_LEN
        .checked_add(len)
        .ok_or(WireError::LengthOverflow(h.payload_len))?;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let payload = bytes[HEADER_LEN..total]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        Message {
            msg_type: h.msg_type,
            epoch: h.epoch,
            layer: h.layer,
            interval: h.interval,
            payload,
        },
        total,
    ))
}
