//! Datagram layout.
//!
//! Every packet starts with a 16-byte big-endian header:
//!
//! ```text
//! update: version:u8 kind:u8=0 seq:u32 gen_timestamp_us:u64 payload_len:u16 | payload
//! ack:    version:u8 kind:u8=1 seq:u32 echo_timestamp_us:u64 reserved:u16=0
//! ```

use thiserror::Error;

pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const KIND_UPDATE: u8 = 0;
pub const KIND_ACK: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("payload of {0} bytes does not fit a 16-bit length")]
    PayloadTooLarge(usize),
    #[error("header announces {declared} payload bytes but {actual} were supplied")]
    PayloadLengthMismatch { declared: u16, actual: usize },
    #[error("malformed packet: {0}")]
    Malformed(Malformed),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum Malformed {
    #[error("{0} bytes is shorter than a header")]
    Short(usize),
    #[error("unknown version {0}")]
    Version(u8),
    #[error("unknown kind {0}")]
    Kind(u8),
    #[error("payload length {declared} does not match {actual} trailing bytes")]
    PayloadLength { declared: u16, actual: usize },
    #[error("non-zero reserved field")]
    Reserved,
}

impl From<Malformed> for CodecError {
    fn from(m: Malformed) -> Self {
        CodecError::Malformed(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateHeader {
    pub seq: u32,
    pub gen_timestamp_us: u64,
    pub payload_len: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckHeader {
    pub seq: u32,
    pub echo_timestamp_us: u64,
}

impl AckHeader {
    /// The ACK a monitor returns for `update`.
    pub fn for_update(update: &UpdateHeader) -> Self {
        AckHeader {
            seq: update.seq,
            echo_timestamp_us: update.gen_timestamp_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Update {
        header: UpdateHeader,
        payload: Vec<u8>,
    },
    Ack(AckHeader),
}

pub fn encode_update(header: &UpdateHeader, payload: &[u8]) -> Result<Vec<u8>, CodecError> {
    if payload.len() > u16::MAX as usize {
        return Err(CodecError::PayloadTooLarge(payload.len()));
    }
    if payload.len() != header.payload_len as usize {
        return Err(CodecError::PayloadLengthMismatch {
            declared: header.payload_len,
            actual: payload.len(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.push(VERSION);
    out.push(KIND_UPDATE);
    out.extend_from_slice(&header.seq.to_be_bytes());
    out.extend_from_slice(&header.gen_timestamp_us.to_be_bytes());
    out.extend_from_slice(&header.payload_len.to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn encode_ack(header: &AckHeader) -> [u8; HEADER_LEN] {
    let mut out = [0u8; HEADER_LEN];
    out[0] = VERSION;
    out[1] = KIND_ACK;
    out[2..6].copy_from_slice(&header.seq.to_be_bytes());
    out[6..14].copy_from_slice(&header.echo_timestamp_us.to_be_bytes());
    out
}

pub fn decode_packet(raw: &[u8]) -> Result<Packet, Malformed> {
    if raw.len() < HEADER_LEN {
        return Err(Malformed::Short(raw.len()));
    }
    if raw[0] != VERSION {
        return Err(Malformed::Version(raw[0]));
    }
    let seq = u32::from_be_bytes(raw[2..6].try_into().unwrap());
    let stamp = u64::from_be_bytes(raw[6..14].try_into().unwrap());
    let tail = u16::from_be_bytes(raw[14..16].try_into().unwrap());
    let rest = &raw[HEADER_LEN..];
    match raw[1] {
        KIND_UPDATE => {
            if rest.len() != tail as usize {
                return Err(Malformed::PayloadLength {
                    declared: tail,
                    actual: rest.len(),
                });
            }
            Ok(Packet::Update {
                header: UpdateHeader {
                    seq,
                    gen_timestamp_us: stamp,
                    payload_len: tail,
                },
                payload: rest.to_vec(),
            })
        }
        KIND_ACK => {
            if tail != 0 {
                return Err(Malformed::Reserved);
            }
            if !rest.is_empty() {
                return Err(Malformed::PayloadLength {
                    declared: 0,
                    actual: rest.len(),
                });
            }
            Ok(Packet::Ack(AckHeader {
                seq,
                echo_timestamp_us: stamp,
            }))
        }
        other => Err(Malformed::Kind(other)),
    }
}
