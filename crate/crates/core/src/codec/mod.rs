//! Wire formats: the LIMA encapsulation header and the slice of LoRaWAN that
//! a LIMA node needs to read.
//!
//! A LIMA frame is the LIMA header followed by an untouched LoRaWAN
//! PHYPayload. The first three bits of every LIMA header are `111`, the
//! LoRaWAN "proprietary" message type, so a receiver can tell tunneled and
//! control traffic from frames produced by end devices by looking at the
//! first byte alone.

mod header;
mod ids;
mod inspect;
mod lorawan;
mod region;

pub use header::{
    decapsulate, decode, encapsulate, encode_header, Decoded, HeaderKind, HeaderType, LimaHeader,
    LimaPrefix, RemOptions, DATA_OVERHEAD, HEADER_BASE_LEN, LIMA_MTYPE, REM_FIXED_OPTIONS_LEN,
};
pub use ids::{derive_node_id, DevAddr, DevEui, LimaNodeId};
pub use inspect::inspect_lines;
pub use lorawan::{FrameBuilder, LorawanFrameView, MacCommand, MType, ED_FRAME_OVERHEAD, FCTRL_ADR, FCTRL_ADR_ACK_REQ};
pub use region::{
    max_app_payload, validate_ingress, DataRate, PayloadCap, Region, TransmissionProfile,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("empty payload")]
    Empty,
    #[error("truncated LIMA frame: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("malformed LoRaWAN frame: {0}")]
    MalformedLorawan(&'static str),
    #[error("option length {len} invalid for {header_type:?} header")]
    InvalidOptLen { header_type: HeaderType, len: usize },
    #[error("protocol version {0} does not fit in 3 bits")]
    InvalidVersion(u8),
    #[error("unknown data rate DR{0}")]
    UnknownDr(u8),
    #[error("MAC payload of {len} bytes exceeds the {max} byte LIMA limit")]
    TooLarge { len: usize, max: usize },
    #[error("frame does not carry a LIMA prefix")]
    NotLima,
}
