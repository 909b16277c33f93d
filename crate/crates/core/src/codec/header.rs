use super::ids::{DevAddr, LimaNodeId};
use super::lorawan::LorawanFrameView;
use super::CodecError;
use serde::{Deserialize, Serialize};

/// LoRaWAN "proprietary" MType, reused as the LIMA marker.
pub const LIMA_MTYPE: u8 = 0b111;
/// Header bytes before the options field.
pub const HEADER_BASE_LEN: usize = 9;
/// Header overhead of a tunneled data frame (base header plus a 2-byte target).
pub const DATA_OVERHEAD: usize = HEADER_BASE_LEN + 2;
/// REM options without any direct receivables: TP code and cost.
pub const REM_FIXED_OPTIONS_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeaderType {
    UplinkData = 0,
    DownlinkData = 1,
    Rem = 2,
    Reserved = 3,
}

impl HeaderType {
    fn from_bits(b: u8) -> HeaderType {
        match b & 0b11 {
            0 => HeaderType::UplinkData,
            1 => HeaderType::DownlinkData,
            2 => HeaderType::Rem,
            _ => HeaderType::Reserved,
        }
    }
}

/// The first header byte: `[mtype(3) | version(3) | type(2)]`, MSB first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimaPrefix {
    pub version: u8,
    pub header_type: HeaderType,
}

impl LimaPrefix {
    pub fn to_byte(self) -> Result<u8, CodecError> {
        if self.version > 0b111 {
            return Err(CodecError::InvalidVersion(self.version));
        }
        Ok(LIMA_MTYPE << 5 | self.version << 2 | self.header_type as u8)
    }

    pub fn from_byte(b: u8) -> Result<LimaPrefix, CodecError> {
        if b >> 5 != LIMA_MTYPE {
            return Err(CodecError::NotLima);
        }
        Ok(LimaPrefix {
            version: (b >> 2) & 0b111,
            header_type: HeaderType::from_bits(b),
        })
    }
}

/// Options carried by a route establishment message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemOptions {
    pub tp_code: u8,
    pub cost_from_source: u16,
    pub direct_receivables: Vec<DevAddr>,
}

impl RemOptions {
    pub fn encoded_len(&self) -> usize {
        REM_FIXED_OPTIONS_LEN + 4 * self.direct_receivables.len()
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.push(self.tp_code);
        out.extend_from_slice(&self.cost_from_source.to_be_bytes());
        for addr in &self.direct_receivables {
            out.extend_from_slice(&addr.0.to_be_bytes());
        }
    }

    fn parse(opts: &[u8]) -> Result<RemOptions, CodecError> {
        if opts.len() < REM_FIXED_OPTIONS_LEN || (opts.len() - REM_FIXED_OPTIONS_LEN) % 4 != 0 {
            return Err(CodecError::InvalidOptLen {
                header_type: HeaderType::Rem,
                len: opts.len(),
            });
        }
        let direct_receivables = opts[REM_FIXED_OPTIONS_LEN..]
            .chunks_exact(4)
            .map(|c| DevAddr(u32::from_be_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Ok(RemOptions {
            tp_code: opts[0],
            cost_from_source: u16::from_be_bytes([opts[1], opts[2]]),
            direct_receivables,
        })
    }
}

/// Type-specific part of a header. The header type is implied by the variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeaderKind {
    UplinkData { target: LimaNodeId },
    DownlinkData { target: LimaNodeId },
    Rem(RemOptions),
    Reserved(Vec<u8>),
}

impl HeaderKind {
    pub fn header_type(&self) -> HeaderType {
        match self {
            HeaderKind::UplinkData { .. } => HeaderType::UplinkData,
            HeaderKind::DownlinkData { .. } => HeaderType::DownlinkData,
            HeaderKind::Rem(_) => HeaderType::Rem,
            HeaderKind::Reserved(_) => HeaderType::Reserved,
        }
    }

    fn options_len(&self) -> usize {
        match self {
            HeaderKind::UplinkData { .. } | HeaderKind::DownlinkData { .. } => 2,
            HeaderKind::Rem(rem) => rem.encoded_len(),
            HeaderKind::Reserved(raw) => raw.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimaHeader {
    pub version: u8,
    pub source: LimaNodeId,
    pub seq: u8,
    pub sender: LimaNodeId,
    /// SNR of the ED frame at the uplink entry LR, whole dB.
    pub ed_snr: i8,
    pub ed_sf: u8,
    pub kind: HeaderKind,
}

impl LimaHeader {
    pub fn header_type(&self) -> HeaderType {
        self.kind.header_type()
    }

    pub fn prefix(&self) -> LimaPrefix {
        LimaPrefix {
            version: self.version,
            header_type: self.header_type(),
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BASE_LEN + self.kind.options_len()
    }

    /// Next-hop target of a data header.
    pub fn target(&self) -> Option<LimaNodeId> {
        match self.kind {
            HeaderKind::UplinkData { target } | HeaderKind::DownlinkData { target } => Some(target),
            _ => None,
        }
    }

    pub fn set_target(&mut self, next: LimaNodeId) {
        match &mut self.kind {
            HeaderKind::UplinkData { target } | HeaderKind::DownlinkData { target } => *target = next,
            _ => {}
        }
    }

    pub fn rem(&self) -> Option<&RemOptions> {
        match &self.kind {
            HeaderKind::Rem(r) => Some(r),
            _ => None,
        }
    }

    /// Quantizes a measured SNR to the one-byte header field.
    pub fn quantize_snr(snr_db: f64) -> i8 {
        if snr_db.is_nan() {
            return 0;
        }
        snr_db.round().clamp(i8::MIN as f64, i8::MAX as f64) as i8
    }
}

/// Serializes a header. Multi-byte fields are big-endian.
pub fn encode_header(h: &LimaHeader) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(h.encoded_len());
    write_header(h, &mut out)?;
    Ok(out)
}

fn write_header(h: &LimaHeader, out: &mut Vec<u8>) -> Result<(), CodecError> {
    let opt_len = h.kind.options_len();
    if opt_len > u8::MAX as usize {
        return Err(CodecError::InvalidOptLen {
            header_type: h.header_type(),
            len: opt_len,
        });
    }
    out.push(h.prefix().to_byte()?);
    out.extend_from_slice(&h.source.0.to_be_bytes());
    out.push(h.seq);
    out.extend_from_slice(&h.sender.0.to_be_bytes());
    out.push(h.ed_snr as u8);
    out.push(h.ed_sf);
    out.push(opt_len as u8);
    match &h.kind {
        HeaderKind::UplinkData { target } | HeaderKind::DownlinkData { target } => {
            out.extend_from_slice(&target.0.to_be_bytes())
        }
        HeaderKind::Rem(rem) => rem.write(out),
        HeaderKind::Reserved(raw) => out.extend_from_slice(raw),
    }
    Ok(())
}

/// Result of classifying a received PHYPayload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    EdFrame(LorawanFrameView),
    LimaFrame { header: LimaHeader, inner: Vec<u8> },
}

fn decode_header(payload: &[u8]) -> Result<(LimaHeader, usize), CodecError> {
    let prefix = LimaPrefix::from_byte(payload[0])?;
    if payload.len() < HEADER_BASE_LEN {
        return Err(CodecError::Truncated {
            needed: HEADER_BASE_LEN,
            got: payload.len(),
        });
    }
    let opt_len = payload[8] as usize;
    let total = HEADER_BASE_LEN + opt_len;
    if payload.len() < total {
        return Err(CodecError::Truncated {
            needed: total,
            got: payload.len(),
        });
    }
    let opts = &payload[HEADER_BASE_LEN..total];
    let node = |i: usize| LimaNodeId(u16::from_be_bytes([payload[i], payload[i + 1]]));
    let data_target = |ht: HeaderType| {
        if opts.len() != 2 {
            return Err(CodecError::InvalidOptLen {
                header_type: ht,
                len: opts.len(),
            });
        }
        Ok(LimaNodeId(u16::from_be_bytes([opts[0], opts[1]])))
    };
    let kind = match prefix.header_type {
        HeaderType::UplinkData => HeaderKind::UplinkData {
            target: data_target(HeaderType::UplinkData)?,
        },
        HeaderType::DownlinkData => HeaderKind::DownlinkData {
            target: data_target(HeaderType::DownlinkData)?,
        },
        HeaderType::Rem => HeaderKind::Rem(RemOptions::parse(opts)?),
        HeaderType::Reserved => HeaderKind::Reserved(opts.to_vec()),
    };
    let header = LimaHeader {
        version: prefix.version,
        source: node(1),
        seq: payload[3],
        sender: node(4),
        ed_snr: payload[6] as i8,
        ed_sf: payload[7],
        kind,
    };
    Ok((header, total))
}

/// Classifies a PHYPayload as a LIMA frame or an end-device LoRaWAN frame.
pub fn decode(payload: &[u8]) -> Result<Decoded, CodecError> {
    if payload.is_empty() {
        return Err(CodecError::Empty);
    }
    if payload[0] >> 5 == LIMA_MTYPE {
        let (header, used) = decode_header(payload)?;
        Ok(Decoded::LimaFrame {
            header,
            inner: payload[used..].to_vec(),
        })
    } else {
        Ok(Decoded::EdFrame(LorawanFrameView::parse(payload)?))
    }
}

/// Prepends `h` to an unmodified PHYPayload.
pub fn encapsulate(inner: &[u8], h: &LimaHeader) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(h.encoded_len() + inner.len());
    write_header(h, &mut out)?;
    out.extend_from_slice(inner);
    Ok(out)
}

pub fn decapsulate(frame: &[u8]) -> Result<(LimaHeader, Vec<u8>), CodecError> {
    if frame.is_empty() {
        return Err(CodecError::Empty);
    }
    let (header, used) = decode_header(frame)?;
    Ok((header, frame[used..].to_vec()))
}
