//! Frame layout and checksum.
//!
//! ```text
//! address(1) function(1) payload_len(2, BE) payload(n) crc(2, LE)
//! ```
//!
//! The CRC is CRC-16 with the reflected polynomial 0xA001 and initial value
//! 0xFFFF, computed over everything before it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_PAYLOAD: usize = 1024;
pub const HEADER_LEN: usize = 4;
pub const CRC_LEN: usize = 2;
pub const MIN_FRAME_LEN: usize = HEADER_LEN + CRC_LEN;
pub const BROADCAST: u8 = 0;
pub const MAX_ADDRESS: u8 = 247;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame truncated: need {needed} bytes, have {got}")]
    Truncated { needed: usize, got: usize },
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    Oversize(usize),
    #[error("crc mismatch: computed {computed:#06x}, frame carries {carried:#06x}")]
    CrcMismatch { computed: u16, carried: u16 },
    #[error("declared payload length {declared} but frame holds {actual}")]
    LengthMismatch { declared: usize, actual: usize },
}

pub fn crc16(data: &[u8]) -> u16 {
    let mut crc = 0xFFFFu16;
    for &b in data {
        crc ^= u16::from(b);
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xA001
            } else {
                crc >> 1
            };
        }
    }
    crc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum FunctionCode {
    ReadTelemetry = 0x01,
    WriteDayPlan = 0x02,
    ReadDayPlan = 0x03,
    ReportStatus = 0x04,
    WriteMortality = 0x05,
}

pub const EXCEPTION_FLAG: u8 = 0x80;

impl FunctionCode {
    pub fn from_u8(code: u8) -> Option<Self> {
        Some(match code {
            0x01 => Self::ReadTelemetry,
            0x02 => Self::WriteDayPlan,
            0x03 => Self::ReadDayPlan,
            0x04 => Self::ReportStatus,
            0x05 => Self::WriteMortality,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ReadTelemetry => "READ_TELEMETRY",
            Self::WriteDayPlan => "WRITE_DAY_PLAN",
            Self::ReadDayPlan => "READ_DAY_PLAN",
            Self::ReportStatus => "REPORT_STATUS",
            Self::WriteMortality => "WRITE_MORTALITY",
        }
    }
}

/// Exception codes carried in the single payload byte of an exception reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum ExceptionCode {
    IllegalFunction = 1,
    IllegalDataAddress = 2,
    IllegalDataValue = 3,
    DeviceFailure = 4,
}

impl ExceptionCode {
    pub fn from_u8(code: u8) -> Option<Self> {
        Some(match code {
            1 => Self::IllegalFunction,
            2 => Self::IllegalDataAddress,
            3 => Self::IllegalDataValue,
            4 => Self::DeviceFailure,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub address: u8,
    pub function: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(address: u8, function: FunctionCode, payload: Vec<u8>) -> Self {
        Self {
            address,
            function: function as u8,
            payload,
        }
    }

    pub fn exception(address: u8, function: u8, code: ExceptionCode) -> Self {
        Self {
            address,
            function: function | EXCEPTION_FLAG,
            payload: vec![code as u8],
        }
    }

    pub fn code(&self) -> Option<FunctionCode> {
        FunctionCode::from_u8(self.function)
    }

    pub fn is_exception(&self) -> bool {
        self.function & EXCEPTION_FLAG != 0
    }

    /// Exception code of an exception reply. A malformed exception payload
    /// reads as a device failure.
    pub fn exception_code(&self) -> Option<u8> {
        self.is_exception().then(|| {
            self.payload
                .first()
                .copied()
                .unwrap_or(ExceptionCode::DeviceFailure as u8)
        })
    }

    pub fn encoded_len(&self) -> usize {
        MIN_FRAME_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(FrameError::Oversize(self.payload.len()));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.address);
        out.push(self.function);
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        let crc = crc16(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    ///
    /// The checksum is verified before the length field is trusted, so any
    /// corruption of the frame, including its length bytes, reports as a CRC
    /// mismatch. Use [`Frame::decode_prefix`] on a buffer that may hold a
    /// partial frame.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < MIN_FRAME_LEN {
            return Err(FrameError::Truncated {
                needed: MIN_FRAME_LEN,
                got: bytes.len(),
            });
        }
        let body = &bytes[..bytes.len() - CRC_LEN];
        let carried = u16::from_le_bytes([bytes[bytes.len() - 2], bytes[bytes.len() - 1]]);
        let declared = usize::from(u16::from_be_bytes([bytes[2], bytes[3]]));
        let computed = crc16(body);
        if computed != carried {
            return Err(FrameError::CrcMismatch { computed, carried });
        }
        if declared > MAX_PAYLOAD {
            return Err(FrameError::Oversize(declared));
        }
        let actual = body.len() - HEADER_LEN;
        if declared != actual {
            return Err(FrameError::LengthMismatch { declared, actual });
        }
        Ok(Self {
            address: bytes[0],
            function: bytes[1],
            payload: body[HEADER_LEN..].to_vec(),
        })
    }

    /// Decodes the frame at the start of `buf`, returning it with the number
    /// of bytes it used. A buffer that ends before the declared frame does
    /// is [`FrameError::Truncated`].
    pub fn decode_prefix(buf: &[u8]) -> Result<(Self, usize), FrameError> {
        if buf.len() < HEADER_LEN {
            return Err(FrameError::Truncated {
                needed: MIN_FRAME_LEN,
                got: buf.len(),
            });
        }
        let declared = usize::from(u16::from_be_bytes([buf[2], buf[3]]));
        if declared > MAX_PAYLOAD {
            return Err(FrameError::Oversize(declared));
        }
        let total = MIN_FRAME_LEN + declared;
        if buf.len() < total {
            return Err(FrameError::Truncated {
                needed: total,
                got: buf.len(),
            });
        }
        Ok((Self::decode(&buf[..total])?, total))
    }

    /// Hex bytes plus decoded fields, one line.
    pub fn dump(&self) -> String {
        match self.encode() {
            Ok(bytes) => format!("{self} | {}", hex(&bytes)),
            Err(e) => format!("{self} | <{e}>"),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = self.function & !EXCEPTION_FLAG;
        let name = FunctionCode::from_u8(base).map_or("UNKNOWN", FunctionCode::name);
        if self.is_exception() {
            write!(
                f,
                "addr={:03} fn={:#04x} EXCEPTION({name}) code={}",
                self.address,
                self.function,
                self.exception_code().unwrap_or(0)
            )
        } else {
            write!(
                f,
                "addr={:03} fn={:#04x} {name} len={}",
                self.address,
                self.function,
                self.payload.len()
            )
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_values() {
        // standard check value for this CRC-16 variant
        assert_eq!(crc16(b"123456789"), 0x4B37);
        assert_eq!(crc16(&[]), 0xFFFF);
        // read-holding-registers request from the classic RTU examples
        assert_eq!(
            crc16(&[0x01, 0x03, 0x00, 0x00, 0x00, 0x0A]).to_le_bytes(),
            [0xC5, 0xCD]
        );
    }

    #[test]
    fn roundtrip_and_layout() {
        let f = Frame::new(5, FunctionCode::ReadTelemetry, vec![]);
        let bytes = f.encode().unwrap();
        assert_eq!(&bytes[..4], &[5, 1, 0, 0]);
        assert_eq!(bytes.len(), 6);
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
        assert!(f
            .dump()
            .starts_with("addr=005 fn=0x01 READ_TELEMETRY len=0 | 05 01 00 00"));
    }

    #[test]
    fn every_single_bit_flip_is_a_crc_mismatch() {
        let f = Frame::new(17, FunctionCode::WriteDayPlan, (0..18).collect());
        let bytes = f.encode().unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            assert!(
                matches!(Frame::decode(&b), Err(FrameError::CrcMismatch { .. })),
                "bit {bit}"
            );
        }
    }

    #[test]
    fn distinguishable_errors() {
        assert_eq!(
            Frame::decode(&[]),
            Err(FrameError::Truncated { needed: 6, got: 0 })
        );
        let bytes = Frame::new(1, FunctionCode::ReportStatus, vec![1, 2, 3])
            .encode()
            .unwrap();
        assert_eq!(
            Frame::decode_prefix(&bytes[..7]),
            Err(FrameError::Truncated { needed: 9, got: 7 })
        );
        assert!(matches!(
            Frame::decode(&bytes[..7]),
            Err(FrameError::CrcMismatch { .. })
        ));
        let mut two = bytes.clone();
        two.extend_from_slice(&bytes);
        assert_eq!(Frame::decode_prefix(&two).unwrap().1, 9);
        let big = Frame::new(1, FunctionCode::WriteDayPlan, vec![0; MAX_PAYLOAD + 1]);
        assert_eq!(big.encode(), Err(FrameError::Oversize(MAX_PAYLOAD + 1)));

        // well-formed checksum over a header that declares too much
        let mut raw = vec![1, 2, 0x08, 0x00];
        let crc = crc16(&raw);
        raw.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(Frame::decode(&raw), Err(FrameError::Oversize(0x800)));
    }

    #[test]
    fn exception_frames() {
        let e = Frame::exception(3, 0x42, ExceptionCode::IllegalFunction);
        assert!(e.is_exception());
        assert_eq!(e.function, 0xC2);
        assert_eq!(e.exception_code(), Some(1));
        assert!(e.to_string().contains("EXCEPTION"));
    }
}
