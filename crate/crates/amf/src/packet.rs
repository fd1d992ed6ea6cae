//! Remoting envelope. All integers are big-endian:
//!
//! ```text
//! version u16 (=3)
//! header_count u16
//!   name (u16 len + UTF-8), must_understand u8, body_length u32, AMF3 value
//! message_count u16
//!   target_uri (u16 len + UTF-8), response_uri (u16 len + UTF-8),
//!   body_length u32, AMF3 value
//! ```
//!
//! A `body_length` of `0xFFFFFFFF` means unknown; the decoder then parses the
//! value without a bound. Known lengths must match the value exactly.

use crate::decode::decode_value;
use crate::encode::encode_value;
use crate::error::{AmfError, AmfResult};
use crate::value::AmfValue;

pub const AMF_VERSION: u16 = 3;
pub const UNKNOWN_LENGTH: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, PartialEq)]
pub struct AmfHeader {
    pub name: String,
    pub must_understand: bool,
    pub value: AmfValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmfMessage {
    pub target_uri: String,
    pub response_uri: String,
    pub body: AmfValue,
}

impl AmfMessage {
    pub fn new(target_uri: impl Into<String>, response_uri: impl Into<String>, body: AmfValue) -> Self {
        AmfMessage {
            target_uri: target_uri.into(),
            response_uri: response_uri.into(),
            body,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmfPacket {
    pub version: u16,
    pub headers: Vec<AmfHeader>,
    pub messages: Vec<AmfMessage>,
}

impl Default for AmfPacket {
    fn default() -> Self {
        AmfPacket {
            version: AMF_VERSION,
            headers: Vec::new(),
            messages: Vec::new(),
        }
    }
}

impl AmfPacket {
    pub fn with_messages(messages: Vec<AmfMessage>) -> Self {
        AmfPacket {
            messages,
            ..AmfPacket::default()
        }
    }
}

pub fn encode_packet(packet: &AmfPacket) -> AmfResult<Vec<u8>> {
    if packet.version != AMF_VERSION {
        return Err(AmfError::Invariant(format!(
            "unsupported version {}",
            packet.version
        )));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&packet.version.to_be_bytes());
    write_count(&mut out, packet.headers.len(), "header")?;
    for header in &packet.headers {
        if header.name.is_empty() {
            return Err(AmfError::Invariant("empty header name".into()));
        }
        write_short_string(&mut out, &header.name)?;
        out.push(header.must_understand as u8);
        write_body(&mut out, &header.value)?;
    }
    write_count(&mut out, packet.messages.len(), "message")?;
    for message in &packet.messages {
        write_short_string(&mut out, &message.target_uri)?;
        write_short_string(&mut out, &message.response_uri)?;
        write_body(&mut out, &message.body)?;
    }
    Ok(out)
}

fn write_count(out: &mut Vec<u8>, n: usize, what: &str) -> AmfResult<()> {
    let n = u16::try_from(n).map_err(|_| AmfError::Invariant(format!("too many {what}s: {n}")))?;
    out.extend_from_slice(&n.to_be_bytes());
    Ok(())
}

fn write_short_string(out: &mut Vec<u8>, s: &str) -> AmfResult<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| AmfError::Invariant(format!("string of {} octets exceeds u16 length", s.len())))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn write_body(out: &mut Vec<u8>, value: &AmfValue) -> AmfResult<()> {
    let body = encode_value(value)?;
    let len = u32::try_from(body.len())
        .ok()
        .filter(|&n| n != UNKNOWN_LENGTH)
        .ok_or_else(|| AmfError::Invariant("body too large".into()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&body);
    Ok(())
}

/// Decodes a complete packet. Trailing octets after the last message are a
/// protocol error.
pub fn decode_packet(bytes: &[u8]) -> AmfResult<AmfPacket> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let version = r.u16()?;
    if version != AMF_VERSION {
        return Err(AmfError::protocol(0, format!("unsupported version {version}")));
    }
    let header_count = r.u16()?;
    let mut headers = Vec::with_capacity(header_count.into());
    for _ in 0..header_count {
        let name_at = r.pos;
        let name = r.short_string()?;
        if name.is_empty() {
            return Err(AmfError::protocol(name_at, "empty header name"));
        }
        let flag_at = r.pos;
        let must_understand = match r.u8()? {
            0 => false,
            1 => true,
            other => {
                return Err(AmfError::protocol(
                    flag_at,
                    format!("must_understand flag {other} is not 0 or 1"),
                ))
            }
        };
        let value = r.body()?;
        headers.push(AmfHeader {
            name,
            must_understand,
            value,
        });
    }
    let message_count = r.u16()?;
    let mut messages = Vec::with_capacity(message_count.into());
    for _ in 0..message_count {
        let target_uri = r.short_string()?;
        let response_uri = r.short_string()?;
        let body = r.body()?;
        messages.push(AmfMessage {
            target_uri,
            response_uri,
            body,
        });
    }
    if r.pos != bytes.len() {
        return Err(AmfError::protocol(
            r.pos,
            format!("{} trailing octets", bytes.len() - r.pos),
        ));
    }
    Ok(AmfPacket {
        version,
        headers,
        messages,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> AmfResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(AmfError::Truncated {
                offset: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> AmfResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> AmfResult<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2 octets")))
    }

    fn u32(&mut self) -> AmfResult<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 octets")))
    }

    fn short_string(&mut self) -> AmfResult<String> {
        let len = self.u16()? as usize;
        let at = self.pos;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| AmfError::protocol(at, "invalid UTF-8 in string"))
    }

    fn body(&mut self) -> AmfResult<AmfValue> {
        let len = self.u32()?;
        let at = self.pos;
        if len == UNKNOWN_LENGTH {
            let (value, used) = decode_value(&self.buf[at..]).map_err(|e| e.rebase(at))?;
            self.pos += used;
            return Ok(value);
        }
        let slice = self.take(len as usize)?;
        let (value, used) = decode_value(slice).map_err(|e| e.rebase(at))?;
        if used != slice.len() {
            return Err(AmfError::protocol(
                at + used,
                format!("body length {len} but value used {used} octets"),
            ));
        }
        Ok(value)
    }
}
