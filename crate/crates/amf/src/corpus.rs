//! Conformance corpus: one vector per line,
//! `hex-bytes TAB canonical-text-form TAB expect`.
//!
//! For `ok` rows the text column is a value in [`crate::text`] form, or
//! `u29(N)` for a bare U29 vector; both directions are checked. For error
//! rows (`expect` is an error kind such as `truncation`) the text column names
//! the decoder to run: `value`, `u29` or `packet`. Blank lines and lines
//! starting with `#` are skipped.

use thiserror::Error;

use crate::error::ErrorKind;
use crate::text::{parse_hex, parse_value, to_hex};
use crate::value::AmfValue;
use crate::{decode_packet, decode_u29, decode_value, encode_u29, encode_value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecodeTarget {
    Value,
    U29,
    Packet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Case {
    Value(AmfValue),
    U29(u32),
    Reject { target: DecodeTarget, kind: ErrorKind },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    pub line: usize,
    pub bytes: Vec<u8>,
    pub case: Case,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corpus line {line}: {message}")]
pub struct CorpusError {
    pub line: usize,
    pub message: String,
}

pub fn parse_corpus(text: &str) -> Result<Vec<Vector>, CorpusError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| CorpusError { line, message };
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let [hex, form, expect] = cols[..] else {
            return Err(err(format!("expected 3 tab-separated columns, got {}", cols.len())));
        };
        let bytes = parse_hex(hex).ok_or_else(|| err(format!("bad hex {hex:?}")))?;
        let form = form.trim();
        let case = match expect.trim() {
            "ok" => match form.strip_prefix("u29(").and_then(|s| s.strip_suffix(')')) {
                Some(n) => Case::U29(n.trim().parse().map_err(|_| err(format!("bad u29 {n:?}")))?),
                None => Case::Value(parse_value(form).map_err(|e| err(e.to_string()))?),
            },
            kind => {
                let kind = ErrorKind::parse(kind).ok_or_else(|| err(format!("unknown expectation {kind:?}")))?;
                let target = match form {
                    "value" => DecodeTarget::Value,
                    "u29" => DecodeTarget::U29,
                    "packet" => DecodeTarget::Packet,
                    other => return Err(err(format!("unknown decoder {other:?}"))),
                };
                Case::Reject { target, kind }
            }
        };
        out.push(Vector { line, bytes, case });
    }
    Ok(out)
}

impl Vector {
    /// Runs the vector in every applicable direction.
    pub fn check(&self) -> Result<(), String> {
        let hex = to_hex(&self.bytes);
        match &self.case {
            Case::Value(expected) => {
                let (got, used) = decode_value(&self.bytes).map_err(|e| format!("decode {hex}: {e}"))?;
                if got != *expected || used != self.bytes.len() {
                    return Err(format!("decode {hex}: got {got} using {used} octets"));
                }
                let encoded = encode_value(expected).map_err(|e| format!("encode {expected}: {e}"))?;
                if encoded != self.bytes {
                    return Err(format!("encode {expected}: got {}", to_hex(&encoded)));
                }
            }
            Case::U29(n) => {
                let (got, used) = decode_u29(&self.bytes).map_err(|e| format!("decode {hex}: {e}"))?;
                if got != *n || used != self.bytes.len() {
                    return Err(format!("decode {hex}: got u29({got}) using {used} octets"));
                }
                let encoded = encode_u29(*n as u64).map_err(|e| format!("encode u29({n}): {e}"))?;
                if encoded != self.bytes {
                    return Err(format!("encode u29({n}): got {}", to_hex(&encoded)));
                }
            }
            Case::Reject { target, kind } => {
                let result = match target {
                    DecodeTarget::Value => decode_value(&self.bytes).map(|_| ()),
                    DecodeTarget::U29 => decode_u29(&self.bytes).map(|_| ()),
                    DecodeTarget::Packet => decode_packet(&self.bytes).map(|_| ()),
                };
                match result {
                    Ok(()) => return Err(format!("{hex}: decoded but expected {}", kind.as_str())),
                    Err(e) if e.kind() != *kind => {
                        return Err(format!("{hex}: expected {}, got {e}", kind.as_str()))
                    }
                    Err(_) => {}
                }
            }
        }
        Ok(())
    }
}
