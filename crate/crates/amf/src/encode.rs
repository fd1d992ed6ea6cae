use std::collections::{HashMap, HashSet};

use crate::error::{AmfError, AmfResult};
use crate::marker;
use crate::u29::{write_u29, U29_MAX};
use crate::value::{AmfValue, INTEGER_MAX, INTEGER_MIN, MAX_DEPTH};

/// Encodes one value with fresh reference tables.
///
/// Repeated non-empty strings (values and keys alike) are emitted as string
/// table references. Object, array and traits references are never emitted.
pub fn encode_value(value: &AmfValue) -> AmfResult<Vec<u8>> {
    let mut enc = Encoder::default();
    enc.write_value(value, 0)?;
    Ok(enc.out)
}

#[derive(Default)]
struct Encoder {
    out: Vec<u8>,
    strings: HashMap<String, u32>,
}

impl Encoder {
    fn write_value(&mut self, value: &AmfValue, level: usize) -> AmfResult<()> {
        match value {
            AmfValue::Undefined => self.out.push(marker::UNDEFINED),
            AmfValue::Null => self.out.push(marker::NULL),
            AmfValue::Boolean(false) => self.out.push(marker::FALSE),
            AmfValue::Boolean(true) => self.out.push(marker::TRUE),
            AmfValue::Integer(n) => {
                let n = *n as i64;
                if (INTEGER_MIN..=INTEGER_MAX).contains(&n) {
                    self.out.push(marker::INTEGER);
                    write_u29(&mut self.out, (n as u32) & U29_MAX)?;
                } else {
                    self.write_double(n as f64);
                }
            }
            AmfValue::Double(d) => self.write_double(*d),
            AmfValue::String(s) => {
                self.out.push(marker::STRING);
                self.write_utf8_vr(s)?;
            }
            AmfValue::Date(millis) => {
                self.out.push(marker::DATE);
                self.out.push(0x01);
                self.out.extend_from_slice(&millis.to_be_bytes());
            }
            AmfValue::ByteArray(bytes) => {
                self.out.push(marker::BYTE_ARRAY);
                self.write_inline_len(bytes.len())?;
                self.out.extend_from_slice(bytes);
            }
            AmfValue::Array(arr) => {
                self.enter(level)?;
                self.out.push(marker::ARRAY);
                self.write_inline_len(arr.dense.len())?;
                self.write_pairs(&arr.assoc, level)?;
                for v in &arr.dense {
                    self.write_value(v, level + 1)?;
                }
            }
            AmfValue::Object(pairs) => {
                self.enter(level)?;
                self.out.push(marker::OBJECT);
                self.out.push(marker::DYNAMIC_ANONYMOUS_TRAITS);
                // anonymous class name
                self.out.push(0x01);
                self.write_pairs(pairs, level)?;
            }
        }
        Ok(())
    }

    fn enter(&self, level: usize) -> AmfResult<()> {
        if level + 1 > MAX_DEPTH {
            return Err(AmfError::Depth {
                offset: self.out.len(),
                limit: MAX_DEPTH,
            });
        }
        Ok(())
    }

    fn write_double(&mut self, d: f64) {
        self.out.push(marker::DOUBLE);
        self.out.extend_from_slice(&d.to_be_bytes());
    }

    fn write_inline_len(&mut self, len: usize) -> AmfResult<()> {
        let head = u32::try_from(len)
            .ok()
            .filter(|&n| n <= U29_MAX >> 1)
            .ok_or(AmfError::Range { value: len as u64 })?;
        write_u29(&mut self.out, (head << 1) | 1)
    }

    fn write_utf8_vr(&mut self, s: &str) -> AmfResult<()> {
        if s.is_empty() {
            self.out.push(0x01);
            return Ok(());
        }
        if let Some(&index) = self.strings.get(s) {
            return write_u29(&mut self.out, index << 1);
        }
        self.write_inline_len(s.len())?;
        self.out.extend_from_slice(s.as_bytes());
        let index = self.strings.len() as u32;
        self.strings.insert(s.to_owned(), index);
        Ok(())
    }

    fn write_pairs(&mut self, pairs: &[(String, AmfValue)], level: usize) -> AmfResult<()> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for (key, value) in pairs {
            if key.is_empty() {
                return Err(AmfError::Invariant("empty key in container".into()));
            }
            if !seen.insert(key.as_str()) {
                return Err(AmfError::Invariant(format!("duplicate key {key:?}")));
            }
            self.write_utf8_vr(key)?;
            self.write_value(value, level + 1)?;
        }
        self.out.push(0x01);
        Ok(())
    }
}
