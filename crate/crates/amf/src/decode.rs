use std::collections::HashSet;

use crate::error::{AmfError, AmfResult};
use crate::marker;
use crate::u29::decode_u29;
use crate::value::{AmfArray, AmfValue, MAX_DEPTH};

type Pairs = Vec<(String, AmfValue)>;

/// Upper bound on value nodes produced by one decode call, counting nodes
/// materialized by expanding object references. Stops reference bombs.
pub const MAX_EXPANDED_NODES: usize = 1 << 20;

/// Decodes one value from the front of `bytes` with fresh reference tables,
/// returning it together with the number of octets consumed.
pub fn decode_value(bytes: &[u8]) -> AmfResult<(AmfValue, usize)> {
    let mut dec = Decoder::new(bytes);
    let value = dec.read_value(0)?;
    Ok((value.value, dec.pos))
}

struct Decoded {
    value: AmfValue,
    nodes: usize,
    depth: usize,
}

impl Decoded {
    fn scalar(value: AmfValue) -> Self {
        Decoded {
            value,
            nodes: 1,
            depth: 0,
        }
    }
}

/// Object table slot; `None` while the container is still being decoded.
type ObjectSlot = Option<(AmfValue, usize, usize)>;

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
    strings: Vec<String>,
    objects: Vec<ObjectSlot>,
    traits: usize,
    nodes: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Decoder {
            buf,
            pos: 0,
            strings: Vec::new(),
            objects: Vec::new(),
            traits: 0,
            nodes: 0,
        }
    }

    fn take(&mut self, n: usize) -> AmfResult<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(AmfError::Truncated {
                offset: self.buf.len(),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_u8(&mut self) -> AmfResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn read_u29(&mut self) -> AmfResult<u32> {
        let (n, used) = decode_u29(&self.buf[self.pos..]).map_err(|e| e.rebase(self.pos))?;
        self.pos += used;
        Ok(n)
    }

    fn read_f64(&mut self) -> AmfResult<f64> {
        let raw: [u8; 8] = self.take(8)?.try_into().expect("8 octets");
        Ok(f64::from_be_bytes(raw))
    }

    fn count_node(&mut self, n: usize) -> AmfResult<()> {
        self.nodes += n;
        if self.nodes > MAX_EXPANDED_NODES {
            return Err(AmfError::protocol(
                self.pos,
                "reference expansion exceeds node limit",
            ));
        }
        Ok(())
    }

    fn read_utf8_vr(&mut self) -> AmfResult<String> {
        let start = self.pos;
        let head = self.read_u29()?;
        let index = (head >> 1) as usize;
        if head & 1 == 0 {
            return self.strings.get(index).cloned().ok_or(AmfError::Reference {
                offset: start,
                table: "string",
                index,
            });
        }
        if index == 0 {
            return Ok(String::new());
        }
        let body_at = self.pos;
        let raw = self.take(index)?;
        let s = std::str::from_utf8(raw)
            .map_err(|_| AmfError::protocol(body_at, "invalid UTF-8 in string"))?
            .to_owned();
        self.strings.push(s.clone());
        Ok(s)
    }

    /// Reads the U29 head of a by-reference type: `Ok(Ok(payload))` for
    /// inline data, `Ok(Err(decoded))` for a resolved object reference.
    fn read_object_head(&mut self, level: usize) -> AmfResult<Result<u32, Decoded>> {
        let start = self.pos;
        let head = self.read_u29()?;
        if head & 1 == 1 {
            return Ok(Ok(head >> 1));
        }
        let index = (head >> 1) as usize;
        let Some(Some((value, nodes, depth))) = self.objects.get(index) else {
            return Err(AmfError::Reference {
                offset: start,
                table: "object",
                index,
            });
        };
        if level + depth > MAX_DEPTH {
            return Err(AmfError::Depth {
                offset: start,
                limit: MAX_DEPTH,
            });
        }
        let decoded = Decoded {
            value: value.clone(),
            nodes: *nodes,
            depth: *depth,
        };
        self.count_node(decoded.nodes)?;
        Ok(Err(decoded))
    }

    fn reserve_slot(&mut self) -> usize {
        self.objects.push(None);
        self.objects.len() - 1
    }

    fn read_value(&mut self, level: usize) -> AmfResult<Decoded> {
        let marker_at = self.pos;
        let m = self.read_u8()?;
        let decoded = match m {
            marker::UNDEFINED => Decoded::scalar(AmfValue::Undefined),
            marker::NULL => Decoded::scalar(AmfValue::Null),
            marker::FALSE => Decoded::scalar(AmfValue::Boolean(false)),
            marker::TRUE => Decoded::scalar(AmfValue::Boolean(true)),
            marker::INTEGER => {
                let raw = self.read_u29()?;
                // sign-extend from 29 bits
                let n = ((raw << 3) as i32) >> 3;
                Decoded::scalar(AmfValue::Integer(n))
            }
            marker::DOUBLE => Decoded::scalar(AmfValue::Double(self.read_f64()?)),
            marker::STRING => Decoded::scalar(AmfValue::String(self.read_utf8_vr()?)),
            marker::DATE => match self.read_object_head(level)? {
                Err(found) => return Ok(found),
                Ok(_) => {
                    let millis = self.read_f64()?;
                    self.objects.push(Some((AmfValue::Date(millis), 1, 0)));
                    Decoded::scalar(AmfValue::Date(millis))
                }
            },
            marker::BYTE_ARRAY => match self.read_object_head(level)? {
                Err(found) => return Ok(found),
                Ok(len) => {
                    let bytes = self.take(len as usize)?.to_vec();
                    let value = AmfValue::ByteArray(bytes);
                    self.objects.push(Some((value.clone(), 1, 0)));
                    Decoded::scalar(value)
                }
            },
            marker::ARRAY => match self.read_object_head(level)? {
                Err(found) => return Ok(found),
                Ok(dense_len) => self.read_array(dense_len as usize, level, marker_at)?,
            },
            marker::OBJECT => self.read_object(level, marker_at)?,
            other => {
                return Err(AmfError::protocol(
                    marker_at,
                    format!("unsupported marker {other:#04x}"),
                ))
            }
        };
        self.count_node(1)?;
        Ok(decoded)
    }

    fn check_level(&self, level: usize, offset: usize) -> AmfResult<()> {
        if level + 1 > MAX_DEPTH {
            return Err(AmfError::Depth {
                offset,
                limit: MAX_DEPTH,
            });
        }
        Ok(())
    }

    fn read_pairs(&mut self, level: usize) -> AmfResult<(Pairs, usize, usize)> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        let mut nodes = 0;
        let mut depth = 0;
        loop {
            let key_at = self.pos;
            let key = self.read_utf8_vr()?;
            if key.is_empty() {
                break;
            }
            if !seen.insert(key.clone()) {
                return Err(AmfError::protocol(key_at, format!("duplicate key {key:?}")));
            }
            let child = self.read_value(level + 1)?;
            nodes += child.nodes;
            depth = depth.max(child.depth);
            pairs.push((key, child.value));
        }
        Ok((pairs, nodes, depth))
    }

    fn read_array(&mut self, dense_len: usize, level: usize, at: usize) -> AmfResult<Decoded> {
        self.check_level(level, at)?;
        let slot = self.reserve_slot();
        let (assoc, mut nodes, mut depth) = self.read_pairs(level)?;
        let mut dense = Vec::with_capacity(dense_len.min(self.buf.len() - self.pos));
        for _ in 0..dense_len {
            let child = self.read_value(level + 1)?;
            nodes += child.nodes;
            depth = depth.max(child.depth);
            dense.push(child.value);
        }
        self.finish_container(slot, AmfValue::Array(AmfArray { assoc, dense }), nodes, depth)
    }

    fn read_object(&mut self, level: usize, at: usize) -> AmfResult<Decoded> {
        let head_at = self.pos;
        let head = self.read_u29()?;
        if head & 1 == 0 {
            self.pos = head_at;
            return match self.read_object_head(level)? {
                Err(found) => Ok(found),
                Ok(_) => unreachable!("low bit already checked"),
            };
        }
        if head & 0b10 == 0 {
            let index = (head >> 2) as usize;
            if index >= self.traits {
                return Err(AmfError::Reference {
                    offset: head_at,
                    table: "traits",
                    index,
                });
            }
        } else {
            let class_name = self.read_utf8_vr()?;
            if head & 0b100 != 0 {
                return Err(AmfError::protocol(head_at, "externalizable objects are not supported"));
            }
            if head & 0b1000 == 0 || head >> 4 != 0 {
                return Err(AmfError::protocol(head_at, "sealed traits are not supported"));
            }
            if !class_name.is_empty() {
                return Err(AmfError::protocol(
                    head_at,
                    format!("typed object {class_name:?} is not supported"),
                ));
            }
            self.traits += 1;
        }
        self.check_level(level, at)?;
        let slot = self.reserve_slot();
        let (pairs, nodes, depth) = self.read_pairs(level)?;
        self.finish_container(slot, AmfValue::Object(pairs), nodes, depth)
    }

    fn finish_container(
        &mut self,
        slot: usize,
        value: AmfValue,
        child_nodes: usize,
        child_depth: usize,
    ) -> AmfResult<Decoded> {
        let nodes = child_nodes + 1;
        let depth = child_depth + 1;
        self.objects[slot] = Some((value.clone(), nodes, depth));
        Ok(Decoded { value, nodes, depth })
    }
}
