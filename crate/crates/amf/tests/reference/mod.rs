//! Bridge to the `amf` crate, an independently written AMF3 codec used as
//! an oracle for the golden vectors. Shared with the workspace acceptance
//! suite.

use std::time::Duration;

use amf::amf3::Value as Other;
use amf::Pair;
use flexgui_amf::corpus::{parse_corpus, Case};
use flexgui_amf::{AmfArray, AmfValue};

pub fn from_other(v: Other) -> AmfValue {
    let pairs = |entries: Vec<Pair<String, Other>>| {
        entries
            .into_iter()
            .map(|p| (p.key, from_other(p.value)))
            .collect::<Vec<_>>()
    };
    match v {
        Other::Undefined => AmfValue::Undefined,
        Other::Null => AmfValue::Null,
        Other::Boolean(b) => AmfValue::Boolean(b),
        Other::Integer(n) => AmfValue::Integer(n),
        Other::Double(d) => AmfValue::Double(d),
        Other::String(s) => AmfValue::String(s),
        Other::Date { unix_time } => AmfValue::Date(unix_time.as_millis() as f64),
        Other::ByteArray(b) => AmfValue::ByteArray(b),
        Other::Array {
            assoc_entries,
            dense_entries,
        } => AmfValue::Array(AmfArray {
            assoc: pairs(assoc_entries),
            dense: dense_entries.into_iter().map(from_other).collect(),
        }),
        Other::Object {
            class_name: None,
            sealed_count: 0,
            entries,
        } => AmfValue::Object(pairs(entries)),
        other => panic!("unexpected value from reference codec: {other:?}"),
    }
}

pub fn to_other(v: &AmfValue) -> Other {
    let pairs = |entries: &[(String, AmfValue)]| {
        entries
            .iter()
            .map(|(k, v)| Pair {
                key: k.clone(),
                value: to_other(v),
            })
            .collect::<Vec<_>>()
    };
    match v {
        AmfValue::Undefined => Other::Undefined,
        AmfValue::Null => Other::Null,
        AmfValue::Boolean(b) => Other::Boolean(*b),
        AmfValue::Integer(n) => Other::Integer(*n),
        AmfValue::Double(d) => Other::Double(*d),
        AmfValue::String(s) => Other::String(s.clone()),
        AmfValue::Date(ms) => Other::Date {
            unix_time: Duration::from_millis(*ms as u64),
        },
        AmfValue::ByteArray(b) => Other::ByteArray(b.clone()),
        AmfValue::Array(arr) => Other::Array {
            assoc_entries: pairs(&arr.assoc),
            dense_entries: arr.dense.iter().map(to_other).collect(),
        },
        AmfValue::Object(entries) => Other::Object {
            class_name: None,
            sealed_count: 0,
            entries: pairs(entries),
        },
    }
}

/// The reference encoder never emits string references and writes empty
/// objects with non-dynamic traits, so byte comparison only applies to
/// values free of both.
pub fn reference_encoding_comparable(v: &AmfValue, seen: &mut Vec<String>) -> bool {
    fn note(s: &str, seen: &mut Vec<String>) -> bool {
        if s.is_empty() {
            return true;
        }
        if seen.iter().any(|x| x == s) {
            return false;
        }
        seen.push(s.to_owned());
        true
    }
    let pairs_ok = |pairs: &[(String, AmfValue)], seen: &mut Vec<String>| {
        pairs
            .iter()
            .all(|(k, v)| note(k, seen) && reference_encoding_comparable(v, seen))
    };
    match v {
        AmfValue::String(s) => note(s, seen),
        AmfValue::Object(pairs) => !pairs.is_empty() && pairs_ok(pairs, seen),
        AmfValue::Array(arr) => {
            pairs_ok(&arr.assoc, seen)
                && arr.dense.iter().all(|v| reference_encoding_comparable(v, seen))
        }
        _ => true,
    }
}

/// Decodes every ok value vector with the reference codec and, where the
/// reference encoder is comparable, re-encodes it. Returns how many vectors
/// were decoded and encoded.
pub fn cross_check_corpus(corpus: &str) -> Result<(usize, usize), String> {
    let vectors = parse_corpus(corpus).map_err(|e| e.to_string())?;
    let mut decoded = 0;
    let mut encoded = 0;
    for v in &vectors {
        let Case::Value(expected) = &v.case else { continue };
        let other = Other::read_from(&mut &v.bytes[..])
            .map_err(|e| format!("line {}: reference decode failed: {e:?}", v.line))?;
        if &from_other(other) != expected {
            return Err(format!("line {}: reference decodes a different value", v.line));
        }
        decoded += 1;
        if reference_encoding_comparable(expected, &mut Vec::new()) {
            let mut buf = Vec::new();
            to_other(expected)
                .write_to(&mut buf)
                .map_err(|e| format!("line {}: reference encode failed: {e:?}", v.line))?;
            if buf != v.bytes {
                return Err(format!("line {}: reference encoding differs", v.line));
            }
            encoded += 1;
        }
    }
    Ok((decoded, encoded))
}
