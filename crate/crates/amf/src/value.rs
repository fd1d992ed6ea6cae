use std::collections::HashSet;

use crate::error::{AmfError, AmfResult};

/// Smallest signed value carried by the Integer marker.
pub const INTEGER_MIN: i64 = -(1 << 28);
/// Largest signed value carried by the Integer marker.
pub const INTEGER_MAX: i64 = (1 << 28) - 1;
/// Maximum container nesting accepted by the encoder and decoder.
pub const MAX_DEPTH: usize = 64;

/// A wire-encodable AMF3 value.
///
/// `Integer` payloads outside `INTEGER_MIN..=INTEGER_MAX` are written with the
/// Double marker, so they come back as `Double`. Use [`AmfValue::from_i64`] to
/// pick the right variant up front.
///
/// Equality treats two NaN doubles (or dates) as equal so that round-trip
/// comparisons are meaningful.
#[derive(Debug, Clone)]
pub enum AmfValue {
    Undefined,
    Null,
    Boolean(bool),
    Integer(i32),
    Double(f64),
    String(String),
    Array(AmfArray),
    /// Anonymous dynamic object; keys are non-empty and unique.
    Object(Vec<(String, AmfValue)>),
    /// Milliseconds since the Unix epoch.
    Date(f64),
    ByteArray(Vec<u8>),
}

/// Mixed AMF3 array: ordered associative part followed by a dense part.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AmfArray {
    pub assoc: Vec<(String, AmfValue)>,
    pub dense: Vec<AmfValue>,
}

fn same_double(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

impl PartialEq for AmfValue {
    fn eq(&self, other: &Self) -> bool {
        use AmfValue::*;
        match (self, other) {
            (Undefined, Undefined) | (Null, Null) => true,
            (Boolean(a), Boolean(b)) => a == b,
            (Integer(a), Integer(b)) => a == b,
            (Double(a), Double(b)) | (Date(a), Date(b)) => same_double(*a, *b),
            (String(a), String(b)) => a == b,
            (Array(a), Array(b)) => a == b,
            (Object(a), Object(b)) => a == b,
            (ByteArray(a), ByteArray(b)) => a == b,
            _ => false,
        }
    }
}

impl AmfValue {
    /// Integer when it fits the 29-bit signed range, Double otherwise.
    pub fn from_i64(n: i64) -> Self {
        if (INTEGER_MIN..=INTEGER_MAX).contains(&n) {
            AmfValue::Integer(n as i32)
        } else {
            AmfValue::Double(n as f64)
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        AmfValue::String(s.into())
    }

    /// Dense-only array.
    pub fn dense(values: impl IntoIterator<Item = AmfValue>) -> Self {
        AmfValue::Array(AmfArray {
            assoc: Vec::new(),
            dense: values.into_iter().collect(),
        })
    }

    pub fn object<K: Into<String>>(pairs: impl IntoIterator<Item = (K, AmfValue)>) -> Self {
        AmfValue::Object(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Looks up a member of an Object (or the associative part of an Array).
    pub fn get(&self, key: &str) -> Option<&AmfValue> {
        let pairs = match self {
            AmfValue::Object(pairs) => pairs,
            AmfValue::Array(arr) => &arr.assoc,
            _ => return None,
        };
        pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AmfValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AmfValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    /// Integer value of an Integer, or of a Double with no fractional part.
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            AmfValue::Integer(n) => Some(*n as i64),
            AmfValue::Double(d)
                if d.fract() == 0.0 && d.abs() < 9_007_199_254_740_992.0 =>
            {
                Some(*d as i64)
            }
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AmfValue::Integer(n) => Some(*n as f64),
            AmfValue::Double(d) => Some(*d),
            _ => None,
        }
    }

    /// Dense elements of an Array.
    pub fn as_dense(&self) -> Option<&[AmfValue]> {
        match self {
            AmfValue::Array(arr) => Some(&arr.dense),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&[(String, AmfValue)]> {
        match self {
            AmfValue::Object(pairs) => Some(pairs),
            _ => None,
        }
    }

    pub fn is_container(&self) -> bool {
        matches!(self, AmfValue::Array(_) | AmfValue::Object(_))
    }

    /// Container nesting depth: 0 for scalars, 1 + deepest child otherwise.
    pub fn depth(&self) -> usize {
        match self {
            AmfValue::Array(arr) => {
                1 + arr
                    .assoc
                    .iter()
                    .map(|(_, v)| v)
                    .chain(&arr.dense)
                    .map(AmfValue::depth)
                    .max()
                    .unwrap_or(0)
            }
            AmfValue::Object(pairs) => {
                1 + pairs.iter().map(|(_, v)| v.depth()).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// Total number of value nodes, this one included.
    pub fn node_count(&self) -> usize {
        match self {
            AmfValue::Array(arr) => {
                1 + arr.assoc.iter().map(|(_, v)| v.node_count()).sum::<usize>()
                    + arr.dense.iter().map(AmfValue::node_count).sum::<usize>()
            }
            AmfValue::Object(pairs) => 1 + pairs.iter().map(|(_, v)| v.node_count()).sum::<usize>(),
            _ => 1,
        }
    }

    /// Checks key and depth invariants.
    pub fn validate(&self) -> AmfResult<()> {
        self.validate_at(0)
    }

    fn validate_at(&self, level: usize) -> AmfResult<()> {
        let pairs = match self {
            AmfValue::Array(arr) => {
                for v in &arr.dense {
                    v.validate_at(level + 1)?;
                }
                &arr.assoc
            }
            AmfValue::Object(pairs) => pairs,
            _ => return Ok(()),
        };
        if level + 1 > MAX_DEPTH {
            return Err(AmfError::Depth {
                offset: 0,
                limit: MAX_DEPTH,
            });
        }
        check_keys(pairs.iter().map(|(k, _)| k.as_str()))?;
        for (_, v) in pairs {
            v.validate_at(level + 1)?;
        }
        Ok(())
    }
}

pub(crate) fn check_keys<'a>(keys: impl Iterator<Item = &'a str>) -> AmfResult<()> {
    let mut seen = HashSet::new();
    for key in keys {
        if key.is_empty() {
            return Err(AmfError::Invariant("empty key in container".into()));
        }
        if !seen.insert(key) {
            return Err(AmfError::Invariant(format!("duplicate key {key:?}")));
        }
    }
    Ok(())
}

impl From<bool> for AmfValue {
    fn from(b: bool) -> Self {
        AmfValue::Boolean(b)
    }
}

impl From<&str> for AmfValue {
    fn from(s: &str) -> Self {
        AmfValue::String(s.to_owned())
    }
}

impl From<String> for AmfValue {
    fn from(s: String) -> Self {
        AmfValue::String(s)
    }
}

impl From<i64> for AmfValue {
    fn from(n: i64) -> Self {
        AmfValue::from_i64(n)
    }
}

impl From<f64> for AmfValue {
    fn from(d: f64) -> Self {
        AmfValue::Double(d)
    }
}

impl<T: Into<AmfValue>> From<Option<T>> for AmfValue {
    fn from(v: Option<T>) -> Self {
        v.map_or(AmfValue::Null, Into::into)
    }
}
