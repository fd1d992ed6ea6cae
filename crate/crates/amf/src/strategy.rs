//! Proptest generators for codec values and packets.

use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

use crate::packet::{AmfHeader, AmfMessage, AmfPacket, AMF_VERSION};
use crate::value::{AmfArray, AmfValue, INTEGER_MAX, INTEGER_MIN};

/// Strings drawn from a small alphabet so repeats (and thus string
/// references) are common, mixed with arbitrary printable text.
pub fn amf_string() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => "[ab]{0,3}",
        1 => "\\PC{0,16}",
    ]
}

fn key() -> impl Strategy<Value = String> {
    prop_oneof!["[a-d]{1,2}", "\\PC{1,8}"]
}

pub fn amf_scalar() -> impl Strategy<Value = AmfValue> {
    prop_oneof![
        Just(AmfValue::Undefined),
        Just(AmfValue::Null),
        any::<bool>().prop_map(AmfValue::Boolean),
        (INTEGER_MIN..=INTEGER_MAX).prop_map(|n| AmfValue::Integer(n as i32)),
        any::<f64>().prop_map(AmfValue::Double),
        amf_string().prop_map(AmfValue::String),
        (-1e13f64..1e13).prop_map(|ms| AmfValue::Date(ms.trunc())),
        vec(any::<u8>(), 0..16).prop_map(AmfValue::ByteArray),
    ]
}

/// Arbitrary valid values with container depth at most `depth`.
pub fn amf_value_with_depth(depth: u32) -> impl Strategy<Value = AmfValue> {
    amf_scalar().prop_recursive(depth, 256, 6, |inner| {
        prop_oneof![
            vec(inner.clone(), 0..6).prop_map(AmfValue::dense),
            btree_map(key(), inner.clone(), 0..5)
                .prop_map(|m| AmfValue::Object(m.into_iter().collect())),
            (btree_map(key(), inner.clone(), 0..3), vec(inner, 0..4)).prop_map(|(assoc, dense)| {
                AmfValue::Array(AmfArray {
                    assoc: assoc.into_iter().collect(),
                    dense,
                })
            }),
        ]
    })
}

fn wrap(inner: AmfValue, (kind, siblings, at): (u8, Vec<AmfValue>, usize)) -> AmfValue {
    let at = at.min(siblings.len());
    match kind {
        0 => {
            let mut dense = siblings;
            dense.insert(at, inner);
            AmfValue::dense(dense)
        }
        1 => {
            let mut pairs: Vec<(String, AmfValue)> =
                siblings.into_iter().enumerate().map(|(i, v)| (format!("s{i}"), v)).collect();
            pairs.insert(at, ("inner".into(), inner));
            AmfValue::Object(pairs)
        }
        _ => AmfValue::Array(AmfArray {
            assoc: vec![("inner".into(), inner)],
            dense: siblings,
        }),
    }
}

/// Values built around a single nested spine, so the full depth budget is
/// actually reached (recursive generation rarely gets past depth 4).
pub fn amf_spine(depth: u32) -> impl Strategy<Value = AmfValue> {
    let layer = (0u8..3, vec(amf_scalar(), 0..3), 0usize..3);
    (amf_value_with_depth(1), vec(layer, 0..depth as usize))
        .prop_map(|(leaf, layers)| layers.into_iter().fold(leaf, wrap))
}

/// Arbitrary valid values with container depth at most 8.
pub fn amf_value() -> impl Strategy<Value = AmfValue> {
    prop_oneof![
        3 => amf_value_with_depth(8),
        1 => amf_spine(8),
    ]
}

pub fn amf_message() -> impl Strategy<Value = AmfMessage> {
    ("[a-z]{1,8}\\.[a-zA-Z]{1,8}", "/[0-9]{1,3}", amf_value_with_depth(4)).prop_map(
        |(target_uri, response_uri, body)| AmfMessage {
            target_uri,
            response_uri,
            body,
        },
    )
}

pub fn amf_packet() -> impl Strategy<Value = AmfPacket> {
    let header = ("[A-Za-z]{1,12}", any::<bool>(), amf_value_with_depth(2)).prop_map(
        |(name, must_understand, value)| AmfHeader {
            name,
            must_understand,
            value,
        },
    );
    (vec(header, 0..3), vec(amf_message(), 0..5)).prop_map(|(headers, messages)| AmfPacket {
        version: AMF_VERSION,
        headers,
        messages,
    })
}
