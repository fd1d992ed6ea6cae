//! AMF3 value codec and the remoting packet envelope.
//!
//! Everything here is a pure function of its input: reference tables live
//! for the duration of one [`encode_value`] / [`decode_value`] call, so each
//! packet body decodes independently.

pub mod corpus;
mod decode;
mod encode;
mod error;
mod packet;
#[cfg(feature = "testing")]
pub mod strategy;
pub mod text;
mod u29;
mod value;

pub use decode::{decode_value, MAX_EXPANDED_NODES};
pub use encode::encode_value;
pub use error::{AmfError, AmfResult, ErrorKind};
pub use packet::{
    decode_packet, encode_packet, AmfHeader, AmfMessage, AmfPacket, AMF_VERSION, UNKNOWN_LENGTH,
};
pub use u29::{decode_u29, encode_u29, U29_MAX};
pub use value::{AmfArray, AmfValue, INTEGER_MAX, INTEGER_MIN, MAX_DEPTH};

/// AMF3 type markers.
pub mod marker {
    pub const UNDEFINED: u8 = 0x00;
    pub const NULL: u8 = 0x01;
    pub const FALSE: u8 = 0x02;
    pub const TRUE: u8 = 0x03;
    pub const INTEGER: u8 = 0x04;
    pub const DOUBLE: u8 = 0x05;
    pub const STRING: u8 = 0x06;
    pub const DATE: u8 = 0x08;
    pub const ARRAY: u8 = 0x09;
    pub const OBJECT: u8 = 0x0A;
    pub const BYTE_ARRAY: u8 = 0x0C;

    /// Object head for inline, dynamic traits with no sealed members.
    pub const DYNAMIC_ANONYMOUS_TRAITS: u8 = 0x0B;
}
