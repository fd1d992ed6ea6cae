//! AMF3 variable-length 29-bit unsigned integers.
//!
//! The first three octets carry 7 payload bits each with the high bit as a
//! continuation flag; a fourth octet, when present, carries a full 8 bits.

use crate::error::{AmfError, AmfResult};

/// Largest value representable as a U29.
pub const U29_MAX: u32 = (1 << 29) - 1;

/// Encoded length of `n` in octets, or `None` if `n` is out of range.
pub fn encoded_len(n: u32) -> Option<usize> {
    match n {
        0..=0x7F => Some(1),
        0x80..=0x3FFF => Some(2),
        0x4000..=0x1F_FFFF => Some(3),
        0x20_0000..=U29_MAX => Some(4),
        _ => None,
    }
}

/// Appends the minimal encoding of `n` to `out`.
pub fn write_u29(out: &mut Vec<u8>, n: u32) -> AmfResult<()> {
    match encoded_len(n) {
        Some(1) => out.push(n as u8),
        Some(2) => out.extend_from_slice(&[0x80 | (n >> 7) as u8, (n & 0x7F) as u8]),
        Some(3) => out.extend_from_slice(&[
            0x80 | (n >> 14) as u8,
            0x80 | ((n >> 7) & 0x7F) as u8,
            (n & 0x7F) as u8,
        ]),
        Some(_) => out.extend_from_slice(&[
            0x80 | (n >> 22) as u8,
            0x80 | ((n >> 15) & 0x7F) as u8,
            0x80 | ((n >> 8) & 0x7F) as u8,
            (n & 0xFF) as u8,
        ]),
        None => return Err(AmfError::Range { value: n as u64 }),
    }
    Ok(())
}

/// Encodes `n` as a fresh octet vector.
pub fn encode_u29(n: u64) -> AmfResult<Vec<u8>> {
    let n = u32::try_from(n)
        .ok()
        .filter(|&n| n <= U29_MAX)
        .ok_or(AmfError::Range { value: n })?;
    let mut out = Vec::with_capacity(4);
    write_u29(&mut out, n)?;
    Ok(out)
}

/// Decodes a U29 from the front of `bytes`, returning the value and the
/// number of octets consumed. Non-minimal encodings are accepted.
pub fn decode_u29(bytes: &[u8]) -> AmfResult<(u32, usize)> {
    let mut n: u32 = 0;
    for i in 0..4 {
        let Some(&b) = bytes.get(i) else {
            return Err(AmfError::Truncated { offset: i });
        };
        if i == 3 {
            return Ok(((n << 8) | b as u32, 4));
        }
        n = (n << 7) | (b & 0x7F) as u32;
        if b & 0x80 == 0 {
            return Ok((n, i + 1));
        }
    }
    unreachable!("loop returns by the fourth octet")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(encode_u29(0).unwrap(), [0x00]);
        assert_eq!(encode_u29(300).unwrap(), [0x82, 0x2C]);
        assert_eq!(encode_u29(U29_MAX as u64).unwrap(), [0xFF, 0xFF, 0xFF, 0xFF]);
        assert_eq!(decode_u29(&[0xBF, 0xFF, 0xFF, 0xFF]).unwrap(), ((1 << 28) - 1, 4));
        assert_eq!(decode_u29(&[0x7F]).unwrap(), (127, 1));
        assert_eq!(decode_u29(&[0x82, 0x2C]).unwrap(), (300, 2));
        assert_eq!(decode_u29(&[0x80]), Err(AmfError::Truncated { offset: 1 }));
    }

    #[test]
    fn out_of_range() {
        assert_eq!(
            encode_u29(1 << 29),
            Err(AmfError::Range { value: 1 << 29 })
        );
        assert!(encode_u29(u64::MAX).is_err());
    }

    #[test]
    fn length_thresholds() {
        for (n, len) in [
            (0x7F, 1),
            (0x80, 2),
            (0x3FFF, 2),
            (0x4000, 3),
            (0x1F_FFFF, 3),
            (0x20_0000, 4),
            (U29_MAX, 4),
        ] {
            assert_eq!(encode_u29(n as u64).unwrap().len(), len, "n = {n:#x}");
        }
    }

    #[test]
    fn empty_input_is_truncation() {
        assert_eq!(decode_u29(&[]), Err(AmfError::Truncated { offset: 0 }));
    }

    #[test]
    fn non_minimal_accepted() {
        assert_eq!(decode_u29(&[0x80, 0x05]).unwrap(), (5, 2));
    }

    proptest::proptest! {
        #[test]
        fn roundtrip(n in 0u32..=U29_MAX) {
            let bytes = encode_u29(n as u64).unwrap();
            proptest::prop_assert_eq!(bytes.len(), encoded_len(n).unwrap());
            proptest::prop_assert_eq!(decode_u29(&bytes).unwrap(), (n, bytes.len()));
        }
    }
}
