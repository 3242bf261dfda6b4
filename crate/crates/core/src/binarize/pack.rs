use crate::error::{Error, Result};

/// Packs a `+1/-1` sign vector into bytes, most significant bit first;
/// a set bit means `+1`. Trailing pad bits are zero.
pub fn pack_bits(signs: &[i8]) -> Result<Vec<u8>> {
    if signs.is_empty() {
        return Err(Error::invalid("cannot pack an empty sign vector"));
    }
    let mut out = vec![0u8; signs.len().div_ceil(8)];
    for (i, &s) in signs.iter().enumerate() {
        match s {
            1 => out[i / 8] |= 0x80 >> (i % 8),
            -1 => {}
            other => return Err(Error::invalid(format!("sign {other} at {i} is not +1 or -1"))),
        }
    }
    Ok(out)
}

/// Inverse of [`pack_bits`]. Rejects a byte count other than `ceil(n/8)`
/// and non-zero pad bits.
pub fn unpack_bits(bytes: &[u8], n: usize) -> Result<Vec<i8>> {
    if n == 0 {
        return Err(Error::invalid("cannot unpack zero signs"));
    }
    if bytes.len() != n.div_ceil(8) {
        return Err(Error::shape(format!(
            "{} bytes cannot hold exactly {n} packed signs",
            bytes.len()
        )));
    }
    let pad = bytes.len() * 8 - n;
    if pad > 0 && bytes[bytes.len() - 1] & ((1u8 << pad) - 1) != 0 {
        return Err(Error::invalid("non-zero padding bits in packed signs"));
    }
    Ok((0..n)
        .map(|i| if bytes[i / 8] & (0x80 >> (i % 8)) != 0 { 1 } else { -1 })
        .collect())
}
