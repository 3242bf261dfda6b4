//! Binary netpbm I/O: `P5` greymaps (8- or 16-bit, big-endian) for depth
//! maps and masks, `P4` bitmaps for masks.

use std::path::Path;

use crate::error::{Error, Result};
use crate::segmentation::image::{BinaryMask, DepthMap};

const WHAT: &str = "netpbm image";

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(WHAT, "missing P magic"));
    }
    let magic = [bytes[0], bytes[1]];
    let fields = if magic == *b"P4" { 2 } else { 3 };
    let mut pos = 2;
    let mut values = Vec::with_capacity(fields);
    while values.len() < fields {
        match bytes.get(pos) {
            None => return Err(Error::format(WHAT, "truncated header")),
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(c) if c.is_ascii_digit() => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
                values.push(
                    text.parse::<usize>()
                        .map_err(|_| Error::format(WHAT, format!("header number {text} too large")))?,
                );
            }
            Some(&c) => return Err(Error::format(WHAT, format!("unexpected byte {c:#04x} in header"))),
        }
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format(WHAT, "missing whitespace after header")),
    }
    let (width, height) = (values[0], values[1]);
    if width == 0 || height == 0 {
        return Err(Error::format(WHAT, "zero image dimension"));
    }
    let maxval = if fields == 3 { values[2] } else { 1 };
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(WHAT, format!("maxval {maxval} out of range")));
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

fn read_greymap(bytes: &[u8], header: &Header) -> Result<Vec<u16>> {
    let n = header.width * header.height;
    let raster = &bytes[header.data_start..];
    if header.maxval < 256 {
        if raster.len() < n {
            return Err(Error::format(WHAT, "truncated 8-bit raster"));
        }
        Ok(raster[..n].iter().map(|&v| v as u16).collect())
    } else {
        if raster.len() < 2 * n {
            return Err(Error::format(WHAT, "truncated 16-bit raster"));
        }
        Ok(raster[..2 * n]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect())
    }
}

/// Reads a `P5` depth map (8-bit or 16-bit big-endian samples).
pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let header = parse_header(bytes)?;
    if header.magic != *b"P5" {
        return Err(Error::format(WHAT, "depth maps must be binary greymaps (P5)"));
    }
    let values = read_greymap(bytes, &header)?;
    DepthMap::new(header.width, header.height, values)
}

/// Writes a 16-bit `P5` depth map with maxval 65535.
pub fn encode_depth(depth: &DepthMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width(), depth.height()).into_bytes();
    out.reserve(depth.values().len() * 2);
    for v in depth.values() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Reads a mask from `P4` or `P5` (any non-zero grey is foreground).
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let header = parse_header(bytes)?;
    match &header.magic {
        b"P5" => {
            let values = read_greymap(bytes, &header)?;
            BinaryMask::new(header.width, header.height, values.iter().map(|&v| (v > 0) as u8).collect())
        }
        b"P4" => {
            let row_bytes = header.width.div_ceil(8);
            let raster = &bytes[header.data_start..];
            if raster.len() < row_bytes * header.height {
                return Err(Error::format(WHAT, "truncated bitmap raster"));
            }
            let mut values = Vec::with_capacity(header.width * header.height);
            for row in raster.chunks_exact(row_bytes).take(header.height) {
                for x in 0..header.width {
                    values.push((row[x / 8] >> (7 - x % 8)) & 1);
                }
            }
            BinaryMask::new(header.width, header.height, values)
        }
        other => Err(Error::format(
            WHAT,
            format!("unsupported mask format {}", String::from_utf8_lossy(other)),
        )),
    }
}

/// `P5` with maxval 255, foreground 255.
pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.values().iter().map(|&v| if v != 0 { 255 } else { 0 }));
    out
}

/// `P4` bitmap; a set bit is foreground (black in netpbm terms).
pub fn encode_mask_pbm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width(), mask.height()).into_bytes();
    for row in mask.values().chunks(mask.width()) {
        let mut packed = vec![0u8; mask.width().div_ceil(8)];
        for (x, &v) in row.iter().enumerate() {
            if v != 0 {
                packed[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend(packed);
    }
    out
}

pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    decode_depth(&std::fs::read(path)?)
}

pub fn save_depth(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_depth(depth))?;
    Ok(())
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask(&std::fs::read(path)?)
}

/// Writes `P4` for a `.pbm` extension and `P5` otherwise.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("pbm") => encode_mask_pbm(mask),
        _ => encode_mask_pgm(mask),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}
