//! Float model files (`.hgm`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HGRF"  u8 version (1)  u8 layer count
//! per layer: u8 kind tag, then that kind's u32 dims
//!     1 conv             kernels, kernel_h, kernel_w, in_channels
//!     2 max pool         window, stride
//!     3 fully connected  inputs, outputs
//!     4 relu             (none)
//!     5 softmax          (none)
//! per parameterised layer, in order: weights then biases as f32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::nn::layer::LayerSpec;
use crate::nn::network::{LayerParams, Network};
use crate::tensor::Tensor;

pub const FLOAT_MAGIC: &[u8; 4] = b"HGRF";
pub const FORMAT_VERSION: u8 = 1;

const TAG_CONV: u8 = 1;
const TAG_POOL: u8 = 2;
const TAG_FC: u8 = 3;
const TAG_RELU: u8 = 4;
const TAG_SOFTMAX: u8 = 5;

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("dimension {v} does not fit in u32")))
}

pub(crate) fn write_layer_specs<W: Write>(w: &mut W, layers: &[LayerSpec]) -> Result<()> {
    let count = u8::try_from(layers.len())
        .map_err(|_| Error::invalid(format!("{} layers exceed the format limit of 255", layers.len())))?;
    w.write_u8(count)?;
    for layer in layers {
        let (tag, dims): (u8, Vec<usize>) = match *layer {
            LayerSpec::Conv {
                kernels,
                kernel_h,
                kernel_w,
                in_channels,
            } => (TAG_CONV, vec![kernels, kernel_h, kernel_w, in_channels]),
            LayerSpec::MaxPool { window, stride } => (TAG_POOL, vec![window, stride]),
            LayerSpec::FullyConnected { inputs, outputs } => (TAG_FC, vec![inputs, outputs]),
            LayerSpec::Relu => (TAG_RELU, vec![]),
            LayerSpec::Softmax => (TAG_SOFTMAX, vec![]),
        };
        w.write_u8(tag)?;
        for d in dims {
            w.write_u32::<LittleEndian>(dim(d)?)?;
        }
    }
    Ok(())
}

pub(crate) fn read_layer_specs<R: Read>(r: &mut R, what: &'static str) -> Result<Vec<LayerSpec>> {
    let count = r.read_u8()?;
    let mut layers = Vec::with_capacity(count as usize);
    for i in 0..count {
        let tag = r.read_u8()?;
        let mut d = |n: usize| -> Result<Vec<usize>> {
            (0..n)
                .map(|_| Ok(r.read_u32::<LittleEndian>()? as usize))
                .collect()
        };
        let layer = match tag {
            TAG_CONV => {
                let v = d(4)?;
                LayerSpec::conv(v[0], v[1], v[2], v[3])
            }
            TAG_POOL => {
                let v = d(2)?;
                LayerSpec::max_pool(v[0], v[1])
            }
            TAG_FC => {
                let v = d(2)?;
                LayerSpec::fully_connected(v[0], v[1])
            }
            TAG_RELU => LayerSpec::Relu,
            TAG_SOFTMAX => LayerSpec::Softmax,
            other => return Err(Error::format(what, format!("layer {i} has unknown kind tag {other}"))),
        };
        layers.push(layer);
    }
    Ok(layers)
}

pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 4], what: &'static str) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)
        .map_err(|_| Error::format(what, "file too short for a header"))?;
    if &got != magic {
        return Err(Error::format(what, format!("bad magic {got:?}")));
    }
    let version = r.read_u8()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    Ok(())
}

pub(crate) fn expect_eof<R: Read>(r: &mut R, what: &'static str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::format(what, "trailing bytes after the last layer")),
    }
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut out = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub(crate) fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for &v in values {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

fn truncated(e: Error) -> Error {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::format("float model", "truncated file")
        }
        other => other,
    }
}

pub fn write_float_model<W: Write>(net: &Network<f32>, w: &mut W) -> Result<()> {
    w.write_all(FLOAT_MAGIC)?;
    w.write_u8(FORMAT_VERSION)?;
    write_layer_specs(w, net.layers())?;
    for p in net.params().iter().flatten() {
        write_f32s(w, p.weights.data())?;
        write_f32s(w, &p.biases)?;
    }
    Ok(())
}

pub fn read_float_model<R: Read>(r: &mut R) -> Result<Network<f32>> {
    let mut inner = || -> Result<Network<f32>> {
        read_header(r, FLOAT_MAGIC, "float model")?;
        let layers = read_layer_specs(r, "float model")?;
        let mut params = Vec::with_capacity(layers.len());
        for layer in &layers {
            params.push(match layer.weight_shape() {
                Some(shape) => {
                    let weights = read_f32s(r, shape.iter().product())?;
                    let biases = read_f32s(r, layer.kernel_count())?;
                    Some(LayerParams {
                        weights: Tensor::new(shape, weights)?,
                        biases,
                    })
                }
                None => None,
            });
        }
        expect_eof(r, "float model")?;
        Network::with_params(layers, params)
    };
    inner().map_err(truncated)
}

pub fn float_model_bytes(net: &Network<f32>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_float_model(net, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn save_float_model(net: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, float_model_bytes(net))?;
    Ok(())
}

pub fn load_float_model(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let bytes = std::fs::read(path)?;
    read_float_model(&mut bytes.as_slice())
}
