//! Deployment model with binary weights and its `.hgb` file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "HGRB"  u8 version (1)  layer table exactly as in `.hgm`
//! per parameterised layer, in order:
//!     per kernel: u32 n, ceil(n/8) bytes of sign bits (MSB first), f32 scale
//!     then the f32 bias vector (one per kernel)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::binarize::conv::{binarized_conv_forward, binarized_fc_forward, BinarizedLayer};
use crate::binarize::kernel::{binarize_kernel, BinarizedKernel};
use crate::error::{Error, Result};
use crate::nn::io::{expect_eof, read_f32s, read_header, read_layer_specs, write_f32s, write_layer_specs, FORMAT_VERSION};
use crate::nn::layer::LayerSpec;
use crate::nn::network::{LayerParams, Network};
use crate::nn::ops;
use crate::tensor::Tensor;

pub const BINARY_MAGIC: &[u8; 4] = b"HGRB";

/// Layer specs plus, for every conv/FC layer, one binarized kernel per
/// filter or neuron and the float biases.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedModel {
    layers: Vec<LayerSpec>,
    params: Vec<Option<BinarizedLayer>>,
}

/// Byte accounting for the weights of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct StorageReport {
    pub kernels: usize,
    pub weights: usize,
    /// Weights stored as f32.
    pub float_weight_bytes: usize,
    /// Packed sign bits, each kernel padded to a byte boundary.
    pub sign_bytes: usize,
    /// One f32 scale per kernel.
    pub scale_bytes: usize,
}

impl StorageReport {
    /// Float weight bytes over packed bits plus scales.
    pub fn ratio(&self) -> f64 {
        self.float_weight_bytes as f64 / (self.sign_bytes + self.scale_bytes) as f64
    }

    /// Float weight bits over sign bits, ignoring padding and scales.
    pub fn bit_ratio(&self) -> f64 {
        (self.float_weight_bytes * 8) as f64 / self.weights as f64
    }
}

/// Binarizes every conv kernel and FC neuron independently; biases are
/// copied unchanged.
pub fn binarize_model(net: &Network<f32>) -> BinarizedModel {
    let params = net
        .layers()
        .iter()
        .zip(net.params())
        .map(|(layer, p)| {
            p.as_ref().map(|p| BinarizedLayer {
                kernels: p
                    .weights
                    .data()
                    .chunks_exact(layer.kernel_len())
                    .map(|w| binarize_kernel(w).expect("kernels are non-empty"))
                    .collect(),
                biases: p.biases.clone(),
            })
        })
        .collect();
    BinarizedModel {
        layers: net.layers().to_vec(),
        params,
    }
}

impl BinarizedModel {
    pub fn new(layers: Vec<LayerSpec>, params: Vec<Option<BinarizedLayer>>) -> Result<Self> {
        // Reuse the float network's structural validation.
        Network::<f32>::new(layers.clone())?;
        if params.len() != layers.len() {
            return Err(Error::shape(format!(
                "{} parameter slots for {} layers",
                params.len(),
                layers.len()
            )));
        }
        for (i, (layer, p)) in layers.iter().zip(&params).enumerate() {
            match (layer.has_params(), p) {
                (true, Some(p)) => p.check(layer)?,
                (false, None) => {}
                _ => return Err(Error::shape(format!("layer {i} parameter presence mismatch"))),
            }
        }
        Ok(BinarizedModel { layers, params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Option<BinarizedLayer>] {
        &self.params
    }

    pub fn kernel_count(&self) -> usize {
        self.params.iter().flatten().map(|p| p.kernels.len()).sum()
    }

    pub fn storage(&self) -> StorageReport {
        let kernels = self.params.iter().flatten().flat_map(|p| &p.kernels);
        let mut report = StorageReport {
            kernels: 0,
            weights: 0,
            float_weight_bytes: 0,
            sign_bytes: 0,
            scale_bytes: 0,
        };
        for k in kernels {
            report.kernels += 1;
            report.weights += k.len();
            report.float_weight_bytes += 4 * k.len();
            report.sign_bytes += k.bits().len();
            report.scale_bytes += 4;
        }
        report
    }

    /// Float network carrying the `alpha * B` weights.
    pub fn materialize(&self) -> Network<f32> {
        let params = self
            .layers
            .iter()
            .zip(&self.params)
            .map(|(layer, p)| {
                p.as_ref().map(|p| LayerParams {
                    weights: Tensor::new(
                        layer.weight_shape().expect("parameterised layer"),
                        p.kernels.iter().flat_map(|k| k.materialize()).collect(),
                    )
                    .expect("kernel sizes validated"),
                    biases: p.biases.clone(),
                })
            })
            .collect();
        Network::with_params(self.layers.clone(), params).expect("shapes validated")
    }

    /// Inference with add/subtract convolutions and dense layers.
    pub fn forward(&self, input: &Tensor<f32>) -> Result<Vec<f32>> {
        let mut x = input.clone();
        for (layer, p) in self.layers.iter().zip(&self.params) {
            x = match *layer {
                LayerSpec::Conv { .. } => {
                    binarized_conv_forward(&x, layer, p.as_ref().expect("conv layers carry parameters"))?
                }
                LayerSpec::FullyConnected { outputs, .. } => {
                    let out = binarized_fc_forward(x.data(), layer, p.as_ref().expect("fc layers carry parameters"))?;
                    Tensor::new(vec![outputs], out)?
                }
                LayerSpec::MaxPool { window, stride } => ops::maxpool_forward(&x, window, stride)?,
                LayerSpec::Relu => {
                    let shape = x.shape().to_vec();
                    let mut data = x.into_data();
                    ops::relu_in_place(&mut data);
                    Tensor::new(shape, data)?
                }
                LayerSpec::Softmax => {
                    let shape = x.shape().to_vec();
                    Tensor::new(shape, ops::softmax(x.data()))?
                }
            };
        }
        if !x.all_finite() {
            return Err(Error::Divergence("non-finite network output".into()));
        }
        Ok(x.into_data())
    }
}

pub fn write_binarized_model<W: Write>(model: &BinarizedModel, w: &mut W) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_u8(FORMAT_VERSION)?;
    write_layer_specs(w, &model.layers)?;
    for p in model.params.iter().flatten() {
        for k in &p.kernels {
            let n = u32::try_from(k.len()).map_err(|_| Error::invalid("kernel too large"))?;
            w.write_u32::<LittleEndian>(n)?;
            w.write_all(k.bits())?;
            w.write_f32::<LittleEndian>(k.scale())?;
        }
        write_f32s(w, &p.biases)?;
    }
    Ok(())
}

pub fn read_binarized_model<R: Read>(r: &mut R) -> Result<BinarizedModel> {
    const WHAT: &str = "binarized model";
    let mut inner = || -> Result<BinarizedModel> {
        read_header(r, BINARY_MAGIC, WHAT)?;
        let layers = read_layer_specs(r, WHAT)?;
        let mut params = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            if !layer.has_params() {
                params.push(None);
                continue;
            }
            let mut kernels = Vec::with_capacity(layer.kernel_count());
            for _ in 0..layer.kernel_count() {
                let n = r.read_u32::<LittleEndian>()? as usize;
                if n != layer.kernel_len() {
                    return Err(Error::format(
                        WHAT,
                        format!("layer {i} kernel has {n} weights, expected {}", layer.kernel_len()),
                    ));
                }
                let mut bits = vec![0u8; n.div_ceil(8)];
                r.read_exact(&mut bits)?;
                let scale = r.read_f32::<LittleEndian>()?;
                kernels.push(BinarizedKernel::new(bits, scale, n)?);
            }
            let biases = read_f32s(r, layer.kernel_count())?;
            params.push(Some(BinarizedLayer { kernels, biases }));
        }
        expect_eof(r, WHAT)?;
        BinarizedModel::new(layers, params)
    };
    inner().map_err(|e| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::format(WHAT, "truncated file"),
        other => other,
    })
}

pub fn binarized_model_bytes(model: &BinarizedModel) -> Vec<u8> {
    let mut buf = Vec::new();
    write_binarized_model(model, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn save_binarized_model(model: &BinarizedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, binarized_model_bytes(model))?;
    Ok(())
}

pub fn load_binarized_model(path: impl AsRef<Path>) -> Result<BinarizedModel> {
    let bytes = std::fs::read(path)?;
    read_binarized_model(&mut bytes.as_slice())
}
