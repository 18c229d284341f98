//! `LDLM` model files.
//!
//! Layout (little-endian):
//! ```text
//! "LDLM" | version u32 = 1
//! input c, h, w: u32 ×3 | classes u32 | layer count u32
//! per layer: tag u8, then
//!     0 Dense    out u32
//!     1 Conv3x3  out_channels u32
//!     2 Relu
//!     3 MaxPool2
//!     4 Dropout  rate f64
//! parameters: f32, layer order, weights then bias for each layer
//! ```

use std::path::Path;

use super::arch::{Architecture, LayerSpec};
use super::network::{LayerParams, Network, ParamBuffers};
use crate::binio::{to_u32, Reader, Writer};
use crate::error::{LdlError, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"LDLM";
pub const MODEL_VERSION: u32 = 1;

pub(crate) fn write_arch(w: &mut Writer, arch: &Architecture) -> Result<()> {
    for d in arch.input {
        w.u32(to_u32(d, "input dimension")?);
    }
    w.u32(to_u32(arch.classes, "class count")?);
    w.u32(to_u32(arch.layers.len(), "layer count")?);
    for layer in &arch.layers {
        match *layer {
            LayerSpec::Dense { out } => {
                w.u8(0);
                w.u32(to_u32(out, "dense width")?);
            }
            LayerSpec::Conv3x3 { out_channels } => {
                w.u8(1);
                w.u32(to_u32(out_channels, "conv channels")?);
            }
            LayerSpec::Relu => w.u8(2),
            LayerSpec::MaxPool2 => w.u8(3),
            LayerSpec::Dropout { rate } => {
                w.u8(4);
                w.f64(rate);
            }
        }
    }
    Ok(())
}

pub(crate) fn read_arch(r: &mut Reader<'_>) -> Result<Architecture> {
    let input = [
        r.u32("input channels")? as usize,
        r.u32("input height")? as usize,
        r.u32("input width")? as usize,
    ];
    let classes = r.u32("class count")? as usize;
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.pos();
        let layer = match r.u8("layer tag")? {
            0 => LayerSpec::Dense {
                out: r.u32("dense width")? as usize,
            },
            1 => LayerSpec::Conv3x3 {
                out_channels: r.u32("conv channels")? as usize,
            },
            2 => LayerSpec::Relu,
            3 => LayerSpec::MaxPool2,
            4 => LayerSpec::Dropout {
                rate: r.f64("dropout rate")?,
            },
            tag => {
                return Err(LdlError::Format {
                    offset: at,
                    detail: format!("unknown layer tag {tag}"),
                })
            }
        };
        layers.push(layer);
    }
    let arch = Architecture {
        input,
        classes,
        layers,
    };
    arch.validate().map_err(|e| LdlError::Format {
        offset: r.pos(),
        detail: format!("invalid architecture: {e}"),
    })?;
    Ok(arch)
}

pub fn encode_model(net: &Network<f32>) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    write_arch(&mut w, net.arch())?;
    for layer in &net.params().layers {
        w.f32s(&layer.weight);
        w.f32s(&layer.bias);
    }
    Ok(w.buf)
}

pub fn decode_model(bytes: &[u8]) -> Result<Network<f32>> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;
    let arch = read_arch(&mut r)?;
    // Expected sizes come from a freshly shaped network.
    let template: Network<f32> = Network::from_params(&arch, zero_params(&arch)?)?;
    let expected: usize = template.num_params() * 4;
    if r.remaining() < expected {
        return Err(LdlError::Format {
            offset: r.pos(),
            detail: format!(
                "truncated parameter block: expected {expected} bytes, found {}",
                r.remaining()
            ),
        });
    }
    let mut layers = Vec::with_capacity(template.params().layers.len());
    for (i, t) in template.params().layers.iter().enumerate() {
        layers.push(LayerParams {
            weight: r.f32_vec(t.weight.len(), &format!("layer {i} weights"))?,
            bias: r.f32_vec(t.bias.len(), &format!("layer {i} bias"))?,
        });
    }
    r.finish()?;
    Network::from_params(&arch, ParamBuffers { layers })
}

fn zero_params(arch: &Architecture) -> Result<ParamBuffers<f32>> {
    // Init draws from the rng; lengths are all we need here.
    let net: Network<f32> = Network::init(arch, &mut crate::rng::Prng::new(0))?;
    Ok(ParamBuffers::zeros_like(net.params()))
}

pub fn save_model(net: &Network<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(net)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Network<f32>> {
    if !path.exists() {
        return Err(LdlError::NotFound(path.to_path_buf()));
    }
    decode_model(&std::fs::read(path)?)
}
