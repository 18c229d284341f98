use serde::{Deserialize, Serialize};

use crate::error::{LdlError, Result};

/// One entry of an architecture descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Fully connected; flattens a spatial input.
    Dense {
        out: usize,
    },
    /// 3×3 convolution, stride 1, zero padding 1.
    Conv3x3 {
        out_channels: usize,
    },
    Relu,
    /// 2×2 max pooling with stride 2 (floor on odd sizes).
    MaxPool2,
    Dropout {
        rate: f64,
    },
}

/// Shape of one sample flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl ActShape {
    pub fn len(&self) -> usize {
        match *self {
            ActShape::Spatial { c, h, w } => c * h * w,
            ActShape::Flat(d) => d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input (channels, height, width).
    pub input: [usize; 3],
    pub classes: usize,
    /// Layers in order; the last one must be the `Dense { out: classes }` head.
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    /// Multi-layer perceptron: `hidden` dense+ReLU blocks, optional dropout
    /// before the head.
    pub fn mlp(input: [usize; 3], hidden: &[usize], classes: usize, dropout: f64) -> Self {
        let mut layers = Vec::new();
        for &h in hidden {
            layers.push(LayerSpec::Dense { out: h });
            layers.push(LayerSpec::Relu);
        }
        if dropout > 0.0 {
            layers.push(LayerSpec::Dropout { rate: dropout });
        }
        layers.push(LayerSpec::Dense { out: classes });
        Self {
            input,
            classes,
            layers,
        }
    }

    /// conv3x3 → ReLU → pool → dense → ReLU → [dropout] → head.
    pub fn small_conv(
        input: [usize; 3],
        channels: usize,
        hidden: usize,
        classes: usize,
        dropout: f64,
    ) -> Self {
        let mut layers = vec![
            LayerSpec::Conv3x3 {
                out_channels: channels,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Dense { out: hidden },
            LayerSpec::Relu,
        ];
        if dropout > 0.0 {
            layers.push(LayerSpec::Dropout { rate: dropout });
        }
        layers.push(LayerSpec::Dense { out: classes });
        Self {
            input,
            classes,
            layers,
        }
    }

    /// Per-layer input shapes plus the final output shape (length `layers.len() + 1`).
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(LdlError::Config(format!(
                "input shape {:?} has a zero dimension",
                self.input
            )));
        }
        if self.classes == 0 {
            return Err(LdlError::Config("class count must be at least 1".into()));
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { out }) if *out == self.classes => {}
            Some(other) => {
                return Err(LdlError::Config(format!(
                    "layer {} ({other:?}) must be a Dense head with {} outputs",
                    self.layers.len() - 1,
                    self.classes
                )))
            }
            None => return Err(LdlError::Config("architecture has no layers".into())),
        }

        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut cur = ActShape::Spatial { c, h, w };
        for (i, layer) in self.layers.iter().enumerate() {
            shapes.push(cur);
            cur = match (*layer, cur) {
                (LayerSpec::Dense { out }, s) => {
                    if out == 0 {
                        return Err(bad_layer(i, layer, "zero output width"));
                    }
                    if s.is_empty() {
                        return Err(bad_layer(i, layer, "empty input"));
                    }
                    ActShape::Flat(out)
                }
                (LayerSpec::Conv3x3 { out_channels }, ActShape::Spatial { h, w, .. }) => {
                    if out_channels == 0 {
                        return Err(bad_layer(i, layer, "zero output channels"));
                    }
                    ActShape::Spatial {
                        c: out_channels,
                        h,
                        w,
                    }
                }
                (LayerSpec::MaxPool2, ActShape::Spatial { c, h, w }) => {
                    if h < 2 || w < 2 {
                        return Err(bad_layer(i, layer, "spatial size below 2×2"));
                    }
                    ActShape::Spatial {
                        c,
                        h: h / 2,
                        w: w / 2,
                    }
                }
                (LayerSpec::Conv3x3 { .. } | LayerSpec::MaxPool2, ActShape::Flat(_)) => {
                    return Err(bad_layer(i, layer, "spatial layer after a flat activation"))
                }
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(bad_layer(i, layer, "dropout rate outside [0, 1)"));
                    }
                    s
                }
                (LayerSpec::Relu, s) => s,
            };
        }
        shapes.push(cur);
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Index of the head layer; its input is the penultimate activation.
    pub fn penultimate_index(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn penultimate_width(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(shapes[self.penultimate_index()].len())
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Dropout { .. }))
    }
}

fn bad_layer(i: usize, layer: &LayerSpec, why: &str) -> LdlError {
    LdlError::Config(format!("layer {i} ({layer:?}): {why}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_keeps_spatial_size() {
        let arch = Architecture::small_conv([1, 16, 16], 4, 8, 3, 0.0);
        let shapes = arch.shapes().unwrap();
        assert_eq!(shapes[1], ActShape::Spatial { c: 4, h: 16, w: 16 });
        assert_eq!(shapes[3], ActShape::Spatial { c: 4, h: 8, w: 8 });
        assert_eq!(arch.penultimate_width().unwrap(), 8);
    }

    #[test]
    fn wrong_head_is_named() {
        let mut arch = Architecture::mlp([1, 4, 4], &[8], 3, 0.0);
        arch.layers.push(LayerSpec::Relu);
        let err = arch.validate().unwrap_err().to_string();
        assert!(err.contains("layer 3"), "{err}");
    }

    #[test]
    fn conv_after_dense_rejected() {
        let arch = Architecture {
            input: [1, 4, 4],
            classes: 2,
            layers: vec![
                LayerSpec::Dense { out: 4 },
                LayerSpec::Conv3x3 { out_channels: 2 },
                LayerSpec::Dense { out: 2 },
            ],
        };
        let err = arch.validate().unwrap_err().to_string();
        assert!(err.contains("layer 1"), "{err}");
    }
}
