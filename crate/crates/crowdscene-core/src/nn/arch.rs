//! Network architecture descriptor and parameter construction.
//!
//! The canonical network ([`vgg15`]) is 12 convolution blocks plus 3 fully
//! connected layers. Each conv block applies, in order: batch norm, 3x3
//! same-padding convolution, ReLU, batch norm, optional pooling, dropout.
//! Smaller instances of the same block structure drive the gradient checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::CLASS_COUNT;

pub const CONV_KERNEL: usize = 3;

/// Channel plan of the 12 convolution layers.
pub const VGG15_CHANNELS: [usize; 12] = [32, 32, 64, 64, 128, 128, 128, 128, 256, 256, 256, 256];
/// Dropout rate after each conv block.
pub const VGG15_CONV_DROPOUT: [f32; 12] = [
    0.20, 0.25, 0.25, 0.30, 0.30, 0.30, 0.30, 0.30, 0.35, 0.35, 0.35, 0.35,
];
/// Dropout after each hidden fully connected layer.
pub const VGG15_FC_DROPOUT: [f32; 2] = [0.40, 0.40];
/// Blocks followed by 2x2 average pooling (zero-based indices).
pub const VGG15_AVG_POOL_AT: [usize; 3] = [1, 3, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    None,
    /// 2x2 average pooling, stride 2.
    Avg2,
    /// Global average pooling to one value per channel.
    Global,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub pool: PoolKind,
    pub dropout: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcSpec {
    pub out_features: usize,
    pub relu: bool,
    pub dropout: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub conv_blocks: Vec<ConvBlockSpec>,
    pub fc_layers: Vec<FcSpec>,
}

impl NetSpec {
    /// The dimension entering the first FC layer (channels after global
    /// pooling, or channels x spatial if no global pool is present).
    pub fn flat_features(&self) -> usize {
        let mut c = self.input_channels;
        let mut h = self.input_height;
        let mut w = self.input_width;
        let mut global = false;
        for b in &self.conv_blocks {
            c = b.out_channels;
            match b.pool {
                PoolKind::None => {}
                PoolKind::Avg2 => {
                    h /= 2;
                    w /= 2;
                }
                PoolKind::Global => {
                    h = 1;
                    w = 1;
                    global = true;
                }
            }
        }
        if global {
            c
        } else {
            c * h * w
        }
    }

    pub fn class_count(&self) -> usize {
        self.fc_layers.last().map(|f| f.out_features).unwrap_or(0)
    }

    /// Expected output shape of each conv block as (height, width, channels),
    /// with global pooling collapsing to (1, 1, channels), followed by FC
    /// output widths.
    pub fn stage_shapes(&self) -> (Vec<(usize, usize, usize)>, Vec<usize>) {
        let mut h = self.input_height;
        let mut w = self.input_width;
        let mut conv = Vec::new();
        for b in &self.conv_blocks {
            match b.pool {
                PoolKind::None => {}
                PoolKind::Avg2 => {
                    h /= 2;
                    w /= 2;
                }
                PoolKind::Global => {
                    h = 1;
                    w = 1;
                }
            }
            conv.push((h, w, b.out_channels));
        }
        let fc = self.fc_layers.iter().map(|f| f.out_features).collect();
        (conv, fc)
    }
}

/// The architecture used for both the audio (1-channel) and visual
/// (3-channel) streams: 12 conv layers, 3 FC layers, softmax over 5 classes.
pub fn vgg15(input_channels: usize) -> NetSpec {
    vgg15_with_dropout(input_channels, &VGG15_CONV_DROPOUT, &VGG15_FC_DROPOUT)
}

pub fn vgg15_with_dropout(
    input_channels: usize,
    conv_dropout: &[f32; 12],
    fc_dropout: &[f32; 2],
) -> NetSpec {
    assert!(
        input_channels == 1 || input_channels == 3,
        "audio uses 1 channel, frames use 3"
    );
    let conv_blocks = VGG15_CHANNELS
        .iter()
        .enumerate()
        .map(|(i, &out_channels)| ConvBlockSpec {
            out_channels,
            pool: if i == VGG15_CHANNELS.len() - 1 {
                PoolKind::Global
            } else if VGG15_AVG_POOL_AT.contains(&i) {
                PoolKind::Avg2
            } else {
                PoolKind::None
            },
            dropout: conv_dropout[i],
        })
        .collect();
    NetSpec {
        input_channels,
        input_height: 128,
        input_width: 128,
        conv_blocks,
        fc_layers: vec![
            FcSpec {
                out_features: 1024,
                relu: true,
                dropout: fc_dropout[0],
            },
            FcSpec {
                out_features: 1024,
                relu: true,
                dropout: fc_dropout[1],
            },
            FcSpec {
                out_features: CLASS_COUNT,
                relu: false,
                dropout: 0.0,
            },
        ],
    }
}

/// One named parameter tensor. Running batch-norm statistics are carried
/// here too but marked non-trainable: they are skipped by the optimizer and
/// by the L2 norm.
#[derive(Debug, Clone)]
pub struct NamedTensor<T> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub trainable: bool,
}

/// All parameters of one network instance, in canonical order.
#[derive(Debug, Clone)]
pub struct Vgg15Params<T> {
    pub spec: NetSpec,
    pub tensors: Vec<NamedTensor<T>>,
}

/// Indices of one conv block's tensors inside `Vgg15Params::tensors`.
#[derive(Debug, Clone, Copy)]
pub struct BlockIdx {
    pub pre_gamma: usize,
    pub pre_beta: usize,
    pub pre_mean: usize,
    pub pre_var: usize,
    pub conv_w: usize,
    pub conv_b: usize,
    pub post_gamma: usize,
    pub post_beta: usize,
    pub post_mean: usize,
    pub post_var: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FcIdx {
    pub weight: usize,
    pub bias: usize,
}

impl<T: Scalar> Vgg15Params<T> {
    /// He-normal conv/FC weights, zero biases, identity batch norm.
    /// Deterministic in `seed`.
    pub fn build(spec: NetSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors: Vec<NamedTensor<T>> = Vec::new();
        let push = |name: String, tensor: Tensor<T>, trainable: bool, tensors: &mut Vec<NamedTensor<T>>| {
            tensors.push(NamedTensor {
                name,
                tensor,
                trainable,
            });
        };

        let he_normal = |shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng| -> Tensor<T> {
            let std = (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("std is positive");
            let data = (0..shape.iter().product::<usize>())
                .map(|_| T::from_f64(normal.sample(rng)))
                .collect();
            Tensor::from_vec(shape, data)
        };

        let mut c_in = spec.input_channels;
        for (i, block) in spec.conv_blocks.iter().enumerate() {
            let c_out = block.out_channels;
            for (suffix, fill, trainable) in [
                ("pre_bn.gamma", T::one(), true),
                ("pre_bn.beta", T::zero(), true),
                ("pre_bn.run_mean", T::zero(), false),
                ("pre_bn.run_var", T::one(), false),
            ] {
                push(
                    format!("block{i}.{suffix}"),
                    Tensor::from_vec(&[c_in], vec![fill; c_in]),
                    trainable,
                    &mut tensors,
                );
            }
            let w = he_normal(
                &[c_out, c_in, CONV_KERNEL, CONV_KERNEL],
                c_in * CONV_KERNEL * CONV_KERNEL,
                &mut rng,
            );
            push(format!("block{i}.conv.weight"), w, true, &mut tensors);
            push(
                format!("block{i}.conv.bias"),
                Tensor::zeros(&[c_out]),
                true,
                &mut tensors,
            );
            for (suffix, fill, trainable) in [
                ("post_bn.gamma", T::one(), true),
                ("post_bn.beta", T::zero(), true),
                ("post_bn.run_mean", T::zero(), false),
                ("post_bn.run_var", T::one(), false),
            ] {
                push(
                    format!("block{i}.{suffix}"),
                    Tensor::from_vec(&[c_out], vec![fill; c_out]),
                    trainable,
                    &mut tensors,
                );
            }
            c_in = c_out;
        }

        let mut in_features = spec.flat_features();
        for (j, fc) in spec.fc_layers.iter().enumerate() {
            let w = he_normal(&[fc.out_features, in_features], in_features, &mut rng);
            push(format!("fc{j}.weight"), w, true, &mut tensors);
            push(
                format!("fc{j}.bias"),
                Tensor::zeros(&[fc.out_features]),
                true,
                &mut tensors,
            );
            in_features = fc.out_features;
        }

        Self { spec, tensors }
    }

    pub const TENSORS_PER_BLOCK: usize = 10;

    pub fn block_idx(&self, block: usize) -> BlockIdx {
        let base = block * Self::TENSORS_PER_BLOCK;
        BlockIdx {
            pre_gamma: base,
            pre_beta: base + 1,
            pre_mean: base + 2,
            pre_var: base + 3,
            conv_w: base + 4,
            conv_b: base + 5,
            post_gamma: base + 6,
            post_beta: base + 7,
            post_mean: base + 8,
            post_var: base + 9,
        }
    }

    pub fn fc_idx(&self, fc: usize) -> FcIdx {
        let base = self.spec.conv_blocks.len() * Self::TENSORS_PER_BLOCK + fc * 2;
        FcIdx {
            weight: base,
            bias: base + 1,
        }
    }

    pub fn tensor(&self, idx: usize) -> &Tensor<T> {
        &self.tensors[idx].tensor
    }

    /// Indices of trainable tensors, in canonical order.
    pub fn trainable_indices(&self) -> Vec<usize> {
        self.tensors
            .iter()
            .enumerate()
            .filter(|(_, t)| t.trainable)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sum of squares over trainable parameters (running stats excluded).
    pub fn l2_norm_squared(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .flat_map(|t| t.tensor.data.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum()
    }

    pub fn total_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.tensor.numel()).sum()
    }

    pub fn map_into<U: Scalar>(&self) -> Vgg15Params<U> {
        Vgg15Params {
            spec: self.spec.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    tensor: t.tensor.map_into(),
                    trainable: t.trainable,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg15_stage_shapes_follow_the_block_plan() {
        let spec = vgg15(1);
        let (conv, fc) = spec.stage_shapes();
        let expected = [
            (128, 128, 32),
            (64, 64, 32),
            (64, 64, 64),
            (32, 32, 64),
            (32, 32, 128),
            (32, 32, 128),
            (32, 32, 128),
            (16, 16, 128),
            (16, 16, 256),
            (16, 16, 256),
            (16, 16, 256),
            (1, 1, 256),
        ];
        assert_eq!(conv, expected);
        assert_eq!(fc, vec![1024, 1024, 5]);
        assert_eq!(spec.flat_features(), 256);
    }

    #[test]
    fn same_seed_builds_identical_parameters() {
        let a = Vgg15Params::<f32>::build(vgg15(1), 42);
        let b = Vgg15Params::<f32>::build(vgg15(1), 42);
        assert_eq!(a.tensors.len(), b.tensors.len());
        for (x, y) in a.tensors.iter().zip(&b.tensors) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.tensor.data, y.tensor.data);
        }
        let c = Vgg15Params::<f32>::build(vgg15(1), 43);
        assert_ne!(a.tensors[4].tensor.data, c.tensors[4].tensor.data);
    }

    #[test]
    fn channel_count_changes_only_the_input_interface() {
        let a = Vgg15Params::<f32>::build(vgg15(1), 0);
        let b = Vgg15Params::<f32>::build(vgg15(3), 0);
        assert_eq!(a.tensors.len(), b.tensors.len());
        for (x, y) in a.tensors.iter().zip(&b.tensors) {
            assert_eq!(x.name, y.name);
            let input_interface = x.name == "block0.conv.weight" || x.name.starts_with("block0.pre_bn");
            if input_interface {
                continue;
            }
            assert_eq!(
                x.tensor.shape, y.tensor.shape,
                "{} shape changed with input channels",
                x.name
            );
        }
        // first kernel depth: 32x1x3x3 vs 32x3x3x3
        assert_eq!(a.tensor(4).shape, vec![32, 1, 3, 3]);
        assert_eq!(b.tensor(4).shape, vec![32, 3, 3, 3]);
    }

    #[test]
    fn conv_kernel_shapes_match_the_channel_plan() {
        let p = Vgg15Params::<f32>::build(vgg15(1), 0);
        let mut c_in = 1;
        for (i, &c_out) in VGG15_CHANNELS.iter().enumerate() {
            let idx = p.block_idx(i);
            assert_eq!(p.tensor(idx.conv_w).shape, vec![c_out, c_in, 3, 3]);
            assert_eq!(p.tensor(idx.pre_gamma).shape, vec![c_in]);
            assert_eq!(p.tensor(idx.post_gamma).shape, vec![c_out]);
            c_in = c_out;
        }
        assert_eq!(p.tensor(p.fc_idx(0).weight).shape, vec![1024, 256]);
        assert_eq!(p.tensor(p.fc_idx(1).weight).shape, vec![1024, 1024]);
        assert_eq!(p.tensor(p.fc_idx(2).weight).shape, vec![5, 1024]);
    }

    #[test]
    fn l2_norm_excludes_running_stats() {
        let mut p = Vgg15Params::<f32>::build(vgg15(1), 0);
        let before = p.l2_norm_squared();
        // Blow up a running-stat tensor; the norm must not move.
        let idx = p.block_idx(0).pre_var;
        assert!(!p.tensors[idx].trainable);
        for v in &mut p.tensors[idx].tensor.data {
            *v = 1e6;
        }
        let after = p.l2_norm_squared();
        assert_eq!(before, after);
    }
}
