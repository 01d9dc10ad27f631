//! Whole-network forward pass, KL-divergence loss, and backpropagation.
//!
//! Each conv block runs batch norm, 3x3 convolution, ReLU, batch norm,
//! optional pooling, dropout, in that order. Training mode normalizes with
//! batch statistics and draws dropout masks from the caller's RNG; inference
//! uses running statistics and no dropout. The loss is a sum over the batch
//! (not a mean), so duplicating a sample doubles its gradient contribution.

use rand::{Rng, SeedableRng};

use super::arch::{PoolKind, Vgg15Params};
use super::layers;
use super::tensor::{Scalar, Tensor};
use super::ProbVector;
use crate::augment::SoftLabel;
use crate::dsp::Patch;
use crate::CLASS_COUNT;

/// Epsilon inside the batch-norm square root.
pub const BN_EPS: f64 = 1e-5;
/// Momentum of the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.99;
/// Clip applied to softmax outputs before logs in the loss.
pub const LOG_CLIP: f64 = 1e-12;

pub struct BlockCache<T> {
    x_hat_pre: Vec<T>,
    conv_in: Vec<T>,
    relu_out: Vec<T>,
    x_hat_post: Vec<T>,
    drop_mask: Option<Vec<T>>,
    pre_stats: layers::BnStats<T>,
    post_stats: layers::BnStats<T>,
    /// (channels, height, width) entering the block.
    dims_in: (usize, usize, usize),
}

pub struct FcCache<T> {
    input: Vec<T>,
    relu_out: Option<Vec<T>>,
    drop_mask: Option<Vec<T>>,
}

pub struct ForwardCache<T> {
    pub batch: usize,
    blocks: Vec<BlockCache<T>>,
    fc: Vec<FcCache<T>>,
}

fn bn_eps<T: Scalar>() -> T {
    T::from_f64(BN_EPS)
}

/// Training-mode forward pass. Dropout masks come from `rng`; the same seed
/// reproduces the same masks. Running statistics are not touched here - call
/// [`update_running_stats`] with the returned cache to advance them.
pub fn forward_train<T: Scalar, R: Rng>(
    params: &Vgg15Params<T>,
    x: &Tensor<T>,
    rng: &mut R,
) -> (Tensor<T>, ForwardCache<T>) {
    forward_train_impl(params, x, rng, true)
}

fn forward_train_impl<T: Scalar, R: Rng>(
    params: &Vgg15Params<T>,
    x: &Tensor<T>,
    rng: &mut R,
    dropout_enabled: bool,
) -> (Tensor<T>, ForwardCache<T>) {
    let batch = x.shape[0];
    assert_eq!(x.shape[1], params.spec.input_channels, "channel mismatch");
    let mut cur = x.data.clone();
    let mut dims = (
        params.spec.input_channels,
        params.spec.input_height,
        params.spec.input_width,
    );
    let mut blocks = Vec::with_capacity(params.spec.conv_blocks.len());

    for (i, block) in params.spec.conv_blocks.iter().enumerate() {
        let idx = params.block_idx(i);
        let (c_in, h, w) = dims;
        let s = h * w;
        let c_out = block.out_channels;

        let pre_stats = layers::bn_batch_stats(&cur, batch, c_in, s, bn_eps::<T>());
        let (conv_in, x_hat_pre) = layers::bn_apply(
            &cur,
            batch,
            c_in,
            s,
            &pre_stats.mean,
            &pre_stats.invstd,
            &params.tensor(idx.pre_gamma).data,
            &params.tensor(idx.pre_beta).data,
        );

        let mut conv_out = layers::conv_forward(
            &conv_in,
            batch,
            c_in,
            h,
            w,
            &params.tensor(idx.conv_w).data,
            &params.tensor(idx.conv_b).data,
            c_out,
        );
        layers::relu_forward(&mut conv_out);
        let relu_out = conv_out;

        let post_stats = layers::bn_batch_stats(&relu_out, batch, c_out, s, bn_eps::<T>());
        let (bn_out, x_hat_post) = layers::bn_apply(
            &relu_out,
            batch,
            c_out,
            s,
            &post_stats.mean,
            &post_stats.invstd,
            &params.tensor(idx.post_gamma).data,
            &params.tensor(idx.post_beta).data,
        );

        let (mut pooled, dims_out) = match block.pool {
            PoolKind::None => (bn_out, (c_out, h, w)),
            PoolKind::Avg2 => (
                layers::avgpool2_forward(&bn_out, batch * c_out, h, w),
                (c_out, h / 2, w / 2),
            ),
            PoolKind::Global => (
                layers::gap_forward(&bn_out, batch * c_out, s),
                (c_out, 1, 1),
            ),
        };

        let drop_mask = if dropout_enabled && block.dropout > 0.0 {
            let mask = layers::dropout_mask::<T, R>(pooled.len(), block.dropout, rng);
            layers::apply_mask(&mut pooled, &mask);
            Some(mask)
        } else {
            None
        };

        blocks.push(BlockCache {
            x_hat_pre,
            conv_in,
            relu_out,
            x_hat_post,
            drop_mask,
            pre_stats,
            post_stats,
            dims_in: dims,
        });
        cur = pooled;
        dims = dims_out;
    }

    // FC stack on the flattened representation.
    let mut f_in = dims.0 * dims.1 * dims.2;
    let mut fc_caches = Vec::with_capacity(params.spec.fc_layers.len());
    for (j, fc) in params.spec.fc_layers.iter().enumerate() {
        let idx = params.fc_idx(j);
        let input = cur;
        let mut out = layers::fc_forward(
            &input,
            batch,
            f_in,
            &params.tensor(idx.weight).data,
            &params.tensor(idx.bias).data,
            fc.out_features,
        );
        let relu_out = if fc.relu {
            layers::relu_forward(&mut out);
            Some(out.clone())
        } else {
            None
        };
        let drop_mask = if dropout_enabled && fc.dropout > 0.0 {
            let mask = layers::dropout_mask::<T, R>(out.len(), fc.dropout, rng);
            layers::apply_mask(&mut out, &mask);
            Some(mask)
        } else {
            None
        };
        fc_caches.push(FcCache {
            input,
            relu_out,
            drop_mask,
        });
        cur = out;
        f_in = fc.out_features;
    }

    layers::softmax_rows(&mut cur, params.spec.class_count());
    (
        Tensor::from_vec(&[batch, params.spec.class_count()], cur),
        ForwardCache {
            batch,
            blocks,
            fc: fc_caches,
        },
    )
}

/// Inference forward pass: running statistics, no dropout. Returns softmax
/// probabilities `[B, classes]`.
pub fn forward_infer<T: Scalar>(params: &Vgg15Params<T>, x: &Tensor<T>) -> Tensor<T> {
    forward_infer_traced(params, x).0
}

/// As [`forward_infer`], also returning the output shape of every conv block
/// (as channels x height x width) and FC layer, for architecture checks.
pub fn forward_infer_traced<T: Scalar>(
    params: &Vgg15Params<T>,
    x: &Tensor<T>,
) -> (Tensor<T>, Vec<Vec<usize>>) {
    let batch = x.shape[0];
    assert_eq!(x.shape[1], params.spec.input_channels, "channel mismatch");
    let mut trace = Vec::new();
    let mut cur = x.data.clone();
    let mut dims = (
        params.spec.input_channels,
        params.spec.input_height,
        params.spec.input_width,
    );

    for (i, block) in params.spec.conv_blocks.iter().enumerate() {
        let idx = params.block_idx(i);
        let (c_in, h, w) = dims;
        let s = h * w;
        let c_out = block.out_channels;

        let pre = layers::bn_infer(
            &cur,
            c_in,
            s,
            &params.tensor(idx.pre_mean).data,
            &params.tensor(idx.pre_var).data,
            &params.tensor(idx.pre_gamma).data,
            &params.tensor(idx.pre_beta).data,
            bn_eps::<T>(),
        );
        let mut conv_out = layers::conv_forward(
            &pre,
            batch,
            c_in,
            h,
            w,
            &params.tensor(idx.conv_w).data,
            &params.tensor(idx.conv_b).data,
            c_out,
        );
        layers::relu_forward(&mut conv_out);
        let bn_out = layers::bn_infer(
            &conv_out,
            c_out,
            s,
            &params.tensor(idx.post_mean).data,
            &params.tensor(idx.post_var).data,
            &params.tensor(idx.post_gamma).data,
            &params.tensor(idx.post_beta).data,
            bn_eps::<T>(),
        );
        let (pooled, dims_out) = match block.pool {
            PoolKind::None => (bn_out, (c_out, h, w)),
            PoolKind::Avg2 => (
                layers::avgpool2_forward(&bn_out, batch * c_out, h, w),
                (c_out, h / 2, w / 2),
            ),
            PoolKind::Global => (
                layers::gap_forward(&bn_out, batch * c_out, s),
                (c_out, 1, 1),
            ),
        };
        if dims_out.1 == 1 && dims_out.2 == 1 {
            trace.push(vec![dims_out.0]);
        } else {
            trace.push(vec![dims_out.1, dims_out.2, dims_out.0]);
        }
        cur = pooled;
        dims = dims_out;
    }

    let mut f_in = dims.0 * dims.1 * dims.2;
    for (j, fc) in params.spec.fc_layers.iter().enumerate() {
        let idx = params.fc_idx(j);
        let mut out = layers::fc_forward(
            &cur,
            batch,
            f_in,
            &params.tensor(idx.weight).data,
            &params.tensor(idx.bias).data,
            fc.out_features,
        );
        if fc.relu {
            layers::relu_forward(&mut out);
        }
        trace.push(vec![fc.out_features]);
        cur = out;
        f_in = fc.out_features;
    }
    layers::softmax_rows(&mut cur, params.spec.class_count());
    (
        Tensor::from_vec(&[batch, params.spec.class_count()], cur),
        trace,
    )
}

/// Backpropagates the summed KL loss plus L2 term through the cached forward
/// pass. Returns one gradient tensor per parameter tensor (zeros for the
/// non-trainable running statistics).
pub fn backward<T: Scalar>(
    params: &Vgg15Params<T>,
    cache: &ForwardCache<T>,
    probs: &Tensor<T>,
    targets: &Tensor<T>,
    lambda: f64,
) -> Vec<Tensor<T>> {
    let batch = cache.batch;
    let classes = params.spec.class_count();
    assert_eq!(probs.shape, vec![batch, classes]);
    assert_eq!(targets.shape, vec![batch, classes]);

    let mut grads: Vec<Tensor<T>> = params
        .tensors
        .iter()
        .map(|t| Tensor::zeros(&t.tensor.shape))
        .collect();

    // d(sum_n KL(y_n || p_n)) / d logits = p * sum(y) - y per row.
    let mut d_cur = vec![T::zero(); batch * classes];
    for b in 0..batch {
        let mut ysum = T::zero();
        for c in 0..classes {
            ysum += targets.data[b * classes + c];
        }
        for c in 0..classes {
            let i = b * classes + c;
            d_cur[i] = probs.data[i] * ysum - targets.data[i];
        }
    }

    // FC stack, reverse order.
    for (j, fc) in params.spec.fc_layers.iter().enumerate().rev() {
        let idx = params.fc_idx(j);
        let fc_cache = &cache.fc[j];
        if let Some(mask) = &fc_cache.drop_mask {
            layers::apply_mask(&mut d_cur, mask);
        }
        if let Some(relu_out) = &fc_cache.relu_out {
            layers::relu_backward(&mut d_cur, relu_out);
        }
        let f_in = fc_cache.input.len() / batch;
        let (d_x, d_w, d_b) = layers::fc_backward(
            &fc_cache.input,
            &d_cur,
            batch,
            f_in,
            &params.tensor(idx.weight).data,
            fc.out_features,
        );
        grads[idx.weight].data = d_w;
        grads[idx.bias].data = d_b;
        d_cur = d_x;
    }

    // Conv blocks, reverse order.
    for (i, block) in params.spec.conv_blocks.iter().enumerate().rev() {
        let idx = params.block_idx(i);
        let bc = &cache.blocks[i];
        let (c_in, h, w) = bc.dims_in;
        let s = h * w;
        let c_out = block.out_channels;

        if let Some(mask) = &bc.drop_mask {
            layers::apply_mask(&mut d_cur, mask);
        }
        let mut d_bn_out = match block.pool {
            PoolKind::None => d_cur,
            PoolKind::Avg2 => layers::avgpool2_backward(&d_cur, batch * c_out, h, w),
            PoolKind::Global => layers::gap_backward(&d_cur, batch * c_out, s),
        };

        let (d_relu, d_gamma_post, d_beta_post) = layers::bn_backward(
            &d_bn_out,
            &bc.x_hat_post,
            batch,
            c_out,
            s,
            &params.tensor(idx.post_gamma).data,
            &bc.post_stats.invstd,
        );
        grads[idx.post_gamma].data = d_gamma_post;
        grads[idx.post_beta].data = d_beta_post;
        d_bn_out = d_relu;
        layers::relu_backward(&mut d_bn_out, &bc.relu_out);

        let (d_conv_in, d_w, d_b) = layers::conv_backward(
            &bc.conv_in,
            &d_bn_out,
            batch,
            c_in,
            h,
            w,
            &params.tensor(idx.conv_w).data,
            c_out,
        );
        grads[idx.conv_w].data = d_w;
        grads[idx.conv_b].data = d_b;

        let (d_x, d_gamma_pre, d_beta_pre) = layers::bn_backward(
            &d_conv_in,
            &bc.x_hat_pre,
            batch,
            c_in,
            s,
            &params.tensor(idx.pre_gamma).data,
            &bc.pre_stats.invstd,
        );
        grads[idx.pre_gamma].data = d_gamma_pre;
        grads[idx.pre_beta].data = d_beta_pre;
        d_cur = d_x;
    }

    // L2 term: lambda * theta on every trainable tensor.
    if lambda != 0.0 {
        let lam = T::from_f64(lambda);
        for (g, p) in grads.iter_mut().zip(&params.tensors) {
            if p.trainable {
                for (gv, pv) in g.data.iter_mut().zip(&p.tensor.data) {
                    *gv += lam * *pv;
                }
            }
        }
    }
    grads
}

/// Forward + backward in one call: the gradient of the batch loss.
pub fn gradients<T: Scalar, R: Rng>(
    params: &Vgg15Params<T>,
    x: &Tensor<T>,
    targets: &Tensor<T>,
    lambda: f64,
    rng: &mut R,
) -> Vec<Tensor<T>> {
    let (probs, cache) = forward_train(params, x, rng);
    backward(params, &cache, &probs, targets, lambda)
}

/// Recomputes BN running statistics from scratch under the current weights:
/// batch statistics are collected over `batches` (dropout disabled) and
/// pooled with the law of total variance. Equal batch sizes assumed.
///
/// The exponential running average barely moves during short runs (momentum
/// 0.99), leaving inference statistics stale; this pass replaces them with
/// statistics that match the final weights.
pub fn recalibrate_running_stats<T: Scalar>(params: &mut Vgg15Params<T>, batches: &[Tensor<T>]) {
    assert!(!batches.is_empty());
    let k = T::from_count(batches.len());
    // per block: (sum_mean, sum_var_plus_meansq) for pre and post sites
    let mut acc: Vec<[Vec<T>; 4]> = params
        .spec
        .conv_blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let idx = params.block_idx(i);
            let c_in = params.tensor(idx.pre_gamma).numel();
            [
                vec![T::zero(); c_in],
                vec![T::zero(); c_in],
                vec![T::zero(); b.out_channels],
                vec![T::zero(); b.out_channels],
            ]
        })
        .collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for x in batches {
        let (_, cache) = forward_train_impl(params, x, &mut rng, false);
        for (i, bc) in cache.blocks.iter().enumerate() {
            for (site, (mean, var)) in [
                (&bc.pre_stats.mean, &bc.pre_stats.var),
                (&bc.post_stats.mean, &bc.post_stats.var),
            ]
            .into_iter()
            .enumerate()
            {
                let (sum_mean, sum_second) = {
                    let pair = &mut acc[i];
                    let (a, b) = pair.split_at_mut(site * 2 + 1);
                    (&mut a[site * 2], &mut b[0])
                };
                for c in 0..mean.len() {
                    sum_mean[c] += mean[c];
                    sum_second[c] += var[c] + mean[c] * mean[c];
                }
            }
        }
    }

    for (i, sums) in acc.iter().enumerate() {
        let idx = params.block_idx(i);
        for (site, (mean_slot, var_slot)) in
            [(idx.pre_mean, idx.pre_var), (idx.post_mean, idx.post_var)]
                .into_iter()
                .enumerate()
        {
            let sum_mean = &sums[site * 2];
            let sum_second = &sums[site * 2 + 1];
            for c in 0..sum_mean.len() {
                let mean = sum_mean[c] / k;
                let var = (sum_second[c] / k - mean * mean).max(T::zero());
                params.tensors[mean_slot].tensor.data[c] = mean;
                params.tensors[var_slot].tensor.data[c] = var;
            }
        }
    }
}

/// Advances BN running statistics from the batch statistics recorded in a
/// training forward pass: `run = momentum * run + (1 - momentum) * batch`.
pub fn update_running_stats<T: Scalar>(params: &mut Vgg15Params<T>, cache: &ForwardCache<T>) {
    let m = T::from_f64(BN_MOMENTUM);
    let one_m = T::one() - m;
    for (i, bc) in cache.blocks.iter().enumerate() {
        let idx = params.block_idx(i);
        for (slot, mean, var) in [
            (idx.pre_mean, &bc.pre_stats.mean, &bc.pre_stats.var),
            (idx.post_mean, &bc.post_stats.mean, &bc.post_stats.var),
        ] {
            let mean_t = &mut params.tensors[slot].tensor.data;
            for (r, &b) in mean_t.iter_mut().zip(mean) {
                *r = m * *r + one_m * b;
            }
            // var tensor immediately follows its mean in the layout
            let var_t = &mut params.tensors[slot + 1].tensor.data;
            for (r, &b) in var_t.iter_mut().zip(var) {
                *r = m * *r + one_m * b;
            }
        }
    }
}

/// Batch KL loss over probability rows plus the L2 penalty:
/// `sum_n sum_c y log(y / max(y_hat, clip)) + (lambda / 2) * ||theta||^2`.
/// Terms with `y_c == 0` contribute zero. Accumulated in f64.
pub fn kl_loss<T: Scalar>(
    targets: &[SoftLabel],
    outputs: &[ProbVector],
    params: &Vgg15Params<T>,
    lambda: f64,
) -> f64 {
    assert_eq!(targets.len(), outputs.len(), "batch sizes differ");
    let data: f64 = targets
        .iter()
        .zip(outputs)
        .map(|(y, p)| kl_term(&y.weights.map(f64::from), p.values()))
        .sum();
    data + 0.5 * lambda * params.l2_norm_squared()
}

/// Data term of the loss from raw probability rows (training-loop path).
pub fn kl_data_loss<T: Scalar>(targets: &Tensor<T>, probs: &Tensor<T>) -> f64 {
    let classes = targets.shape[1];
    let mut total = 0.0f64;
    for (y_row, p_row) in targets.data.chunks(classes).zip(probs.data.chunks(classes)) {
        let y: Vec<f64> = y_row.iter().map(|v| v.as_f64()).collect();
        let p: Vec<f64> = p_row.iter().map(|v| v.as_f64()).collect();
        total += kl_term(&y, &p);
    }
    total
}

fn kl_term(y: &[f64], p: &[f64]) -> f64 {
    y.iter()
        .zip(p)
        .map(|(&yc, &pc)| {
            if yc <= 0.0 {
                0.0
            } else {
                yc * (yc / pc.max(LOG_CLIP)).ln()
            }
        })
        .sum()
}

/// Assembles a `[B, C, 128, 128]` input tensor from patches (all patches
/// must share the channel count).
pub fn batch_from_patches(patches: &[Patch]) -> Tensor<f32> {
    assert!(!patches.is_empty());
    let channels = patches[0].channels;
    assert!(patches.iter().all(|p| p.channels == channels));
    let side = crate::dsp::PATCH_SIDE;
    let mut data = Vec::with_capacity(patches.len() * channels * side * side);
    for p in patches {
        data.extend_from_slice(&p.values);
    }
    Tensor::from_vec(&[patches.len(), channels, side, side], data)
}

/// Converts softmax output rows into probability vectors.
pub fn probs_to_vectors<T: Scalar>(probs: &Tensor<T>) -> Vec<ProbVector> {
    probs
        .data
        .chunks(CLASS_COUNT)
        .map(|row| {
            let mut v = [0.0f64; CLASS_COUNT];
            for (d, s) in v.iter_mut().zip(row) {
                *d = s.as_f64();
            }
            ProbVector::new(v)
        })
        .collect()
}
