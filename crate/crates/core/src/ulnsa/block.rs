//! The LNSA transformer block:
//!
//! ```text
//! y  = proj_in(LN1(x))
//! a  = local(y) W_local + nonlocal(y) W_nonlocal      (half channels each)
//! x1 = x + fuse([a, spectral(y)])
//! out = x1 + FFN(LN2(x1))
//! FFN = conv1x1 -> GELU -> depthwise3x3 -> GELU -> conv1x1
//! ```

use crate::error::{Error, Result};
use crate::layers::{concat_channels, depthwise3x3, layer_norm, linear, load_vec, FeatureMap, Mat};
use crate::scalar::{gelu, Scalar};
use crate::ulnsa::attention::{
    project_qkv, shuffle_tokens, spectral_attention, split_half_channels, window_partition, window_unpartition,
    windowed_attention, PositionalBias, SpectralWeights,
};
use crate::weights::{ParamSpec, WeightStore};

/// Geometry of one block instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub window: usize,
    pub heads: usize,
    pub ffn_expansion: usize,
}

impl BlockShape {
    pub fn validate(&self) -> Result<()> {
        let BlockShape {
            height: h,
            width: w,
            channels: c,
            window: p,
            heads,
            ffn_expansion,
        } = *self;
        if h == 0 || w == 0 || c == 0 || p == 0 || heads == 0 || ffn_expansion == 0 {
            return Err(Error::Config(format!("block dimensions must be positive: {self:?}")));
        }
        if h % p != 0 || w % p != 0 {
            return Err(Error::Config(format!("{h}x{w} map is not divisible by window {p}")));
        }
        if c % 2 != 0 || (c / 2) % heads != 0 {
            return Err(Error::Config(format!(
                "half of {c} channels is not divisible by {heads} heads"
            )));
        }
        Ok(())
    }

    /// Tokens per window.
    pub fn window_tokens(&self) -> usize {
        self.window * self.window
    }

    /// Number of windows, which is the token count of a shuffled group.
    pub fn window_count(&self) -> usize {
        (self.height / self.window) * (self.width / self.window)
    }

    pub fn hidden(&self) -> usize {
        self.channels * self.ffn_expansion
    }

    /// Parameters of a block under `prefix`, in declaration order.
    pub fn param_specs(&self, prefix: &str) -> Vec<ParamSpec> {
        let c = self.channels;
        let half = c / 2;
        let e = self.hidden();
        let (pt, gt) = (self.window_tokens(), self.window_count());
        let n = |s: &str| format!("{prefix}.{s}");
        vec![
            ParamSpec::ones(n("ln1.gamma"), vec![c]),
            ParamSpec::zeros(n("ln1.beta"), vec![c]),
            ParamSpec::uniform(n("proj_in.weight"), vec![c, c], c),
            ParamSpec::uniform(n("proj_in.bias"), vec![c], c),
            ParamSpec::uniform(n("attn.wq"), vec![c, c], c),
            ParamSpec::uniform(n("attn.wk"), vec![c, c], c),
            ParamSpec::uniform(n("attn.wv"), vec![c, c], c),
            ParamSpec::uniform(n("attn.pos_local"), vec![self.heads, pt, pt], pt),
            ParamSpec::uniform(n("attn.pos_nonlocal"), vec![self.heads, gt, gt], gt),
            ParamSpec::uniform(n("attn.w_local"), vec![half, c], half),
            ParamSpec::uniform(n("attn.w_nonlocal"), vec![half, c], half),
            ParamSpec::uniform(n("spec.wq"), vec![c, c], c),
            ParamSpec::uniform(n("spec.wk"), vec![c, c], c),
            ParamSpec::uniform(n("spec.wv"), vec![c, c], c),
            ParamSpec::uniform(n("spec.wo"), vec![c, c], c),
            ParamSpec::uniform(n("fuse.weight"), vec![2 * c, c], 2 * c),
            ParamSpec::uniform(n("fuse.bias"), vec![c], 2 * c),
            ParamSpec::ones(n("ln2.gamma"), vec![c]),
            ParamSpec::zeros(n("ln2.beta"), vec![c]),
            ParamSpec::uniform(n("ffn.w1"), vec![c, e], c),
            ParamSpec::uniform(n("ffn.b1"), vec![e], c),
            ParamSpec::uniform(n("ffn.dw"), vec![e, 3, 3], 9),
            ParamSpec::uniform(n("ffn.dwb"), vec![e], 9),
            ParamSpec::uniform(n("ffn.w2"), vec![e, c], e),
            ParamSpec::uniform(n("ffn.b2"), vec![c], e),
        ]
    }
}

/// Names (relative to a block prefix) of the last projection of each
/// residual branch. Zeroing them turns the block into the identity.
pub const BLOCK_FINAL_PROJECTIONS: [&str; 4] = ["fuse.weight", "fuse.bias", "ffn.w2", "ffn.b2"];

#[derive(Clone, Debug, PartialEq)]
pub struct LnsaBlockWeights<T> {
    pub ln1_gamma: Vec<T>,
    pub ln1_beta: Vec<T>,
    pub proj_in: Mat<T>,
    pub proj_in_bias: Vec<T>,
    pub wq: Mat<T>,
    pub wk: Mat<T>,
    pub wv: Mat<T>,
    pub pos_local: PositionalBias<T>,
    pub pos_nonlocal: PositionalBias<T>,
    pub w_local: Mat<T>,
    pub w_nonlocal: Mat<T>,
    pub spectral: SpectralWeights<T>,
    pub fuse: Mat<T>,
    pub fuse_bias: Vec<T>,
    pub ln2_gamma: Vec<T>,
    pub ln2_beta: Vec<T>,
    pub ffn_w1: Mat<T>,
    pub ffn_b1: Vec<T>,
    pub ffn_dw: Vec<T>,
    pub ffn_dwb: Vec<T>,
    pub ffn_w2: Mat<T>,
    pub ffn_b2: Vec<T>,
}

impl<T: Scalar> LnsaBlockWeights<T> {
    pub fn load(store: &WeightStore, prefix: &str, shape: &BlockShape) -> Result<Self> {
        shape.validate()?;
        let c = shape.channels;
        let half = c / 2;
        let e = shape.hidden();
        let (pt, gt) = (shape.window_tokens(), shape.window_count());
        let n = |s: &str| format!("{prefix}.{s}");
        let mat = |s: &str, r, k| Mat::load(store, &n(s), r, k);
        let vec = |s: &str, dims: &[usize]| load_vec::<T>(store, &n(s), dims);
        Ok(LnsaBlockWeights {
            ln1_gamma: vec("ln1.gamma", &[c])?,
            ln1_beta: vec("ln1.beta", &[c])?,
            proj_in: mat("proj_in.weight", c, c)?,
            proj_in_bias: vec("proj_in.bias", &[c])?,
            wq: mat("attn.wq", c, c)?,
            wk: mat("attn.wk", c, c)?,
            wv: mat("attn.wv", c, c)?,
            pos_local: PositionalBias {
                heads: shape.heads,
                side: pt,
                data: vec("attn.pos_local", &[shape.heads, pt, pt])?,
            },
            pos_nonlocal: PositionalBias {
                heads: shape.heads,
                side: gt,
                data: vec("attn.pos_nonlocal", &[shape.heads, gt, gt])?,
            },
            w_local: mat("attn.w_local", half, c)?,
            w_nonlocal: mat("attn.w_nonlocal", half, c)?,
            spectral: SpectralWeights {
                wq: mat("spec.wq", c, c)?,
                wk: mat("spec.wk", c, c)?,
                wv: mat("spec.wv", c, c)?,
                wo: mat("spec.wo", c, c)?,
            },
            fuse: mat("fuse.weight", 2 * c, c)?,
            fuse_bias: vec("fuse.bias", &[c])?,
            ln2_gamma: vec("ln2.gamma", &[c])?,
            ln2_beta: vec("ln2.beta", &[c])?,
            ffn_w1: mat("ffn.w1", c, e)?,
            ffn_b1: vec("ffn.b1", &[e])?,
            ffn_dw: vec("ffn.dw", &[e, 3, 3])?,
            ffn_dwb: vec("ffn.dwb", &[e])?,
            ffn_w2: mat("ffn.w2", e, c)?,
            ffn_b2: vec("ffn.b2", &[c])?,
        })
    }
}

/// Sum of the local-window and shuffled-window attention branches, each
/// projected back to the full channel width.
pub fn local_nonlocal_attention<T: Scalar>(
    y: &FeatureMap<T>,
    w: &LnsaBlockWeights<T>,
    shape: &BlockShape,
) -> Result<FeatureMap<T>> {
    let p = shape.window;
    let (q, k, v) = project_qkv(y, &w.wq, &w.wk, &w.wv)?;
    let (q1, q2) = split_half_channels(&q)?;
    let (k1, k2) = split_half_channels(&k)?;
    let (v1, v2) = split_half_channels(&v)?;

    let local = windowed_attention(
        &window_partition(&q1, p)?,
        &window_partition(&k1, p)?,
        &window_partition(&v1, p)?,
        &w.pos_local,
        shape.heads,
    )?;
    let local = window_unpartition(&local, y.height, y.width, p)?;

    let nonlocal = windowed_attention(
        &shuffle_tokens(&window_partition(&q2, p)?),
        &shuffle_tokens(&window_partition(&k2, p)?),
        &shuffle_tokens(&window_partition(&v2, p)?),
        &w.pos_nonlocal,
        shape.heads,
    )?;
    let nonlocal = window_unpartition(&shuffle_tokens(&nonlocal), y.height, y.width, p)?;

    linear(&local, &w.w_local, None)?.add(&linear(&nonlocal, &w.w_nonlocal, None)?)
}

pub fn feed_forward<T: Scalar>(x: &FeatureMap<T>, w: &LnsaBlockWeights<T>) -> Result<FeatureMap<T>> {
    let hidden = linear(x, &w.ffn_w1, Some(&w.ffn_b1))?.map(gelu);
    let hidden = depthwise3x3(&hidden, &w.ffn_dw, &w.ffn_dwb)?.map(gelu);
    linear(&hidden, &w.ffn_w2, Some(&w.ffn_b2))
}

pub fn lnsa_block<T: Scalar>(x: &FeatureMap<T>, w: &LnsaBlockWeights<T>, shape: &BlockShape) -> Result<FeatureMap<T>> {
    shape.validate()?;
    if x.dims() != (shape.height, shape.width, shape.channels) {
        return Err(Error::Config(format!(
            "block expects {}x{}x{}, got {:?}",
            shape.height,
            shape.width,
            shape.channels,
            x.dims()
        )));
    }
    let normed = layer_norm(x, &w.ln1_gamma, &w.ln1_beta)?;
    let y = linear(&normed, &w.proj_in, Some(&w.proj_in_bias))?;
    let spatial = local_nonlocal_attention(&y, w, shape)?;
    let spectral = spectral_attention(&y, &w.spectral, shape.heads)?;
    let fused = linear(&concat_channels(&spatial, &spectral)?, &w.fuse, Some(&w.fuse_bias))?;
    let x1 = x.add(&fused)?;
    let ffn = feed_forward(&layer_norm(&x1, &w.ln2_gamma, &w.ln2_beta)?, w)?;
    x1.add(&ffn)
}
