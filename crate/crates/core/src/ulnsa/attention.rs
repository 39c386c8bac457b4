//! Token regrouping and the three attention flavours of the LNSA block:
//! window-local, shuffled (non-local) and spectral.

use crate::error::{Error, Result};
use crate::layers::{concat_channels, linear, FeatureMap, Mat};
use crate::scalar::{softmax_in_place, Scalar};

/// `groups x tokens x dim`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenGroups<T> {
    pub groups: usize,
    pub tokens: usize,
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> TokenGroups<T> {
    pub fn new(groups: usize, tokens: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != groups * tokens * dim {
            return Err(Error::Config(format!(
                "token groups {groups}x{tokens}x{dim} need {} values, got {}",
                groups * tokens * dim,
                data.len()
            )));
        }
        Ok(TokenGroups {
            groups,
            tokens,
            dim,
            data,
        })
    }

    #[inline]
    pub fn at(&self, g: usize, t: usize, d: usize) -> T {
        self.data[(g * self.tokens + t) * self.dim + d]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.groups, self.tokens, self.dim)
    }
}

/// Additive attention bias, one `side x side` table per head.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionalBias<T> {
    pub heads: usize,
    pub side: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> PositionalBias<T> {
    pub fn zeros(heads: usize, side: usize) -> Self {
        PositionalBias {
            heads,
            side,
            data: vec![T::zero(); heads * side * side],
        }
    }

    #[inline]
    pub fn at(&self, head: usize, i: usize, j: usize) -> T {
        self.data[(head * self.side + i) * self.side + j]
    }
}

/// Per-token `Q = X Wq`, `K = X Wk`, `V = X Wv` (no biases).
pub fn project_qkv<T: Scalar>(
    x: &FeatureMap<T>,
    wq: &Mat<T>,
    wk: &Mat<T>,
    wv: &Mat<T>,
) -> Result<(FeatureMap<T>, FeatureMap<T>, FeatureMap<T>)> {
    Ok((linear(x, wq, None)?, linear(x, wk, None)?, linear(x, wv, None)?))
}

/// First `C/2` channels and last `C/2` channels.
pub fn split_half_channels<T: Scalar>(x: &FeatureMap<T>) -> Result<(FeatureMap<T>, FeatureMap<T>)> {
    if !x.channels.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "cannot split {} channels into equal halves",
            x.channels
        )));
    }
    let half = x.channels / 2;
    let mut a = Vec::with_capacity(x.data.len() / 2);
    let mut b = Vec::with_capacity(x.data.len() / 2);
    for t in 0..x.tokens() {
        let tok = x.token(t);
        a.extend_from_slice(&tok[..half]);
        b.extend_from_slice(&tok[half..]);
    }
    Ok((
        FeatureMap::new(x.height, x.width, half, a)?,
        FeatureMap::new(x.height, x.width, half, b)?,
    ))
}

pub fn merge_halves<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    concat_channels(a, b)
}

/// Non-overlapping `p x p` windows in row-major window order; tokens within
/// a window are row-major.
pub fn window_partition<T: Scalar>(x: &FeatureMap<T>, p: usize) -> Result<TokenGroups<T>> {
    if p == 0 || !x.height.is_multiple_of(p) || !x.width.is_multiple_of(p) {
        return Err(Error::Config(format!(
            "{}x{} map is not divisible into {p}x{p} windows",
            x.height, x.width
        )));
    }
    let (wr, wc) = (x.height / p, x.width / p);
    let mut data = Vec::with_capacity(x.data.len());
    for gr in 0..wr {
        for gc in 0..wc {
            for i in 0..p {
                for j in 0..p {
                    data.extend_from_slice(x.token((gr * p + i) * x.width + gc * p + j));
                }
            }
        }
    }
    TokenGroups::new(wr * wc, p * p, x.channels, data)
}

pub fn window_unpartition<T: Scalar>(
    g: &TokenGroups<T>,
    height: usize,
    width: usize,
    p: usize,
) -> Result<FeatureMap<T>> {
    if p == 0
        || !height.is_multiple_of(p)
        || !width.is_multiple_of(p)
        || g.groups != (height / p) * (width / p)
        || g.tokens != p * p
    {
        return Err(Error::Config(format!(
            "token groups {:?} do not tile a {height}x{width} map with {p}x{p} windows",
            g.shape()
        )));
    }
    let wc = width / p;
    let mut out = FeatureMap::zeros(height, width, g.dim);
    for w in 0..g.groups {
        let (gr, gc) = (w / wc, w % wc);
        for t in 0..g.tokens {
            let (i, j) = (t / p, t % p);
            let dst = ((gr * p + i) * width + gc * p + j) * g.dim;
            let src = (w * g.tokens + t) * g.dim;
            out.data[dst..dst + g.dim].copy_from_slice(&g.data[src..src + g.dim]);
        }
    }
    Ok(out)
}

/// Swaps the group and token axes. An involution.
pub fn shuffle_tokens<T: Scalar>(g: &TokenGroups<T>) -> TokenGroups<T> {
    let mut data = Vec::with_capacity(g.data.len());
    for t in 0..g.tokens {
        for w in 0..g.groups {
            let src = (w * g.tokens + t) * g.dim;
            data.extend_from_slice(&g.data[src..src + g.dim]);
        }
    }
    TokenGroups {
        groups: g.tokens,
        tokens: g.groups,
        dim: g.dim,
        data,
    }
}

fn check_heads(dim: usize, heads: usize) -> Result<usize> {
    if heads == 0 || !dim.is_multiple_of(heads) {
        return Err(Error::Config(format!(
            "{dim} channels cannot be split into {heads} heads"
        )));
    }
    Ok(dim / heads)
}

/// Per group and head: `softmax(Q K^T / sqrt(d_h) + P) V`, rows normalized.
///
/// When `weights` is given, the attention matrices are appended to it in
/// (group, head) order.
pub fn windowed_attention_with_weights<T: Scalar>(
    q: &TokenGroups<T>,
    k: &TokenGroups<T>,
    v: &TokenGroups<T>,
    pos: &PositionalBias<T>,
    heads: usize,
    mut weights: Option<&mut Vec<Vec<T>>>,
) -> Result<TokenGroups<T>> {
    if q.shape() != k.shape() || q.shape() != v.shape() {
        return Err(Error::Config(format!(
            "Q/K/V shapes differ: {:?} {:?} {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let dh = check_heads(q.dim, heads)?;
    if pos.heads != heads || pos.side != q.tokens {
        return Err(Error::Config(format!(
            "positional table {}x{}x{} does not match {heads} heads of {} tokens",
            pos.heads, pos.side, pos.side, q.tokens
        )));
    }
    let n = q.tokens;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let mut out = vec![T::zero(); q.data.len()];
    let mut logits = vec![T::zero(); n * n];
    for g in 0..q.groups {
        for h in 0..heads {
            let off = h * dh;
            for i in 0..n {
                for j in 0..n {
                    let mut dot = T::zero();
                    for d in 0..dh {
                        dot += q.at(g, i, off + d) * k.at(g, j, off + d);
                    }
                    logits[i * n + j] = dot * scale + pos.at(h, i, j);
                }
                softmax_in_place(&mut logits[i * n..(i + 1) * n]);
            }
            for i in 0..n {
                for d in 0..dh {
                    let mut acc = T::zero();
                    for j in 0..n {
                        acc += logits[i * n + j] * v.at(g, j, off + d);
                    }
                    out[(g * n + i) * q.dim + off + d] = acc;
                }
            }
            if let Some(w) = weights.as_deref_mut() {
                w.push(logits.clone());
            }
        }
    }
    TokenGroups::new(q.groups, q.tokens, q.dim, out)
}

pub fn windowed_attention<T: Scalar>(
    q: &TokenGroups<T>,
    k: &TokenGroups<T>,
    v: &TokenGroups<T>,
    pos: &PositionalBias<T>,
    heads: usize,
) -> Result<TokenGroups<T>> {
    windowed_attention_with_weights(q, k, v, pos, heads, None)
}

/// Projection weights of the spectral branch.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralWeights<T> {
    pub wq: Mat<T>,
    pub wk: Mat<T>,
    pub wv: Mat<T>,
    pub wo: Mat<T>,
}

/// Channel-by-channel attention. Per head of width `d`, with tokens as
/// rows: `A = V softmax(K^T Q / sqrt(d))`, the softmax normalizing each
/// column. Heads are concatenated and projected by `wo`.
///
/// When `weights` is given, each head's `d x d` matrix is appended.
pub fn spectral_attention_with_weights<T: Scalar>(
    x: &FeatureMap<T>,
    w: &SpectralWeights<T>,
    heads: usize,
    mut weights: Option<&mut Vec<Vec<T>>>,
) -> Result<FeatureMap<T>> {
    let c = x.channels;
    let d = check_heads(c, heads)?;
    let (q, k, v) = project_qkv(x, &w.wq, &w.wk, &w.wv)?;
    let tokens = x.tokens();
    let scale = T::from_f64(1.0 / (d as f64).sqrt());
    let mut attended = vec![T::zero(); tokens * c];
    let mut logits = vec![T::zero(); d * d];
    let mut column = vec![T::zero(); d];
    for h in 0..heads {
        let off = h * d;
        for r in 0..d {
            for col in 0..d {
                let mut dot = T::zero();
                for t in 0..tokens {
                    dot += k.data[t * c + off + r] * q.data[t * c + off + col];
                }
                logits[r * d + col] = dot * scale;
            }
        }
        for col in 0..d {
            for r in 0..d {
                column[r] = logits[r * d + col];
            }
            softmax_in_place(&mut column);
            for r in 0..d {
                logits[r * d + col] = column[r];
            }
        }
        for t in 0..tokens {
            for col in 0..d {
                let mut acc = T::zero();
                for r in 0..d {
                    acc += v.data[t * c + off + r] * logits[r * d + col];
                }
                attended[t * c + off + col] = acc;
            }
        }
        if let Some(ws) = weights.as_deref_mut() {
            ws.push(logits.clone());
        }
    }
    let attended = FeatureMap::new(x.height, x.width, c, attended)?;
    linear(&attended, &w.wo, None)
}

pub fn spectral_attention<T: Scalar>(x: &FeatureMap<T>, w: &SpectralWeights<T>, heads: usize) -> Result<FeatureMap<T>> {
    spectral_attention_with_weights(x, w, heads, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(h: usize, w: usize, c: usize, seed: f64) -> FeatureMap<f64> {
        FeatureMap::from_fn(h, w, c, |r, col, ch| ((r * 13 + col * 5 + ch * 3) as f64 * seed).sin())
    }

    #[test]
    fn split_known_channels() {
        let x = FeatureMap::from_fn(2, 2, 2, |_, _, ch| (ch + 1) as f64);
        let (a, b) = split_half_channels(&x).unwrap();
        assert!(a.data.iter().all(|&v| v == 1.0));
        assert!(b.data.iter().all(|&v| v == 2.0));
        assert_eq!(merge_halves(&a, &b).unwrap(), x);
        assert!(split_half_channels(&fm(1, 1, 3, 0.1)).is_err());
    }

    #[test]
    fn partition_whole_map_and_unit_windows() {
        let x = fm(4, 4, 2, 0.3);
        let g = window_partition(&x, 4).unwrap();
        assert_eq!(g.shape(), (1, 16, 2));
        assert_eq!(g.data, x.data);
        let g1 = window_partition(&x, 1).unwrap();
        assert_eq!(g1.shape(), (16, 1, 2));
        assert_eq!(window_unpartition(&g1, 4, 4, 1).unwrap(), x);
        assert!(window_partition(&fm(4, 6, 1, 0.1), 4).is_err());
    }

    #[test]
    fn shuffle_transposes() {
        let g = TokenGroups::new(2, 4, 1, (0..8).map(|v| v as f64).collect()).unwrap();
        let s = shuffle_tokens(&g);
        assert_eq!(s.shape(), (4, 2, 1));
        assert_eq!(s.at(3, 0, 0), g.at(0, 3, 0));
        assert_eq!(shuffle_tokens(&s), g);
    }

    #[test]
    fn zero_keys_average_values() {
        let q = TokenGroups::new(1, 3, 2, vec![0.3, -1.0, 2.0, 0.5, 0.1, 0.9]).unwrap();
        let k = TokenGroups::new(1, 3, 2, vec![0.0; 6]).unwrap();
        let v = TokenGroups::new(1, 3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]).unwrap();
        let out = windowed_attention(&q, &k, &v, &PositionalBias::zeros(2, 3), 2).unwrap();
        for i in 0..3 {
            assert!((out.at(0, i, 0) - 3.0).abs() < 1e-12);
            assert!((out.at(0, i, 1) - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_token_returns_value() {
        let q = TokenGroups::new(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = TokenGroups::new(2, 1, 2, vec![-1.0, 0.5, 7.0, 8.0]).unwrap();
        let out = windowed_attention(&q, &q, &v, &PositionalBias::zeros(1, 1), 1).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn spectral_zero_keys_mix_uniformly() {
        let x = fm(2, 3, 4, 0.7);
        let w = SpectralWeights {
            wq: Mat::identity(4),
            wk: Mat::zeros(4, 4),
            wv: Mat::identity(4),
            wo: Mat::identity(4),
        };
        let out = spectral_attention(&x, &w, 1).unwrap();
        for t in 0..x.tokens() {
            let mean = x.token(t).iter().sum::<f64>() / 4.0;
            assert!(out.token(t).iter().all(|v| (v - mean).abs() < 1e-12));
        }
    }

    #[test]
    fn shape_errors() {
        let g = TokenGroups::new(1, 2, 4, vec![0.0; 8]).unwrap();
        assert!(windowed_attention(&g, &g, &g, &PositionalBias::zeros(3, 2), 3).is_err());
        assert!(windowed_attention(&g, &g, &g, &PositionalBias::zeros(2, 3), 2).is_err());
        let w = SpectralWeights {
            wq: Mat::identity(4),
            wk: Mat::identity(4),
            wv: Mat::identity(4),
            wo: Mat::identity(4),
        };
        assert!(spectral_attention(&fm(1, 1, 4, 0.1), &w, 3).is_err());
    }
}
