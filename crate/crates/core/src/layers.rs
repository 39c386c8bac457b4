//! Channels-last feature maps and the dense layers built on them.

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weights::WeightStore;

/// `height x width x channels`, stored token-major: channel `ch` of pixel
/// `(r, c)` is at `(r * width + c) * channels + ch`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Config(format!(
                "feature map dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Config(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        FeatureMap {
            height,
            width,
            channels,
            data,
        }
    }

    /// Band `b` of the cube becomes channel `b`.
    pub fn from_cube(cube: &HsiCube) -> Self {
        FeatureMap::from_fn(cube.height(), cube.width(), cube.bands(), |r, c, b| {
            T::from_f64(cube.get(r, c, b) as f64)
        })
    }

    pub fn to_cube(&self) -> Result<HsiCube> {
        HsiCube::from_fn(self.height, self.width, self.channels, |r, c, b| {
            self.get(r, c, b).re() as f32
        })
    }

    pub fn tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> T {
        self.data[(r * self.width + c) * self.channels + ch]
    }

    #[inline]
    pub fn token(&self, t: usize) -> &[T] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn add(&self, other: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        if self.dims() != other.dims() {
            return Err(Error::Config(format!(
                "cannot add {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(FeatureMap {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
            ..*self
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> FeatureMap<T> {
        FeatureMap {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::from_f64(v.re())).collect(),
        }
    }
}

/// Concatenates along the channel axis.
pub fn concat_channels<T: Scalar>(a: &FeatureMap<T>, b: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::Config(format!(
            "cannot concatenate {:?} with {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    for t in 0..a.tokens() {
        data.extend_from_slice(a.token(t));
        data.extend_from_slice(b.token(t));
    }
    FeatureMap::new(a.height, a.width, a.channels + b.channels, data)
}

/// Dense row-major matrix; per-token maps compute `y = x * M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Mat { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn load(store: &WeightStore, name: &str, rows: usize, cols: usize) -> Result<Self> {
        Ok(Mat {
            rows,
            cols,
            data: load_vec(store, name, &[rows, cols])?,
        })
    }
}

pub fn load_vec<T: Scalar>(store: &WeightStore, name: &str, shape: &[usize]) -> Result<Vec<T>> {
    Ok(store
        .expect(name, shape)?
        .data
        .iter()
        .map(|&v| T::from_f64(v as f64))
        .collect())
}

/// Per-token affine map `x * W + b`.
pub fn linear<T: Scalar>(x: &FeatureMap<T>, w: &Mat<T>, bias: Option<&[T]>) -> Result<FeatureMap<T>> {
    if w.rows != x.channels {
        return Err(Error::Config(format!(
            "linear map expects {} input channels, got {}",
            w.rows, x.channels
        )));
    }
    if let Some(b) = bias {
        if b.len() != w.cols {
            return Err(Error::Config("bias length mismatch".into()));
        }
    }
    let mut data = Vec::with_capacity(x.tokens() * w.cols);
    for t in 0..x.tokens() {
        let tok = x.token(t);
        for o in 0..w.cols {
            let mut acc = bias.map_or(T::zero(), |b| b[o]);
            for (i, &v) in tok.iter().enumerate() {
                acc += v * w.data[i * w.cols + o];
            }
            data.push(acc);
        }
    }
    FeatureMap::new(x.height, x.width, w.cols, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Circular,
}

/// 2-D convolution with weight layout `[out, in, kh, kw]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn load(
        store: &WeightStore,
        prefix: &str,
        out_ch: usize,
        in_ch: usize,
        k: usize,
        with_bias: bool,
    ) -> Result<Self> {
        let weight = load_vec(store, &format!("{prefix}.weight"), &[out_ch, in_ch, k, k])?;
        let bias = if with_bias {
            Some(load_vec(store, &format!("{prefix}.bias"), &[out_ch])?)
        } else {
            None
        };
        Ok(Conv2d {
            out_ch,
            in_ch,
            kh: k,
            kw: k,
            weight,
            bias,
        })
    }

    pub fn forward(&self, x: &FeatureMap<T>, stride: usize, pad: usize, padding: Padding) -> Result<FeatureMap<T>> {
        if x.channels != self.in_ch {
            return Err(Error::Config(format!(
                "conv expects {} input channels, got {}",
                self.in_ch, x.channels
            )));
        }
        let (h, w) = (x.height as isize, x.width as isize);
        if x.height + 2 * pad < self.kh || x.width + 2 * pad < self.kw {
            return Err(Error::Config("input smaller than kernel".into()));
        }
        let oh = (x.height + 2 * pad - self.kh) / stride + 1;
        let ow = (x.width + 2 * pad - self.kw) / stride + 1;
        let mut out = Vec::with_capacity(oh * ow * self.out_ch);
        for orow in 0..oh {
            for ocol in 0..ow {
                for o in 0..self.out_ch {
                    let mut acc = self.bias.as_ref().map_or(T::zero(), |b| b[o]);
                    for ky in 0..self.kh {
                        let mut r = (orow * stride + ky) as isize - pad as isize;
                        if r < 0 || r >= h {
                            match padding {
                                Padding::Zero => continue,
                                Padding::Circular => r = r.rem_euclid(h),
                            }
                        }
                        for kx in 0..self.kw {
                            let mut c = (ocol * stride + kx) as isize - pad as isize;
                            if c < 0 || c >= w {
                                match padding {
                                    Padding::Zero => continue,
                                    Padding::Circular => c = c.rem_euclid(w),
                                }
                            }
                            let tok = x.token(r as usize * x.width + c as usize);
                            let base = ((o * self.in_ch) * self.kh + ky) * self.kw + kx;
                            let step = self.kh * self.kw;
                            for (i, &v) in tok.iter().enumerate() {
                                acc += v * self.weight[base + i * step];
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        FeatureMap::new(oh, ow, self.out_ch, out)
    }
}

/// Transposed 2x2 convolution with stride 2, weight layout `[in, out, 2, 2]`.
/// Output pixel `(2i+dy, 2j+dx)` depends only on input pixel `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Deconv2x2<T> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Deconv2x2<T> {
    pub fn load(store: &WeightStore, prefix: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        Ok(Deconv2x2 {
            in_ch,
            out_ch,
            weight: load_vec(store, &format!("{prefix}.weight"), &[in_ch, out_ch, 2, 2])?,
            bias: load_vec(store, &format!("{prefix}.bias"), &[out_ch])?,
        })
    }

    pub fn forward(&self, x: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        if x.channels != self.in_ch {
            return Err(Error::Config(format!(
                "deconv expects {} input channels, got {}",
                self.in_ch, x.channels
            )));
        }
        let (oh, ow) = (2 * x.height, 2 * x.width);
        let mut out = FeatureMap::zeros(oh, ow, self.out_ch);
        for r in 0..oh {
            for c in 0..ow {
                let tok = x.token((r / 2) * x.width + c / 2);
                let (dy, dx) = (r % 2, c % 2);
                for o in 0..self.out_ch {
                    let mut acc = self.bias[o];
                    for (i, &v) in tok.iter().enumerate() {
                        acc += v * self.weight[((i * self.out_ch + o) * 2 + dy) * 2 + dx];
                    }
                    out.data[(r * ow + c) * self.out_ch + o] = acc;
                }
            }
        }
        Ok(out)
    }
}

/// Depthwise 3x3 convolution, zero padding 1, weight layout `[ch, 3, 3]`.
pub fn depthwise3x3<T: Scalar>(x: &FeatureMap<T>, weight: &[T], bias: &[T]) -> Result<FeatureMap<T>> {
    let ch = x.channels;
    if weight.len() != ch * 9 || bias.len() != ch {
        return Err(Error::Config("depthwise weight shape mismatch".into()));
    }
    let (h, w) = (x.height as isize, x.width as isize);
    let mut out = FeatureMap::zeros(x.height, x.width, ch);
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let mut acc = bias[k];
                for ky in 0..3isize {
                    let rr = r + ky - 1;
                    if rr < 0 || rr >= h {
                        continue;
                    }
                    for kx in 0..3isize {
                        let cc = c + kx - 1;
                        if cc < 0 || cc >= w {
                            continue;
                        }
                        acc += x.get(rr as usize, cc as usize, k) * weight[k * 9 + (ky * 3 + kx) as usize];
                    }
                }
                out.data[((r * w + c) as usize) * ch + k] = acc;
            }
        }
    }
    Ok(out)
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalizes each token over its channels, then scales and shifts.
pub fn layer_norm<T: Scalar>(x: &FeatureMap<T>, gamma: &[T], beta: &[T]) -> Result<FeatureMap<T>> {
    let c = x.channels;
    if gamma.len() != c || beta.len() != c {
        return Err(Error::Config("layer norm parameter length mismatch".into()));
    }
    let inv_c = T::from_f64(1.0 / c as f64);
    let eps = T::from_f64(LAYER_NORM_EPS);
    let mut data = Vec::with_capacity(x.data.len());
    for t in 0..x.tokens() {
        let tok = x.token(t);
        let mean = tok.iter().copied().sum::<T>() * inv_c;
        let var = tok.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let inv_std = T::one() / (var + eps).sqrt();
        for (i, &v) in tok.iter().enumerate() {
            data.push((v - mean) * inv_std * gamma[i] + beta[i]);
        }
    }
    FeatureMap::new(x.height, x.width, c, data)
}
