//! The hyperspectral cube container and element-wise arithmetic.
//!
//! Storage is band-sequential: element `(row, col, band)` lives at
//! `band * height * width + row * width + col`.

use crate::error::{Dims, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f32>,
}

impl HsiCube {
    pub fn from_vec(height: usize, width: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::invalid(
                "dims",
                format!("all dimensions must be positive, got {height}x{width}x{bands}"),
            ));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(bands))
            .ok_or_else(|| Error::invalid("dims", "element count overflows"))?;
        if data.len() != expected {
            return Err(Error::invalid(
                "data",
                format!(
                    "expected {expected} values for {height}x{width}x{bands}, got {}",
                    data.len()
                ),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(HsiCube {
            height,
            width,
            bands,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, bands: usize) -> Result<Self> {
        Self::filled(height, width, bands, 0.0)
    }

    pub fn filled(height: usize, width: usize, bands: usize, value: f32) -> Result<Self> {
        let n = height * width * bands;
        Self::from_vec(height, width, bands, vec![value; n])
    }

    /// Builds a cube from a function of `(row, col, band)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, b));
                }
            }
        }
        Self::from_vec(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> Dims {
        (self.height, self.width, self.bands)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, band: usize) -> usize {
        (band * self.height + row) * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[self.index(row, col, band)]
    }

    /// Contiguous spatial plane of one band.
    pub fn band(&self, band: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[band * plane..(band + 1) * plane]
    }

    pub fn ensure_conformable(&self, other: &HsiCube) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every element, rejecting non-finite results.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<HsiCube> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::from_vec(self.height, self.width, self.bands, data)
    }

    /// Element-wise combination of two conformable cubes.
    pub fn zip_map(&self, other: &HsiCube, f: impl Fn(f32, f32) -> f32) -> Result<HsiCube> {
        self.ensure_conformable(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::from_vec(self.height, self.width, self.bands, data)
    }

    /// Reorders bands so that output band `i` is input band `order[i]`.
    pub fn permute_bands(&self, order: &[usize]) -> Result<HsiCube> {
        let mut seen = vec![false; self.bands];
        if order.len() != self.bands {
            return Err(Error::invalid("order", "length must equal band count"));
        }
        for &b in order {
            if b >= self.bands || seen[b] {
                return Err(Error::invalid("order", "not a permutation"));
            }
            seen[b] = true;
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &b in order {
            data.extend_from_slice(self.band(b));
        }
        Self::from_vec(self.height, self.width, self.bands, data)
    }

    pub fn max_abs_diff(&self, other: &HsiCube) -> Result<f64> {
        self.ensure_conformable(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .fold(0.0, f64::max))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// Clamps into `[lo, hi]`; used only when exporting images.
    pub fn clamped(&self, lo: f32, hi: f32) -> HsiCube {
        HsiCube {
            data: self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
            ..self.clone()
        }
    }
}

/// Element-wise `a*u + b*v`, evaluated in 64-bit and stored as 32-bit.
pub fn axpy_combine(a: f64, u: &HsiCube, b: f64, v: &HsiCube) -> Result<HsiCube> {
    u.zip_map(v, |x, y| (a * x as f64 + b * y as f64) as f32)
}
