//! The denoiser plug-in point and the classical denoisers shipped in-tree.

use crate::cube::HsiCube;
use crate::error::{Error, Result};

/// A Gaussian denoiser used for the auxiliary-variable update.
///
/// Implementations must return a cube conformable with `input`, and should
/// return `input` unchanged (within 1e-5 relative) when `noise_level == 0`.
pub trait Denoiser {
    fn denoise(&self, input: &HsiCube, noise_level: f64) -> Result<HsiCube>;

    /// The prior `Phi(Z)` this denoiser is the exact proximal map of, when
    /// one is known. Used only for energy bookkeeping.
    fn prior(&self, _z: &HsiCube) -> Option<f64> {
        None
    }
}

/// Returns its input unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, input: &HsiCube, _noise_level: f64) -> Result<HsiCube> {
        Ok(input.clone())
    }
}

/// Exact prox of `Phi(Z) = 1/2 |Z|^2`: with `beta = 1/noise_level^2` the
/// output is `X * beta / (beta + 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticProxDenoiser;

impl Denoiser for QuadraticProxDenoiser {
    fn denoise(&self, input: &HsiCube, noise_level: f64) -> Result<HsiCube> {
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(Error::invalid("noise_level", format!("got {noise_level}")));
        }
        // beta/(beta+1) == 1/(1 + noise_level^2)
        let shrink = 1.0 / (1.0 + noise_level * noise_level);
        input.map(|v| (v as f64 * shrink) as f32)
    }

    fn prior(&self, z: &HsiCube) -> Option<f64> {
        Some(crate::solver::updates::quadratic_prior(z))
    }
}

/// Per-band spatial Gaussian blur whose width grows with the noise level:
/// `sigma_px = spatial_scale * noise_level`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianSmoothingDenoiser {
    pub spatial_scale: f64,
    pub max_sigma: f64,
}

impl Default for GaussianSmoothingDenoiser {
    fn default() -> Self {
        GaussianSmoothingDenoiser {
            spatial_scale: 5.0,
            max_sigma: 8.0,
        }
    }
}

/// Reflect about the edge samples: `-1 -> 1`, `n -> n-2`.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

impl GaussianSmoothingDenoiser {
    pub fn kernel_sigma(&self, noise_level: f64) -> f64 {
        (self.spatial_scale * noise_level).min(self.max_sigma)
    }
}

impl Denoiser for GaussianSmoothingDenoiser {
    fn denoise(&self, input: &HsiCube, noise_level: f64) -> Result<HsiCube> {
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(Error::invalid("noise_level", format!("got {noise_level}")));
        }
        let sigma = self.kernel_sigma(noise_level);
        if sigma < 1e-3 {
            return Ok(input.clone());
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut k: Vec<f64> = (-radius..=radius)
            .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= total);

        let (h, w, p) = input.dims();
        let mut out = Vec::with_capacity(input.len());
        let mut tmp = vec![0.0f64; h * w];
        for b in 0..p {
            let plane = input.band(b);
            for r in 0..h {
                for c in 0..w {
                    tmp[r * w + c] = (-radius..=radius)
                        .zip(&k)
                        .map(|(d, kv)| kv * plane[r * w + reflect(c as isize + d, w)] as f64)
                        .sum();
                }
            }
            for r in 0..h {
                for c in 0..w {
                    let v: f64 = (-radius..=radius)
                        .zip(&k)
                        .map(|(d, kv)| kv * tmp[reflect(r as isize + d, h) * w + c])
                        .sum();
                    out.push(v as f32);
                }
            }
        }
        HsiCube::from_vec(h, w, p, out)
    }
}
