//! Full-reference quality metrics: PSNR, SSIM and ERGAS.
//!
//! All reductions accumulate in `f64`.

use std::fmt;

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Bands whose reference mean falls below this are rejected by ERGAS.
pub const ERGAS_MEAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    /// Decibels; `f64::INFINITY` when the inputs are identical.
    pub psnr: f64,
    pub ssim: f64,
    pub ergas: f64,
}

impl MetricReport {
    pub fn compute(reference: &HsiCube, test: &HsiCube, peak: f64, scale_ratio: f64) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(reference, test, peak)?,
            ssim: ssim(reference, test, peak)?,
            ergas: ergas(reference, test, scale_ratio)?,
        })
    }

    pub fn csv_header() -> &'static str {
        "psnr,ssim,ergas"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.6},{:.6}", format_psnr(self.psnr), self.ssim, self.ergas)
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "psnr={}", format_psnr(self.psnr))?;
        writeln!(f, "ssim={:.6}", self.ssim)?;
        write!(f, "ergas={:.6}", self.ergas)
    }
}

pub fn format_psnr(psnr: f64) -> String {
    if psnr.is_infinite() {
        "inf".to_string()
    } else {
        format!("{psnr:.4}")
    }
}

pub fn mse(reference: &HsiCube, test: &HsiCube) -> Result<f64> {
    reference.ensure_conformable(test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(sum / reference.len() as f64)
}

pub fn psnr(reference: &HsiCube, test: &HsiCube, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid("peak", format!("must be positive, got {peak}")));
    }
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            tmp[r * ow + c] = (0..n).map(|i| k[i] * plane[r * w + c + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| k[i] * tmp[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over bands.
pub fn ssim(reference: &HsiCube, test: &HsiCube, peak: f64) -> Result<f64> {
    reference.ensure_conformable(test)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid("peak", format!("must be positive, got {peak}")));
    }
    let (h, w, p) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Degenerate(format!(
            "cube {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);

    let mut total = 0.0;
    for b in 0..p {
        let x: Vec<f64> = reference.band(b).iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = test.band(b).iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();

        let mu_x = filter_valid(&x, h, w, &k);
        let mu_y = filter_valid(&y, h, w, &k);
        let e_xx = filter_valid(&xx, h, w, &k);
        let e_yy = filter_valid(&yy, h, w, &k);
        let e_xy = filter_valid(&xy, h, w, &k);

        let n = mu_x.len();
        let mut band_sum = 0.0;
        for i in 0..n {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let sxx = e_xx[i] - mx * mx;
            let syy = e_yy[i] - my * my;
            let sxy = e_xy[i] - mx * my;
            band_sum += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
        }
        total += band_sum / n as f64;
    }
    Ok(total / p as f64)
}

/// ERGAS with per-band RMSE normalized by the reference band mean.
pub fn ergas(reference: &HsiCube, test: &HsiCube, scale_ratio: f64) -> Result<f64> {
    reference.ensure_conformable(test)?;
    if !(scale_ratio > 0.0 && scale_ratio.is_finite()) {
        return Err(Error::invalid(
            "scale_ratio",
            format!("must be positive, got {scale_ratio}"),
        ));
    }
    let p = reference.bands();
    let mut acc = 0.0;
    for b in 0..p {
        let r = reference.band(b);
        let t = test.band(b);
        let n = r.len() as f64;
        let mean = r.iter().map(|&v| v as f64).sum::<f64>() / n;
        if mean.abs() < ERGAS_MEAN_TOL {
            return Err(Error::Degenerate(format!(
                "band {b} has reference mean {mean:e}; ERGAS is undefined"
            )));
        }
        let mse = r
            .iter()
            .zip(t)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum::<f64>()
            / n;
        acc += mse / (mean * mean);
    }
    Ok(100.0 * scale_ratio * (acc / p as f64).sqrt())
}
