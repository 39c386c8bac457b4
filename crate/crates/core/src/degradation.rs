//! Synthetic observations `Y = X + N + S`: Gaussian noise, salt-and-pepper
//! impulses and column stripes.
//!
//! Every random draw is keyed on `(seed, stream, element index)` through
//! [`CounterRng`], so outputs are reproducible regardless of evaluation order.

use std::fmt;
use std::str::FromStr;

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const STREAM_GAUSSIAN: u64 = 1;
const STREAM_IMPULSE: u64 = 2;
const STREAM_STRIPES: u64 = 3;

/// Gaussian standard deviation shared by all four synthesis cases.
pub const CASE_SIGMA: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparseKind {
    Impulse,
    Stripes,
    Both,
}

impl SparseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SparseKind::Impulse => "impulse",
            SparseKind::Stripes => "stripes",
            SparseKind::Both => "both",
        }
    }
}

impl FromStr for SparseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impulse" => Ok(SparseKind::Impulse),
            "stripes" => Ok(SparseKind::Stripes),
            "both" => Ok(SparseKind::Both),
            _ => Err(Error::invalid("sparse_kind", format!("unknown kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub sparse_fraction: f64,
    pub sparse_kind: SparseKind,
    pub stripe_fraction: f64,
    pub stripe_amplitude: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        check_sigma(self.gaussian_sigma)?;
        check_probability("sparse_fraction", self.sparse_fraction)?;
        check_probability("stripe_fraction", self.stripe_fraction)?;
        check_amplitude(self.stripe_amplitude)
    }

    /// Parameters of synthesis case 1..=4 (no stripes).
    pub fn for_case(case: u8, seed: u64) -> Result<Self> {
        let p = match case {
            1 => 0.0,
            2 => 0.05,
            3 => 0.1,
            4 => 0.15,
            _ => return Err(Error::invalid("case", format!("unknown case {case}, expected 1..=4"))),
        };
        Ok(NoiseSpec {
            gaussian_sigma: CASE_SIGMA,
            sparse_fraction: p,
            sparse_kind: SparseKind::Impulse,
            stripe_fraction: 0.0,
            stripe_amplitude: 0.0,
            seed,
        })
    }

    /// Applies Gaussian noise, then impulses, then stripes (if any).
    pub fn apply(&self, clean: &HsiCube) -> Result<HsiCube> {
        self.validate()?;
        let mut out = add_gaussian(clean, self.gaussian_sigma, self.seed)?;
        if matches!(self.sparse_kind, SparseKind::Impulse | SparseKind::Both) {
            out = add_impulse(&out, self.sparse_fraction, self.seed)?;
        }
        if matches!(self.sparse_kind, SparseKind::Stripes | SparseKind::Both) {
            out = add_stripes(&out, self.stripe_fraction, self.stripe_amplitude, self.seed)?;
        }
        Ok(out)
    }

    /// Plain `key=value` lines, one per field.
    pub fn to_sidecar(&self) -> String {
        format!(
            "gaussian_sigma={}\nsparse_fraction={}\nsparse_kind={}\nstripe_fraction={}\nstripe_amplitude={}\nseed={}\n",
            self.gaussian_sigma,
            self.sparse_fraction,
            self.sparse_kind.as_str(),
            self.stripe_fraction,
            self.stripe_amplitude,
            self.seed
        )
    }

    pub fn from_sidecar(text: &str) -> Result<Self> {
        let mut spec = NoiseSpec {
            gaussian_sigma: 0.0,
            sparse_fraction: 0.0,
            sparse_kind: SparseKind::Impulse,
            stripe_fraction: 0.0,
            stripe_amplitude: 0.0,
            seed: 0,
        };
        let num = |k: &'static str, v: &str| v.parse::<f64>().map_err(|e| Error::invalid(k, e.to_string()));
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedFile(format!("sidecar line without `=`: {line}")))?;
            match k {
                "gaussian_sigma" => spec.gaussian_sigma = num("gaussian_sigma", v)?,
                "sparse_fraction" => spec.sparse_fraction = num("sparse_fraction", v)?,
                "sparse_kind" => spec.sparse_kind = v.parse()?,
                "stripe_fraction" => spec.stripe_fraction = num("stripe_fraction", v)?,
                "stripe_amplitude" => spec.stripe_amplitude = num("stripe_amplitude", v)?,
                "seed" => {
                    spec.seed = v
                        .parse()
                        .map_err(|e: std::num::ParseIntError| Error::invalid("seed", e.to_string()))?
                }
                _ => return Err(Error::MalformedFile(format!("unknown sidecar key `{k}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_sidecar().trim_end())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    Ok(())
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(name, format!("must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_amplitude(a: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid("amplitude", format!("must be finite and >= 0, got {a}")));
    }
    Ok(())
}

/// Adds i.i.d. `N(0, sigma^2)` noise. The result is not clipped.
pub fn add_gaussian(clean: &HsiCube, sigma: f64, seed: u64) -> Result<HsiCube> {
    check_sigma(sigma)?;
    let rng = CounterRng::new(seed, STREAM_GAUSSIAN);
    let data = clean
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v as f64 + sigma * rng.normal(i as u64)) as f32)
        .collect();
    HsiCube::from_vec(clean.height(), clean.width(), clean.bands(), data)
}

/// Salt-and-pepper: each element is replaced with probability `p` by 0 or 1
/// with equal odds.
pub fn add_impulse(clean: &HsiCube, p: f64, seed: u64) -> Result<HsiCube> {
    check_probability("p", p)?;
    let rng = CounterRng::new(seed, STREAM_IMPULSE);
    let data = clean
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let i = i as u64;
            if rng.uniform(2 * i) < p {
                if rng.uniform(2 * i + 1) < 0.5 {
                    0.0
                } else {
                    1.0
                }
            } else {
                v
            }
        })
        .collect();
    HsiCube::from_vec(clean.height(), clean.width(), clean.bands(), data)
}

/// Columns chosen for striping in one band: `round(fraction * width)` of
/// them, picked by a seeded partial Fisher–Yates shuffle.
pub fn stripe_columns(width: usize, fraction: f64, seed: u64, band: usize) -> Vec<usize> {
    let rng = CounterRng::new(seed, STREAM_STRIPES);
    let count = ((fraction * width as f64).round() as usize).min(width);
    let base = (band as u64) << 32;
    let mut cols: Vec<usize> = (0..width).collect();
    for i in 0..count {
        let j = i + (rng.bits(base + i as u64) % (width - i) as u64) as usize;
        cols.swap(i, j);
    }
    cols.truncate(count);
    cols
}

/// Adds a constant offset drawn from `[-amplitude, amplitude]` to every
/// element of the selected columns of each band.
pub fn add_stripes(clean: &HsiCube, stripe_fraction: f64, amplitude: f64, seed: u64) -> Result<HsiCube> {
    check_probability("stripe_fraction", stripe_fraction)?;
    check_amplitude(amplitude)?;
    let rng = CounterRng::new(seed, STREAM_STRIPES);
    let (h, w, p) = clean.dims();
    let mut data = clean.data().to_vec();
    for b in 0..p {
        for col in stripe_columns(w, stripe_fraction, seed, b) {
            let key = ((b as u64) << 32) | (1 << 31) | col as u64;
            let offset = rng.uniform_range(key, -amplitude, amplitude);
            for r in 0..h {
                let idx = clean.index(r, col, b);
                data[idx] = (data[idx] as f64 + offset) as f32;
            }
        }
    }
    HsiCube::from_vec(h, w, p, data)
}

/// Applies case `case` (1..=4) and returns the noisy cube with its spec.
pub fn synthesize_case(clean: &HsiCube, case: u8, seed: u64) -> Result<(HsiCube, NoiseSpec)> {
    let spec = NoiseSpec::for_case(case, seed)?;
    let noisy = spec.apply(clean)?;
    Ok((noisy, spec))
}
