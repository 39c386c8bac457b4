//! Input-gradient verification for the attention stack.
//!
//! The probe is the sum of an operator's outputs. Its exact partial
//! derivative with respect to a sampled input coordinate is obtained by
//! running the forward pass on [`Dual`] numbers seeded at that coordinate,
//! and compared against a central finite difference of the `f64` forward
//! pass with step [`FD_STEP`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{linear, FeatureMap, Mat};
use crate::rng::CounterRng;
use crate::scalar::{Dual, Scalar};
use crate::ulnsa::attention::{
    project_qkv, shuffle_tokens, spectral_attention, window_partition, window_unpartition, windowed_attention,
    PositionalBias, SpectralWeights,
};
use crate::ulnsa::block::{lnsa_block, BlockShape, LnsaBlockWeights};
use crate::ulnsa::net::{UlnsaConfig, UlnsaWeights};
use crate::weights::{ParamSpec, WeightStore};

pub const FD_STEP: f64 = 1e-3;
/// Denominator floor of the relative error, so coordinates with a vanishing
/// gradient are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradOp {
    Projection,
    LocalAttention,
    NonlocalAttention,
    SpectralAttention,
    LnsaBlock,
    Ulnsa,
}

impl GradOp {
    pub const ALL: [GradOp; 6] = [
        GradOp::Projection,
        GradOp::LocalAttention,
        GradOp::NonlocalAttention,
        GradOp::SpectralAttention,
        GradOp::LnsaBlock,
        GradOp::Ulnsa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GradOp::Projection => "proj",
            GradOp::LocalAttention => "local-attn",
            GradOp::NonlocalAttention => "nonlocal-attn",
            GradOp::SpectralAttention => "spectral-attn",
            GradOp::LnsaBlock => "lnsa",
            GradOp::Ulnsa => "ulnsa",
        }
    }

    /// Pass threshold on the maximum relative error.
    pub fn threshold(&self) -> f64 {
        match self {
            GradOp::Projection => 1e-8,
            GradOp::LocalAttention | GradOp::NonlocalAttention | GradOp::SpectralAttention => 1e-4,
            GradOp::LnsaBlock | GradOp::Ulnsa => 1e-3,
        }
    }
}

impl FromStr for GradOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GradOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::invalid("op", format!("unsupported op `{s}`")))
    }
}

impl fmt::Display for GradOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub op: GradOp,
    pub max_rel_error: f64,
    pub threshold: f64,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "op={} max_rel_error={:.3e} threshold={:.0e} coords={} result={}",
            self.op,
            self.max_rel_error,
            self.threshold,
            self.coords_checked,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// A probe: fixed weights plus an input shape.
struct Case {
    op: GradOp,
    store: WeightStore,
    dims: (usize, usize, usize),
    heads: usize,
    window: usize,
    block: Option<BlockShape>,
}

const LOCAL_DIMS: (usize, usize, usize) = (2, 4, 4);
const SPECTRAL_DIMS: (usize, usize, usize) = (2, 2, 4);
const BETA: f64 = 25.0;

fn desk_block() -> BlockShape {
    BlockShape {
        height: 16,
        width: 16,
        channels: 16,
        window: 4,
        heads: 2,
        ffn_expansion: 2,
    }
}

fn desk_net() -> UlnsaConfig {
    UlnsaConfig::desk(4, 16, 16)
}

impl Case {
    fn new(op: GradOp, seed: u64) -> Result<Self> {
        let mut case = Case {
            op,
            store: WeightStore::new(),
            dims: LOCAL_DIMS,
            heads: 2,
            window: 2,
            block: None,
        };
        let specs = match op {
            GradOp::Projection => {
                case.dims = (2, 2, 4);
                vec![ParamSpec::uniform("wq", vec![4, 4], 4)]
            }
            GradOp::LocalAttention | GradOp::NonlocalAttention => {
                let c = LOCAL_DIMS.2;
                // 2 windows of 4 tokens; shuffled: 4 groups of 2 tokens.
                let side = if op == GradOp::LocalAttention { 4 } else { 2 };
                vec![
                    ParamSpec::uniform("wq", vec![c, c], c),
                    ParamSpec::uniform("wk", vec![c, c], c),
                    ParamSpec::uniform("wv", vec![c, c], c),
                    ParamSpec::uniform("pos", vec![2, side, side], side),
                ]
            }
            GradOp::SpectralAttention => {
                case.dims = SPECTRAL_DIMS;
                let c = SPECTRAL_DIMS.2;
                ["wq", "wk", "wv", "wo"]
                    .iter()
                    .map(|n| ParamSpec::uniform(*n, vec![c, c], c))
                    .collect()
            }
            GradOp::LnsaBlock => {
                let s = desk_block();
                case.dims = (s.height, s.width, s.channels);
                case.block = Some(s);
                s.param_specs("block")
            }
            GradOp::Ulnsa => {
                let cfg = desk_net();
                case.dims = (cfg.height, cfg.width, cfg.bands);
                cfg.param_specs()
            }
        };
        case.store = WeightStore::from_specs(&specs, seed)?;
        Ok(case)
    }

    fn input(&self, seed: u64) -> Vec<f64> {
        let rng = CounterRng::new(seed, 0x6772_6164);
        let (h, w, c) = self.dims;
        (0..h * w * c).map(|i| rng.uniform_range(i as u64, -1.0, 1.0)).collect()
    }

    fn probe<T: Scalar>(&self, input: &[T]) -> Result<T> {
        let (h, w, c) = self.dims;
        let x = FeatureMap::new(h, w, c, input.to_vec())?;
        let mat = |n: &str| Mat::<T>::load(&self.store, n, c, c);
        let out = match self.op {
            GradOp::Projection => linear(&x, &mat("wq")?, None)?,
            GradOp::LocalAttention | GradOp::NonlocalAttention => {
                let (q, k, v) = project_qkv(&x, &mat("wq")?, &mat("wk")?, &mat("wv")?)?;
                let t = self.store.get("pos")?;
                let pos = PositionalBias {
                    heads: t.shape[0],
                    side: t.shape[1],
                    data: t.data.iter().map(|&v| T::from_f64(v as f64)).collect(),
                };
                let p = self.window;
                let groups = |m: &FeatureMap<T>| -> Result<_> {
                    let g = window_partition(m, p)?;
                    Ok(if self.op == GradOp::NonlocalAttention {
                        shuffle_tokens(&g)
                    } else {
                        g
                    })
                };
                let a = windowed_attention(&groups(&q)?, &groups(&k)?, &groups(&v)?, &pos, self.heads)?;
                let a = if self.op == GradOp::NonlocalAttention {
                    shuffle_tokens(&a)
                } else {
                    a
                };
                window_unpartition(&a, h, w, p)?
            }
            GradOp::SpectralAttention => {
                let sw = SpectralWeights {
                    wq: mat("wq")?,
                    wk: mat("wk")?,
                    wv: mat("wv")?,
                    wo: mat("wo")?,
                };
                spectral_attention(&x, &sw, self.heads)?
            }
            GradOp::LnsaBlock => {
                let shape = self.block.expect("block shape");
                let bw = LnsaBlockWeights::<T>::load(&self.store, "block", &shape)?;
                lnsa_block(&x, &bw, &shape)?
            }
            GradOp::Ulnsa => {
                let nw = UlnsaWeights::<T>::load(&self.store)?;
                nw.forward(&x, T::from_f64(BETA))?
            }
        };
        Ok(out.sum())
    }
}

/// Forward-mode derivative of the probe with respect to coordinate `i`.
fn analytic_partial(case: &Case, x: &[f64], i: usize) -> Result<f64> {
    let duals: Vec<Dual> = x
        .iter()
        .enumerate()
        .map(|(j, &v)| if j == i { Dual::variable(v) } else { Dual::constant(v) })
        .collect();
    Ok(case.probe(&duals)?.d)
}

fn central_difference(case: &Case, x: &[f64], i: usize) -> Result<f64> {
    let mut xp = x.to_vec();
    xp[i] += FD_STEP;
    let fp = case.probe(&xp)?;
    xp[i] = x[i] - FD_STEP;
    let fm = case.probe(&xp)?;
    Ok((fp - fm) / (2.0 * FD_STEP))
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks `samples` seeded coordinates of the op's desk-scale probe.
pub fn gradient_check_with(op: GradOp, seed: u64, samples: usize) -> Result<GradCheckReport> {
    let case = Case::new(op, seed)?;
    let x = case.input(seed);
    let picker = CounterRng::new(seed, 0x7069_636b);
    let n = x.len();
    let coords: Vec<usize> = if samples >= n {
        (0..n).collect()
    } else {
        (0..samples)
            .map(|s| (picker.bits(s as u64) % n as u64) as usize)
            .collect()
    };
    let mut worst: f64 = 0.0;
    for &i in &coords {
        let a = analytic_partial(&case, &x, i)?;
        let f = central_difference(&case, &x, i)?;
        worst = worst.max(relative_error(a, f));
    }
    Ok(GradCheckReport {
        op,
        max_rel_error: worst,
        threshold: op.threshold(),
        coords_checked: coords.len(),
    })
}

pub fn gradient_check(op: GradOp, seed: u64) -> Result<GradCheckReport> {
    gradient_check_with(op, seed, DEFAULT_SAMPLES)
}
