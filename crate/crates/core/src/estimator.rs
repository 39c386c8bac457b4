//! Hyperparameter estimation head.
//!
//! ```text
//! conv1x1 (P -> C0, no bias)
//! conv3x3 stride 2, circular padding (C0 -> C1) + ReLU
//! global average pool
//! FC C1 -> F1 + ReLU, FC F1 -> F2 + ReLU, FC F2 -> 4K
//! softplus(.) + 1e-4, split as [alpha; beta; gamma; lambda]
//! ```
//!
//! The identity degradation operator of pure denoising carries no
//! information and is not an input. Circular padding makes the pooled
//! features invariant to circular shifts of the input by the stride.

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::layers::{linear, load_vec, Conv2d, FeatureMap, Mat, Padding};
use crate::scalar::softplus;
use crate::solver::HyperParams;
use crate::weights::{Init, ParamSpec, WeightStore};

pub const PREFIX: &str = "estimator";
pub const POSITIVITY_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub bands: usize,
    pub iterations: usize,
    pub c0: usize,
    pub c1: usize,
    pub f1: usize,
    pub f2: usize,
}

impl EstimatorConfig {
    pub fn new(bands: usize, iterations: usize) -> Self {
        EstimatorConfig {
            bands,
            iterations,
            c0: 16,
            c1: 32,
            f1: 64,
            f2: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.bands, self.iterations, self.c0, self.c1, self.f1, self.f2].contains(&0) {
            return Err(Error::Config(format!("estimator widths must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        4 * self.iterations
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let n = |s: &str| format!("{PREFIX}.{s}");
        let meta = [self.bands, self.iterations, self.c0, self.c1, self.f1, self.f2]
            .iter()
            .map(|&v| v as f32)
            .collect();
        vec![
            ParamSpec {
                name: n("meta"),
                shape: vec![6],
                init: Init::Values(meta),
            },
            ParamSpec::uniform(n("conv1.weight"), vec![self.c0, self.bands, 1, 1], self.bands),
            ParamSpec::uniform(n("conv2.weight"), vec![self.c1, self.c0, 3, 3], self.c0 * 9),
            ParamSpec::uniform(n("conv2.bias"), vec![self.c1], self.c0 * 9),
            ParamSpec::uniform(n("fc1.weight"), vec![self.c1, self.f1], self.c1),
            ParamSpec::uniform(n("fc1.bias"), vec![self.f1], self.c1),
            ParamSpec::uniform(n("fc2.weight"), vec![self.f1, self.f2], self.f1),
            ParamSpec::uniform(n("fc2.bias"), vec![self.f2], self.f1),
            ParamSpec::uniform(n("fc3.weight"), vec![self.f2, self.outputs()], self.f2),
            ParamSpec::uniform(n("fc3.bias"), vec![self.outputs()], self.f2),
        ]
    }

    pub fn init_weights(&self, seed: u64) -> Result<WeightStore> {
        self.validate()?;
        WeightStore::from_specs(&self.param_specs(), seed)
    }

    pub fn from_store(store: &WeightStore) -> Result<Self> {
        let m = &store.expect(&format!("{PREFIX}.meta"), &[6])?.data;
        let cfg = EstimatorConfig {
            bands: m[0] as usize,
            iterations: m[1] as usize,
            c0: m[2] as usize,
            c1: m[3] as usize,
            f1: m[4] as usize,
            f2: m[5] as usize,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorWeights {
    pub config: EstimatorConfig,
    conv1: Conv2d<f64>,
    conv2: Conv2d<f64>,
    fc: [(Mat<f64>, Vec<f64>); 3],
}

impl EstimatorWeights {
    pub fn load(store: &WeightStore) -> Result<Self> {
        let cfg = EstimatorConfig::from_store(store)?;
        let n = |s: &str| format!("{PREFIX}.{s}");
        let fc = |i: usize, rows: usize, cols: usize| -> Result<(Mat<f64>, Vec<f64>)> {
            Ok((
                Mat::load(store, &n(&format!("fc{i}.weight")), rows, cols)?,
                load_vec(store, &n(&format!("fc{i}.bias")), &[cols])?,
            ))
        };
        Ok(EstimatorWeights {
            config: cfg,
            conv1: Conv2d::load(store, &n("conv1"), cfg.c0, cfg.bands, 1, false)?,
            conv2: Conv2d::load(store, &n("conv2"), cfg.c1, cfg.c0, 3, true)?,
            fc: [
                fc(1, cfg.c1, cfg.f1)?,
                fc(2, cfg.f1, cfg.f2)?,
                fc(3, cfg.f2, cfg.outputs())?,
            ],
        })
    }

    /// Pooled post-convolution features.
    pub fn pooled_features(&self, y: &HsiCube) -> Result<Vec<f64>> {
        if y.bands() != self.config.bands {
            return Err(Error::Config(format!(
                "estimator expects {} bands, got {}",
                self.config.bands,
                y.bands()
            )));
        }
        let x = FeatureMap::<f64>::from_cube(y);
        let h = self.conv1.forward(&x, 1, 0, Padding::Zero)?;
        let h = self.conv2.forward(&h, 2, 1, Padding::Circular)?.map(|v| v.max(0.0));
        let mut pooled = vec![0.0; h.channels];
        for t in 0..h.tokens() {
            for (acc, &v) in pooled.iter_mut().zip(h.token(t)) {
                *acc += v;
            }
        }
        let n = h.tokens() as f64;
        Ok(pooled.into_iter().map(|v| v / n).collect())
    }

    /// Maps pooled features to the `4K` positive outputs.
    pub fn head(&self, pooled: &[f64]) -> Result<Vec<f64>> {
        let mut v = FeatureMap::new(1, 1, pooled.len(), pooled.to_vec())?;
        for (i, (w, b)) in self.fc.iter().enumerate() {
            v = linear(&v, w, Some(b))?;
            if i < 2 {
                v = v.map(|x| x.max(0.0));
            }
        }
        Ok(v.data.into_iter().map(|x| softplus(x) + POSITIVITY_FLOOR).collect())
    }
}

/// Estimates `K` iterations of `(alpha, beta, gamma, lambda)` from `y`.
pub fn estimate(y: &HsiCube, k: usize, weights: &EstimatorWeights) -> Result<HyperParams> {
    if k != weights.config.iterations {
        return Err(Error::Config(format!(
            "estimator head produces {} iterations, {k} requested",
            weights.config.iterations
        )));
    }
    let out = weights.head(&weights.pooled_features(y)?)?;
    let part = |i: usize| out[i * k..(i + 1) * k].to_vec();
    HyperParams::new(part(0), part(1), part(2), part(3))
}
