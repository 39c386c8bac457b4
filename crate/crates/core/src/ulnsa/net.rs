//! The U-shaped denoiser built from LNSA blocks.
//!
//! ```text
//! X0 = conv3x3([X, beta-plane])                  P+1 -> C
//! encoder level l < L-1:  block, then strided conv4x4 (C_l -> 2 C_l)
//! bottleneck:             block at level L-1
//! decoder level l:        deconv2x2 (2 C_l -> C_l), concat skip, 1x1 merge, block
//! Z  = X + conv3x3(X_d)                          C -> P
//! ```
//!
//! Channel width doubles with each level. Weights for a config are
//! declared by [`UlnsaConfig::param_specs`] and stored under `ulnsa.*`.

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::layers::{concat_channels, linear, load_vec, Conv2d, Deconv2x2, FeatureMap, Mat, Padding};
use crate::scalar::Scalar;
use crate::solver::Denoiser;
use crate::ulnsa::block::{lnsa_block, BlockShape, LnsaBlockWeights};
use crate::weights::{Init, ParamSpec, WeightStore};

pub const PREFIX: &str = "ulnsa";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UlnsaConfig {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    /// Base channel count `C`.
    pub channels: usize,
    /// Window side `p`.
    pub window: usize,
    pub heads: usize,
    pub levels: usize,
    pub ffn_expansion: usize,
}

impl UlnsaConfig {
    /// Desk-scale defaults for a given input size.
    pub fn desk(bands: usize, height: usize, width: usize) -> Self {
        UlnsaConfig {
            bands,
            height,
            width,
            channels: 16,
            window: 4,
            heads: 2,
            levels: 2,
            ffn_expansion: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.bands == 0 {
            return Err(Error::Config("levels and bands must be positive".into()));
        }
        if self.levels > 16 {
            return Err(Error::Config(format!("{} levels is unreasonably deep", self.levels)));
        }
        let unit = (1usize << (self.levels - 1)) * self.window;
        if unit == 0 || !self.height.is_multiple_of(unit) || !self.width.is_multiple_of(unit) {
            return Err(Error::Config(format!(
                "spatial size {}x{} must be divisible by 2^(levels-1)*window = {unit}",
                self.height, self.width
            )));
        }
        (0..self.levels).try_for_each(|l| self.block_shape(l).validate())
    }

    pub fn level_channels(&self, level: usize) -> usize {
        self.channels << level
    }

    pub fn block_shape(&self, level: usize) -> BlockShape {
        BlockShape {
            height: self.height >> level,
            width: self.width >> level,
            channels: self.level_channels(level),
            window: self.window,
            heads: self.heads,
            ffn_expansion: self.ffn_expansion,
        }
    }

    fn meta(&self) -> Vec<f32> {
        [
            self.bands,
            self.height,
            self.width,
            self.channels,
            self.window,
            self.heads,
            self.levels,
            self.ffn_expansion,
        ]
        .iter()
        .map(|&v| v as f32)
        .collect()
    }

    /// Reads the configuration record of a weight store.
    pub fn from_store(store: &WeightStore) -> Result<Self> {
        let meta = &store.expect(&format!("{PREFIX}.meta"), &[8])?.data;
        let v: Vec<usize> = meta.iter().map(|&x| x as usize).collect();
        let cfg = UlnsaConfig {
            bands: v[0],
            height: v[1],
            width: v[2],
            channels: v[3],
            window: v[4],
            heads: v[5],
            levels: v[6],
            ffn_expansion: v[7],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let c = self.channels;
        let p = self.bands;
        let mut specs = vec![
            ParamSpec {
                name: format!("{PREFIX}.meta"),
                shape: vec![8],
                init: Init::Values(self.meta()),
            },
            ParamSpec::uniform(format!("{PREFIX}.embed.weight"), vec![c, p + 1, 3, 3], (p + 1) * 9),
            ParamSpec::uniform(format!("{PREFIX}.embed.bias"), vec![c], (p + 1) * 9),
        ];
        for l in 0..self.levels - 1 {
            let (cl, cn) = (self.level_channels(l), self.level_channels(l + 1));
            specs.extend(self.block_shape(l).param_specs(&format!("{PREFIX}.enc{l}")));
            specs.push(ParamSpec::uniform(
                format!("{PREFIX}.down{l}.weight"),
                vec![cn, cl, 4, 4],
                cl * 16,
            ));
            specs.push(ParamSpec::uniform(format!("{PREFIX}.down{l}.bias"), vec![cn], cl * 16));
        }
        let bl = self.levels - 1;
        specs.extend(self.block_shape(bl).param_specs(&format!("{PREFIX}.bottleneck")));
        for l in (0..self.levels - 1).rev() {
            let (cl, cn) = (self.level_channels(l), self.level_channels(l + 1));
            specs.push(ParamSpec::uniform(
                format!("{PREFIX}.up{l}.weight"),
                vec![cn, cl, 2, 2],
                cn,
            ));
            specs.push(ParamSpec::uniform(format!("{PREFIX}.up{l}.bias"), vec![cl], cn));
            specs.push(ParamSpec::uniform(
                format!("{PREFIX}.merge{l}.weight"),
                vec![2 * cl, cl],
                2 * cl,
            ));
            specs.push(ParamSpec::uniform(format!("{PREFIX}.merge{l}.bias"), vec![cl], 2 * cl));
            specs.extend(self.block_shape(l).param_specs(&format!("{PREFIX}.dec{l}")));
        }
        specs.push(ParamSpec::uniform(
            format!("{PREFIX}.out.weight"),
            vec![p, c, 3, 3],
            c * 9,
        ));
        specs.push(ParamSpec::uniform(format!("{PREFIX}.out.bias"), vec![p], c * 9));
        specs
    }

    /// Seeded weights (uniform fan-in scheme) for this configuration.
    pub fn init_weights(&self, seed: u64) -> Result<WeightStore> {
        self.validate()?;
        WeightStore::from_specs(&self.param_specs(), seed)
    }

    /// Names of the last projection of every residual branch, including the
    /// output convolution.
    pub fn final_projection_names(&self) -> Vec<String> {
        use crate::ulnsa::block::BLOCK_FINAL_PROJECTIONS;
        let mut blocks: Vec<String> = (0..self.levels - 1)
            .flat_map(|l| [format!("{PREFIX}.enc{l}"), format!("{PREFIX}.dec{l}")])
            .collect();
        blocks.push(format!("{PREFIX}.bottleneck"));
        let mut names: Vec<String> = blocks
            .iter()
            .flat_map(|b| BLOCK_FINAL_PROJECTIONS.iter().map(move |f| format!("{b}.{f}")))
            .collect();
        names.push(format!("{PREFIX}.out.weight"));
        names.push(format!("{PREFIX}.out.bias"));
        names
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UlnsaWeights<T> {
    pub config: UlnsaConfig,
    pub embed: Conv2d<T>,
    pub enc: Vec<LnsaBlockWeights<T>>,
    pub down: Vec<Conv2d<T>>,
    pub bottleneck: LnsaBlockWeights<T>,
    /// Indexed by level.
    pub up: Vec<Deconv2x2<T>>,
    pub merge: Vec<(Mat<T>, Vec<T>)>,
    pub dec: Vec<LnsaBlockWeights<T>>,
    pub out: Conv2d<T>,
}

impl<T: Scalar> UlnsaWeights<T> {
    pub fn load(store: &WeightStore) -> Result<Self> {
        let cfg = UlnsaConfig::from_store(store)?;
        let c = cfg.channels;
        let pre = |s: String| format!("{PREFIX}.{s}");
        let mut enc = Vec::new();
        let mut down = Vec::new();
        let mut up = Vec::new();
        let mut merge = Vec::new();
        let mut dec = Vec::new();
        for l in 0..cfg.levels - 1 {
            let (cl, cn) = (cfg.level_channels(l), cfg.level_channels(l + 1));
            let shape = cfg.block_shape(l);
            enc.push(LnsaBlockWeights::load(store, &pre(format!("enc{l}")), &shape)?);
            down.push(Conv2d::load(store, &pre(format!("down{l}")), cn, cl, 4, true)?);
            up.push(Deconv2x2::load(store, &pre(format!("up{l}")), cn, cl)?);
            merge.push((
                Mat::load(store, &pre(format!("merge{l}.weight")), 2 * cl, cl)?,
                load_vec(store, &pre(format!("merge{l}.bias")), &[cl])?,
            ));
            dec.push(LnsaBlockWeights::load(store, &pre(format!("dec{l}")), &shape)?);
        }
        Ok(UlnsaWeights {
            config: cfg,
            embed: Conv2d::load(store, &pre("embed".into()), c, cfg.bands + 1, 3, true)?,
            enc,
            down,
            bottleneck: LnsaBlockWeights::load(store, &pre("bottleneck".into()), &cfg.block_shape(cfg.levels - 1))?,
            up,
            merge,
            dec,
            out: Conv2d::load(store, &pre("out".into()), cfg.bands, c, 3, true)?,
        })
    }

    /// Residual image `T` for input `x` (bands as channels) and `beta`.
    pub fn residual(&self, x: &FeatureMap<T>, beta: T) -> Result<FeatureMap<T>> {
        let cfg = &self.config;
        if x.dims() != (cfg.height, cfg.width, cfg.bands) {
            return Err(Error::Config(format!(
                "network configured for {}x{}x{}, got {:?}",
                cfg.height,
                cfg.width,
                cfg.bands,
                x.dims()
            )));
        }
        let plane = FeatureMap::from_fn(x.height, x.width, 1, |_, _, _| beta);
        let mut h = self.embed.forward(&concat_channels(x, &plane)?, 1, 1, Padding::Zero)?;

        let mut skips = Vec::with_capacity(cfg.levels - 1);
        for l in 0..cfg.levels - 1 {
            h = lnsa_block(&h, &self.enc[l], &cfg.block_shape(l))?;
            skips.push(h.clone());
            h = self.down[l].forward(&h, 2, 1, Padding::Zero)?;
        }
        h = lnsa_block(&h, &self.bottleneck, &cfg.block_shape(cfg.levels - 1))?;
        for l in (0..cfg.levels - 1).rev() {
            h = self.up[l].forward(&h)?;
            let (w, b) = &self.merge[l];
            h = linear(&concat_channels(&h, &skips[l])?, w, Some(b))?;
            h = lnsa_block(&h, &self.dec[l], &cfg.block_shape(l))?;
        }
        self.out.forward(&h, 1, 1, Padding::Zero)
    }

    /// `Z = X + residual(X, beta)`.
    pub fn forward(&self, x: &FeatureMap<T>, beta: T) -> Result<FeatureMap<T>> {
        self.residual(x, beta)?.add(x)
    }
}

/// Runs the network on a cube. The residual is evaluated in `f64` and
/// added to the input before rounding to `f32`.
pub fn ulnsa_forward(x: &HsiCube, beta: f64, weights: &UlnsaWeights<f64>) -> Result<HsiCube> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(
            "beta",
            format!("must be positive and finite, got {beta}"),
        ));
    }
    let input = FeatureMap::<f64>::from_cube(x);
    let t = weights.residual(&input, beta)?;
    HsiCube::from_fn(x.height(), x.width(), x.bands(), |r, c, b| {
        (t.get(r, c, b) + x.get(r, c, b) as f64) as f32
    })
}

/// The network as a solver denoiser; `beta = 1 / noise_level^2`.
#[derive(Clone, Debug)]
pub struct UlnsaDenoiser {
    weights: UlnsaWeights<f64>,
}

impl UlnsaDenoiser {
    pub fn new(store: &WeightStore) -> Result<Self> {
        Ok(UlnsaDenoiser {
            weights: UlnsaWeights::load(store)?,
        })
    }

    pub fn config(&self) -> &UlnsaConfig {
        &self.weights.config
    }
}

impl Denoiser for UlnsaDenoiser {
    fn denoise(&self, input: &HsiCube, noise_level: f64) -> Result<HsiCube> {
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(Error::invalid("noise_level", format!("got {noise_level}")));
        }
        // beta is unbounded at zero noise; the prox there is the identity.
        if noise_level == 0.0 {
            return Ok(input.clone());
        }
        ulnsa_forward(input, 1.0 / (noise_level * noise_level), &self.weights)
    }
}
