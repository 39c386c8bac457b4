//! The unfolded half-quadratic splitting loop.
//!
//! Each iteration updates the signal estimate `X`, the auxiliary variable
//! `Z` (through a pluggable [`Denoiser`]), the sparse-noise estimate `S`
//! and the Gaussian-noise estimate `N`, in that order.

pub mod denoiser;
pub mod updates;

use std::time::{Duration, Instant};

use crate::cube::HsiCube;
use crate::error::{Error, Result};

pub use denoiser::{Denoiser, GaussianSmoothingDenoiser, IdentityDenoiser, QuadraticProxDenoiser};
pub use updates::{
    energy, noise_level_for_beta, quadratic_prior, soft_threshold, soft_threshold_scalar, update_n, update_s, update_x,
    update_z, EnergyWeights,
};

/// Per-iteration parameters: `alpha = mu`, `beta = mu/tau`, `gamma`, `lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperParams {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    lambda: Vec<f64>,
}

impl HyperParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(Error::invalid("K", "iteration count must be at least 1"));
        }
        for (name, v) in [("beta", &beta), ("gamma", &gamma), ("lambda", &lambda)] {
            if v.len() != k {
                return Err(Error::invalid(
                    name,
                    format!("expected {k} entries to match alpha, got {}", v.len()),
                ));
            }
        }
        for (name, v) in [
            ("alpha", &alpha),
            ("beta", &beta),
            ("gamma", &gamma),
            ("lambda", &lambda),
        ] {
            if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::invalid(
                    name,
                    format!("entries must be positive and finite, got {bad}"),
                ));
            }
        }
        Ok(HyperParams {
            alpha,
            beta,
            gamma,
            lambda,
        })
    }

    pub fn constant(k: usize, alpha: f64, beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![alpha; k], vec![beta; k], vec![gamma; k], vec![lambda; k])
    }

    pub fn iterations(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Objective weights at iteration `k`; `tau` is recovered as `alpha/beta`.
    pub fn energy_weights(&self, k: usize) -> EnergyWeights {
        EnergyWeights {
            mu: self.alpha[k],
            tau: self.alpha[k] / self.beta[k],
            lambda: self.lambda[k],
            gamma: self.gamma[k],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// `Z = Y`, `S = N = 0`.
    #[default]
    FromObservation,
    /// `Z = S = N = 0`.
    Zeros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: HsiCube,
    pub z: HsiCube,
    pub s: HsiCube,
    pub n: HsiCube,
    pub k: usize,
}

impl SolverState {
    pub fn init(y: &HsiCube, policy: InitPolicy) -> Result<Self> {
        let (h, w, p) = y.dims();
        let zeros = HsiCube::zeros(h, w, p)?;
        let z = match policy {
            InitPolicy::FromObservation => y.clone(),
            InitPolicy::Zeros => zeros.clone(),
        };
        Ok(SolverState {
            x: zeros.clone(),
            z,
            s: zeros.clone(),
            n: zeros,
            k: 0,
        })
    }
}

pub const UPDATE_NAMES: [&str; 4] = ["X", "Z", "S", "N"];

/// Objective value after each of the four updates of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRecord {
    pub iteration: usize,
    /// Energies after the X, Z, S and N updates.
    pub energy: [f64; 4],
    /// Whether the prior term `tau * Phi(Z)` is included; false when the
    /// denoiser does not expose its prior.
    pub prior_included: bool,
    pub timings: [Duration; 4],
}

impl EnergyRecord {
    pub fn csv_header() -> &'static str {
        "iteration,energy_x,energy_z,energy_s,energy_n,prior_included,time_x_us,time_z_us,time_s_us,time_n_us"
    }

    pub fn csv_row(&self) -> String {
        let e = &self.energy;
        let t: Vec<String> = self.timings.iter().map(|d| d.as_micros().to_string()).collect();
        format!(
            "{},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
            self.iteration,
            e[0],
            e[1],
            e[2],
            e[3],
            self.prior_included,
            t.join(",")
        )
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub x_hat: HsiCube,
    pub state: SolverState,
    pub trace: Vec<EnergyRecord>,
}

fn tag(iteration: usize, update: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { .. } => Error::Divergence { iteration, update },
        other => other,
    }
}

/// Runs `params.iterations()` unfolded iterations on observation `y`.
pub fn run(y: &HsiCube, params: &HyperParams, denoiser: &dyn Denoiser, init: InitPolicy) -> Result<SolveOutput> {
    let mut st = SolverState::init(y, init)?;
    let mut trace = Vec::with_capacity(params.iterations());

    for k in 0..params.iterations() {
        let w = params.energy_weights(k);
        let mut energies = [0.0; 4];
        let mut timings = [Duration::ZERO; 4];
        let mut prior_included = true;

        for (step, name) in UPDATE_NAMES.iter().enumerate() {
            let t0 = Instant::now();
            match step {
                0 => st.x = update_x(y, &st.n, &st.s, &st.z, params.alpha[k]).map_err(tag(k, name))?,
                1 => {
                    st.z = update_z(&st.x, params.beta[k], denoiser).map_err(tag(k, name))?;
                    if let Some(i) = st.z.data().iter().position(|v| !v.is_finite()) {
                        return Err(tag(k, name)(Error::NonFinite { index: i }));
                    }
                }
                2 => st.s = update_s(y, &st.x, &st.n, params.lambda[k]).map_err(tag(k, name))?,
                _ => st.n = update_n(y, &st.x, &st.s, params.gamma[k]).map_err(tag(k, name))?,
            }
            timings[step] = t0.elapsed();

            let prior = denoiser.prior(&st.z);
            prior_included &= prior.is_some();
            let e = energy(y, &st.x, &st.z, &st.s, &st.n, w, |_| prior.unwrap_or(0.0))?;
            if !e.is_finite() {
                return Err(Error::Divergence {
                    iteration: k,
                    update: name,
                });
            }
            energies[step] = e;
        }
        st.k = k + 1;
        trace.push(EnergyRecord {
            iteration: k,
            energy: energies,
            prior_included,
            timings,
        });
    }

    Ok(SolveOutput {
        x_hat: st.x.clone(),
        state: st,
        trace,
    })
}
