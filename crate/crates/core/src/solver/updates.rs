//! Closed-form sub-problem solutions of the splitting scheme and the
//! objective they jointly descend.

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::solver::denoiser::Denoiser;

fn check_all(y: &HsiCube, others: &[&HsiCube]) -> Result<()> {
    others.iter().try_for_each(|c| y.ensure_conformable(c))
}

fn collect(like: &HsiCube, data: Vec<f32>) -> Result<HsiCube> {
    HsiCube::from_vec(like.height(), like.width(), like.bands(), data)
}

/// `X = (Y - N - S + mu*Z) / (1 + mu)`.
pub fn update_x(y: &HsiCube, n: &HsiCube, s: &HsiCube, z: &HsiCube, mu: f64) -> Result<HsiCube> {
    if !(mu > 0.0) {
        return Err(Error::invalid("mu", format!("must be positive, got {mu}")));
    }
    check_all(y, &[n, s, z])?;
    let denom = 1.0 + mu;
    let data = (0..y.len())
        .map(|i| {
            let num = y.data()[i] as f64 - n.data()[i] as f64 - s.data()[i] as f64 + mu * z.data()[i] as f64;
            (num / denom) as f32
        })
        .collect();
    collect(y, data)
}

#[inline]
pub fn soft_threshold_scalar(x: f64, delta: f64) -> f64 {
    if x > delta {
        x - delta
    } else if x < -delta {
        x + delta
    } else {
        0.0
    }
}

/// Element-wise shrinkage toward zero by `delta`.
pub fn soft_threshold(x: &HsiCube, delta: f64) -> Result<HsiCube> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    x.map(|v| soft_threshold_scalar(v as f64, delta) as f32)
}

/// `S = soft_threshold(Y - X - N, lambda)`.
pub fn update_s(y: &HsiCube, x: &HsiCube, n: &HsiCube, lambda: f64) -> Result<HsiCube> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    check_all(y, &[x, n])?;
    let data = (0..y.len())
        .map(|i| {
            let r = y.data()[i] as f64 - x.data()[i] as f64 - n.data()[i] as f64;
            soft_threshold_scalar(r, lambda) as f32
        })
        .collect();
    collect(y, data)
}

/// `N = (Y - X - S) / (1 + 2*gamma)`.
pub fn update_n(y: &HsiCube, x: &HsiCube, s: &HsiCube, gamma: f64) -> Result<HsiCube> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    check_all(y, &[x, s])?;
    let denom = 1.0 + 2.0 * gamma;
    let data = (0..y.len())
        .map(|i| {
            let r = y.data()[i] as f64 - x.data()[i] as f64 - s.data()[i] as f64;
            (r / denom) as f32
        })
        .collect();
    collect(y, data)
}

/// Noise level handed to the denoiser for a given `beta = mu/tau`.
pub fn noise_level_for_beta(beta: f64) -> f64 {
    1.0 / beta.sqrt()
}

/// `Z = D(X, 1/sqrt(beta))`.
pub fn update_z(x: &HsiCube, beta: f64, denoiser: &dyn Denoiser) -> Result<HsiCube> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    let z = denoiser.denoise(x, noise_level_for_beta(beta))?;
    x.ensure_conformable(&z)?;
    Ok(z)
}

/// Penalty weights of the split objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyWeights {
    pub mu: f64,
    pub tau: f64,
    pub lambda: f64,
    pub gamma: f64,
}

/// `1/2 |Y-X-N-S|^2 + tau*prior(Z) + lambda*|S|_1 + gamma*|N|^2 + mu/2 |Z-X|^2`.
pub fn energy(
    y: &HsiCube,
    x: &HsiCube,
    z: &HsiCube,
    s: &HsiCube,
    n: &HsiCube,
    w: EnergyWeights,
    prior: impl Fn(&HsiCube) -> f64,
) -> Result<f64> {
    check_all(y, &[x, z, s, n])?;
    let mut fidelity = 0.0;
    let mut l1 = 0.0;
    let mut n2 = 0.0;
    let mut coupling = 0.0;
    for i in 0..y.len() {
        let (yv, xv, zv, sv, nv) = (
            y.data()[i] as f64,
            x.data()[i] as f64,
            z.data()[i] as f64,
            s.data()[i] as f64,
            n.data()[i] as f64,
        );
        let r = yv - xv - nv - sv;
        fidelity += r * r;
        l1 += sv.abs();
        n2 += nv * nv;
        coupling += (zv - xv) * (zv - xv);
    }
    Ok(0.5 * fidelity + w.tau * prior(z) + w.lambda * l1 + w.gamma * n2 + 0.5 * w.mu * coupling)
}

/// The quadratic prior `1/2 |Z|^2`.
pub fn quadratic_prior(z: &HsiCube) -> f64 {
    0.5 * z.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>()
}
