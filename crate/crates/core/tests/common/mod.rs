// Oracles index explicitly to mirror the formulas they check.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod net_oracle;

use hsi_hqs::rng::CounterRng;
use hsi_hqs::HsiCube;

pub fn random_cube(h: usize, w: usize, p: usize, seed: u64, lo: f64, hi: f64) -> HsiCube {
    let rng = CounterRng::new(seed, 0x7465_7374);
    let mut i = 0u64;
    HsiCube::from_fn(h, w, p, |_, _, _| {
        i += 1;
        rng.uniform_range(i, lo, hi) as f32
    })
    .unwrap()
}

pub fn random_vec(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let rng = CounterRng::new(seed, 0x7665_6374);
    (0..n as u64).map(|i| rng.uniform_range(i, lo, hi)).collect()
}

/// Minimizer of `f` over a uniform grid on `[lo, hi]`.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as i64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    best.1
}

/// The full objective, summed band-last with plain indexing.
#[allow(clippy::too_many_arguments)]
pub fn naive_energy(
    y: &HsiCube,
    x: &HsiCube,
    z: &HsiCube,
    s: &HsiCube,
    n: &HsiCube,
    mu: f64,
    tau: f64,
    lambda: f64,
    gamma: f64,
    prior: f64,
) -> f64 {
    let (h, w, p) = y.dims();
    let mut fid = 0.0;
    let mut l1 = 0.0;
    let mut nn = 0.0;
    let mut coup = 0.0;
    for c in (0..w).rev() {
        for r in 0..h {
            for b in (0..p).rev() {
                let g = |m: &HsiCube| m.get(r, c, b) as f64;
                let res = g(y) - g(x) - g(n) - g(s);
                fid += res * res;
                l1 += g(s).abs();
                nn += g(n) * g(n);
                coup += (g(z) - g(x)) * (g(z) - g(x));
            }
        }
    }
    0.5 * fid + tau * prior + lambda * l1 + gamma * nn + 0.5 * mu * coup
}

/// Dense single-head attention, no max subtraction:
/// `softmax(q k^T * scale + bias) v`. Returns output rows and weights.
pub fn dense_attention(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
    bias: &[Vec<f64>],
    scale: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = q.len();
    let mut weights = vec![vec![0.0; n]; n];
    for i in 0..n {
        let e: Vec<f64> = (0..n)
            .map(|j| {
                let dot: f64 = q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum();
                (dot * scale + bias[i][j]).exp()
            })
            .collect();
        let total: f64 = e.iter().sum();
        for j in 0..n {
            weights[i][j] = e[j] / total;
        }
    }
    let out = (0..n)
        .map(|i| {
            (0..v[0].len())
                .map(|d| (0..n).map(|j| weights[i][j] * v[j][d]).sum())
                .collect()
        })
        .collect();
    (out, weights)
}

/// `x W` for a row-major `[in, out]` matrix.
pub fn matvec(x: &[f64], w: &[f64], out: usize) -> Vec<f64> {
    (0..out)
        .map(|o| x.iter().enumerate().map(|(i, xi)| xi * w[i * out + o]).sum())
        .collect()
}

/// Channel attention over `tokens x C` rows with `heads` heads, followed by
/// `wo`. Each column of a head's score matrix is normalized.
pub fn dense_spectral(
    x: &[Vec<f64>],
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
    heads: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let c = x[0].len();
    let d = c / heads;
    let q: Vec<Vec<f64>> = x.iter().map(|t| matvec(t, wq, c)).collect();
    let k: Vec<Vec<f64>> = x.iter().map(|t| matvec(t, wk, c)).collect();
    let v: Vec<Vec<f64>> = x.iter().map(|t| matvec(t, wv, c)).collect();
    let mut attended = vec![vec![0.0; c]; x.len()];
    let mut all = Vec::new();
    for h in 0..heads {
        let o = h * d;
        let mut s = vec![vec![0.0; d]; d];
        for col in 0..d {
            let e: Vec<f64> = (0..d)
                .map(|r| {
                    let dot: f64 = (0..x.len()).map(|t| k[t][o + r] * q[t][o + col]).sum();
                    (dot / (d as f64).sqrt()).exp()
                })
                .collect();
            let total: f64 = e.iter().sum();
            for r in 0..d {
                s[r][col] = e[r] / total;
            }
        }
        for t in 0..x.len() {
            for col in 0..d {
                attended[t][o + col] = (0..d).map(|r| v[t][o + r] * s[r][col]).sum();
            }
        }
        all.push(s);
    }
    (attended.iter().map(|t| matvec(t, wo, c)).collect(), all)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
