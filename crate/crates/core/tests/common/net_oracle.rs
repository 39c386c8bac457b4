//! A second implementation of the U-shaped network on nested vectors,
//! `img[row][col][channel]`, with window and shuffle grouping done by
//! direct index arithmetic.

use hsi_hqs::weights::WeightStore;
use hsi_hqs::HsiCube;

pub type Img = Vec<Vec<Vec<f64>>>;

pub struct Net<'a> {
    pub store: &'a WeightStore,
    pub channels: usize,
    pub window: usize,
    pub heads: usize,
    pub levels: usize,
    pub expansion: usize,
}

fn zeros(h: usize, w: usize, c: usize) -> Img {
    vec![vec![vec![0.0; c]; w]; h]
}

fn dims(x: &Img) -> (usize, usize, usize) {
    (x.len(), x[0].len(), x[0][0].len())
}

impl<'a> Net<'a> {
    fn t(&self, name: &str) -> Vec<f64> {
        self.store.get(name).unwrap().data.iter().map(|&v| v as f64).collect()
    }

    /// Zero-padded convolution, weights `[out, in, k, k]`.
    fn conv(&self, x: &Img, name: &str, out: usize, k: usize, stride: usize, pad: usize) -> Img {
        let w = self.t(&format!("{name}.weight"));
        let b = self.t(&format!("{name}.bias"));
        let (h, wd, cin) = dims(x);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut y = zeros(oh, ow, out);
        for o in 0..out {
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = b[o];
                    for i in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let rr = (r * stride + ky) as i64 - pad as i64;
                                let cc = (c * stride + kx) as i64 - pad as i64;
                                if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < wd {
                                    acc += x[rr as usize][cc as usize][i] * w[((o * cin + i) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    y[r][c][o] = acc;
                }
            }
        }
        y
    }

    fn deconv(&self, x: &Img, name: &str, out: usize) -> Img {
        let w = self.t(&format!("{name}.weight"));
        let b = self.t(&format!("{name}.bias"));
        let (h, wd, cin) = dims(x);
        let mut y = zeros(2 * h, 2 * wd, out);
        for r in 0..h {
            for c in 0..wd {
                for dy in 0..2 {
                    for dx in 0..2 {
                        for o in 0..out {
                            let mut acc = b[o];
                            for i in 0..cin {
                                acc += x[r][c][i] * w[((i * out + o) * 2 + dy) * 2 + dx];
                            }
                            y[2 * r + dy][2 * c + dx][o] = acc;
                        }
                    }
                }
            }
        }
        y
    }

    fn pointwise(&self, x: &Img, w: &[f64], b: Option<&[f64]>, out: usize) -> Img {
        x.iter()
            .map(|row| {
                row.iter()
                    .map(|px| {
                        (0..out)
                            .map(|o| {
                                let s: f64 = px.iter().enumerate().map(|(i, v)| v * w[i * out + o]).sum();
                                s + b.map_or(0.0, |b| b[o])
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    fn layer_norm(&self, x: &Img, g: &[f64], b: &[f64]) -> Img {
        x.iter()
            .map(|row| {
                row.iter()
                    .map(|px| {
                        let n = px.len() as f64;
                        let m = px.iter().sum::<f64>() / n;
                        let var = px.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                        let s = (var + 1e-5).sqrt();
                        px.iter().enumerate().map(|(i, v)| (v - m) / s * g[i] + b[i]).collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Attention over explicit token lists, one bias table per head.
    #[allow(clippy::too_many_arguments)]
    fn attend(&self, coords: &[(usize, usize)], q: &Img, k: &Img, v: &Img, ch0: usize, bias: &[f64], out: &mut Img) {
        let half = q[0][0].len() / 2;
        let dh = half / self.heads;
        let n = coords.len();
        for h in 0..self.heads {
            let off = ch0 + h * dh;
            for i in 0..n {
                let (ri, ci) = coords[i];
                let logits: Vec<f64> = (0..n)
                    .map(|j| {
                        let (rj, cj) = coords[j];
                        let dot: f64 = (0..dh).map(|d| q[ri][ci][off + d] * k[rj][cj][off + d]).sum();
                        dot / (dh as f64).sqrt() + bias[(h * n + i) * n + j]
                    })
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for d in 0..dh {
                    out[ri][ci][h * dh + d] = (0..n).map(|j| e[j] / z * v[coords[j].0][coords[j].1][off + d]).sum();
                }
            }
        }
    }

    fn block(&self, x: &Img, pre: &str) -> Img {
        let (h, w, c) = dims(x);
        let half = c / 2;
        let p = self.window;
        let t = |s: &str| self.t(&format!("{pre}.{s}"));
        let y = self.layer_norm(x, &t("ln1.gamma"), &t("ln1.beta"));
        let y = self.pointwise(&y, &t("proj_in.weight"), Some(&t("proj_in.bias")), c);
        let q = self.pointwise(&y, &t("attn.wq"), None, c);
        let k = self.pointwise(&y, &t("attn.wk"), None, c);
        let v = self.pointwise(&y, &t("attn.wv"), None, c);

        let (wr, wc) = (h / p, w / p);
        let mut local = zeros(h, w, half);
        let pl = t("attn.pos_local");
        for gr in 0..wr {
            for gc in 0..wc {
                let coords: Vec<_> = (0..p * p).map(|i| (gr * p + i / p, gc * p + i % p)).collect();
                self.attend(&coords, &q, &k, &v, 0, &pl, &mut local);
            }
        }
        let mut nonlocal = zeros(h, w, half);
        let pn = t("attn.pos_nonlocal");
        for i in 0..p * p {
            let coords: Vec<_> = (0..wr * wc)
                .map(|g| ((g / wc) * p + i / p, (g % wc) * p + i % p))
                .collect();
            self.attend(&coords, &q, &k, &v, half, &pn, &mut nonlocal);
        }
        let a = self.pointwise(&local, &t("attn.w_local"), None, c);
        let b = self.pointwise(&nonlocal, &t("attn.w_nonlocal"), None, c);

        // Spectral branch over all pixels as rows.
        let sq = self.pointwise(&y, &t("spec.wq"), None, c);
        let sk = self.pointwise(&y, &t("spec.wk"), None, c);
        let sv = self.pointwise(&y, &t("spec.wv"), None, c);
        let d = c / self.heads;
        let mut att = zeros(h, w, c);
        for hd in 0..self.heads {
            let o = hd * d;
            let mut s = vec![vec![0.0; d]; d];
            for col in 0..d {
                let logits: Vec<f64> = (0..d)
                    .map(|r| {
                        let mut dot = 0.0;
                        for rr in 0..h {
                            for cc in 0..w {
                                dot += sk[rr][cc][o + r] * sq[rr][cc][o + col];
                            }
                        }
                        dot / (d as f64).sqrt()
                    })
                    .collect();
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
                let z: f64 = e.iter().sum();
                for r in 0..d {
                    s[r][col] = e[r] / z;
                }
            }
            for rr in 0..h {
                for cc in 0..w {
                    for col in 0..d {
                        att[rr][cc][o + col] = (0..d).map(|r| sv[rr][cc][o + r] * s[r][col]).sum();
                    }
                }
            }
        }
        let spec = self.pointwise(&att, &t("spec.wo"), None, c);

        let mut cat = zeros(h, w, 2 * c);
        for r in 0..h {
            for cc in 0..w {
                for i in 0..c {
                    cat[r][cc][i] = a[r][cc][i] + b[r][cc][i];
                    cat[r][cc][c + i] = spec[r][cc][i];
                }
            }
        }
        let fused = self.pointwise(&cat, &t("fuse.weight"), Some(&t("fuse.bias")), c);
        let mut x1 = x.clone();
        add_into(&mut x1, &fused);

        let e = c * self.expansion;
        let n2 = self.layer_norm(&x1, &t("ln2.gamma"), &t("ln2.beta"));
        let hdn = map(&self.pointwise(&n2, &t("ffn.w1"), Some(&t("ffn.b1")), e), gelu);
        let dw = t("ffn.dw");
        let dwb = t("ffn.dwb");
        let mut conv = zeros(h, w, e);
        for r in 0..h as i64 {
            for cc in 0..w as i64 {
                for ch in 0..e {
                    let mut acc = dwb[ch];
                    for ky in -1..=1i64 {
                        for kx in -1..=1i64 {
                            let (rr, c2) = (r + ky, cc + kx);
                            if rr >= 0 && c2 >= 0 && rr < h as i64 && c2 < w as i64 {
                                acc +=
                                    hdn[rr as usize][c2 as usize][ch] * dw[ch * 9 + ((ky + 1) * 3 + kx + 1) as usize];
                            }
                        }
                    }
                    conv[r as usize][cc as usize][ch] = acc;
                }
            }
        }
        let ffn = self.pointwise(&map(&conv, gelu), &t("ffn.w2"), Some(&t("ffn.b2")), c);
        add_into(&mut x1, &ffn);
        x1
    }

    pub fn forward(&self, x: &HsiCube, beta: f64) -> Img {
        let (h, w, p) = x.dims();
        let mut input = zeros(h, w, p + 1);
        for r in 0..h {
            for c in 0..w {
                for b in 0..p {
                    input[r][c][b] = x.get(r, c, b) as f64;
                }
                input[r][c][p] = beta;
            }
        }
        let c0 = self.channels;
        let mut f = self.conv(&input, "ulnsa.embed", c0, 3, 1, 1);
        let mut skips = Vec::new();
        for l in 0..self.levels - 1 {
            f = self.block(&f, &format!("ulnsa.enc{l}"));
            skips.push(f.clone());
            f = self.conv(&f, &format!("ulnsa.down{l}"), c0 << (l + 1), 4, 2, 1);
        }
        f = self.block(&f, "ulnsa.bottleneck");
        for l in (0..self.levels - 1).rev() {
            let cl = c0 << l;
            let up = self.deconv(&f, &format!("ulnsa.up{l}"), cl);
            let (hh, ww, _) = dims(&up);
            let mut cat = zeros(hh, ww, 2 * cl);
            for r in 0..hh {
                for c in 0..ww {
                    cat[r][c][..cl].copy_from_slice(&up[r][c]);
                    cat[r][c][cl..].copy_from_slice(&skips[l][r][c]);
                }
            }
            f = self.pointwise(
                &cat,
                &self.t(&format!("ulnsa.merge{l}.weight")),
                Some(&self.t(&format!("ulnsa.merge{l}.bias"))),
                cl,
            );
            f = self.block(&f, &format!("ulnsa.dec{l}"));
        }
        let mut out = self.conv(&f, "ulnsa.out", p, 3, 1, 1);
        for r in 0..h {
            for c in 0..w {
                for b in 0..p {
                    out[r][c][b] += x.get(r, c, b) as f64;
                }
            }
        }
        out
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn map(x: &Img, f: fn(f64) -> f64) -> Img {
    x.iter()
        .map(|row| row.iter().map(|px| px.iter().map(|&v| f(v)).collect()).collect())
        .collect()
}

fn add_into(a: &mut Img, b: &Img) {
    for (ra, rb) in a.iter_mut().zip(b) {
        for (pa, pb) in ra.iter_mut().zip(rb) {
            for (va, vb) in pa.iter_mut().zip(pb) {
                *va += vb;
            }
        }
    }
}
