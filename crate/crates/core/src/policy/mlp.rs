//! Dense 3-64-64-2 network with ReLU hidden layers and a softmax head.

use crate::autodiff::{Arith, ExternalOp};

pub const INPUTS: usize = 3;
pub const HIDDEN: usize = 64;
pub const OUTPUTS: usize = 2;
/// Layer widths, input to output.
pub const LAYERS: [usize; 4] = [INPUTS, HIDDEN, HIDDEN, OUTPUTS];

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * INPUTS;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const W3: usize = B2 + HIDDEN;
const B3: usize = W3 + OUTPUTS * HIDDEN;
/// Flat parameter count: `w1, b1, w2, b2, w3, b3`, weights row-major `[out][in]`.
pub const NUM_PARAMS: usize = B3 + OUTPUTS;

/// Values kept per forward pass for the reverse rule: input, both hidden layers.
pub(crate) const SAVED: usize = INPUTS + 2 * HIDDEN;

/// Network weights laid out for evaluation. The first two layers are stored
/// transposed so the forward pass is a sequence of contiguous axpys.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp {
    flat: Vec<f64>,
    w1t: Vec<f64>,
    w2t: Vec<f64>,
}

fn transpose(w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = w[r * cols + c];
        }
    }
    t
}

impl Mlp {
    pub fn new(flat: Vec<f64>) -> Self {
        assert_eq!(flat.len(), NUM_PARAMS, "parameter vector has the wrong length");
        let w1t = transpose(&flat[W1..B1], HIDDEN, INPUTS);
        let w2t = transpose(&flat[W2..B2], HIDDEN, HIDDEN);
        Self { flat, w1t, w2t }
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    /// Softmax weights for input `x`; hidden activations land in `saved`
    /// (`x`, `h1`, `h2`) when given.
    #[inline]
    pub fn forward(&self, x: [f64; 3], saved: Option<&mut [f64]>) -> [f64; 2] {
        let p = &self.flat;
        let mut h1 = [0.0; HIDDEN];
        h1.copy_from_slice(&p[B1..W2]);
        for (i, &xi) in x.iter().enumerate() {
            let col = &self.w1t[i * HIDDEN..(i + 1) * HIDDEN];
            for (h, &w) in h1.iter_mut().zip(col) {
                *h += xi * w;
            }
        }
        for h in &mut h1 {
            if !(*h > 0.0) {
                *h = 0.0;
            }
        }
        let mut h2 = [0.0; HIDDEN];
        h2.copy_from_slice(&p[B2..W3]);
        for (i, &a) in h1.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let col = &self.w2t[i * HIDDEN..(i + 1) * HIDDEN];
            for (h, &w) in h2.iter_mut().zip(col) {
                *h += a * w;
            }
        }
        for h in &mut h2 {
            if !(*h > 0.0) {
                *h = 0.0;
            }
        }
        let mut z = [p[B3], p[B3 + 1]];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &p[W3 + k * HIDDEN..W3 + (k + 1) * HIDDEN];
            let mut acc = 0.0;
            for (&w, &h) in row.iter().zip(&h2) {
                acc += w * h;
            }
            *zk += acc;
        }
        if let Some(s) = saved {
            s[..INPUTS].copy_from_slice(&x);
            s[INPUTS..INPUTS + HIDDEN].copy_from_slice(&h1);
            s[INPUTS + HIDDEN..SAVED].copy_from_slice(&h2);
        }
        softmax(z)
    }
}

impl Mlp {
    /// Straightforward forward pass in any arithmetic context, for extended
    /// precision evaluation. Not bitwise equal to [`Mlp::forward`].
    pub fn forward_generic<A: Arith>(&self, c: &mut A, x: [A::V; 3]) -> [A::V; 2] {
        let p = &self.flat;
        let layer = |c: &mut A, input: &[A::V], w: usize, b: usize, outs: usize| -> Vec<A::V> {
            (0..outs)
                .map(|o| {
                    let mut acc = c.lit(p[b + o]);
                    for (i, &v) in input.iter().enumerate() {
                        let wi = c.lit(p[w + o * input.len() + i]);
                        let t = c.mul(wi, v);
                        acc = c.add(acc, t);
                    }
                    acc
                })
                .collect()
        };
        let h1: Vec<A::V> = layer(c, &x, W1, B1, HIDDEN).into_iter().map(|v| c.relu(v)).collect();
        let h2: Vec<A::V> = layer(c, &h1, W2, B2, HIDDEN).into_iter().map(|v| c.relu(v)).collect();
        let z = layer(c, &h2, W3, B3, OUTPUTS);
        let m = c.max(z[0], z[1]);
        let z0 = c.sub(z[0], m);
        let z1 = c.sub(z[1], m);
        let e0 = c.exp(z0);
        let e1 = c.exp(z1);
        let s = c.add(e0, e1);
        [c.div(e0, s), c.div(e1, s)]
    }
}

#[inline]
pub(crate) fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = if z[0] >= z[1] { z[0] } else { z[1] };
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

impl ExternalOp for Mlp {
    fn num_params(&self) -> usize {
        NUM_PARAMS
    }

    fn vjp(&self, saved: &[f64], out_adj: &[f64], in_adj: &mut [f64], g: &mut [f64]) {
        let p = &self.flat;
        let x = &saved[..INPUTS];
        let h1 = &saved[INPUTS..INPUTS + HIDDEN];
        let h2 = &saved[INPUTS + HIDDEN..SAVED];
        // The softmax output is not saved; recompute it from h2.
        let mut z = [p[B3], p[B3 + 1]];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &p[W3 + k * HIDDEN..W3 + (k + 1) * HIDDEN];
            let mut acc = 0.0;
            for (&w, &h) in row.iter().zip(h2) {
                acc += w * h;
            }
            *zk += acc;
        }
        let w = softmax(z);
        let dot = out_adj[0] * w[0] + out_adj[1] * w[1];
        let dz = [w[0] * (out_adj[0] - dot), w[1] * (out_adj[1] - dot)];

        let mut d2 = [0.0; HIDDEN];
        for k in 0..OUTPUTS {
            g[B3 + k] += dz[k];
            let row = &p[W3 + k * HIDDEN..W3 + (k + 1) * HIDDEN];
            let grow = &mut g[W3 + k * HIDDEN..W3 + (k + 1) * HIDDEN];
            for i in 0..HIDDEN {
                grow[i] += dz[k] * h2[i];
                d2[i] += dz[k] * row[i];
            }
        }
        let mut d1 = [0.0; HIDDEN];
        for o in 0..HIDDEN {
            let a = if h2[o] > 0.0 { d2[o] } else { 0.0 };
            if a == 0.0 {
                continue;
            }
            g[B2 + o] += a;
            let row = &p[W2 + o * HIDDEN..W2 + (o + 1) * HIDDEN];
            let grow = &mut g[W2 + o * HIDDEN..W2 + (o + 1) * HIDDEN];
            for i in 0..HIDDEN {
                grow[i] += a * h1[i];
                d1[i] += a * row[i];
            }
        }
        for o in 0..HIDDEN {
            let a = if h1[o] > 0.0 { d1[o] } else { 0.0 };
            if a == 0.0 {
                continue;
            }
            g[B1 + o] += a;
            for i in 0..INPUTS {
                g[W1 + o * INPUTS + i] += a * x[i];
                in_adj[i] += a * p[W1 + o * INPUTS + i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new((0..NUM_PARAMS).map(|_| rng.gen_range(-0.5..0.5)).collect())
    }

    // Independent reference: textbook row-major evaluation.
    fn naive(p: &[f64], x: [f64; 3]) -> [f64; 2] {
        let layer = |w: &[f64], b: &[f64], inp: &[f64], relu: bool| -> Vec<f64> {
            (0..b.len())
                .map(|o| {
                    let v = b[o] + (0..inp.len()).map(|i| w[o * inp.len() + i] * inp[i]).sum::<f64>();
                    if relu {
                        v.max(0.0)
                    } else {
                        v
                    }
                })
                .collect()
        };
        let h1 = layer(&p[W1..B1], &p[B1..W2], &x, true);
        let h2 = layer(&p[W2..B2], &p[B2..W3], &h1, true);
        let z = layer(&p[W3..B3], &p[B3..], &h2, false);
        let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1])]
    }

    #[test]
    fn layout_size() {
        assert_eq!(NUM_PARAMS, 4546);
    }

    #[test]
    fn forward_matches_naive_evaluation() {
        let net = random_net(1);
        for x in [[0.1, -0.7, 1.0], [1.0, 1.0, 1.0], [-1.0, 0.0, 0.5]] {
            let a = net.forward(x, None);
            let b = naive(net.flat(), x);
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
            assert!((a[0] + a[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let net = random_net(7);
        let x = [0.3, -0.2, 0.9];
        let out_adj = [0.7, -1.3];
        let mut saved = vec![0.0; SAVED];
        net.forward(x, Some(&mut saved));
        let mut in_adj = [0.0; 3];
        let mut g = vec![0.0; NUM_PARAMS];
        net.vjp(&saved, &out_adj, &mut in_adj, &mut g);
        let obj = |p: &[f64], x: [f64; 3]| {
            let w = naive(p, x);
            out_adj[0] * w[0] + out_adj[1] * w[1]
        };
        let h = 1e-6;
        for i in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj(net.flat(), xp) - obj(net.flat(), xm)) / (2.0 * h);
            assert!((fd - in_adj[i]).abs() < 1e-7 * (1.0 + fd.abs()), "input {i}: {fd} vs {}", in_adj[i]);
        }
        for &k in &[0, B1 + 3, W2 + 100, B2 + 5, W3 + 10, B3, B3 + 1] {
            let mut pp = net.flat().to_vec();
            let mut pm = pp.clone();
            pp[k] += h;
            pm[k] -= h;
            let fd = (obj(&pp, x) - obj(&pm, x)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }
}
