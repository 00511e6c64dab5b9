//! The shared interface policy: stencil scaling followed by a small dense
//! network whose softmax output is the pair of stencil weights.

mod checkpoint;
mod mlp;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use mlp::{HIDDEN, INPUTS, LAYERS, NUM_PARAMS, OUTPUTS};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Arith, Dd, DdEval, Eval, ExtId, NodeId, Tape};
use crate::error::{Error, Result};
use crate::scheme::ActionPolicy;
use mlp::{Mlp, SAVED};

/// Floor on the stencil scale in [`normalize_stencil`].
pub const NORMALIZE_EPS: f64 = 1e-10;

/// Flat network parameters, `w1, b1, w2, b2, w3, b3` with row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams(pub Vec<f64>);

impl PolicyParams {
    /// Glorot-uniform weights from a seeded ChaCha stream, zero biases.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(NUM_PARAMS);
        for l in 0..3 {
            let (fan_in, fan_out) = (LAYERS[l], LAYERS[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            flat.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)));
            flat.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self(flat)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scale a stencil by `max(max_i |s_i|, eps)` so the network sees values in `[-1, 1]`.
pub fn normalize_stencil<A: Arith>(c: &mut A, s: [A::V; 3], eps: f64) -> [A::V; 3] {
    let a0 = c.abs(s[0]);
    let a1 = c.abs(s[1]);
    let a2 = c.abs(s[2]);
    let m = c.max(a0, a1);
    let m = c.max(m, a2);
    let floor = c.lit(eps);
    let m = c.max(m, floor);
    [c.div(s[0], m), c.div(s[1], m), c.div(s[2], m)]
}

/// Plays the role of the WENO `eps` in [`smoothness_stencil`]; equal to the
/// default `weno.eps`.
pub const SMOOTHNESS_EPS: f64 = 1e-6;

/// The one-sided differences `(d0, d1) = (s0 - s1, s2 - s1)` divided by
/// `sqrt(S)`, then `eps / S`, with `S = d0^2 + d1^2 + eps`. Offset invariant
/// and bounded. The absolute scale survives in the last entry, so the
/// classical weights are a smooth function of these inputs: with
/// `x = (a, b, e)`, `(eps + d0^2) / S = e + a^2` and likewise for `d1`.
pub fn smoothness_stencil<A: Arith>(c: &mut A, s: [A::V; 3], eps: f64) -> [A::V; 3] {
    let d0 = c.sub(s[0], s[1]);
    let d1 = c.sub(s[2], s[1]);
    let q0 = c.square(d0);
    let q1 = c.square(d1);
    let eps = c.lit(eps);
    let q = c.add(q0, q1);
    let big_s = c.add(q, eps);
    let root = c.sqrt(big_s);
    [c.div(d0, root), c.div(d1, root), c.div(eps, big_s)]
}

/// How a raw stencil is presented to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputScaling {
    /// Raw values.
    None,
    /// [`normalize_stencil`].
    MaxAbs,
    /// [`smoothness_stencil`].
    #[default]
    Smoothness,
}

impl InputScaling {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Self::None),
            "max-abs" => Ok(Self::MaxAbs),
            "smoothness" => Ok(Self::Smoothness),
            other => Err(Error::config(format!(
                "unknown input scaling `{other}` (none, max-abs, smoothness)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::MaxAbs => "max-abs",
            Self::Smoothness => "smoothness",
        }
    }

    pub fn apply<A: Arith>(self, c: &mut A, s: [A::V; 3], eps: f64) -> [A::V; 3] {
        match self {
            Self::None => s,
            Self::MaxAbs => normalize_stencil(c, s, eps),
            Self::Smoothness => smoothness_stencil(c, s, SMOOTHNESS_EPS),
        }
    }
}

/// Trained-network policy shared by every interface agent.
#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    net: Arc<Mlp>,
    scaling: InputScaling,
    eps: f64,
}

impl NeuralPolicy {
    pub fn new(params: PolicyParams, scaling: InputScaling) -> Self {
        Self { net: Arc::new(Mlp::new(params.0)), scaling, eps: NORMALIZE_EPS }
    }

    pub fn params(&self) -> PolicyParams {
        PolicyParams(self.net.flat().to_vec())
    }

    pub fn scaling(&self) -> InputScaling {
        self.scaling
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.net) as *const u8 as usize
    }

    /// Where this policy's parameter adjoints accumulate on `tape`, if it was used there.
    pub fn ext_id(&self, tape: &Tape) -> Option<ExtId> {
        tape.external_by_key(self.key())
    }

    /// Network output for already-scaled input.
    pub fn forward_raw(&self, x: [f64; 3]) -> [f64; 2] {
        self.net.forward(x, None)
    }
}

impl ActionPolicy for NeuralPolicy {
    fn name(&self) -> &str {
        "neural"
    }

    fn weights(&self, stencil: [f64; 3]) -> [f64; 2] {
        let x = self.scaling.apply(&mut Eval, stencil, self.eps);
        self.net.forward(x, None)
    }

    fn weights_taped(&self, tape: &mut Tape, stencil: [NodeId; 3]) -> [NodeId; 2] {
        let x = self.scaling.apply(tape, stencil, self.eps);
        let ext = match tape.external_by_key(self.key()) {
            Some(e) => e,
            None => tape.register_external(self.key(), Box::new((*self.net).clone())),
        };
        let xv = [tape.value(x[0]), tape.value(x[1]), tape.value(x[2])];
        let mut saved = [0.0; SAVED];
        let w = self.net.forward(xv, Some(&mut saved));
        let first = tape.record_external(ext, &x, &w, &saved);
        [first, first.output(1)]
    }

    fn weights_dd(&self, stencil: [Dd; 3]) -> [Dd; 2] {
        let x = self.scaling.apply(&mut DdEval, stencil, self.eps);
        self.net.forward_generic(&mut DdEval, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = PolicyParams::init(3);
        assert_eq!(a, PolicyParams::init(3));
        assert_ne!(a, PolicyParams::init(4));
        assert_eq!(a.len(), NUM_PARAMS);
        let bound = (6.0f64 / 67.0).sqrt();
        assert!(a.0[..192].iter().all(|w| w.abs() <= bound));
        assert!(a.0[192..256].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn normalisation_is_scale_invariant() {
        let a = normalize_stencil(&mut Eval, [0.2, -0.4, 0.1], NORMALIZE_EPS);
        let b = normalize_stencil(&mut Eval, [2.0, -4.0, 1.0], NORMALIZE_EPS);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-15);
        }
        assert_eq!(a[1], -1.0);
        assert_eq!(normalize_stencil(&mut Eval, [0.0; 3], NORMALIZE_EPS), [0.0; 3]);
        assert_eq!(normalize_stencil(&mut Eval, [2.0, 4.0, -8.0], NORMALIZE_EPS), [0.25, 0.5, -1.0]);
    }

    #[test]
    fn smoothness_inputs_determine_the_classical_weights() {
        let coeffs = crate::weno::WenoCoefficients::default();
        for st in [[1.0, 1.5, 2.5], [0.2, 0.2001, 0.2003], [3.0, -1.0, 0.5], [0.7, 0.7, 0.7]] {
            let [a, b, e] = smoothness_stencil(&mut Eval, st, SMOOTHNESS_EPS);
            // same three inputs after a shift of the whole stencil
            let shifted = smoothness_stencil(&mut Eval, st.map(|v| v + 10.0), SMOOTHNESS_EPS);
            assert!((shifted[2] - e).abs() < 1e-9);
            // alpha_k = c_k / (eps + beta_k)^2, with eps + beta_0 = S (e + a^2)
            let c = coeffs.d;
            let r0 = c[0] / (e + a * a).powi(2);
            let r1 = c[1] / (e + b * b).powi(2);
            let w = crate::weno::weno_weights(st, &coeffs);
            assert!((r0 / (r0 + r1) - w[0]).abs() < 1e-12, "{st:?}");
            assert!(a.abs() < 1.0 && b.abs() < 1.0 && e > 0.0 && e <= 1.0);
        }
    }

    #[test]
    fn double_double_path_agrees_with_f64() {
        for scaling in [InputScaling::None, InputScaling::MaxAbs, InputScaling::Smoothness] {
            let pol = NeuralPolicy::new(PolicyParams::init(12), scaling);
            for s in [[0.3, 0.8, -0.1], [1.0, 1.0, 1.0], [2.0, 1.999, 0.2]] {
                let w = pol.weights(s);
                let wd = pol.weights_dd(s.map(Dd::new));
                for k in 0..2 {
                    assert!((w[k] - wd[k].to_f64()).abs() < 1e-14, "{scaling:?} {s:?}");
                }
            }
        }
    }

    #[test]
    fn scaling_names_round_trip() {
        for m in [InputScaling::None, InputScaling::MaxAbs, InputScaling::Smoothness] {
            assert_eq!(InputScaling::parse(m.name()).unwrap(), m);
        }
        assert!(InputScaling::parse("true").is_err());
    }

    #[test]
    fn taped_weights_match_plain_bitwise_and_differentiate() {
        let pol = NeuralPolicy::new(PolicyParams::init(11), InputScaling::Smoothness);
        let s = [0.3, 0.8, -0.1];
        let plain = pol.weights(s);
        let mut t = Tape::new();
        let leaves = s.map(|v| t.leaf(v));
        let w = pol.weights_taped(&mut t, leaves);
        assert_eq!(t.value(w[0]).to_bits(), plain[0].to_bits());
        assert_eq!(t.value(w[1]).to_bits(), plain[1].to_bits());
        // d w0 / d s_i against central differences of the plain path
        let g = t.backward(w[0]).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let (mut sp, mut sm) = (s, s);
            sp[i] += h;
            sm[i] -= h;
            let fd = (pol.weights(sp)[0] - pol.weights(sm)[0]) / (2.0 * h);
            assert!((fd - g.get(leaves[i])).abs() < 1e-6, "{i}: {fd} vs {}", g.get(leaves[i]));
        }
        let ext = pol.ext_id(&t).unwrap();
        assert!(g.params(ext).iter().any(|&v| v != 0.0));
    }
}
