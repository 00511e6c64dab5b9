//! Append-only reverse-mode tape over `f64` scalars.
//!
//! Every node stores its value and the local partials with respect to its
//! inputs, so the reverse sweep is a single pass over node ids in descending
//! order. Node ids are handed out in recording order, which makes the tape
//! topologically sorted by construction.
//!
//! Besides the closed set of scalar operations the tape supports *external
//! blocks*: a contiguous run of output nodes produced by an opaque
//! sub-computation (the shared policy network) whose vector-Jacobian product
//! is supplied by an [`ExternalOp`]. External ops may also own parameters;
//! their adjoints are accumulated into [`GradientMap::params`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Output `k` of an external block whose first output is `self`.
    pub fn output(self, k: usize) -> NodeId {
        NodeId(self.0 + k as u32)
    }
}

/// Handle to an [`ExternalOp`] registered on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExtId(u32);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TapeError {
    #[error("node {node} recorded a non-finite value ({value})")]
    NonFinite { node: usize, value: f64 },
    #[error("input node {input} does not exist (tape has {len} nodes)")]
    MissingInput { input: usize, len: usize },
    #[error("op `{kind}` takes {expected} inputs, got {got}")]
    Arity { kind: OpKind, expected: usize, got: usize },
    #[error("{inputs} inputs but {partials} partials")]
    PartialCount { inputs: usize, partials: usize },
    #[error("unknown op kind `{0}`")]
    UnknownOp(String),
    #[error("external blocks must be recorded with `record_external`")]
    ExternalViaRecord,
    #[error("seed node {seed} is not on the tape (len {len})")]
    InvalidSeed { seed: usize, len: usize },
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

/// The closed set of operations a node can represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Abs,
    Max,
    Min,
    Square,
    Sqrt,
    Exp,
    Reciprocal,
    Relu,
    /// Output of an external block; only produced by [`Tape::record_external`].
    External,
}

impl OpKind {
    pub fn arity(self) -> Option<usize> {
        use OpKind::*;
        match self {
            Leaf | Constant => Some(0),
            Neg | Abs | Square | Sqrt | Exp | Reciprocal | Relu => Some(1),
            Add | Sub | Mul | Div | Max | Min => Some(2),
            External => None,
        }
    }

    pub fn name(self) -> &'static str {
        use OpKind::*;
        match self {
            Leaf => "leaf",
            Constant => "constant",
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            Neg => "neg",
            Abs => "abs",
            Max => "max",
            Min => "min",
            Square => "square",
            Sqrt => "sqrt",
            Exp => "exp",
            Reciprocal => "reciprocal",
            Relu => "relu",
            External => "external",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = TapeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use OpKind::*;
        Ok(match s {
            "leaf" => Leaf,
            "constant" => Constant,
            "add" => Add,
            "sub" => Sub,
            "mul" => Mul,
            "div" => Div,
            "neg" => Neg,
            "abs" => Abs,
            "max" => Max,
            "min" => Min,
            "square" => Square,
            "sqrt" => Sqrt,
            "exp" => Exp,
            "reciprocal" => Reciprocal,
            "relu" => Relu,
            "external" => External,
            other => return Err(TapeError::UnknownOp(other.to_string())),
        })
    }
}

/// Reverse rule for an opaque block of outputs.
pub trait ExternalOp: Send + Sync {
    /// Number of parameters whose adjoints this op accumulates.
    fn num_params(&self) -> usize;

    /// Accumulate `out_adj^T J` into `in_adj` (inputs) and `param_adj`.
    ///
    /// `saved` is whatever the forward pass stored with the block.
    fn vjp(&self, saved: &[f64], out_adj: &[f64], in_adj: &mut [f64], param_adj: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
struct Node {
    da: f64,
    db: f64,
    a: u32,
    b: u32,
    kind: OpKind,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    ext: u32,
    first: u32,
    n_out: u32,
    inputs_start: u32,
    n_in: u32,
    saved_start: usize,
    saved_len: usize,
}

pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
    checked: bool,
    fault: Option<TapeError>,
    externals: Vec<(usize, Box<dyn ExternalOp>)>,
    blocks: Vec<Block>,
    block_inputs: Vec<u32>,
    saved: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.len())
            .field("blocks", &self.blocks.len())
            .field("checked", &self.checked)
            .finish()
    }
}

impl Tape {
    /// A checked tape: non-finite values are rejected.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            values: Vec::new(),
            checked: true,
            fault: None,
            externals: Vec::new(),
            blocks: Vec::new(),
            block_inputs: Vec::new(),
            saved: Vec::new(),
        }
    }

    pub fn unchecked() -> Self {
        Self { checked: false, ..Self::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        let mut t = Self::new();
        t.nodes.reserve(n);
        t.values.reserve(n);
        t
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_checked(&self) -> bool {
        self.checked
    }

    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.index()].kind
    }

    /// Input ids of a scalar node (empty for leaves, constants and external outputs).
    pub fn inputs(&self, id: NodeId) -> Vec<NodeId> {
        let n = &self.nodes[id.index()];
        match n.kind.arity() {
            Some(0) | None => Vec::new(),
            Some(1) => vec![NodeId(n.a)],
            _ => vec![NodeId(n.a), NodeId(n.b)],
        }
    }

    /// Local partials of a scalar node, in input order.
    pub fn partials(&self, id: NodeId) -> Vec<f64> {
        let n = &self.nodes[id.index()];
        match n.kind.arity() {
            Some(0) | None => Vec::new(),
            Some(1) => vec![n.da],
            _ => vec![n.da, n.db],
        }
    }

    /// First non-finite value seen by an arithmetic helper in checked mode.
    pub fn fault(&self) -> Option<&TapeError> {
        self.fault.as_ref()
    }

    pub fn check(&self) -> Result<(), TapeError> {
        match &self.fault {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// Record a node with explicit value and local partials.
    pub fn record(
        &mut self,
        kind: OpKind,
        inputs: &[NodeId],
        value: f64,
        partials: &[f64],
    ) -> Result<NodeId, TapeError> {
        let expected = kind.arity().ok_or(TapeError::ExternalViaRecord)?;
        if inputs.len() != expected {
            return Err(TapeError::Arity { kind, expected, got: inputs.len() });
        }
        if partials.len() != inputs.len() {
            return Err(TapeError::PartialCount { inputs: inputs.len(), partials: partials.len() });
        }
        for &i in inputs {
            if i.index() >= self.len() {
                return Err(TapeError::MissingInput { input: i.index(), len: self.len() });
            }
        }
        if self.checked && !value.is_finite() {
            return Err(TapeError::NonFinite { node: self.len(), value });
        }
        let (a, da) = inputs.first().zip(partials.first()).map_or((0, 0.0), |(i, p)| (i.0, *p));
        let (b, db) = inputs.get(1).zip(partials.get(1)).map_or((0, 0.0), |(i, p)| (i.0, *p));
        Ok(self.push(kind, a, b, da, db, value))
    }

    #[inline]
    fn push(&mut self, kind: OpKind, a: u32, b: u32, da: f64, db: f64, value: f64) -> NodeId {
        let id = self.nodes.len();
        if self.checked && self.fault.is_none() && !value.is_finite() {
            self.fault = Some(TapeError::NonFinite { node: id, value });
        }
        self.nodes.push(Node { da, db, a, b, kind });
        self.values.push(value);
        NodeId(id as u32)
    }

    pub fn leaf(&mut self, value: f64) -> NodeId {
        self.push(OpKind::Leaf, 0, 0, 0.0, 0.0, value)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(OpKind::Constant, 0, 0, 0.0, 0.0, value)
    }

    #[inline]
    fn unary(&mut self, kind: OpKind, x: NodeId, value: f64, d: f64) -> NodeId {
        self.push(kind, x.0, 0, d, 0.0, value)
    }

    #[inline]
    fn binary(&mut self, kind: OpKind, x: NodeId, y: NodeId, value: f64, dx: f64, dy: f64) -> NodeId {
        self.push(kind, x.0, y.0, dx, dy, value)
    }

    pub fn add(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let v = self.value(x) + self.value(y);
        self.binary(OpKind::Add, x, y, v, 1.0, 1.0)
    }

    pub fn sub(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let v = self.value(x) - self.value(y);
        self.binary(OpKind::Sub, x, y, v, 1.0, -1.0)
    }

    pub fn mul(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (a, b) = (self.value(x), self.value(y));
        self.binary(OpKind::Mul, x, y, a * b, b, a)
    }

    pub fn div(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (a, b) = (self.value(x), self.value(y));
        let v = a / b;
        self.binary(OpKind::Div, x, y, v, 1.0 / b, -v / b)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let v = -self.value(x);
        self.unary(OpKind::Neg, x, v, -1.0)
    }

    /// `|x|` with subgradient 0 at the kink.
    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let a = self.value(x);
        let d = if a > 0.0 {
            1.0
        } else if a < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(OpKind::Abs, x, a.abs(), d)
    }

    /// `max(x, y)`; ties route the full adjoint to `x`.
    pub fn max(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (a, b) = (self.value(x), self.value(y));
        if a >= b {
            self.binary(OpKind::Max, x, y, a, 1.0, 0.0)
        } else {
            self.binary(OpKind::Max, x, y, b, 0.0, 1.0)
        }
    }

    /// `min(x, y)`; ties route the full adjoint to `x`.
    pub fn min(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (a, b) = (self.value(x), self.value(y));
        if a <= b {
            self.binary(OpKind::Min, x, y, a, 1.0, 0.0)
        } else {
            self.binary(OpKind::Min, x, y, b, 0.0, 1.0)
        }
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let a = self.value(x);
        self.unary(OpKind::Square, x, a * a, 2.0 * a)
    }

    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).sqrt();
        self.unary(OpKind::Sqrt, x, v, 0.5 / v)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).exp();
        self.unary(OpKind::Exp, x, v, v)
    }

    pub fn reciprocal(&mut self, x: NodeId) -> NodeId {
        let a = self.value(x);
        let v = 1.0 / a;
        self.unary(OpKind::Reciprocal, x, v, -v * v)
    }

    /// `max(x, 0)` with derivative 0 at the kink.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let a = self.value(x);
        if a > 0.0 {
            self.unary(OpKind::Relu, x, a, 1.0)
        } else {
            self.unary(OpKind::Relu, x, 0.0, 0.0)
        }
    }

    /// Register an external op. `key` identifies the owner so callers can
    /// find the op again with [`Tape::external_by_key`].
    pub fn register_external(&mut self, key: usize, op: Box<dyn ExternalOp>) -> ExtId {
        self.externals.push((key, op));
        ExtId((self.externals.len() - 1) as u32)
    }

    pub fn external_by_key(&self, key: usize) -> Option<ExtId> {
        self.externals.iter().position(|(k, _)| *k == key).map(|i| ExtId(i as u32))
    }

    /// Record a block of outputs computed by an external op from `inputs`.
    /// Returns the id of the first output; the rest follow contiguously.
    pub fn record_external(
        &mut self,
        ext: ExtId,
        inputs: &[NodeId],
        outputs: &[f64],
        saved: &[f64],
    ) -> NodeId {
        assert!((ext.0 as usize) < self.externals.len(), "unregistered external op");
        assert!(!outputs.is_empty(), "external block without outputs");
        for &i in inputs {
            assert!(i.index() < self.len(), "external input {} not on tape", i.index());
        }
        let block = self.blocks.len() as u32;
        let first = self.nodes.len() as u32;
        self.blocks.push(Block {
            ext: ext.0,
            first,
            n_out: outputs.len() as u32,
            inputs_start: self.block_inputs.len() as u32,
            n_in: inputs.len() as u32,
            saved_start: self.saved.len(),
            saved_len: saved.len(),
        });
        self.block_inputs.extend(inputs.iter().map(|i| i.0));
        self.saved.extend_from_slice(saved);
        for (k, &v) in outputs.iter().enumerate() {
            self.push(OpKind::External, block, k as u32, 0.0, 0.0, v);
        }
        NodeId(first)
    }

    /// Reverse sweep seeded with adjoint 1 at `seed`.
    pub fn backward(&self, seed: NodeId) -> Result<GradientMap, TapeError> {
        self.backward_seeded(&[(seed, 1.0)])
    }

    /// Reverse sweep seeded with arbitrary adjoints; seeds on the same node add up.
    pub fn backward_seeded(&self, seeds: &[(NodeId, f64)]) -> Result<GradientMap, TapeError> {
        let top = match seeds.iter().map(|s| s.0).max() {
            Some(t) => t,
            None => return Ok(self.empty_gradients(0)),
        };
        if top.index() >= self.len() {
            return Err(TapeError::InvalidSeed { seed: top.index(), len: self.len() });
        }
        let mut g = self.empty_gradients(top.index() + 1);
        for &(s, w) in seeds {
            g.adjoints[s.index()] += w;
        }
        let adj = &mut g.adjoints;
        let mut out_buf = Vec::new();
        let mut in_buf = Vec::new();
        for i in (0..=top.index()).rev() {
            let n = self.nodes[i];
            match n.kind {
                OpKind::Leaf | OpKind::Constant => {}
                OpKind::External => {
                    let blk = self.blocks[n.a as usize];
                    let last = (blk.first + blk.n_out - 1) as usize;
                    if i != last.min(top.index()) {
                        continue;
                    }
                    let first = blk.first as usize;
                    out_buf.clear();
                    out_buf.extend((first..first + blk.n_out as usize).map(|k| adj.get(k).copied().unwrap_or(0.0)));
                    if out_buf.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    in_buf.clear();
                    in_buf.resize(blk.n_in as usize, 0.0);
                    let saved = &self.saved[blk.saved_start..blk.saved_start + blk.saved_len];
                    let (_, op) = &self.externals[blk.ext as usize];
                    op.vjp(saved, &out_buf, &mut in_buf, &mut g.params[blk.ext as usize]);
                    let ins = &self.block_inputs[blk.inputs_start as usize..(blk.inputs_start + blk.n_in) as usize];
                    for (&id, &d) in ins.iter().zip(&in_buf) {
                        adj[id as usize] += d;
                    }
                }
                kind => {
                    let a = adj[i];
                    if a == 0.0 {
                        continue;
                    }
                    adj[n.a as usize] += a * n.da;
                    if kind.arity() == Some(2) {
                        adj[n.b as usize] += a * n.db;
                    }
                }
            }
        }
        Ok(g)
    }

    fn empty_gradients(&self, n: usize) -> GradientMap {
        GradientMap {
            adjoints: vec![0.0; n],
            params: self.externals.iter().map(|(_, op)| vec![0.0; op.num_params()]).collect(),
        }
    }
}

/// Adjoints produced by a reverse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    adjoints: Vec<f64>,
    params: Vec<Vec<f64>>,
}

impl GradientMap {
    /// Adjoint of `id`; nodes recorded after the seed have adjoint 0.
    pub fn get(&self, id: NodeId) -> f64 {
        self.adjoints.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn adjoints(&self) -> &[f64] {
        &self.adjoints
    }

    /// Parameter adjoints accumulated by an external op.
    pub fn params(&self, ext: ExtId) -> &[f64] {
        &self.params[ext.0 as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_mul_stores_product_rule_partials() {
        let mut t = Tape::new();
        let x = t.leaf(3.0);
        let y = t.leaf(4.0);
        let f = t.record(OpKind::Mul, &[x, y], 12.0, &[4.0, 3.0]).unwrap();
        assert_eq!(t.value(f), 12.0);
        assert_eq!(t.partials(f), vec![4.0, 3.0]);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn abs_subgradients() {
        let mut t = Tape::new();
        let x = t.leaf(-2.0);
        let a = t.abs(x);
        assert_eq!(t.value(a), 2.0);
        assert_eq!(t.partials(a), vec![-1.0]);
        let z = t.leaf(0.0);
        let b = t.abs(z);
        assert_eq!(t.value(b), 0.0);
        assert_eq!(t.partials(b), vec![0.0]);
    }

    #[test]
    fn record_validates_inputs() {
        let mut t = Tape::new();
        let x = t.leaf(1.0);
        assert!(matches!(
            t.record(OpKind::Add, &[x], 1.0, &[1.0]),
            Err(TapeError::Arity { .. })
        ));
        assert!(matches!(
            t.record(OpKind::Neg, &[x], -1.0, &[]),
            Err(TapeError::PartialCount { .. })
        ));
        assert!(matches!(
            t.record(OpKind::Neg, &[NodeId(7)], -1.0, &[-1.0]),
            Err(TapeError::MissingInput { .. })
        ));
        assert!(matches!(
            t.record(OpKind::Neg, &[x], f64::NAN, &[-1.0]),
            Err(TapeError::NonFinite { .. })
        ));
        assert!(matches!(t.record(OpKind::External, &[], 0.0, &[]), Err(TapeError::ExternalViaRecord)));
        assert!("sigmoid".parse::<OpKind>().is_err());
        assert_eq!("reciprocal".parse::<OpKind>().unwrap(), OpKind::Reciprocal);
    }

    #[test]
    fn unchecked_tape_accepts_nan() {
        let mut t = Tape::unchecked();
        let x = t.leaf(1.0);
        assert!(t.record(OpKind::Neg, &[x], f64::NAN, &[-1.0]).is_ok());
        let z = t.leaf(0.0);
        let _ = t.div(x, z);
        assert!(t.fault().is_none());
    }

    #[test]
    fn helper_records_fault_in_checked_mode() {
        let mut t = Tape::new();
        let x = t.leaf(1.0);
        let z = t.leaf(0.0);
        let _ = t.div(x, z);
        assert!(matches!(t.check(), Err(TapeError::NonFinite { node: 2, .. })));
    }

    #[test]
    fn backward_product() {
        let mut t = Tape::new();
        let x = t.leaf(3.0);
        let y = t.leaf(4.0);
        let f = t.mul(x, y);
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(f), 1.0);
        assert_eq!(g.get(x), 4.0);
        assert_eq!(g.get(y), 3.0);
    }

    #[test]
    fn backward_inactive_relu() {
        let mut t = Tape::new();
        let x = t.leaf(-5.0);
        let f = t.relu(x);
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(x), 0.0);
        let z = t.leaf(0.0);
        let f0 = t.relu(z);
        assert_eq!(t.backward(f0).unwrap().get(z), 0.0);
    }

    #[test]
    fn backward_square_plus_exp() {
        let mut t = Tape::new();
        let x = t.leaf(1.0);
        let sq = t.mul(x, x);
        let e = t.exp(x);
        let f = t.add(sq, e);
        let g = t.backward(f).unwrap();
        assert!((g.get(x) - (2.0 + std::f64::consts::E)).abs() < 1e-15);
    }

    #[test]
    fn max_min_ties_go_to_first_argument() {
        let mut t = Tape::new();
        let x = t.leaf(2.0);
        let y = t.leaf(2.0);
        let m = t.max(x, y);
        let g = t.backward(m).unwrap();
        assert_eq!((g.get(x), g.get(y)), (1.0, 0.0));
        let n = t.min(y, x);
        let g = t.backward(n).unwrap();
        assert_eq!((g.get(x), g.get(y)), (0.0, 1.0));
    }

    #[test]
    fn invalid_seed_is_rejected() {
        let t = Tape::new();
        assert!(matches!(t.backward(NodeId(0)), Err(TapeError::InvalidSeed { .. })));
    }

    struct Affine;

    // y0 = p0 * x0 + x1, y1 = x0 * x1 ; params p = [p0]
    impl ExternalOp for Affine {
        fn num_params(&self) -> usize {
            1
        }
        fn vjp(&self, saved: &[f64], out: &[f64], inp: &mut [f64], par: &mut [f64]) {
            let (x0, x1, p0) = (saved[0], saved[1], saved[2]);
            inp[0] += out[0] * p0 + out[1] * x1;
            inp[1] += out[0] + out[1] * x0;
            par[0] += out[0] * x0;
        }
    }

    #[test]
    fn external_block_reverse_rule() {
        let mut t = Tape::new();
        let ext = t.register_external(42, Box::new(Affine));
        assert_eq!(t.external_by_key(42), Some(ext));
        let x0 = t.leaf(2.0);
        let x1 = t.leaf(5.0);
        let p0 = 3.0;
        let y = t.record_external(ext, &[x0, x1], &[p0 * 2.0 + 5.0, 10.0], &[2.0, 5.0, p0]);
        let y1 = NodeId(y.0 + 1);
        assert_eq!(t.value(y), 11.0);
        assert_eq!(t.value(y1), 10.0);
        let s = t.add(y, y1);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x0), 3.0 + 5.0);
        assert_eq!(g.get(x1), 1.0 + 2.0);
        assert_eq!(g.params(ext), &[2.0]);
        // seeding the first output only must not read past the seed
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x0), 3.0);
        assert_eq!(g.params(ext), &[2.0]);
    }
}
