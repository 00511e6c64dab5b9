//! Reverse-mode differentiation over scalar tapes.

mod arith;
mod dd;
mod tape;

pub use arith::{Arith, Eval};
pub use dd::{Dd, DdEval};
pub use tape::{ExtId, ExternalOp, GradientMap, NodeId, OpKind, Tape, TapeError};

/// Division guard in [`grad_check`]'s relative error.
pub const GRAD_CHECK_EPS: f64 = 1e-12;

/// Compare tape gradients of `f` at `point` with central differences.
///
/// `f` builds the function on a fresh tape from the given leaves and returns
/// the output node. The result is the maximum over coordinates of
/// `|tape - fd| / (|fd| + 1e-12)`.
pub fn grad_check<F>(f: F, point: &[f64], h: f64) -> Result<f64, TapeError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, TapeError>,
{
    if !(h > 0.0) {
        return Err(TapeError::Evaluation(format!("step must be positive, got {h}")));
    }
    let eval = |x: &[f64]| -> Result<(Tape, Vec<NodeId>, NodeId), TapeError> {
        let mut tape = Tape::new();
        let leaves: Vec<NodeId> = x.iter().map(|&v| tape.leaf(v)).collect();
        let out = f(&mut tape, &leaves)?;
        tape.check()?;
        Ok((tape, leaves, out))
    };
    let (tape, leaves, out) = eval(point)?;
    let grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    let mut x = point.to_vec();
    for (i, &leaf) in leaves.iter().enumerate() {
        x[i] = point[i] + h;
        let (tp, _, op) = eval(&x)?;
        x[i] = point[i] - h;
        let (tm, _, om) = eval(&x)?;
        x[i] = point[i];
        let fd = (tp.value(op) - tm.value(om)) / (2.0 * h);
        let err = (grads.get(leaf) - fd).abs() / (fd.abs() + GRAD_CHECK_EPS);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_check_sum_of_squares() {
        let err = grad_check(
            |t, x| {
                let mut acc = t.square(x[0]);
                for &v in &x[1..] {
                    let s = t.square(v);
                    acc = t.add(acc, s);
                }
                Ok(acc)
            },
            &[1.0, 2.0, 3.0],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn grad_check_constant_is_exactly_zero() {
        let err = grad_check(|t, _| Ok(t.constant(7.0)), &[0.3, -4.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn grad_check_rejects_bad_step() {
        assert!(grad_check(|t, x| Ok(t.square(x[0])), &[1.0], 0.0).is_err());
    }

    #[test]
    fn linearity_of_adjoints() {
        // f = x*y + exp(x), g = x/y - sqrt(y); check adjoints of a f + b g
        let build = |t: &mut Tape, a: f64, b: f64| {
            let x = t.leaf(0.8);
            let y = t.leaf(1.7);
            let xy = t.mul(x, y);
            let ex = t.exp(x);
            let f = t.add(xy, ex);
            let q = t.div(x, y);
            let sy = t.sqrt(y);
            let g = t.sub(q, sy);
            let ca = t.constant(a);
            let cb = t.constant(b);
            let af = t.mul(ca, f);
            let bg = t.mul(cb, g);
            let h = t.add(af, bg);
            (x, y, f, g, h)
        };
        let (a, b) = (2.5, -0.75);
        let mut t = Tape::new();
        let (x, y, f, g, h) = build(&mut t, a, b);
        let gh = t.backward(h).unwrap();
        let gf = t.backward(f).unwrap();
        let gg = t.backward(g).unwrap();
        for leaf in [x, y] {
            let expect = a * gf.get(leaf) + b * gg.get(leaf);
            assert!((gh.get(leaf) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }
}
