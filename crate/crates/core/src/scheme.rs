//! Interchangeable flux-weight policies.
//!
//! Every interface agent turns one upwind-ordered three-point stencil into two
//! convex weights. Classical WENO, fixed weights and the learned network all
//! implement [`ActionPolicy`] and are selected by name at runtime through
//! [`PolicyRegistry`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::autodiff::{Dd, NodeId, Tape};
use crate::error::{Error, Result};
use crate::policy::NeuralPolicy;
use crate::weno::{WenoCoefficients, WenoOracle};

pub trait ActionPolicy: Send + Sync {
    fn name(&self) -> &str;

    /// Weights for one stencil `(s0, s1, s2)`, upwind to downwind.
    fn weights(&self, stencil: [f64; 3]) -> [f64; 2];

    /// Same computation recorded on `tape`; values must match
    /// [`ActionPolicy::weights`] bit for bit.
    fn weights_taped(&self, tape: &mut Tape, stencil: [NodeId; 3]) -> [NodeId; 2];

    /// Same computation in double-double precision. The default rounds the
    /// stencil to `f64`, so overriding it is what makes extended-precision
    /// rollouts of this policy meaningful.
    fn weights_dd(&self, stencil: [Dd; 3]) -> [Dd; 2] {
        self.weights(stencil.map(Dd::to_f64)).map(Dd::new)
    }
}

/// Constant weights regardless of the stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedWeights(pub [f64; 2]);

impl ActionPolicy for FixedWeights {
    fn name(&self) -> &str {
        "fixed"
    }

    fn weights(&self, _: [f64; 3]) -> [f64; 2] {
        self.0
    }

    fn weights_taped(&self, tape: &mut Tape, _: [NodeId; 3]) -> [NodeId; 2] {
        [tape.constant(self.0[0]), tape.constant(self.0[1])]
    }

    fn weights_dd(&self, _: [Dd; 3]) -> [Dd; 2] {
        self.0.map(Dd::new)
    }
}

type Factory = Box<dyn Fn(&str) -> Result<Arc<dyn ActionPolicy>> + Send + Sync>;

/// Name-to-constructor table for weight policies.
///
/// Built-ins: `weno` (classical weights), `upwind` (`(1, 0)`), `downwind`
/// (`(0, 1)`), `linear` (optimal weights `(1/3, 2/3)`) and
/// `checkpoint:<path>` for a trained network.
pub struct PolicyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        Self::with_builtins(WenoCoefficients::default())
    }
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self { factories: BTreeMap::new() }
    }

    pub fn with_builtins(coeffs: WenoCoefficients) -> Self {
        let mut r = Self::empty();
        r.register("weno", move |_| Ok(Arc::new(WenoOracle::new(coeffs)) as Arc<dyn ActionPolicy>));
        r.register("upwind", |_| Ok(Arc::new(FixedWeights([1.0, 0.0])) as Arc<dyn ActionPolicy>));
        r.register("downwind", |_| Ok(Arc::new(FixedWeights([0.0, 1.0])) as Arc<dyn ActionPolicy>));
        let d = coeffs.d;
        r.register("linear", move |_| Ok(Arc::new(FixedWeights(d)) as Arc<dyn ActionPolicy>));
        r.register("checkpoint", |arg| {
            if arg.is_empty() {
                return Err(Error::config("use `checkpoint:<path>`"));
            }
            let ck = crate::policy::Checkpoint::load(Path::new(arg))?;
            Ok(Arc::new(NeuralPolicy::new(ck.params, ck.scaling)) as Arc<dyn ActionPolicy>)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&str) -> Result<Arc<dyn ActionPolicy>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    /// Build a policy from `name` or `name:argument`.
    pub fn create(&self, spec: &str) -> Result<Arc<dyn ActionPolicy>> {
        let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::config(format!("unknown policy `{name}` (known: {})", self.names().join(", ")))
        })?;
        factory(arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_builtins() {
        let r = PolicyRegistry::default();
        assert_eq!(r.create("weno").unwrap().name(), "weno");
        assert_eq!(r.create("upwind").unwrap().weights([0.0, 1.0, 2.0]), [1.0, 0.0]);
        assert_eq!(r.create("linear").unwrap().weights([5.0, 1.0, 2.0]), [1.0 / 3.0, 2.0 / 3.0]);
        assert!(r.create("magic").is_err());
        assert!(r.create("checkpoint").is_err());
    }

    #[test]
    fn custom_registration() {
        let mut r = PolicyRegistry::empty();
        r.register("half", |_| Ok(Arc::new(FixedWeights([0.5, 0.5])) as Arc<dyn ActionPolicy>));
        assert_eq!(r.names(), vec!["half"]);
        assert_eq!(r.create("half").unwrap().weights([1.0, 2.0, 3.0]), [0.5, 0.5]);
    }
}
