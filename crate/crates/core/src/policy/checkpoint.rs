//! Plain-text checkpoints: `key = value` lines, parameters last.
//!
//! Parameters are written in row-major layer order with 17 significant
//! digits, which is enough for a save/load cycle to reproduce every value
//! bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{InputScaling, PolicyParams, LAYERS, NUM_PARAMS};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub scaling: InputScaling,
    /// Free-form metadata such as the training configuration.
    pub meta: BTreeMap<String, String>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(params: PolicyParams, scaling: InputScaling) -> Self {
        Self { params, scaling, meta: BTreeMap::new() }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let layers: Vec<String> = LAYERS.iter().map(usize::to_string).collect();
        writeln!(s, "format_version = {CHECKPOINT_VERSION}").unwrap();
        writeln!(s, "layers = {}", layers.join(",")).unwrap();
        writeln!(s, "input_scaling = {}", self.scaling.name()).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "meta.{k} = {v}").unwrap();
        }
        let vals: Vec<String> = self.params.0.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(s, "params = {}", vals.join(" ")).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        let mut meta = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match k.strip_prefix("meta.") {
                Some(m) => {
                    meta.insert(m.to_string(), v.to_string());
                }
                None => {
                    fields.insert(k.to_string(), v.to_string());
                }
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing `{k}`")));
        let version: u32 = get("format_version")?.parse().map_err(|_| bad("bad format_version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format_version {version}")));
        }
        let layers: Vec<String> = LAYERS.iter().map(usize::to_string).collect();
        if get("layers")?.replace(' ', "") != layers.join(",") {
            return Err(bad(format!("layer shape {} does not match {}", get("layers")?, layers.join(","))));
        }
        let scaling = InputScaling::parse(get("input_scaling")?).map_err(|e| bad(e.to_string()))?;
        let params = get("params")?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad parameter `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if params.len() != NUM_PARAMS {
            return Err(bad(format!("expected {NUM_PARAMS} parameters, found {}", params.len())));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(Self { params: PolicyParams(params), scaling, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
