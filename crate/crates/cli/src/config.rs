use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

pub const MAX_LENGTH: usize = 64;
pub const MAX_VARIANCE_N: usize = 10;
pub const MAX_EXCITATION_N: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Heisenberg,
    #[value(name = "haldane_shastry", alias = "hs")]
    HaldaneShastry,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Heisenberg => write!(f, "heisenberg"),
            Model::HaldaneShastry => write!(f, "haldane_shastry"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    #[serde(rename = "L")]
    pub length: usize,
    pub d: usize,
    #[serde(rename = "D_cap")]
    pub bond_dim: usize,
    pub seed: u64,
    pub sweeps: usize,
    pub conv_tol: f64,
    /// Defaults to `min(L, 6)`.
    pub variance_n_max: Option<usize>,
    pub excitation_n: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Heisenberg,
            length: 8,
            d: 2,
            bond_dim: 32,
            seed: 1,
            sweeps: 20,
            conv_tol: 1e-10,
            variance_n_max: None,
            excitation_n: 1,
            output_dir: PathBuf::from("run"),
        }
    }
}

/// Raised for invalid input; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| usage(format!("bad config {}: {e}", path.display())))
            .context("loading config")
    }

    pub fn n_max(&self) -> usize {
        self.variance_n_max.unwrap_or(self.length.min(6))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let l = self.length;
        if !(2..=MAX_LENGTH).contains(&l) {
            return Err(usage(format!("L={l} must lie in [2, {MAX_LENGTH}]")));
        }
        if self.d != 2 {
            return Err(usage(format!("d={} is not supported, spin-1/2 models need d=2", self.d)));
        }
        if self.bond_dim == 0 {
            return Err(usage("D_cap must be positive"));
        }
        if self.sweeps == 0 {
            return Err(usage("sweeps must be positive"));
        }
        if !(self.conv_tol > 0.0 && self.conv_tol.is_finite()) {
            return Err(usage(format!("conv_tol={} must be positive", self.conv_tol)));
        }
        let n = self.n_max();
        if n == 0 || n > l || n > MAX_VARIANCE_N {
            return Err(usage(format!("variance_n_max={n} must lie in [1, min(L, {MAX_VARIANCE_N})]")));
        }
        let n = self.excitation_n;
        if n > MAX_EXCITATION_N {
            return Err(usage(format!("excitation_n={n} exceeds the cap of {MAX_EXCITATION_N}")));
        }
        if n == 0 || n > l {
            return Err(usage(format!("excitation_n={n} must lie in [1, L]")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_uses_documented_names() {
        let c = RunConfig {
            model: Model::HaldaneShastry,
            variance_n_max: Some(4),
            ..RunConfig::default()
        };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["model"], "haldane_shastry");
        assert_eq!(v["L"], 8);
        assert_eq!(v["D_cap"], 32);
        let back: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"L": 4, "model": "heisenberg"}"#).unwrap();
        assert_eq!(c.length, 4);
        assert_eq!(c.bond_dim, 32);
        assert_eq!(c.n_max(), 4);
        assert!(serde_json::from_str::<RunConfig>(r#"{"length": 4}"#).is_err());
    }

    #[test]
    fn validation() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            RunConfig { length: 0, ..ok.clone() },
            RunConfig { d: 3, ..ok.clone() },
            RunConfig { bond_dim: 0, ..ok.clone() },
            RunConfig { excitation_n: 5, ..ok.clone() },
            RunConfig { variance_n_max: Some(11), length: 12, ..ok.clone() },
            RunConfig { variance_n_max: Some(9), ..ok.clone() },
        ] {
            assert!(bad.validate().unwrap_err().downcast_ref::<UsageError>().is_some());
        }
    }
}
