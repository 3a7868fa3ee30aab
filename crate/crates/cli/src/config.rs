//! Run configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use lcl_core::measures::TestFunction;
use lcl_core::potentials::PotentialModel;
use serde::{Deserialize, Serialize};

/// A configuration problem, reported with the offending field path.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(field: &str, msg: impl std::fmt::Display) -> anyhow::Error {
    UsageError(format!("`{field}`: {msg}")).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_model")]
    pub model: PotentialModel,
    #[serde(rename = "B", default = "default_b")]
    pub b: f64,
    /// Must equal `model.rho` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_list: Option<Vec<u32>>,
    #[serde(default = "default_phi")]
    pub phi: TestFunction,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sample count for Monte Carlo cross-checks.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_quad_order_base")]
    pub quad_order_base: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_model() -> PotentialModel {
    PotentialModel::isotropic(0.5)
}

fn default_b() -> f64 {
    1.0
}

fn default_phi() -> TestFunction {
    TestFunction {
        center: 0.5,
        half_width: 0.3,
    }
}

fn default_delta() -> f64 {
    0.18
}

fn default_mc_samples() -> u64 {
    200_000
}

fn default_quad_order_base() -> usize {
    32
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: default_model(),
            b: default_b(),
            rho: None,
            q_list: Some(vec![8, 16, 32, 64, 128]),
            phi: default_phi(),
            delta: default_delta(),
            seed: 0,
            mc_samples: default_mc_samples(),
            quad_order_base: default_quad_order_base(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Parse a configuration, or the `config` object of a run manifest.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| UsageError(format!("config is not valid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("subcommand").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            usage(if path == "." { "<root>" } else { &path }, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.model.validate().map_err(|e| usage("model", e))?;
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(usage("B", format!("must be positive, got {}", self.b)));
        }
        if let Some(rho) = self.rho {
            if rho != self.model.rho {
                return Err(usage(
                    "rho",
                    format!("must mirror model.rho = {}, got {rho}", self.model.rho),
                ));
            }
        }
        if let Some(q) = &self.q_list {
            if q.is_empty() || q.windows(2).any(|w| w[0] >= w[1]) {
                return Err(usage("q_list", "must be nonempty and strictly ascending"));
            }
        }
        self.phi.validate().map_err(|e| usage("phi", e))?;
        if !(self.delta > 0.0 && self.delta < self.phi.lower_edge()) {
            return Err(usage(
                "delta",
                format!(
                    "must lie in (0, |phi.center| - phi.half_width) = (0, {})",
                    self.phi.lower_edge()
                ),
            ));
        }
        if self.mc_samples == 0 {
            return Err(usage("mc_samples", "must be positive"));
        }
        if self.quad_order_base < 8 {
            return Err(usage("quad_order_base", "must be at least 8"));
        }
        Ok(())
    }

    pub fn q_list(&self) -> anyhow::Result<&[u32]> {
        self.q_list
            .as_deref()
            .ok_or_else(|| usage("q_list", "required by this subcommand but absent from the config"))
    }

    /// The form recorded in manifests: `rho` filled in, output location dropped.
    pub fn canonical(&self) -> RunConfig {
        RunConfig {
            rho: Some(self.model.rho),
            output_dir: None,
            ..self.clone()
        }
    }
}
