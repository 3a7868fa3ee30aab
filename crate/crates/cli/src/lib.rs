//! Library side of the `lcl` tool: configuration, subcommand bodies, the
//! invariant suite and manifest writing.

pub mod commands;
pub mod config;
pub mod selfcheck;

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use commands::Outcome;
use config::RunConfig;

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    subcommand: &'a str,
    config: RunConfig,
    tolerances: Value,
    outputs: Vec<String>,
    passed: bool,
    results: Value,
}

fn tolerances() -> Value {
    use lcl_core::landau;
    json!({
        "quadrature_mass": landau::MASS_TOL,
        "truncation_floor_relative": landau::TAIL_FLOOR,
        "truncation_k_cap": landau::DEFAULT_K_CAP,
        "dense_dimension_cap": landau::DENSE_CAP,
        "basis_residual": landau::RESIDUAL_THRESHOLD,
        "symmetry_relative": lcl_core::eigen::SYMMETRY_TOL,
        "ql_sweeps_per_eigenvalue": lcl_core::eigen::MAX_SWEEPS,
    })
}

/// Write the subcommand's files and its `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, subcommand: &str, cfg: &RunConfig, out: &Outcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    for (name, text) in &out.files {
        std::fs::write(dir.join(name), text).with_context(|| format!("cannot write {name}"))?;
    }
    let manifest = Manifest {
        tool: "lcl",
        version: env!("CARGO_PKG_VERSION"),
        core_version: lcl_core::VERSION,
        subcommand,
        config: cfg.canonical(),
        tolerances: tolerances(),
        outputs: out.files.iter().map(|f| f.0.clone()).collect(),
        passed: out.passed,
        results: out.results.clone(),
    };
    std::fs::write(dir.join("manifest.json"), lcl_core::report::json_string(&manifest)?)
        .context("cannot write manifest.json")?;
    Ok(())
}
