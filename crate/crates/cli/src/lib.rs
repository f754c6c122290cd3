//! Reproducible experiment runner on top of `spdelab-core`.
//!
//! A run loads and validates a JSON configuration, executes one pipeline,
//! writes its CSV/JSON artifacts plus a manifest, and reports whether every
//! enabled inequality check passed.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use config::{load_config, ExperimentConfig, LoadedConfig, Overrides};
pub use manifest::{RunManifest, manifest_name};
pub use pipeline::{run_pipeline, Outcome, Pipeline};

/// What a finished run left behind.
#[derive(Debug)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub outcome: Option<Outcome>,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }
}

/// Load the config, run the pipeline and persist everything. A pipeline
/// error still writes a manifest flagged `partial` before it is returned.
pub fn run(
    pipeline: Pipeline,
    config_path: &Path,
    overrides: &Overrides,
    threads: Option<usize>,
) -> Result<RunResult> {
    let started = manifest::unix_millis();
    let cfg = load_config(config_path, overrides)?;
    // The output directory does not influence any result.
    let effective = serde_json::to_vec(&ExperimentConfig { out: None, ..cfg.config.clone() })?;
    let out_dir = cfg.out_dir();
    let mut m = RunManifest {
        tool: "spdelab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: pipeline.name().into(),
        config_path: config_path.display().to_string(),
        config_sha256: cfg.sha256.clone(),
        effective_config_sha256: manifest::sha256_hex(&effective),
        seed: cfg.config.seed,
        replicas: cfg.config.replicas,
        seed_provenance: "philox4x32-10 keyed by (seed, replica)".into(),
        threads,
        started_unix_ms: started,
        finished_unix_ms: started,
        outputs: Vec::new(),
        checks: Vec::new(),
        passed: false,
        partial: false,
        error: None,
    };
    match run_pipeline(pipeline, &cfg, threads) {
        Ok(outcome) => {
            m.checks = outcome.checks.clone();
            m.passed = outcome.passed();
            manifest::write_outputs(&out_dir, &outcome.artifacts, &mut m)?;
            Ok(RunResult { out_dir, manifest: m, outcome: Some(outcome) })
        }
        Err(e) => {
            m.partial = true;
            m.error = Some(format!("{e:#}"));
            // Best effort; the pipeline error is what matters.
            let _ = manifest::write_outputs(&out_dir, &[], &mut m);
            Err(e)
        }
    }
}

/// Plain-text summary of the checks and outputs.
pub fn summary_table(result: &RunResult) -> String {
    let m = &result.manifest;
    let mut s = format!(
        "spdelab {} (seed {}, {} replicas)\n",
        m.subcommand, m.seed, m.replicas
    );
    if m.checks.is_empty() {
        s.push_str("  no inequality checks enabled\n");
    }
    let width = m.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(0);
    for c in &m.checks {
        let pad = width - c.name.chars().count();
        s.push_str(&format!(
            "  {}{}  {}  {}\n",
            c.name,
            " ".repeat(pad),
            if c.passed { "PASS" } else { "FAIL" },
            c.value
        ));
    }
    for o in &m.outputs {
        s.push_str(&format!("  wrote {} ({} bytes)\n", result.out_dir.join(&o.file).display(), o.bytes));
    }
    s
}
