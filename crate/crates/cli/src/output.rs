//! Run-directory plumbing: manifests, summaries, and check bookkeeping.

use caginalp_core::config::{LoadedRun, RunConfig};
use caginalp_core::error::Result;
use caginalp_core::io::create_run_dir;
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

pub struct RunDir {
    pub dir: PathBuf,
    checks: Vec<Value>,
    scalars: Map<String, Value>,
    all_passed: bool,
}

impl RunDir {
    pub fn create(command: &str, out: &Option<PathBuf>, run: &LoadedRun, threads: usize) -> Result<Self> {
        let dir = match out {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                d.clone()
            }
            None => create_run_dir(Path::new("runs"), command)?,
        };
        let rd = RunDir {
            dir,
            checks: Vec::new(),
            scalars: Map::new(),
            all_passed: true,
        };
        rd.write_manifest(command, &run.config, run, threads)?;
        Ok(rd)
    }

    fn write_manifest(
        &self,
        command: &str,
        config: &RunConfig,
        run: &LoadedRun,
        threads: usize,
    ) -> Result<()> {
        let manifest = json!({
            "command": command,
            "config": config,
            "tolerances": {
                "newton_tol": run.problem.opts.newton_tol,
                "newton_max_iter": run.problem.opts.newton_max_iter,
                "max_halvings": run.problem.opts.max_halvings,
                "interior_margin": run.problem.opts.interior_margin,
                "pdas_penalty": run.problem.opts.pdas_penalty,
                "pdas_max_iter": run.problem.opts.pdas_max_iter,
                "linear_residual_tol": run.problem.opts.linear_residual_tol,
                "contact_tol": run.problem.opts.contact_tol,
                "optimizer": {
                    "s0": run.pg_opts.s0,
                    "armijo_c": run.pg_opts.armijo_c,
                    "shrink": run.pg_opts.shrink,
                    "tol": run.pg_opts.tol,
                    "max_iter": run.pg_opts.max_iter,
                },
            },
            "version": {
                "package": env!("CARGO_PKG_VERSION"),
                "git": env!("BUILD_GIT_DESCRIBE"),
            },
            "field_layout": "file-per-level",
            "threads": threads,
        });
        std::fs::write(
            self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        // a plain copy of the resolved config, so a run directory can be
        // re-executed directly
        std::fs::write(
            self.dir.join("config.json"),
            serde_json::to_string_pretty(config)?,
        )?;
        Ok(())
    }

    pub fn scalar(&mut self, name: &str, value: impl Into<Value>) {
        self.scalars.insert(name.to_string(), value.into());
    }

    pub fn check(&mut self, name: &str, pass: bool, value: f64, threshold: f64) {
        if !pass {
            self.all_passed = false;
        }
        self.checks.push(json!({
            "name": name,
            "pass": pass,
            "value": value,
            "threshold": threshold,
        }));
        println!(
            "  check {:<36} {}  (value {:.6e}, threshold {:.3e})",
            name,
            if pass { "pass" } else { "FAIL" },
            value,
            threshold
        );
    }

    pub fn finish(self, command: &str) -> Result<bool> {
        let summary = json!({
            "command": command,
            "scalars": Value::Object(self.scalars),
            "checks": self.checks,
            "all_checks_passed": self.all_passed,
        });
        std::fs::write(
            self.dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
        println!("wrote {}", self.dir.display());
        Ok(self.all_passed)
    }
}
