use std::path::{Path, PathBuf};

use bipolar_core::distgeo::{FEAS_TOL_REL, MAX_POINTS};
use bipolar_core::manifold::{parse_manifold, ManifoldSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Manifold used by `rigidity` and `filling` when none is given.
pub const REFERENCE_SURFACE: &str = "revolution:profile=flatband,r=1.0,band=1.0,blend=0.5";
pub const DEFAULT_MANIFOLD: &str = "euclidean:dim=3";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One (k, l) configuration, sampled or read from `--instance`.
    Check,
    /// Random (k, l) configurations around the base point.
    Scan,
    /// Random fourth-derivative probes.
    MtwScan,
    /// Key-lemma configurations on a flat-band surface plus a seam scan.
    Rigidity,
    /// Flat-filling defects of key-lemma triangles.
    Filling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Scan => "scan",
            Command::MtwScan => "mtw-scan",
            Command::Rigidity => "rigidity",
            Command::Filling => "filling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Only probes with `X ⊥ Y`.
    Perp,
    /// Unrestricted probes.
    #[default]
    Noperp,
}

/// A fully resolved run: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub manifold: String,
    pub k: usize,
    pub l: usize,
    pub trials: usize,
    pub budget: usize,
    pub seed: u64,
    pub tol_feas: f64,
    pub mode: Mode,
    pub workers: Option<usize>,
    pub instance: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Keys accepted in a TOML config file; each is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifold: Option<String>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub trials: Option<usize>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub tol_feas: Option<f64>,
    pub mode: Option<Mode>,
    pub workers: Option<usize>,
    pub instance: Option<PathBuf>,
    pub dump_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `over` replace those in `self`.
    pub fn merge(self, over: FileConfig) -> FileConfig {
        FileConfig {
            manifold: over.manifold.or(self.manifold),
            k: over.k.or(self.k),
            l: over.l.or(self.l),
            trials: over.trials.or(self.trials),
            budget: over.budget.or(self.budget),
            seed: over.seed.or(self.seed),
            tol_feas: over.tol_feas.or(self.tol_feas),
            mode: over.mode.or(self.mode),
            workers: over.workers.or(self.workers),
            instance: over.instance.or(self.instance),
            dump_dir: over.dump_dir.or(self.dump_dir),
            out: over.out.or(self.out),
        }
    }
}

impl RunConfig {
    pub fn resolve(command: Command, c: FileConfig) -> Result<Self, CliError> {
        let default_manifold = match command {
            Command::Rigidity | Command::Filling => REFERENCE_SURFACE,
            _ => DEFAULT_MANIFOLD,
        };
        let (trials, budget) = match command {
            Command::Rigidity => (200, 200),
            _ => (100, 100),
        };
        let cfg = RunConfig {
            command,
            manifold: c.manifold.unwrap_or_else(|| default_manifold.to_string()),
            k: c.k.unwrap_or(3),
            l: c.l.unwrap_or(3),
            trials: c.trials.unwrap_or(trials),
            budget: c.budget.unwrap_or(budget),
            seed: c.seed.unwrap_or(0),
            tol_feas: c.tol_feas.unwrap_or(FEAS_TOL_REL),
            mode: c.mode.unwrap_or_default(),
            workers: c.workers,
            instance: c.instance,
            dump_dir: c.dump_dir,
            out: c.out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: String| Err(CliError::Validation { key: key.into(), msg });
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("budget", "must be at least 1".into());
        }
        if !(self.tol_feas > 0.0 && self.tol_feas.is_finite()) {
            return bad("tol_feas", format!("must be positive and finite, got {}", self.tol_feas));
        }
        if self.workers == Some(0) {
            return bad("workers", "must be at least 1".into());
        }
        if self.k + self.l + 2 > MAX_POINTS {
            return bad("k", format!("k + l + 2 = {} exceeds {MAX_POINTS} points", self.k + self.l + 2));
        }
        if self.instance.is_some() && self.command != Command::Check {
            return bad("instance", format!("only used by `check`, not `{}`", self.command.name()));
        }
        self.manifold_spec()?;
        Ok(())
    }

    pub fn manifold_spec(&self) -> Result<ManifoldSpec<f64>, CliError> {
        parse_manifold::<f64>(&self.manifold).map_err(|e| CliError::Validation { key: "manifold".into(), msg: e.to_string() })
    }
}
