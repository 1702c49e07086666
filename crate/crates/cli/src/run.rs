use std::path::PathBuf;

use bipolar_core::comparison::{check_instance_with, default_radius, random_scan_with, sample_instance, sample_point, ScanOptions};
use bipolar_core::distgeo::{ComparisonInstance, VerdictStatus};
use bipolar_core::io::{read_instance_file, write_instance_file};
use bipolar_core::manifold::{ChartPoint, ManifoldSpec};
use bipolar_core::mtw::{mtw_scan, ProbeRegion};
use bipolar_core::rigidity::{filling_experiment, rigidity_experiment, ExperimentSettings};
use bipolar_core::seed;
use serde_json::json;

use crate::config::{Command, Mode, RunConfig};
use crate::report::ReportEnvelope;
use crate::CliError;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_EVIDENCE: i32 = 3;

/// Sides of the grid used by `filling`.
pub const FILLING_GRID: usize = 4;

/// Result of a run: the report plus instances worth re-checking.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub envelope: ReportEnvelope,
    pub dumps: Vec<(String, ComparisonInstance<f64>)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.envelope.evidence {
            EXIT_EVIDENCE
        } else {
            EXIT_CLEAN
        }
    }
}

fn core(e: bipolar_core::Error) -> CliError {
    CliError::Run(e.to_string())
}

/// Runs `config` on a pool of `config.workers` threads (default: one per
/// core). Payloads do not depend on the pool size.
pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
    pool.install(|| dispatch(config))
}

fn dispatch(config: &RunConfig) -> Result<Outcome, CliError> {
    let m = config.manifold_spec()?;
    match config.command {
        Command::Check => check(config, &m),
        Command::Scan => scan(config, &m),
        Command::MtwScan => mtw(config, &m),
        Command::Rigidity => rigidity(config, &m),
        Command::Filling => filling(config, &m),
    }
}

fn sampled_instance(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<ComparisonInstance<f64>, CliError> {
    let mut rng = seed::rng_for(config.seed, seed::stream::CHECK, 0);
    let center = m.default_base_point();
    let radius = default_radius(m);
    let mut draw = |count: usize| -> Result<Vec<ChartPoint<f64>>, CliError> {
        (0..count).map(|_| sample_point(m, &center, radius, &mut rng).map_err(core)).collect()
    };
    let a = draw(config.k + 1)?;
    let b = draw(config.l + 1)?;
    sample_instance(m, &a, &b).map_err(core)
}

fn check(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<Outcome, CliError> {
    let inst = match &config.instance {
        Some(path) => read_instance_file::<f64>(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => sampled_instance(config, m)?,
    };
    let result = check_instance_with(inst.clone(), config.budget, config.seed, config.tol_feas).map_err(core)?;
    let status = result.status();
    let evidence = status == VerdictStatus::NotFoundAfterBudget;
    let payload = json!({
        "source": config.instance.as_ref().map_or("sampled".to_string(), |p| p.display().to_string()),
        "status": status,
        "verdict": result.verdict(),
        "oracle_confirmed": result.oracle_confirmed(),
        "check": result,
    });
    let dumps = if evidence { vec![("check.inst".to_string(), inst)] } else { Vec::new() };
    Ok(Outcome { envelope: ReportEnvelope::new(config.clone(), &payload, evidence)?, dumps })
}

fn scan(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<Outcome, CliError> {
    let opts = ScanOptions { radius: None, budget: config.budget, feas_tol_rel: config.tol_feas };
    let report = random_scan_with(m, config.k, config.l, config.trials, config.seed, &opts).map_err(core)?;
    let mut dumps = Vec::new();
    for w in &report.worst {
        if report.records[w.trial].status != Some(VerdictStatus::Feasible) {
            dumps.push((format!("scan-trial-{}.inst", w.trial), w.configuration.instance().map_err(core)?));
        }
    }
    let evidence = report.violation_evidence();
    Ok(Outcome { envelope: ReportEnvelope::new(config.clone(), &report, evidence)?, dumps })
}

/// Seam-straddling probes on a flat-band surface, a ball about the base
/// point elsewhere.
pub fn probe_region(m: &ManifoldSpec<f64>) -> Result<ProbeRegion<f64>, CliError> {
    match m.profile().and_then(|p| p.flat_band_params()) {
        Some(_) => ProbeRegion::flat_band_seam(m, 0.3, 0.8).map_err(core),
        None => Ok(ProbeRegion::around_base(m, default_radius(m))),
    }
}

fn mtw(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<Outcome, CliError> {
    let region = probe_region(m)?;
    let report = mtw_scan(m, &region, config.trials, config.mode == Mode::Perp, config.seed).map_err(core)?;
    let evidence = report.violation_evidence();
    Ok(Outcome { envelope: ReportEnvelope::new(config.clone(), &report, evidence)?, dumps: Vec::new() })
}

fn settings(config: &RunConfig) -> ExperimentSettings<f64> {
    let mut s = ExperimentSettings::new(config.trials, config.budget, config.seed);
    s.feas_tol_rel = config.tol_feas;
    s.mtw_perpendicular = config.mode == Mode::Perp;
    s
}

fn rigidity(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<Outcome, CliError> {
    let report = rigidity_experiment(m, &settings(config)).map_err(core)?;
    let evidence = report.comparison_violation_evidence || report.mtw_violation_evidence;
    let dumps = report
        .violating_trials
        .iter()
        .zip(&report.violating_instances)
        .map(|(t, inst)| (format!("rigidity-trial-{t}.inst"), inst.clone()))
        .collect();
    Ok(Outcome { envelope: ReportEnvelope::new(config.clone(), &report, evidence)?, dumps })
}

fn filling(config: &RunConfig, m: &ManifoldSpec<f64>) -> Result<Outcome, CliError> {
    let report = filling_experiment(m, &settings(config), FILLING_GRID).map_err(core)?;
    let evidence = report.violation_evidence();
    Ok(Outcome { envelope: ReportEnvelope::new(config.clone(), &report, evidence)?, dumps: Vec::new() })
}

/// Writes the report to `config.out` (stdout when unset) and the dumped
/// instances into `config.dump_dir` when set. Returns the files written.
pub fn write_outputs(outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    let config = &outcome.envelope.config;
    let text = outcome.envelope.to_text()?;
    let mut written = Vec::new();
    match &config.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            written.push(path.clone());
        }
        None => print!("{text}"),
    }
    if let Some(dir) = &config.dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for (name, inst) in &outcome.dumps {
            let path = dir.join(name);
            write_instance_file(&path, inst).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}
