//! Run configurations, named presets and the CPU-ratio comparison report.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ddp::{run_iddp_from, IddpConfig};
use crate::engine::sddp::{run_isddp_from, IsddpConfig};
use crate::engine::{PoolSet, RunFault, RunLog, RunResult, RunStatus};
use crate::lp::SolverOptions;
use crate::model::{DeterministicModel, Instance};
use crate::schedules::{ScheduleMode, ScheduleSpec, EXACT_TOL};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fault(#[from] RunFault),
    #[error("cannot compare runs on different instances: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ddp,
    Iddp,
    Sddp,
    Isddp,
}

impl Algorithm {
    pub fn is_exact(self) -> bool {
        matches!(self, Algorithm::Ddp | Algorithm::Sddp)
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, Algorithm::Ddp | Algorithm::Iddp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Ddp => "ddp",
            Algorithm::Iddp => "iddp",
            Algorithm::Sddp => "sddp",
            Algorithm::Isddp => "isddp",
        };
        f.write_str(s)
    }
}

/// A named (algorithm, schedule) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
}

/// The exact stochastic engine followed by the four relative-error variants,
/// `ε̄ ∈ {1e-1, 1e-2, 1e-4, 1e-6}` with `ε₀ = 1e-12`.
pub fn presets() -> Vec<Preset> {
    let variant = |name, eps_bar| Preset {
        name,
        algorithm: Algorithm::Isddp,
        schedule: ScheduleSpec::relative(eps_bar, EXACT_TOL),
    };
    vec![
        Preset {
            name: "SDDP",
            algorithm: Algorithm::Sddp,
            schedule: ScheduleSpec::exact(),
        },
        variant("ISDDP-LP 1", 1e-1),
        variant("ISDDP-LP 2", 1e-2),
        variant("ISDDP-LP 3", 1e-4),
        variant("ISDDP-LP 4", 1e-6),
    ]
}

/// Case-insensitive lookup; spaces, dashes and underscores are ignored, so
/// `isddp-lp-1` and `ISDDP-LP 1` both work.
pub fn preset_by_name(name: &str) -> Option<Preset> {
    let key = |s: &str| {
        s.chars()
            .filter(|c| !matches!(c, ' ' | '-' | '_'))
            .collect::<String>()
            .to_lowercase()
    };
    let wanted = key(name);
    presets().into_iter().find(|p| key(p.name) == wanted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub schedule: ScheduleSpec,
    pub n_paths: usize,
    /// Relative gap stopping threshold of the stochastic engines.
    pub gap_tol: f64,
    /// See [`IsddpConfig::stop_on_gap`].
    #[serde(default = "yes")]
    pub stop_on_gap: bool,
    /// Absolute `Ub − Lb` stopping threshold of the deterministic engines.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub instance: PathBuf,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn yes() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sddp,
            schedule: ScheduleSpec::exact(),
            n_paths: 1,
            gap_tol: 0.05,
            stop_on_gap: true,
            tol: 1e-6,
            max_iter: 100,
            seed: 0,
            instance: PathBuf::new(),
            out: None,
            solver: SolverOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_preset(preset: &Preset) -> Self {
        Self {
            algorithm: preset.algorithm,
            schedule: preset.schedule,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.algorithm.is_exact() && self.schedule.mode != ScheduleMode::Exact {
            return bad(format!("{} requires the exact schedule", self.algorithm));
        }
        self.schedule
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.n_paths == 0 {
            return bad("need at least one path".into());
        }
        if self.algorithm.is_deterministic() && self.n_paths != 1 {
            return bad(format!("{} uses a single path", self.algorithm));
        }
        if !(self.gap_tol > 0.0 && self.gap_tol < 1.0) {
            return bad(format!("gap tolerance must lie in (0, 1), got {}", self.gap_tol));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tolerance must be nonnegative, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("need max_iter >= 1".into());
        }
        Ok(())
    }
}

fn as_deterministic(instance: &Instance) -> Option<DeterministicModel> {
    match instance {
        Instance::Deterministic(m) => Some(m.clone()),
        Instance::Stochastic(m) if m.is_deterministic() => {
            let mut stages = vec![m.stage1.clone()];
            stages.extend(m.stages.iter().map(|s| s.realizations[0].data.clone()));
            Some(DeterministicModel {
                stages,
                x0: m.x0.clone(),
                floors: m.floors.clone(),
            })
        }
        Instance::Stochastic(_) => None,
    }
}

/// Runs `cfg` on `instance`, optionally warm-started from saved pools.
pub fn run(cfg: &RunConfig, instance: &Instance, initial: Option<PoolSet>) -> Result<RunResult, ExperimentError> {
    cfg.validate()?;
    if cfg.algorithm.is_deterministic() {
        let model = as_deterministic(instance).ok_or_else(|| {
            ExperimentError::Config(format!("{} needs a single realization per stage", cfg.algorithm))
        })?;
        let ddp = IddpConfig {
            schedule: cfg.schedule,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            solver: cfg.solver,
        };
        Ok(run_iddp_from(&model, &ddp, initial)?)
    } else {
        let sddp = IsddpConfig {
            schedule: cfg.schedule,
            n_paths: cfg.n_paths,
            gap_tol: cfg.gap_tol,
            stop_on_gap: cfg.stop_on_gap,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
            solver: cfg.solver,
        };
        Ok(run_isddp_from(&instance.to_stochastic(), &sddp, initial)?)
    }
}

/// Stable identifier of an instance, used to refuse comparisons across
/// different instances.
pub fn instance_id(instance: &Instance) -> String {
    let mut h = DefaultHasher::new();
    serde_json::to_string(instance)
        .expect("instance serializes")
        .hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Final state of a run, written next to its CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub algorithm: String,
    pub schedule: ScheduleSpec,
    pub n_paths: usize,
    pub seed: u64,
    pub instance: PathBuf,
    pub instance_id: String,
    pub horizon: usize,
    pub status: RunStatus,
    pub iterations: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub total_ms: f64,
    pub cuts: usize,
}

impl RunSummary {
    pub fn new(label: &str, cfg: &RunConfig, instance: &Instance, log: &RunLog) -> Self {
        let last = log.last();
        Self {
            label: label.to_string(),
            algorithm: log.algorithm.clone(),
            schedule: cfg.schedule,
            n_paths: cfg.n_paths,
            seed: cfg.seed,
            instance: cfg.instance.clone(),
            instance_id: instance_id(instance),
            horizon: instance.horizon(),
            status: log.status,
            iterations: log.iterations(),
            lb: last.map_or(f64::NAN, |r| r.lb),
            ub: last.map_or(f64::NAN, |r| r.ub),
            gap: last.map_or(f64::NAN, |r| r.gap),
            total_ms: log.total_ms,
            cuts: last.map_or(0, |r| r.cuts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: Option<usize>,
    pub label: String,
    pub eps_bar: f64,
    pub cpu_ratio: f64,
    pub iterations: usize,
    pub baseline_iterations: usize,
}

/// One row per non-baseline run: its CPU time over the baseline's, and its
/// iteration count next to the baseline's.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub baseline: String,
    pub rows: Vec<CompareRow>,
}

/// The first summary is the baseline. `n` is only a label for the report.
pub fn compare(summaries: &[RunSummary], n: Option<usize>) -> Result<CompareReport, ExperimentError> {
    let (base, rest) = match summaries {
        [base, rest @ ..] if !rest.is_empty() => (base, rest),
        _ => return Err(ExperimentError::Config("need at least two runs to compare".into())),
    };
    if let Some(other) = rest.iter().find(|s| s.instance_id != base.instance_id) {
        return Err(ExperimentError::Mismatch(format!(
            "{} ran on {}, {} on {}",
            base.label,
            base.instance.display(),
            other.label,
            other.instance.display()
        )));
    }
    let rows = rest
        .iter()
        .map(|s| CompareRow {
            horizon: s.horizon,
            n,
            label: s.label.clone(),
            eps_bar: s.schedule.eps_bar,
            cpu_ratio: s.total_ms / base.total_ms.max(f64::MIN_POSITIVE),
            iterations: s.iterations,
            baseline_iterations: base.iterations,
        })
        .collect();
    Ok(CompareReport {
        baseline: base.label.clone(),
        rows,
    })
}

impl CompareReport {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ratio_head = format!("CPU / CPU({})", self.baseline);
        let iter_head = format!("iterations ({})", self.baseline);
        let variants: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("{:.0e} ({})", r.eps_bar, r.label))
            .collect();
        let vw = variants.iter().map(String::len).max().unwrap_or(0).max(8);
        writeln!(f, "{:>3} | {:>3} | {:<vw$} | {:>rw$} | {}", "T", "n", "eps_bar", ratio_head, iter_head,
            rw = ratio_head.len())?;
        for (row, variant) in self.rows.iter().zip(&variants) {
            let n = row.n.map_or("-".to_string(), |n| n.to_string());
            writeln!(
                f,
                "{:>3} | {:>3} | {:<vw$} | {:>rw$.2} | {} ({})",
                row.horizon,
                n,
                variant,
                row.cpu_ratio,
                row.iterations,
                row.baseline_iterations,
                rw = ratio_head.len()
            )?;
        }
        Ok(())
    }
}
