//! Stochastic nested decomposition with sampled forward paths and cuts
//! aggregated over every realization of a stage.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    backward, forward_from, run_loop, solve_first_stage, EngineError, FirstStage, ForwardPath, LoopConfig,
    PoolSet, RunFault, RunResult, StopRule,
};
use crate::cuts::Cut;
use crate::lp::{Budget, SolverOptions};
use crate::model::StochasticModel;
use crate::schedules::ScheduleSpec;

/// Realization indices for stages `2..=T` (zero-based), with the
/// iteration and path they were drawn for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePath {
    pub indices: Vec<usize>,
    pub iteration: usize,
    pub path: usize,
}

/// Iteration number reserved for out-of-loop policy evaluation.
const EVALUATION_LINEAGE: u64 = u64::MAX;

fn path_rng(seed: u64, iteration: u64, path: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&path.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn draw_path(model: &StochasticModel, seed: u64, lineage: u64, iteration: usize, path: usize) -> SamplePath {
    let mut rng = path_rng(seed, lineage, path as u64);
    let indices = (2..=model.horizon())
        .map(|t| {
            let stage = model.stage(t);
            if stage.len() == 1 {
                return 0;
            }
            rng.set_stream(t as u64);
            rng.set_word_pos(0);
            WeightedIndex::new(stage.probs())
                .expect("validated probabilities")
                .sample(&mut rng)
        })
        .collect();
    SamplePath {
        indices,
        iteration,
        path,
    }
}

/// `n` independent paths for `iteration`. The draw for stage `t` of path
/// `p` depends only on `(seed, iteration, p, t)`.
pub fn sample_paths(model: &StochasticModel, n: usize, iteration: usize, seed: u64) -> Vec<SamplePath> {
    (0..n)
        .map(|p| draw_path(model, seed, iteration as u64, iteration, p))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBound {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    /// Set when there was a single sample, so no spread could be estimated.
    pub single_sample: bool,
}

/// `mean + z·s/√N` with `s` the sample standard deviation.
///
/// # Panics
/// On an empty sample.
pub fn upper_bound_ci(samples: &[f64], z: f64) -> ConfidenceBound {
    assert!(!samples.is_empty(), "no cost samples");
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return ConfidenceBound {
            value: mean,
            mean,
            std: 0.0,
            single_sample: true,
        };
    }
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    ConfidenceBound {
        value: mean + z * std / n.sqrt(),
        mean,
        std,
        single_sample: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsddpConfig {
    pub schedule: ScheduleSpec,
    pub n_paths: usize,
    /// Stop once `(Ub − Lb)/max(|Ub|, 1e-6) < gap_tol`.
    pub gap_tol: f64,
    /// When false the run always performs `max_iter` iterations. The
    /// sampled upper bound can fall below the lower bound by chance, so
    /// convergence checks against a known optimum use fixed-length runs.
    #[serde(default = "yes")]
    pub stop_on_gap: bool,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn yes() -> bool {
    true
}

impl Default for IsddpConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleSpec::exact(),
            n_paths: 1,
            gap_tol: 0.05,
            stop_on_gap: true,
            max_iter: 100,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

/// Simulates the policy along each sampled path with accuracy
/// `deltas[t − 1]` at stage `t ≥ 2` (stage 1 is solved exactly).
pub fn forward_pass_sddp(
    model: &StochasticModel,
    pools: &PoolSet,
    paths: &[SamplePath],
    deltas: &[Budget],
    opts: &SolverOptions,
) -> Result<Vec<ForwardPath>, EngineError> {
    model.validate()?;
    if deltas.len() != model.horizon() {
        return Err(EngineError::Config(format!(
            "{} forward budgets for {} stages",
            deltas.len(),
            model.horizon()
        )));
    }
    let first = solve_first_stage(model, pools, opts)?;
    simulate(model, pools, &first, paths, |t| deltas[t - 1], opts)
}

fn simulate(
    model: &StochasticModel,
    pools: &PoolSet,
    first: &FirstStage,
    paths: &[SamplePath],
    delta: impl Fn(usize) -> Budget + Sync,
    opts: &SolverOptions,
) -> Result<Vec<ForwardPath>, EngineError> {
    paths
        .par_iter()
        .map(|s| forward_from(model, pools, first, &s.indices, &delta, opts, s.path))
        .collect()
}

/// Backward pass at every trajectory's trial points with accuracy
/// `epsilons[t − 2]` at stage `t`. Returns the new cuts and the lower bound
/// from an exact stage-1 solve against the updated pools.
pub fn backward_pass_sddp(
    model: &StochasticModel,
    pools: &mut PoolSet,
    trajectories: &[ForwardPath],
    epsilons: &[Budget],
    iteration: usize,
    opts: &SolverOptions,
) -> Result<(Vec<Cut>, f64), EngineError> {
    model.validate()?;
    if epsilons.len() + 1 != model.horizon() {
        return Err(EngineError::Config(format!(
            "{} backward budgets for {} stages",
            epsilons.len(),
            model.horizon()
        )));
    }
    let cuts = backward(model, pools, trajectories, |_, t| epsilons[t - 2], iteration, opts)?;
    let lb = solve_first_stage(model, pools, opts)?.value;
    Ok((cuts, lb))
}

pub fn run_isddp(model: &StochasticModel, cfg: &IsddpConfig) -> Result<RunResult, RunFault> {
    run_isddp_from(model, cfg, None)
}

/// Like [`run_isddp`], starting from previously computed pools.
pub fn run_isddp_from(
    model: &StochasticModel,
    cfg: &IsddpConfig,
    initial_pools: Option<PoolSet>,
) -> Result<RunResult, RunFault> {
    let algorithm = if cfg.schedule == ScheduleSpec::exact() { "sddp" } else { "isddp" };
    if !(cfg.gap_tol > 0.0 && cfg.gap_tol < 1.0) {
        return Err(RunFault {
            error: EngineError::Config(format!("gap_tol must lie in (0, 1), got {}", cfg.gap_tol)),
            log: super::RunLog::new(algorithm, &cfg.schedule),
        });
    }
    run_loop(
        model,
        LoopConfig {
            algorithm,
            schedule: cfg.schedule,
            n_paths: cfg.n_paths,
            max_iter: cfg.max_iter,
            seed: cfg.seed,
            stop: StopRule::Gap(if cfg.stop_on_gap { cfg.gap_tol } else { f64::NEG_INFINITY }),
            solver: cfg.solver,
            initial_pools,
        },
    )
}

/// Costs of `n` fresh sampled paths under the policy defined by `pools`,
/// every stage solved exactly. Samples are drawn from a lineage disjoint
/// from the training iterations.
pub fn evaluate_policy(
    model: &StochasticModel,
    pools: &PoolSet,
    n: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<f64>, EngineError> {
    model.validate()?;
    pools.check_compatible(model)?;
    let first = solve_first_stage(model, pools, opts)?;
    let paths: Vec<SamplePath> = (0..n)
        .map(|p| draw_path(model, seed, EVALUATION_LINEAGE, 0, p))
        .collect();
    Ok(simulate(model, pools, &first, &paths, |_| Budget::Absolute(0.0), opts)?
        .into_iter()
        .map(|p| p.cost)
        .collect())
}
