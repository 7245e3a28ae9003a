//! Nested cutting-plane engines.
//!
//! Both engines share the same passes: the deterministic one is the
//! stochastic one run on a model with a single realization per stage and a
//! single forward path per iteration.

pub mod ddp;
pub mod runlog;
pub mod sddp;

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuts::{build_middle_cut, build_terminal_cut, Cut, CutError, CutMeta, CutPool, RealizationData};
use crate::lp::{
    dot, solve_dual_inexact, solve_exact, solve_primal_inexact, Budget, LinearProgram, LpError, LpStatus,
    SolverOptions,
};
use crate::model::{ModelError, StageModel, StochasticModel};
use crate::schedules::{ScheduleError, ScheduleSpec};

pub use runlog::{RunLog, RunRecord, RunStatus};
pub use sddp::{sample_paths, upper_bound_ci, ConfidenceBound, SamplePath};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("stage {stage} subproblem is infeasible on path {path}")]
    Infeasible { stage: usize, path: usize },
    #[error("stage {stage} subproblem is unbounded on path {path}")]
    Unbounded { stage: usize, path: usize },
    #[error("stage {stage}, path {path}: {source}")]
    Solver {
        stage: usize,
        path: usize,
        #[source]
        source: LpError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl EngineError {
    fn from_lp(err: LpError, stage: usize, path: usize) -> Self {
        match err {
            LpError::Infeasible => EngineError::Infeasible { stage, path },
            LpError::Unbounded => EngineError::Unbounded { stage, path },
            source => EngineError::Solver { stage, path, source },
        }
    }
}

/// A run that stopped on a fault, with the iterations completed before it.
#[derive(Debug, Error)]
#[error("{error} (after {} completed iterations)", log.records.len())]
pub struct RunFault {
    #[source]
    pub error: EngineError,
    pub log: RunLog,
}

/// One cut pool per stage `2..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSet {
    pools: Vec<CutPool>,
}

impl PoolSet {
    /// Pools holding only the model's floors.
    pub fn new(model: &StochasticModel) -> Self {
        let horizon = model.horizon();
        Self {
            pools: (2..=horizon)
                .map(|t| CutPool::new(t, model.var_dim(t - 1), model.floor(t)))
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.pools.len() + 1
    }

    /// Pool of stage `t` (`2..=T`).
    pub fn pool(&self, t: usize) -> &CutPool {
        &self.pools[t - 2]
    }

    pub fn pool_mut(&mut self, t: usize) -> &mut CutPool {
        &mut self.pools[t - 2]
    }

    pub fn pools(&self) -> &[CutPool] {
        &self.pools
    }

    pub fn num_cuts(&self) -> usize {
        self.pools.iter().map(CutPool::len).sum()
    }

    /// Lower approximation of the stage-`t` cost-to-go at `x`; zero past
    /// the horizon.
    pub fn evaluate(&self, t: usize, x: &[f64]) -> f64 {
        if t > self.horizon() {
            0.0
        } else {
            self.pool(t).evaluate(x)
        }
    }

    pub fn check_compatible(&self, model: &StochasticModel) -> Result<(), EngineError> {
        if self.horizon() != model.horizon() {
            return Err(EngineError::Config(format!(
                "cut pools cover {} stages, model has {}",
                self.horizon(),
                model.horizon()
            )));
        }
        for t in 2..=model.horizon() {
            let p = self.pool(t);
            if p.stage != t || p.state_dim != model.var_dim(t - 1) {
                return Err(EngineError::Config(format!("cut pool for stage {t} does not fit the model")));
            }
        }
        Ok(())
    }
}

/// Stage-`t` subproblem at state `x_prev`, with the stage-`t+1` pool as
/// epigraph rows (none at the last stage).
pub fn stage_lp<'a>(data: &'a StageModel, x_prev: &[f64], pools: &'a PoolSet, t: usize) -> LinearProgram<'a> {
    let lp = LinearProgram::new(data.cost.as_slice(), &data.a, data.rhs_at(x_prev));
    if t < pools.horizon() {
        lp.with_epigraph(pools.pool(t + 1).cut_rows())
    } else {
        lp
    }
}

/// An exact stage-1 solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub x: Vec<f64>,
    /// Optimal value against the current pools: the lower bound.
    pub value: f64,
}

pub fn solve_first_stage(
    model: &StochasticModel,
    pools: &PoolSet,
    opts: &SolverOptions,
) -> Result<FirstStage, EngineError> {
    let lp = stage_lp(&model.stage1, &model.x0, pools, 1);
    let sol = solve_exact(&lp, opts).map_err(|e| EngineError::from_lp(e, 1, 0))?;
    match sol.status {
        LpStatus::Optimal => Ok(FirstStage {
            x: sol.structural(&lp).to_vec(),
            value: sol.obj,
        }),
        LpStatus::Infeasible => Err(EngineError::Infeasible { stage: 1, path: 0 }),
        LpStatus::Unbounded => Err(EngineError::Unbounded { stage: 1, path: 0 }),
    }
}

/// The outcome of simulating the current policy along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPath {
    /// `x_1, …, x_T`.
    pub states: Vec<Vec<f64>>,
    /// Optimal value of each stage subproblem against the pools used, i.e.
    /// the previous approximation of the stage cost-to-go at the trial point.
    pub values: Vec<f64>,
    /// Accuracy granted to each stage solve.
    pub delta_used: Vec<f64>,
    /// `Σ_t c_tᵀx_t` along the path.
    pub cost: f64,
}

/// Simulates the policy defined by `pools` along the realization indices
/// `indices` (stages `2..=T`), starting from a given stage-1 solution.
pub(crate) fn forward_from(
    model: &StochasticModel,
    pools: &PoolSet,
    first: &FirstStage,
    indices: &[usize],
    delta: impl Fn(usize) -> Budget,
    opts: &SolverOptions,
    path: usize,
) -> Result<ForwardPath, EngineError> {
    let horizon = model.horizon();
    let mut states = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon);
    let mut delta_used = Vec::with_capacity(horizon);
    let mut cost = dot(&model.stage1.cost, &first.x);
    states.push(first.x.clone());
    values.push(first.value);
    delta_used.push(0.0);
    for t in 2..=horizon {
        let data = model.realization(t, indices[t - 2]);
        let lp = stage_lp(data, &states[t - 2], pools, t);
        let budget = delta(t);
        let p = solve_primal_inexact(&lp, budget, opts).map_err(|e| EngineError::from_lp(e, t, path))?;
        cost += dot(&data.cost, &p.x);
        values.push(p.optimum);
        delta_used.push(budget.resolve(p.optimum));
        states.push(p.x);
    }
    Ok(ForwardPath {
        states,
        values,
        delta_used,
        cost,
    })
}

fn build_cut_at(
    model: &StochasticModel,
    pools: &PoolSet,
    t: usize,
    x_prev: &[f64],
    eps: Budget,
    meta: CutMeta,
    opts: &SolverOptions,
    path: usize,
) -> Result<Cut, EngineError> {
    let horizon = model.horizon();
    let m = model.num_realizations(t);
    let mut duals = Vec::with_capacity(m);
    let mut eps_bound = 0.0;
    for j in 0..m {
        let data = model.realization(t, j);
        let lp = stage_lp(data, x_prev, pools, t);
        let cert = solve_dual_inexact(&lp, eps, None, opts).map_err(|e| EngineError::from_lp(e, t, path))?;
        eps_bound += model.prob(t, j) * eps.resolve(cert.optimum.unwrap_or(cert.dual_obj));
        duals.push(cert);
    }
    let realizations: Vec<RealizationData<'_>> = (0..m)
        .map(|j| {
            let data = model.realization(t, j);
            RealizationData {
                rhs: &data.rhs,
                state_matrix: &data.state_matrix,
                prob: model.prob(t, j),
            }
        })
        .collect();
    // The recorded eps is the accuracy guaranteed at the trial point.
    let meta = CutMeta { eps: eps_bound, ..meta };
    if t == horizon {
        Ok(build_terminal_cut(&realizations, &duals, meta)?)
    } else {
        Ok(build_middle_cut(&realizations, &duals, &pools.pool(t + 1).thetas(), meta)?)
    }
}

/// Backward pass over stages `T..=2` at the trial points of `paths`.
///
/// `eps(p, t)` is the budget for path `p` at stage `t`. Paths whose trial
/// point at a stage coincides exactly with an earlier path's share that
/// path's cut, so each distinct trial point contributes one cut. Returns
/// the cuts added, in the order they were appended.
pub(crate) fn backward(
    model: &StochasticModel,
    pools: &mut PoolSet,
    paths: &[ForwardPath],
    eps: impl Fn(usize, usize) -> Budget + Sync,
    iteration: usize,
    opts: &SolverOptions,
) -> Result<Vec<Cut>, EngineError> {
    let horizon = model.horizon();
    let mut added = Vec::new();
    for t in (2..=horizon).rev() {
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut unique: Vec<usize> = Vec::new();
        for (p, path) in paths.iter().enumerate() {
            let key: Vec<u64> = path.states[t - 2].iter().map(|v| v.to_bits()).collect();
            seen.entry(key).or_insert_with(|| {
                unique.push(p);
                p
            });
        }
        let frozen = &*pools;
        let meta = CutMeta {
            stage: t,
            iteration,
            eps: 0.0,
        };
        let cuts: Vec<Cut> = unique
            .par_iter()
            .map(|&p| build_cut_at(model, frozen, t, &paths[p].states[t - 2], eps(p, t), meta, opts, p))
            .collect::<Result<_, _>>()?;
        let pool = pools.pool_mut(t);
        for cut in cuts {
            pool.push(cut.clone())?;
            added.push(cut);
        }
    }
    Ok(added)
}

/// How a run decides it has converged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StopRule {
    /// `Ub − Lb ≤ tol`.
    Absolute(f64),
    /// `(Ub − Lb)/max(|Ub|, 1e-6) < gap_tol`.
    Gap(f64),
}

pub(crate) struct LoopConfig<'a> {
    pub algorithm: &'a str,
    pub schedule: ScheduleSpec,
    pub n_paths: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub stop: StopRule,
    pub solver: SolverOptions,
    pub initial_pools: Option<PoolSet>,
}

/// Final state of a completed run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: RunLog,
    pub pools: PoolSet,
}

/// `(Ub − Lb)/max(|Ub|, 1e-6)`.
pub fn relative_gap(lb: f64, ub: f64) -> f64 {
    (ub - lb) / ub.abs().max(1e-6)
}

pub(crate) fn run_loop(model: &StochasticModel, cfg: LoopConfig<'_>) -> Result<RunResult, RunFault> {
    let mut log = RunLog::new(cfg.algorithm, &cfg.schedule);
    let fault = |error: EngineError, log: &RunLog| RunFault {
        error,
        log: log.clone(),
    };
    if let Err(e) = model.validate() {
        return Err(fault(e.into(), &log));
    }
    if let Err(e) = cfg.schedule.validate() {
        return Err(fault(e.into(), &log));
    }
    if cfg.n_paths == 0 || cfg.max_iter == 0 {
        return Err(fault(EngineError::Config("n_paths and max_iter must be positive".into()), &log));
    }
    let mut pools = match cfg.initial_pools {
        Some(p) => {
            if let Err(e) = p.check_compatible(model) {
                return Err(fault(e, &log));
            }
            p
        }
        None => PoolSet::new(model),
    };
    let horizon = model.horizon();
    let started = Instant::now();
    let mut first = match solve_first_stage(model, &pools, &cfg.solver) {
        Ok(f) => f,
        Err(e) => return Err(fault(e, &log)),
    };
    for k in 1..=cfg.max_iter {
        let iter_start = Instant::now();
        let step = (|| -> Result<(Vec<ForwardPath>, FirstStage, Vec<Cut>), EngineError> {
            let samples = sample_paths(model, cfg.n_paths, k, cfg.seed);
            let schedule = cfg.schedule;
            let frozen = &pools;
            let first_ref = &first;
            let paths: Vec<ForwardPath> = samples
                .par_iter()
                .map(|s| {
                    forward_from(
                        model,
                        frozen,
                        first_ref,
                        &s.indices,
                        |t| schedule.forward_budget(t, k, horizon),
                        &cfg.solver,
                        s.path,
                    )
                })
                .collect::<Result<_, _>>()?;
            let added = backward(
                model,
                &mut pools,
                &paths,
                |p, t| schedule.backward_budget(t, k, horizon, paths[p].values[t - 1]),
                k,
                &cfg.solver,
            )?;
            let next = solve_first_stage(model, &pools, &cfg.solver)?;
            Ok((paths, next, added))
        })();
        let (paths, next, added) = match step {
            Ok(v) => v,
            Err(e) => return Err(fault(e, &log)),
        };
        first = next;
        let costs: Vec<f64> = paths.iter().map(|p| p.cost).collect();
        let ub = match cfg.stop {
            StopRule::Absolute(_) => costs.iter().sum::<f64>() / costs.len() as f64,
            StopRule::Gap(_) => upper_bound_ci(&costs, 1.96).value,
        };
        let lb = first.value;
        let gap = relative_gap(lb, ub);
        let mut eps_used = vec![0.0; horizon.saturating_sub(1)];
        for cut in &added {
            eps_used[cut.stage - 2] = f64::max(eps_used[cut.stage - 2], cut.eps_used);
        }
        let mut delta_used = vec![0.0; horizon];
        for path in &paths {
            for (d, v) in delta_used.iter_mut().zip(&path.delta_used) {
                *d = f64::max(*d, *v);
            }
        }
        log.records.push(RunRecord {
            iter: k,
            lb,
            ub,
            gap,
            n_paths: cfg.n_paths,
            wall_ms: iter_start.elapsed().as_secs_f64() * 1e3,
            eps_bar: cfg.schedule.eps_bar,
            eps0: cfg.schedule.eps0,
            cuts: added.len(),
            eps_used,
            delta_used,
        });
        let done = match cfg.stop {
            StopRule::Absolute(tol) => ub - lb <= tol,
            StopRule::Gap(tol) => gap < tol,
        };
        if done {
            log.status = RunStatus::Converged;
            break;
        }
    }
    log.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(RunResult { log, pools })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toys;

    #[test]
    fn pool_set_layout() {
        let m = toys::stochastic_t3_m2();
        let p = PoolSet::new(&m);
        assert_eq!(p.horizon(), 3);
        assert_eq!(p.pool(2).state_dim, m.var_dim(1));
        assert_eq!(p.pool(3).floor, m.floor(3));
        assert_eq!(p.evaluate(4, &[]), 0.0);
        p.check_compatible(&m).unwrap();
        assert!(p.check_compatible(&toys::deterministic_t5().to_stochastic()).is_err());
    }

    #[test]
    fn forward_values_match_pool_replay() {
        let m = toys::deterministic_t3().to_stochastic();
        let mut pools = PoolSet::new(&m);
        let opts = SolverOptions::default();
        for k in 1..=3 {
            let first = solve_first_stage(&m, &pools, &opts).unwrap();
            let path = forward_from(&m, &pools, &first, &[0, 0], |_| Budget::Absolute(0.0), &opts, 0).unwrap();
            // The stage value is its own cost plus the next pool at the chosen point.
            for t in 1..m.horizon() {
                let own = dot(&m.realization(t, 0).cost, &path.states[t - 1]);
                let replay = own + pools.evaluate(t + 1, &path.states[t - 1]);
                assert!((replay - path.values[t - 1]).abs() < 1e-9, "k={k} t={t}");
            }
            backward(&m, &mut pools, &[path], |_, _| Budget::Absolute(0.0), k, &opts).unwrap();
        }
    }
}
