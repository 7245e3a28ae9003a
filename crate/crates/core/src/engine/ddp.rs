//! Deterministic nested decomposition with inexact forward and backward
//! solves.

use serde::{Deserialize, Serialize};

use super::{
    backward, forward_from, run_loop, EngineError, FirstStage, ForwardPath, LoopConfig, PoolSet, RunFault,
    RunResult, StopRule,
};
use crate::cuts::Cut;
use crate::lp::{solve_primal_inexact, Budget, SolverOptions};
use crate::model::DeterministicModel;
use crate::schedules::ScheduleSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IddpConfig {
    pub schedule: ScheduleSpec,
    /// Stop once `Ub − Lb ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Default for IddpConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleSpec::exact(),
            tol: 1e-6,
            max_iter: 100,
            solver: SolverOptions::default(),
        }
    }
}

/// Forward pass with accuracy `deltas[t − 1]` at stage `t`. Returns the
/// trajectory; its `cost` is the upper bound.
pub fn forward_pass(
    model: &DeterministicModel,
    pools: &PoolSet,
    deltas: &[Budget],
    opts: &SolverOptions,
) -> Result<ForwardPath, EngineError> {
    model.validate()?;
    let sm = model.to_stochastic();
    if deltas.len() != sm.horizon() {
        return Err(EngineError::Config(format!(
            "{} forward budgets for {} stages",
            deltas.len(),
            sm.horizon()
        )));
    }
    let lp = super::stage_lp(&sm.stage1, &sm.x0, pools, 1);
    let p = solve_primal_inexact(&lp, deltas[0], opts).map_err(|e| EngineError::from_lp(e, 1, 0))?;
    let first = FirstStage {
        x: p.x,
        value: p.optimum,
    };
    let indices = vec![0; sm.horizon() - 1];
    let mut path = forward_from(&sm, pools, &first, &indices, |t| deltas[t - 1], opts, 0)?;
    path.delta_used[0] = deltas[0].resolve(p.optimum);
    Ok(path)
}

/// Backward pass at the trial points of `trajectory`, with accuracy
/// `epsilons[t − 2]` at stage `t ≥ 2`. Appends one cut per stage and
/// returns the new cuts with the lower bound from an exact stage-1 solve.
pub fn backward_pass(
    model: &DeterministicModel,
    pools: &mut PoolSet,
    trajectory: &ForwardPath,
    epsilons: &[Budget],
    iteration: usize,
    opts: &SolverOptions,
) -> Result<(Vec<Cut>, f64), EngineError> {
    model.validate()?;
    let sm = model.to_stochastic();
    if epsilons.len() + 1 != sm.horizon() {
        return Err(EngineError::Config(format!(
            "{} backward budgets for {} stages",
            epsilons.len(),
            sm.horizon()
        )));
    }
    let cuts = backward(
        &sm,
        pools,
        std::slice::from_ref(trajectory),
        |_, t| epsilons[t - 2],
        iteration,
        opts,
    )?;
    let lb = super::solve_first_stage(&sm, pools, opts)?.value;
    Ok((cuts, lb))
}

pub fn run_iddp(model: &DeterministicModel, cfg: &IddpConfig) -> Result<RunResult, RunFault> {
    run_iddp_from(model, cfg, None)
}

/// Like [`run_iddp`], starting from previously computed pools.
pub fn run_iddp_from(
    model: &DeterministicModel,
    cfg: &IddpConfig,
    initial_pools: Option<PoolSet>,
) -> Result<RunResult, RunFault> {
    let algorithm = if cfg.schedule == ScheduleSpec::exact() { "ddp" } else { "iddp" };
    run_loop(
        &model.to_stochastic(),
        LoopConfig {
            algorithm,
            schedule: cfg.schedule,
            n_paths: 1,
            max_iter: cfg.max_iter,
            seed: 0,
            stop: StopRule::Absolute(cfg.tol),
            solver: cfg.solver,
            initial_pools,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::DenseMatrix;
    use crate::model::StageModel;
    use crate::oracle;
    use crate::toys;

    fn exact(n: usize) -> Vec<Budget> {
        vec![Budget::Absolute(0.0); n]
    }

    #[test]
    fn single_stage_forced() {
        let m = DeterministicModel {
            stages: vec![StageModel {
                a: DenseMatrix::identity(1),
                state_matrix: DenseMatrix::zeros(1, 0),
                rhs: vec![1.0],
                cost: vec![2.5],
            }],
            x0: vec![],
            floors: vec![],
        };
        let pools = PoolSet::new(&m.to_stochastic());
        let path = forward_pass(&m, &pools, &exact(1), &SolverOptions::default()).unwrap();
        assert_eq!(path.states, vec![vec![1.0]]);
        assert_eq!(path.cost, 2.5);
        let res = run_iddp(&m, &IddpConfig::default()).unwrap();
        assert_eq!(res.log.iterations(), 1);
        assert_eq!(res.log.records[0].lb, res.log.records[0].ub);
    }

    #[test]
    fn first_cut_is_exact_at_trial_point() {
        let m = toys::deterministic_t2();
        let sm = m.to_stochastic();
        let opts = SolverOptions::default();
        let mut pools = PoolSet::new(&sm);
        let path = forward_pass(&m, &pools, &exact(2), &opts).unwrap();
        let (cuts, _) = backward_pass(&m, &mut pools, &path, &exact(1), 1, &opts).unwrap();
        let x1 = &path.states[0];
        let truth = oracle::exact_recourse(&sm, 2, x1).unwrap();
        assert!((cuts[0].value(x1) - truth).abs() < 1e-9);
    }

    #[test]
    fn inexact_terminal_cut_gap_is_bounded() {
        let m = toys::deterministic_t2();
        let sm = m.to_stochastic();
        let opts = SolverOptions::default();
        let mut pools = PoolSet::new(&sm);
        let path = forward_pass(&m, &pools, &exact(2), &opts).unwrap();
        let (cuts, _) = backward_pass(&m, &mut pools, &path, &[Budget::Absolute(0.2)], 1, &opts).unwrap();
        let x1 = &path.states[0];
        let gap = oracle::exact_recourse(&sm, 2, x1).unwrap() - cuts[0].value(x1);
        assert!((-1e-9..=0.2 + 1e-9).contains(&gap), "gap {gap}");
    }

    #[test]
    fn exact_run_reaches_extensive_form() {
        let m = toys::deterministic_t3();
        let v = oracle::extensive_form(&crate::model::Instance::Deterministic(m.clone())).unwrap();
        let res = run_iddp(
            &m,
            &IddpConfig {
                tol: 1e-9,
                ..IddpConfig::default()
            },
        )
        .unwrap();
        let last = res.log.last().unwrap();
        assert_eq!(res.log.status, crate::engine::RunStatus::Converged);
        assert!((last.lb - v).abs() < 1e-6, "lb {} v* {v}", last.lb);
    }

    #[test]
    fn inexact_forward_stays_feasible() {
        let m = toys::deterministic_t3();
        let v = oracle::extensive_form(&crate::model::Instance::Deterministic(m.clone())).unwrap();
        let pools = PoolSet::new(&m.to_stochastic());
        let path = forward_pass(&m, &pools, &[Budget::Absolute(0.1); 3], &SolverOptions::default()).unwrap();
        assert!(path.cost >= v - 1e-9);
    }
}
