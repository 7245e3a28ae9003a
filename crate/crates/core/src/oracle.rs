//! Brute-force ground truth for small instances.
//!
//! Everything here solves the full scenario tree (or the subtree below a
//! stage) as one LP. Trees that exceed the size guards are refused rather
//! than approximated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{forward_from, solve_first_stage, stage_lp, EngineError, PoolSet};
use crate::lp::{solve_exact, Budget, DenseMatrix, LinearProgram, LpError, LpStatus, SolverOptions};
use crate::model::{Instance, ModelError, StochasticModel};

/// Largest number of scenarios an oracle will enumerate.
pub const MAX_SCENARIOS: f64 = 1e4;
/// Largest dense extensive-form matrix (rows × columns) an oracle will build.
pub const MAX_DENSE_ENTRIES: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("scenario tree has {scenarios} leaves, above the oracle limit of {limit}")]
    TreeTooLarge { scenarios: f64, limit: f64 },
    #[error("extensive form would have {entries} dense entries, above the limit of {limit}")]
    LpTooLarge { entries: usize, limit: usize },
    #[error("stage {stage} is infeasible at the given state")]
    Infeasible { stage: usize },
    #[error("problem is unbounded below")]
    Unbounded,
    #[error(transparent)]
    Solver(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl OracleError {
    /// Whether this is a size-guard refusal.
    pub fn is_guard(&self) -> bool {
        matches!(self, OracleError::TreeTooLarge { .. } | OracleError::LpTooLarge { .. })
    }
}

/// Variable block of one tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBlock {
    pub stage: usize,
    /// Realization indices from the root stage down to this node.
    pub history: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    /// Probability conditional on the root.
    pub prob: f64,
}

/// The deterministic equivalent of a (sub)tree.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub lp: LinearProgram<'static>,
    pub nodes: Vec<NodeBlock>,
}

fn scenarios_below(model: &StochasticModel, t: usize) -> f64 {
    ((t + 1)..=model.horizon())
        .map(|s| model.num_realizations(s) as f64)
        .product()
}

/// Tree rooted at realization `root` of stage `t`, entered with state
/// `x_prev`.
pub fn build_subtree(
    model: &StochasticModel,
    t: usize,
    root: usize,
    x_prev: &[f64],
) -> Result<ExtensiveForm, OracleError> {
    let scenarios = scenarios_below(model, t);
    if scenarios > MAX_SCENARIOS {
        return Err(OracleError::TreeTooLarge {
            scenarios,
            limit: MAX_SCENARIOS,
        });
    }
    // Enumerate nodes stage by stage, remembering each node's parent.
    let mut nodes = vec![NodeBlock {
        stage: t,
        history: vec![root],
        offset: 0,
        len: model.var_dim(t),
        prob: 1.0,
    }];
    let mut parents = vec![usize::MAX];
    let mut layer = vec![0usize];
    let mut offset = nodes[0].len;
    for s in (t + 1)..=model.horizon() {
        let mut next = Vec::new();
        for &p in &layer {
            for j in 0..model.num_realizations(s) {
                let mut history = nodes[p].history.clone();
                history.push(j);
                let len = model.var_dim(s);
                nodes.push(NodeBlock {
                    stage: s,
                    history,
                    offset,
                    len,
                    prob: nodes[p].prob * model.prob(s, j),
                });
                parents.push(p);
                next.push(nodes.len() - 1);
                offset += len;
            }
        }
        layer = next;
    }
    let ncols = offset;
    let nrows: usize = nodes
        .iter()
        .map(|n| model.realization(n.stage, *n.history.last().unwrap()).num_eq())
        .sum();
    let entries = nrows.saturating_mul(ncols);
    if entries > MAX_DENSE_ENTRIES {
        return Err(OracleError::LpTooLarge {
            entries,
            limit: MAX_DENSE_ENTRIES,
        });
    }
    let mut a = DenseMatrix::zeros(nrows, ncols);
    let mut b = Vec::with_capacity(nrows);
    let mut c = vec![0.0; ncols];
    let mut row = 0;
    for (i, node) in nodes.iter().enumerate() {
        let data = model.realization(node.stage, *node.history.last().unwrap());
        for (k, cost) in data.cost.iter().enumerate() {
            c[node.offset + k] = node.prob * cost;
        }
        let rhs = if i == 0 { data.rhs_at(x_prev) } else { data.rhs.clone() };
        for r in 0..data.num_eq() {
            for k in 0..node.len {
                a.set(row + r, node.offset + k, data.a.get(r, k));
            }
            if i > 0 {
                let parent = &nodes[parents[i]];
                for k in 0..parent.len {
                    a.set(row + r, parent.offset + k, data.state_matrix.get(r, k));
                }
            }
        }
        b.extend(rhs);
        row += data.num_eq();
    }
    Ok(ExtensiveForm {
        lp: LinearProgram::new(c, a, b),
        nodes,
    })
}

pub fn build_extensive_form(model: &StochasticModel) -> Result<ExtensiveForm, OracleError> {
    build_subtree(model, 1, 0, &model.x0)
}

fn solve_value(lp: &LinearProgram<'_>, stage: usize) -> Result<f64, OracleError> {
    let sol = solve_exact(lp, &SolverOptions::default())?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.obj),
        LpStatus::Infeasible => Err(OracleError::Infeasible { stage }),
        LpStatus::Unbounded => Err(OracleError::Unbounded),
    }
}

/// Optimal value of the whole problem.
pub fn extensive_form(instance: &Instance) -> Result<f64, OracleError> {
    instance.validate()?;
    extensive_form_value(&instance.to_stochastic())
}

pub fn extensive_form_value(model: &StochasticModel) -> Result<f64, OracleError> {
    solve_value(&build_extensive_form(model)?.lp, 1)
}

/// Expected optimal cost of stages `t..=T` given the previous decision `x`
/// (for `t = 1`, `x` plays the role of `x_0`). Zero for `t = T + 1`.
pub fn exact_recourse(model: &StochasticModel, t: usize, x: &[f64]) -> Result<f64, OracleError> {
    if t > model.horizon() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for j in 0..model.num_realizations(t) {
        let ef = build_subtree(model, t, j, x)?;
        total += model.prob(t, j) * solve_value(&ef.lp, t)?;
    }
    Ok(total)
}

/// Expected stage-`t` value at `x` when the future is replaced by the
/// pools' lower approximation.
pub fn approx_recourse(model: &StochasticModel, pools: &PoolSet, t: usize, x: &[f64]) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for j in 0..model.num_realizations(t) {
        let lp = stage_lp(model.realization(t, j), x, pools, t);
        total += model.prob(t, j) * solve_value(&lp, t)?;
    }
    Ok(total)
}

/// Expected cost of the policy defined by `pools`, every stage solved
/// exactly, by enumerating all scenarios.
pub fn policy_value_exact(model: &StochasticModel, pools: &PoolSet) -> Result<f64, OracleError> {
    let scenarios = model.num_scenarios();
    if scenarios > MAX_SCENARIOS {
        return Err(OracleError::TreeTooLarge {
            scenarios,
            limit: MAX_SCENARIOS,
        });
    }
    let opts = SolverOptions::default();
    let first = solve_first_stage(model, pools, &opts)?;
    let stages = model.horizon() - 1;
    let mut indices = vec![0usize; stages];
    let mut total = 0.0;
    loop {
        let prob: f64 = indices.iter().enumerate().map(|(i, &j)| model.prob(i + 2, j)).product();
        let path = forward_from(model, pools, &first, &indices, |_| Budget::Absolute(0.0), &opts, 0)?;
        total += prob * path.cost;
        // Odometer increment over the realization indices.
        let mut pos = stages;
        loop {
            if pos == 0 {
                return Ok(total);
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < model.num_realizations(pos + 2) {
                break;
            }
            indices[pos] = 0;
        }
    }
}

/// Random states `x_{t−1}` reachable by feasible decisions, for testing
/// the cost-to-go of stage `t ≥ 2`.
///
/// Along a random path, each stage decision is a random convex combination
/// of two vertices picked by random nonnegative objectives. The result is
/// feasible but generally not a vertex.
pub fn sample_reachable_states(
    model: &StochasticModel,
    t: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, OracleError> {
    assert!(t >= 2 && t <= model.horizon(), "stage {t} has no incoming state");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SolverOptions::default();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = model.x0.clone();
        for s in 1..t {
            let j = if s == 1 {
                0
            } else {
                rng.random_range(0..model.num_realizations(s))
            };
            let data = model.realization(s, j);
            let rhs = data.rhs_at(&x);
            let mut pick = || -> Result<Vec<f64>, OracleError> {
                let cost: Vec<f64> = (0..data.var_dim()).map(|_| rng.random::<f64>()).collect();
                let lp = LinearProgram::new(cost, &data.a, rhs.clone());
                let sol = solve_exact(&lp, &opts)?;
                match sol.status {
                    LpStatus::Optimal => Ok(sol.x),
                    _ => Err(OracleError::Infeasible { stage: s }),
                }
            };
            let u = pick()?;
            let v = pick()?;
            let w: f64 = rng.random();
            x = u.iter().zip(&v).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        }
        out.push(x);
    }
    Ok(out)
}
