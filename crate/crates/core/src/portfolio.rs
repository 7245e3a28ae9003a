//! Multistage portfolio benchmark with proportional transaction costs.
//!
//! There are `n` risky assets plus cash. At stage `t` the holdings of stage
//! `t−1` grow by the gross returns `ξ_t`, then the investor buys `b` and
//! sells `s`:
//!
//! ```text
//! x_t(i)   = ξ_t(i)·x_{t−1}(i) + b(i) − s(i)                          i ≤ n
//! x_t(n+1) = ξ_t(n+1)·x_{t−1}(n+1) − Σ (1+ν(i)) b(i) + Σ (1−μ(i)) s(i)
//! x_t(i)  ≤ u·Σ_j x_t(j)                                              i ≤ n
//! ```
//!
//! The objective is to minimize minus the expected final wealth. Stage
//! decisions are laid out as `[x(1..n), cash, b(1..n), s(1..n), w(1..n)]`
//! where `w` are the slacks of the position limits.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::DenseMatrix;
use crate::model::{Realization, StageModel, StochasticModel, StochasticStageModel};

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("invalid portfolio spec: {0}")]
    Spec(String),
    #[error("reading returns file {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("returns file {path}: {msg}")]
    ReturnsFile { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReturnModel {
    /// Seeded i.i.d. lognormal gross returns.
    Synthetic,
    /// Gross returns read from a CSV file: a header row, then one row per
    /// realization with one column per risky asset. Every random stage uses
    /// these realizations with equal probabilities.
    FromFile { path: PathBuf },
    /// Every risky asset has the same deterministic gross return.
    Constant { risky: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Net return of the risk-free asset per stage.
    pub risk_free_return: f64,
    /// Largest fraction of total wealth held in any one risky asset.
    pub u: f64,
    pub seed: u64,
    pub return_model: ReturnModel,
    /// Replaces the sampled buy and sell costs with one value for every asset.
    #[serde(default)]
    pub transaction_cost: Option<f64>,
    /// Replaces the sampled initial holdings (`n + 1` entries, cash last).
    #[serde(default)]
    pub initial_holdings: Option<Vec<f64>>,
}

impl Default for PortfolioSpec {
    fn default() -> Self {
        Self {
            horizon: 6,
            n: 4,
            m: 10,
            risk_free_return: 0.004,
            u: 1.0,
            seed: 0,
            return_model: ReturnModel::Synthetic,
            transaction_cost: None,
            initial_holdings: None,
        }
    }
}

impl PortfolioSpec {
    pub fn validate(&self) -> Result<(), PortfolioError> {
        let bad = |msg: String| Err(PortfolioError::Spec(msg));
        if self.horizon < 2 {
            return bad(format!("need T >= 2, got {}", self.horizon));
        }
        if self.n == 0 || self.m == 0 {
            return bad("need n >= 1 and M >= 1".into());
        }
        if !(self.u > 0.0 && self.u <= 1.0) {
            return bad(format!("position limit u must lie in (0, 1], got {}", self.u));
        }
        if !(self.risk_free_return > -1.0) {
            return bad("risk-free gross return must be positive".into());
        }
        if let Some(c) = self.transaction_cost {
            if !(0.0..1.0).contains(&c) {
                return bad(format!("transaction cost must lie in [0, 1), got {c}"));
            }
        }
        if let Some(h) = &self.initial_holdings {
            if h.len() != self.n + 1 || h.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("initial holdings need {} nonnegative entries", self.n + 1));
            }
        }
        if let ReturnModel::Constant { risky } = self.return_model {
            if !(risky > 0.0) {
                return bad("constant gross return must be positive".into());
            }
        }
        Ok(())
    }
}

/// Buy costs `ν` and sell costs `μ`, equal per asset and fixed over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionCosts {
    pub nu: Vec<f64>,
    pub mu_cost: Vec<f64>,
}

/// Gross risky returns: a deterministic first stage, then `M` equally
/// likely realizations for each stage `2..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnScenarios {
    pub first: Vec<f64>,
    /// `stages[t − 2][j][i]`.
    pub stages: Vec<Vec<Vec<f64>>>,
}

// Independent random streams, so changing one part of the generator does
// not shift the draws of another.
const STREAM_PARAMS: u64 = 0;
const STREAM_HOLDINGS: u64 = 1;
const STREAM_COSTS: u64 = 2;
const STREAM_RETURNS: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Monthly drift and log-volatility per asset.
fn synthetic_params(spec: &PortfolioSpec) -> Vec<(f64, f64)> {
    let mut r = rng(spec.seed, STREAM_PARAMS);
    (0..spec.n)
        .map(|_| (r.random_range(0.002..=0.012), r.random_range(0.03..=0.08)))
        .collect()
}

pub fn sample_synthetic_returns(spec: &PortfolioSpec) -> ReturnScenarios {
    let params = synthetic_params(spec);
    let dists: Vec<LogNormal<f64>> = params
        .iter()
        .map(|&(drift, vol)| {
            // Mean of the gross return is 1 + drift.
            LogNormal::new((1.0 + drift).ln() - vol * vol / 2.0, vol).expect("valid lognormal")
        })
        .collect();
    let mut r = rng(spec.seed, STREAM_RETURNS);
    let stages = (2..=spec.horizon)
        .map(|_| {
            (0..spec.m)
                .map(|_| dists.iter().map(|d| d.sample(&mut r)).collect())
                .collect()
        })
        .collect();
    ReturnScenarios {
        first: params.iter().map(|(drift, _)| 1.0 + drift).collect(),
        stages,
    }
}

/// Reads a returns table: header row, then one row per realization.
pub fn read_returns_csv(path: &Path) -> Result<Vec<Vec<f64>>, PortfolioError> {
    let csv_err = |source| PortfolioError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file_err = |msg: String| PortfolioError::ReturnsFile {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| file_err(format!("row {}: {e}", i + 1)))?;
        if row.iter().any(|v| !(*v > 0.0)) {
            return Err(file_err(format!("row {}: gross returns must be positive", i + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(file_err("no realizations".into()));
    }
    Ok(rows)
}

fn scenarios(spec: &PortfolioSpec) -> Result<ReturnScenarios, PortfolioError> {
    match &spec.return_model {
        ReturnModel::Synthetic => Ok(sample_synthetic_returns(spec)),
        ReturnModel::Constant { risky } => Ok(ReturnScenarios {
            first: vec![*risky; spec.n],
            stages: vec![vec![vec![*risky; spec.n]; spec.m]; spec.horizon - 1],
        }),
        ReturnModel::FromFile { path } => {
            let rows = read_returns_csv(path)?;
            if rows.len() != spec.m || rows.iter().any(|r| r.len() != spec.n) {
                return Err(PortfolioError::ReturnsFile {
                    path: path.clone(),
                    msg: format!(
                        "expected {} rows of {} returns, found {} rows",
                        spec.m,
                        spec.n,
                        rows.len()
                    ),
                });
            }
            let first = (0..spec.n)
                .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64)
                .collect();
            Ok(ReturnScenarios {
                first,
                stages: vec![rows; spec.horizon - 1],
            })
        }
    }
}

/// Costs `0.08 + 0.06·cos(2πU/T)` with `U` uniform on `{1, …, T}`, one
/// draw per asset, the same for buying and selling.
pub fn sample_transaction_costs(spec: &PortfolioSpec) -> TransactionCosts {
    let nu: Vec<f64> = match spec.transaction_cost {
        Some(c) => vec![c; spec.n],
        None => {
            let mut r = rng(spec.seed, STREAM_COSTS);
            let t = spec.horizon as f64;
            (0..spec.n)
                .map(|_| {
                    let u = r.random_range(1..=spec.horizon) as f64;
                    0.08 + 0.06 * (2.0 * std::f64::consts::PI * u / t).cos()
                })
                .collect()
        }
    };
    TransactionCosts {
        mu_cost: nu.clone(),
        nu,
    }
}

fn initial_holdings(spec: &PortfolioSpec) -> Vec<f64> {
    match &spec.initial_holdings {
        Some(h) => h.clone(),
        None => {
            let mut r = rng(spec.seed, STREAM_HOLDINGS);
            (0..=spec.n).map(|_| r.random_range(0.0..=10.0)).collect()
        }
    }
}

/// Number of decision variables per stage.
pub fn stage_dim(n: usize) -> usize {
    4 * n + 1
}

fn stage_model(
    n: usize,
    u: f64,
    returns: &[f64],
    risk_free: f64,
    costs: &TransactionCosts,
    state_dim: usize,
    last: bool,
) -> StageModel {
    let cash = n;
    let (buy, sell, slack) = (n + 1, 2 * n + 1, 3 * n + 1);
    let rows = 2 * n + 1;
    let mut a = DenseMatrix::zeros(rows, stage_dim(n));
    let mut state = DenseMatrix::zeros(rows, state_dim);
    for i in 0..n {
        a.set(i, i, 1.0);
        a.set(i, buy + i, -1.0);
        a.set(i, sell + i, 1.0);
        state.set(i, i, -returns[i]);
    }
    a.set(cash, cash, 1.0);
    for i in 0..n {
        a.set(cash, buy + i, 1.0 + costs.nu[i]);
        a.set(cash, sell + i, -(1.0 - costs.mu_cost[i]));
    }
    state.set(cash, cash, -risk_free);
    for i in 0..n {
        let r = n + 1 + i;
        for j in 0..=n {
            a.set(r, j, -u);
        }
        a.set(r, i, 1.0 - u);
        a.set(r, slack + i, 1.0);
    }
    let mut cost = vec![0.0; stage_dim(n)];
    if last {
        cost[..=n].iter_mut().for_each(|c| *c = -1.0);
    }
    StageModel {
        a,
        state_matrix: state,
        rhs: vec![0.0; rows],
        cost,
    }
}

pub fn generate_instance(spec: &PortfolioSpec) -> Result<StochasticModel, PortfolioError> {
    spec.validate()?;
    let n = spec.n;
    let returns = scenarios(spec)?;
    let costs = sample_transaction_costs(spec);
    let x0 = initial_holdings(spec);
    let rf = 1.0 + spec.risk_free_return;
    let horizon = spec.horizon;
    let stage1 = stage_model(n, spec.u, &returns.first, rf, &costs, n + 1, horizon == 1);
    let prob = 1.0 / spec.m as f64;
    let stages = returns
        .stages
        .iter()
        .enumerate()
        .map(|(i, reals)| StochasticStageModel {
            realizations: reals
                .iter()
                .map(|r| Realization {
                    data: stage_model(n, spec.u, r, rf, &costs, stage_dim(n), i + 2 == horizon),
                    prob,
                })
                .collect(),
        })
        .collect();
    // Wealth grows at most by the largest gross return per stage, so the
    // cost-to-go of stage t is at least −g^(T−t+1)·(largest wealth entering t).
    let g_max = returns
        .stages
        .iter()
        .flatten()
        .flatten()
        .chain(&returns.first)
        .copied()
        .fold(rf, f64::max);
    let w0: f64 = x0.iter().sum();
    let floors = (2..=horizon)
        .map(|t| {
            let w_max = w0 * g_max.powi(t as i32 - 1);
            -g_max.powi((horizon - t + 1) as i32) * w_max
        })
        .collect();
    Ok(StochasticModel {
        stage1,
        stages,
        x0,
        floors,
    })
}
