//! Cuts built from (possibly inexact) dual solutions and the pools that hold
//! them.
//!
//! A pool for stage `t` represents the lower approximation
//! `max(floor, maxᵢ θᵢ + ⟨βᵢ, x⟩)` of the cost-to-go `Q_t`. Inside stage
//! subproblems the floor is the first cut row (with `β = 0`), so dual
//! multipliers cover it like any other cut.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{dot, CutRow, DenseMatrix, DualCertificate};

#[derive(Debug, Error, PartialEq)]
pub enum CutError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("realization probabilities sum to {0}, expected 1")]
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub theta: f64,
    pub beta: Vec<f64>,
    pub stage: usize,
    #[serde(rename = "iter")]
    pub iteration: usize,
    #[serde(rename = "eps")]
    pub eps_used: f64,
}

impl Cut {
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.theta + dot(&self.beta, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    pub stage: usize,
    pub state_dim: usize,
    pub floor: f64,
    cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new(stage: usize, state_dim: usize, floor: f64) -> Self {
        Self {
            stage,
            state_dim,
            floor,
            cuts: Vec::new(),
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn push(&mut self, cut: Cut) -> Result<(), CutError> {
        if cut.beta.len() != self.state_dim {
            return Err(CutError::Dimension(format!(
                "cut slope has {} entries, pool state dimension is {}",
                cut.beta.len(),
                self.state_dim
            )));
        }
        self.cuts.push(cut);
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        evaluate_pool(self, x)
    }

    /// Cut rows for a stage subproblem: the floor first, then every cut in
    /// insertion order.
    pub fn cut_rows(&self) -> Vec<CutRow<'_>> {
        let mut rows = Vec::with_capacity(self.cuts.len() + 1);
        rows.push(CutRow::new(vec![0.0; self.state_dim], self.floor));
        rows.extend(
            self.cuts
                .iter()
                .map(|c| CutRow::new(Cow::Borrowed(c.beta.as_slice()), c.theta)),
        );
        rows
    }

    /// Intercepts in the same order as [`CutPool::cut_rows`].
    pub fn thetas(&self) -> Vec<f64> {
        std::iter::once(self.floor)
            .chain(self.cuts.iter().map(|c| c.theta))
            .collect()
    }
}

/// `max(floor, maxᵢ θᵢ + ⟨βᵢ, x⟩)`.
pub fn evaluate_pool(pool: &CutPool, x: &[f64]) -> f64 {
    pool.cuts
        .iter()
        .map(|c| c.value(x))
        .fold(pool.floor, f64::max)
}

/// One realization of a stage: right-hand side `b`, state matrix `B` and its
/// probability.
#[derive(Debug, Clone, Copy)]
pub struct RealizationData<'a> {
    pub rhs: &'a [f64],
    pub state_matrix: &'a DenseMatrix,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutMeta {
    pub stage: usize,
    pub iteration: usize,
    pub eps: f64,
}

fn check_inputs(
    realizations: &[RealizationData<'_>],
    duals: &[DualCertificate],
) -> Result<usize, CutError> {
    if realizations.is_empty() || realizations.len() != duals.len() {
        return Err(CutError::Dimension(format!(
            "{} realizations but {} dual certificates",
            realizations.len(),
            duals.len()
        )));
    }
    let state_dim = realizations[0].state_matrix.cols();
    for (j, (r, d)) in realizations.iter().zip(duals).enumerate() {
        if r.state_matrix.rows() != r.rhs.len() || d.lambda.len() != r.rhs.len() {
            return Err(CutError::Dimension(format!(
                "realization {j}: |b| = {}, B has {} rows, |λ| = {}",
                r.rhs.len(),
                r.state_matrix.rows(),
                d.lambda.len()
            )));
        }
        if r.state_matrix.cols() != state_dim {
            return Err(CutError::Dimension(format!(
                "realization {j}: B has {} columns, expected {state_dim}",
                r.state_matrix.cols()
            )));
        }
    }
    let total: f64 = realizations.iter().map(|r| r.prob).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CutError::Probability(total));
    }
    Ok(state_dim)
}

fn aggregate(
    realizations: &[RealizationData<'_>],
    duals: &[DualCertificate],
    state_dim: usize,
    meta: CutMeta,
    extra_theta: impl Fn(&DualCertificate) -> f64,
) -> Cut {
    let mut theta = 0.0;
    let mut beta = vec![0.0; state_dim];
    for (r, d) in realizations.iter().zip(duals) {
        theta += r.prob * (dot(r.rhs, &d.lambda) + extra_theta(d));
        let bt_lambda = r.state_matrix.tr_mul_vec(&d.lambda);
        for (b, v) in beta.iter_mut().zip(bt_lambda) {
            *b -= r.prob * v;
        }
    }
    Cut {
        theta,
        beta,
        stage: meta.stage,
        iteration: meta.iteration,
        eps_used: meta.eps,
    }
}

/// Cut for the last stage: `θ = Σ pⱼ⟨bⱼ, λⱼ⟩`, `β = −Σ pⱼ Bⱼᵀλⱼ`.
pub fn build_terminal_cut(
    realizations: &[RealizationData<'_>],
    duals: &[DualCertificate],
    meta: CutMeta,
) -> Result<Cut, CutError> {
    let state_dim = check_inputs(realizations, duals)?;
    Ok(aggregate(realizations, duals, state_dim, meta, |_| 0.0))
}

/// Cut for an intermediate stage. Adds `⟨μⱼ, θ_{t+1}⟩` to the intercept,
/// where `next_pool_thetas` is ordered like the next pool's cut rows
/// (floor first).
pub fn build_middle_cut(
    realizations: &[RealizationData<'_>],
    duals: &[DualCertificate],
    next_pool_thetas: &[f64],
    meta: CutMeta,
) -> Result<Cut, CutError> {
    let state_dim = check_inputs(realizations, duals)?;
    if let Some((j, d)) = duals
        .iter()
        .enumerate()
        .find(|(_, d)| d.mu.len() != next_pool_thetas.len())
    {
        return Err(CutError::Dimension(format!(
            "realization {j}: |μ| = {} but the next pool has {} rows",
            d.mu.len(),
            next_pool_thetas.len()
        )));
    }
    Ok(aggregate(realizations, duals, state_dim, meta, |d| {
        dot(&d.mu, next_pool_thetas)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::CertificateMode;

    fn cert(lambda: Vec<f64>, mu: Vec<f64>) -> DualCertificate {
        DualCertificate {
            lambda,
            mu,
            dual_obj: 0.0,
            eps_certified: 0.0,
            mode: CertificateMode::Exact,
            optimum: None,
        }
    }

    const META: CutMeta = CutMeta {
        stage: 2,
        iteration: 1,
        eps: 0.0,
    };

    #[test]
    fn terminal_cut_identity_state_matrix() {
        let b = [1.0, 2.0];
        let eye = DenseMatrix::identity(2);
        let r = [RealizationData {
            rhs: &b,
            state_matrix: &eye,
            prob: 1.0,
        }];
        let cut = build_terminal_cut(&r, &[cert(vec![1.0, 0.0], vec![])], META).unwrap();
        assert_eq!(cut.theta, 1.0);
        assert_eq!(cut.beta, vec![-1.0, 0.0]);
    }

    #[test]
    fn terminal_cut_averages() {
        let b = [1.0];
        let m = DenseMatrix::from_rows(&[[0.0]]);
        let r = [
            RealizationData {
                rhs: &b,
                state_matrix: &m,
                prob: 0.5,
            },
            RealizationData {
                rhs: &b,
                state_matrix: &m,
                prob: 0.5,
            },
        ];
        let cut = build_terminal_cut(&r, &[cert(vec![2.0], vec![]), cert(vec![4.0], vec![])], META).unwrap();
        assert_eq!(cut.theta, 3.0);
    }

    #[test]
    fn middle_cut_passes_next_intercept_through() {
        let b = [7.0];
        let m = DenseMatrix::from_rows(&[[1.0]]);
        let r = [RealizationData {
            rhs: &b,
            state_matrix: &m,
            prob: 1.0,
        }];
        let cut = build_middle_cut(&r, &[cert(vec![0.0], vec![0.0, 1.0, 0.0])], &[-1.0, 5.0, 2.0], META).unwrap();
        assert_eq!(cut.theta, 5.0);
        assert_eq!(cut.beta, vec![0.0]);
    }

    #[test]
    fn input_errors() {
        let b = [7.0];
        let m = DenseMatrix::from_rows(&[[1.0]]);
        let r = [RealizationData {
            rhs: &b,
            state_matrix: &m,
            prob: 1.0,
        }];
        assert!(matches!(
            build_middle_cut(&r, &[cert(vec![0.0], vec![1.0])], &[1.0, 2.0], META),
            Err(CutError::Dimension(_))
        ));
        assert!(matches!(
            build_terminal_cut(&r, &[cert(vec![0.0, 1.0], vec![])], META),
            Err(CutError::Dimension(_))
        ));
        let half = [RealizationData { prob: 0.5, ..r[0] }];
        assert_eq!(
            build_terminal_cut(&half, &[cert(vec![0.0], vec![])], META),
            Err(CutError::Probability(0.5))
        );
    }

    #[test]
    fn pool_evaluation() {
        let pool = CutPool::new(2, 1, -10.0);
        assert_eq!(pool.evaluate(&[3.0]), -10.0);
        let mut pool = CutPool::new(2, 1, -10.0);
        for (theta, beta) in [(0.0, 1.0), (2.0, -1.0)] {
            pool.push(Cut {
                theta,
                beta: vec![beta],
                stage: 2,
                iteration: 1,
                eps_used: 0.0,
            })
            .unwrap();
        }
        assert_eq!(pool.evaluate(&[0.5]), 1.5);
        assert_eq!(pool.thetas(), vec![-10.0, 0.0, 2.0]);
        assert_eq!(pool.cut_rows().len(), 3);
        assert!(pool
            .push(Cut {
                theta: 0.0,
                beta: vec![1.0, 2.0],
                stage: 2,
                iteration: 1,
                eps_used: 0.0
            })
            .is_err());
    }

    #[test]
    fn pool_json_field_names() {
        let mut pool = CutPool::new(3, 2, -1.0);
        pool.push(Cut {
            theta: 1.5,
            beta: vec![0.25, -1.0],
            stage: 3,
            iteration: 4,
            eps_used: 0.01,
        })
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&pool).unwrap();
        let c = &v["cuts"][0];
        for key in ["theta", "beta", "stage", "iter", "eps"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
        let back: CutPool = serde_json::from_value(v).unwrap();
        assert_eq!(back, pool);
    }
}
