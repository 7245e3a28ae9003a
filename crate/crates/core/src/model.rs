//! Multistage LP instances.
//!
//! Stage `t` chooses `x_t ≥ 0` subject to `A_t x_t + B_t x_{t−1} = b_t` at
//! cost `c_tᵀx_t`. The state passed to stage `t` is the full decision vector
//! of stage `t−1` (and `x_0` for stage 1).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::DenseMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("stage {stage}: {msg}")]
    Stage { stage: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("reading instance: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing instance: {0}")]
    Json(#[from] serde_json::Error),
}

/// Data of one stage (or one realization of a stage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    #[serde(rename = "A")]
    pub a: DenseMatrix,
    /// Coefficients of the previous stage's decision.
    #[serde(rename = "B")]
    pub state_matrix: DenseMatrix,
    #[serde(rename = "b")]
    pub rhs: Vec<f64>,
    #[serde(rename = "c")]
    pub cost: Vec<f64>,
}

impl StageModel {
    pub fn num_eq(&self) -> usize {
        self.rhs.len()
    }

    pub fn var_dim(&self) -> usize {
        self.cost.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_matrix.cols()
    }

    /// `b − B x_prev`.
    pub fn rhs_at(&self, x_prev: &[f64]) -> Vec<f64> {
        let bx = self.state_matrix.mul_vec(x_prev);
        self.rhs.iter().zip(bx).map(|(b, v)| b - v).collect()
    }

    fn check(&self, stage: usize) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::Stage { stage, msg });
        if self.a.rows() != self.num_eq() || self.a.cols() != self.var_dim() {
            return err(format!(
                "A is {}x{}, expected {}x{}",
                self.a.rows(),
                self.a.cols(),
                self.num_eq(),
                self.var_dim()
            ));
        }
        if self.state_matrix.rows() != self.num_eq() {
            return err(format!(
                "B has {} rows, expected {}",
                self.state_matrix.rows(),
                self.num_eq()
            ));
        }
        let finite = self.rhs.iter().chain(&self.cost).all(|v| v.is_finite());
        if !finite {
            return err("non-finite entry in b or c".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicModel {
    pub stages: Vec<StageModel>,
    pub x0: Vec<f64>,
    /// Constant lower bounds on the cost-to-go of stages `2..=T`.
    pub floors: Vec<f64>,
}

impl DeterministicModel {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.stages.is_empty() {
            return Err(ModelError::Invalid("model has no stages".into()));
        }
        let mut state_dim = self.x0.len();
        for (i, s) in self.stages.iter().enumerate() {
            s.check(i + 1)?;
            if s.state_dim() != state_dim {
                return Err(ModelError::Stage {
                    stage: i + 1,
                    msg: format!("state dimension {} but previous stage has {state_dim} variables", s.state_dim()),
                });
            }
            state_dim = s.var_dim();
        }
        check_floors(&self.floors, self.horizon())
    }

    /// The same problem as a stochastic model with one realization per stage.
    pub fn to_stochastic(&self) -> StochasticModel {
        let mut stages = self.stages.iter();
        let stage1 = stages.next().cloned().expect("model has no stages");
        StochasticModel {
            stage1,
            stages: stages
                .map(|s| StochasticStageModel {
                    realizations: vec![Realization {
                        data: s.clone(),
                        prob: 1.0,
                    }],
                })
                .collect(),
            x0: self.x0.clone(),
            floors: self.floors.clone(),
        }
    }
}

fn check_floors(floors: &[f64], horizon: usize) -> Result<(), ModelError> {
    if floors.len() + 1 != horizon {
        return Err(ModelError::Invalid(format!(
            "{} floors given for a horizon of {horizon} (need one per stage after the first)",
            floors.len()
        )));
    }
    if floors.iter().any(|f| !f.is_finite()) {
        return Err(ModelError::Invalid("floors must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    #[serde(flatten)]
    pub data: StageModel,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticStageModel {
    pub realizations: Vec<Realization>,
}

impl StochasticStageModel {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.realizations.iter().map(|r| r.prob).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticModel {
    pub stage1: StageModel,
    /// Stages `2..=T`, stagewise independent.
    pub stages: Vec<StochasticStageModel>,
    pub x0: Vec<f64>,
    pub floors: Vec<f64>,
}

impl StochasticModel {
    pub fn horizon(&self) -> usize {
        self.stages.len() + 1
    }

    /// Stage `t` (`2..=T`).
    pub fn stage(&self, t: usize) -> &StochasticStageModel {
        &self.stages[t - 2]
    }

    /// Realization `j` of stage `t`; stage 1 has the single realization 0.
    pub fn realization(&self, t: usize, j: usize) -> &StageModel {
        if t == 1 {
            assert_eq!(j, 0, "stage 1 is deterministic");
            &self.stage1
        } else {
            &self.stage(t).realizations[j].data
        }
    }

    /// Number of realizations of stage `t`.
    pub fn num_realizations(&self, t: usize) -> usize {
        if t == 1 {
            1
        } else {
            self.stage(t).len()
        }
    }

    pub fn prob(&self, t: usize, j: usize) -> f64 {
        if t == 1 {
            1.0
        } else {
            self.stage(t).realizations[j].prob
        }
    }

    /// Decision dimension of stage `t`.
    pub fn var_dim(&self, t: usize) -> usize {
        self.realization(t, 0).var_dim()
    }

    /// Floor of the cost-to-go of stage `t` (`2..=T`).
    pub fn floor(&self, t: usize) -> f64 {
        self.floors[t - 2]
    }

    /// `Π_t M_t`.
    pub fn num_scenarios(&self) -> f64 {
        self.stages.iter().map(|s| s.len() as f64).product()
    }

    pub fn is_deterministic(&self) -> bool {
        self.stages.iter().all(|s| s.len() == 1)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.stage1.check(1)?;
        if self.stage1.state_dim() != self.x0.len() {
            return Err(ModelError::Stage {
                stage: 1,
                msg: format!(
                    "state dimension {} does not match x0 of length {}",
                    self.stage1.state_dim(),
                    self.x0.len()
                ),
            });
        }
        let mut prev_dim = self.stage1.var_dim();
        for (i, s) in self.stages.iter().enumerate() {
            let t = i + 2;
            let first = s.realizations.first().ok_or(ModelError::Stage {
                stage: t,
                msg: "no realizations".into(),
            })?;
            let (m, n) = (first.data.num_eq(), first.data.var_dim());
            for (j, r) in s.realizations.iter().enumerate() {
                r.data.check(t)?;
                if r.data.num_eq() != m || r.data.var_dim() != n {
                    return Err(ModelError::Stage {
                        stage: t,
                        msg: format!("realization {j} has different dimensions"),
                    });
                }
                if r.data.state_dim() != prev_dim {
                    return Err(ModelError::Stage {
                        stage: t,
                        msg: format!(
                            "realization {j}: state dimension {} but previous stage has {prev_dim} variables",
                            r.data.state_dim()
                        ),
                    });
                }
                if !(r.prob > 0.0) {
                    return Err(ModelError::Stage {
                        stage: t,
                        msg: format!("realization {j} has probability {}", r.prob),
                    });
                }
            }
            let total: f64 = s.realizations.iter().map(|r| r.prob).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(ModelError::Stage {
                    stage: t,
                    msg: format!("probabilities sum to {total}"),
                });
            }
            prev_dim = n;
        }
        check_floors(&self.floors, self.horizon())
    }
}

/// An instance file: either kind of model, tagged by `"kind"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instance {
    Deterministic(DeterministicModel),
    Stochastic(StochasticModel),
}

impl Instance {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Instance::Deterministic(m) => m.validate(),
            Instance::Stochastic(m) => m.validate(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Instance::Deterministic(m) => m.horizon(),
            Instance::Stochastic(m) => m.horizon(),
        }
    }

    pub fn to_stochastic(&self) -> StochasticModel {
        match self {
            Instance::Deterministic(m) => m.to_stochastic(),
            Instance::Stochastic(m) => m.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let inst: Instance = serde_json::from_str(&text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }
}
