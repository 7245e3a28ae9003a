//! Small shipped instances with known structure, used by the tests and
//! available from the CLI.
//!
//! The main family is a production/inventory problem. A stage decides
//! `[stock, produce, outsource, idle capacity, idle outsourcing]`:
//!
//! ```text
//! stock_t = stock_{t−1} + produce_t + outsource_t − demand_t
//! produce_t + idle_t = capacity,   outsource_t + idle'_t = outsource_max
//! ```
//!
//! Outsourcing always covers the largest demand, so every stage is feasible
//! from any reachable state, and all variables are bounded. Leftover stock
//! at the last stage is sold back below production cost.

use crate::lp::DenseMatrix;
use crate::model::{
    DeterministicModel, Instance, Realization, StageModel, StochasticModel, StochasticStageModel,
};

const CAPACITY: f64 = 3.0;
const OUTSOURCE_MAX: f64 = 10.0;
const HOLDING: f64 = 0.2;
const OUTSOURCE_COST: f64 = 4.0;
const SALVAGE: f64 = 0.5;
const FLOOR: f64 = -100.0;

fn inventory_stage(demand: f64, produce_cost: f64, last: bool) -> StageModel {
    let a = DenseMatrix::from_rows(&[
        [1.0, -1.0, -1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 1.0],
    ]);
    let mut state_matrix = DenseMatrix::zeros(3, 5);
    state_matrix.set(0, 0, -1.0);
    let stock_cost = if last { -SALVAGE } else { HOLDING };
    StageModel {
        a,
        state_matrix,
        rhs: vec![-demand, CAPACITY, OUTSOURCE_MAX],
        cost: vec![stock_cost, produce_cost, OUTSOURCE_COST, 0.0, 0.0],
    }
}

fn inventory_x0(stock: f64) -> Vec<f64> {
    vec![stock, 0.0, 0.0, 0.0, 0.0]
}

fn deterministic(demands: &[f64], costs: &[f64], stock: f64) -> DeterministicModel {
    let t = demands.len();
    DeterministicModel {
        stages: demands
            .iter()
            .zip(costs)
            .enumerate()
            .map(|(i, (&d, &c))| inventory_stage(d, c, i + 1 == t))
            .collect(),
        x0: inventory_x0(stock),
        floors: vec![FLOOR; t - 1],
    }
}

pub fn deterministic_t2() -> DeterministicModel {
    deterministic(&[2.0, 5.0], &[1.0, 3.0], 1.0)
}

pub fn deterministic_t3() -> DeterministicModel {
    deterministic(&[2.0, 4.0, 3.0], &[1.0, 2.0, 1.5], 0.0)
}

pub fn deterministic_t5() -> DeterministicModel {
    deterministic(&[1.0, 3.0, 4.0, 2.0, 5.0], &[1.0, 1.5, 2.0, 1.2, 2.5], 2.0)
}

/// `scenarios[t]` lists `(demand, produce cost, prob)` for stage `t + 2`.
fn stochastic(first: (f64, f64), scenarios: &[&[(f64, f64, f64)]], stock: f64) -> StochasticModel {
    let horizon = scenarios.len() + 1;
    StochasticModel {
        stage1: inventory_stage(first.0, first.1, horizon == 1),
        stages: scenarios
            .iter()
            .enumerate()
            .map(|(i, list)| StochasticStageModel {
                realizations: list
                    .iter()
                    .map(|&(d, c, prob)| Realization {
                        data: inventory_stage(d, c, i + 2 == horizon),
                        prob,
                    })
                    .collect(),
            })
            .collect(),
        x0: inventory_x0(stock),
        floors: vec![FLOOR; horizon - 1],
    }
}

/// Three stages, two equally likely realizations in each of stages 2 and 3
/// (four scenarios).
pub fn stochastic_t3_m2() -> StochasticModel {
    let stage = [(2.0, 1.5, 0.5), (5.0, 2.5, 0.5)];
    stochastic((2.0, 1.0), &[&stage, &stage], 1.0)
}

/// Four stages, three realizations per random stage (27 scenarios).
pub fn stochastic_t4_m3() -> StochasticModel {
    let s2 = [(1.0, 1.2, 0.2), (3.0, 1.8, 0.5), (5.0, 2.6, 0.3)];
    let s3 = [(2.0, 1.0, 0.3), (4.0, 2.0, 0.4), (6.0, 3.0, 0.3)];
    let s4 = [(1.0, 2.0, 0.25), (3.0, 2.0, 0.5), (5.0, 2.0, 0.25)];
    stochastic((3.0, 1.0), &[&s2, &s3, &s4], 0.0)
}

/// The five shipped instances, in a fixed order.
pub fn all() -> Vec<Instance> {
    vec![
        Instance::Deterministic(deterministic_t2()),
        Instance::Deterministic(deterministic_t3()),
        Instance::Deterministic(deterministic_t5()),
        Instance::Stochastic(stochastic_t3_m2()),
        Instance::Stochastic(stochastic_t4_m3()),
    ]
}

/// Names accepted by [`by_name`], in the order of [`all`].
pub const NAMES: [&str; 5] = ["det-t2", "det-t3", "det-t5", "sto-t3-m2", "sto-t4-m3"];

pub fn by_name(name: &str) -> Option<Instance> {
    NAMES.iter().position(|n| *n == name).map(|i| all().swap_remove(i))
}

/// Two stages with scalar recourse `Q(x) = max(x₁, 0)`.
///
/// Stage 1 splits 2 units between a free position and a position costing
/// 1.5 per unit; stage 2 pays for the positive part of the first one.
pub fn one_dim() -> StochasticModel {
    DeterministicModel {
        stages: vec![
            StageModel {
                a: DenseMatrix::from_rows(&[[1.0, 1.0]]),
                state_matrix: DenseMatrix::zeros(1, 1),
                rhs: vec![2.0],
                cost: vec![0.0, 1.5],
            },
            StageModel {
                a: DenseMatrix::from_rows(&[[1.0, -1.0]]),
                state_matrix: DenseMatrix::from_rows(&[[-1.0, 0.0]]),
                rhs: vec![0.0],
                cost: vec![1.0, 0.0],
            },
        ],
        x0: vec![0.0],
        floors: vec![0.0],
    }
    .to_stochastic()
}

/// Buy `y ≤ 10` at unit cost, then cover demand 1 or 3 (probability ½
/// each) with shortfall purchases at 2 per unit.
pub fn newsvendor() -> StochasticModel {
    let second = |d: f64| Realization {
        data: StageModel {
            a: DenseMatrix::from_rows(&[[1.0, -1.0]]),
            state_matrix: DenseMatrix::from_rows(&[[1.0, 0.0]]),
            rhs: vec![d],
            cost: vec![2.0, 0.0],
        },
        prob: 0.5,
    };
    StochasticModel {
        stage1: StageModel {
            a: DenseMatrix::from_rows(&[[1.0, 1.0]]),
            state_matrix: DenseMatrix::zeros(1, 1),
            rhs: vec![10.0],
            cost: vec![1.0, 0.0],
        },
        stages: vec![StochasticStageModel {
            realizations: vec![second(1.0), second(3.0)],
        }],
        x0: vec![0.0],
        floors: vec![0.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_instances_are_valid() {
        for (name, inst) in NAMES.iter().zip(all()) {
            inst.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(by_name(name), Some(inst));
        }
        one_dim().validate().unwrap();
        newsvendor().validate().unwrap();
        assert_eq!(stochastic_t3_m2().num_scenarios(), 4.0);
        assert_eq!(stochastic_t4_m3().num_scenarios(), 27.0);
    }
}
