#![allow(dead_code)]

use isddp::lp::{DenseMatrix, LinearProgram};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random standard-form LP `min cᵀx, Ax = b, x ≥ 0` that is feasible by
/// construction and bounded because its first row has positive entries.
pub struct RandomLp {
    pub cost: Vec<f64>,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

impl RandomLp {
    pub fn lp(&self) -> LinearProgram<'_> {
        LinearProgram::new(self.cost.as_slice(), &self.a, self.b.clone())
    }
}

pub fn random_lp(seed: u64) -> RandomLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=6);
    let n = rng.random_range(m..=8).max(m + 1).min(8);
    let mut a = DenseMatrix::zeros(m, n);
    for j in 0..n {
        a.set(0, j, rng.random_range(0.5..3.0));
        for i in 1..m {
            // Integer entries now and then to provoke degeneracy.
            let v = if rng.random_bool(0.3) {
                rng.random_range(-2..=2) as f64
            } else {
                rng.random_range(-4.0..4.0)
            };
            a.set(i, j, v);
        }
    }
    let x: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) })
        .collect();
    let b = a.mul_vec(&x);
    let cost = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    RandomLp { cost, a, b }
}

/// Minimum of `cᵀx` over all basic feasible solutions, found by trying
/// every choice of `m` columns. `None` if no basis is feasible.
pub fn brute_force_optimum(p: &RandomLp) -> Option<f64> {
    let (m, n) = (p.a.rows(), p.a.cols());
    let b = DVector::from_column_slice(&p.b);
    let mut best: Option<f64> = None;
    for cols in combinations(n, m) {
        let basis = DMatrix::from_fn(m, m, |i, k| p.a.get(i, cols[k]));
        let lu = basis.clone().full_piv_lu();
        if !lu.is_invertible() {
            continue;
        }
        let Some(xb) = lu.solve(&b) else { continue };
        let resid = (&basis * &xb - &b).amax();
        if resid > 1e-9 * (1.0 + b.amax()) || xb.iter().any(|v| *v < -1e-9) {
            continue;
        }
        let obj: f64 = cols.iter().zip(xb.iter()).map(|(&j, v)| p.cost[j] * v).sum();
        best = Some(best.map_or(obj, |o| o.min(obj)));
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `|a − b| ≤ tol·max(1, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
