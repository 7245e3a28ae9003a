//! Dense revised primal simplex on `min cᵀx, Ax = b, x ≥ 0`.
//!
//! The basis inverse is kept explicitly and updated by elementary row
//! operations, with a fresh Gauss-Jordan factorization every
//! [`SolverOptions::refactor_every`] pivots. Pricing is Dantzig's
//! largest-coefficient rule until the number of degenerate pivots exceeds
//! `bland_factor * n`, after which Bland's smallest-index rule is used for the
//! rest of the solve.
//!
//! Phase-2 iterates are reported to an observer, which is how the inexact
//! solvers record primal and dual trails without a second pass.

use std::ops::ControlFlow;

use super::matrix::{dot, DenseMatrix};
use super::{LpError, SolverOptions};

/// `min cᵀx` subject to `Ax = b`, `x ≥ 0`.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// The observer asked to stop during phase 2.
    Stopped,
}

/// A phase-2 (primal feasible) basic solution.
pub(crate) struct Iterate<'a> {
    pub basis: &'a [usize],
    pub xb: &'a [f64],
    #[allow(dead_code)]
    pub obj: f64,
    /// Number of structural columns; basis entries `>= n` are artificial.
    pub n: usize,
}

impl Iterate<'_> {
    pub fn x(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&j, &v) in self.basis.iter().zip(self.xb) {
            if j < self.n {
                x[j] = v;
            }
        }
        x
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub outcome: Outcome,
    pub basis: Vec<usize>,
    pub x: Vec<f64>,
    /// Simplex multipliers for the original (unflipped) rows.
    pub y: Vec<f64>,
    pub obj: f64,
    #[allow(dead_code)]
    pub pivots: usize,
}

struct Tableau<'a> {
    m: usize,
    n: usize,
    /// Row-scaled copy of A so that b ≥ 0.
    a: DenseMatrix,
    b: Vec<f64>,
    sign: Vec<f64>,
    c: &'a [f64],
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    opts: SolverOptions,
    pivots: usize,
    since_refactor: usize,
    degenerate: usize,
    bland: bool,
}

enum Pricing {
    Phase1,
    Phase2,
}

impl<'a> Tableau<'a> {
    fn new(sf: &'a StandardForm, opts: SolverOptions) -> Self {
        let m = sf.a.rows();
        let n = sf.a.cols();
        let sign: Vec<f64> = sf.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut a = sf.a.clone();
        for j in 0..n {
            for (v, s) in a.column_mut(j).iter_mut().zip(&sign) {
                *v *= s;
            }
        }
        let b: Vec<f64> = sf.b.iter().map(|v| v.abs()).collect();

        // Reuse unit columns as the starting basis where possible.
        let mut basis = vec![usize::MAX; m];
        for j in 0..n {
            let col = a.column(j);
            let mut unit_row = None;
            let mut ok = true;
            for (i, &v) in col.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                if v == 1.0 && unit_row.is_none() {
                    unit_row = Some(i);
                } else {
                    ok = false;
                    break;
                }
            }
            if let (true, Some(i)) = (ok, unit_row) {
                if basis[i] == usize::MAX {
                    basis[i] = j;
                }
            }
        }
        for (i, bi) in basis.iter_mut().enumerate() {
            if *bi == usize::MAX {
                *bi = n + i;
            }
        }
        let mut is_basic = vec![false; n + m];
        for &j in &basis {
            is_basic[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let xb = b.clone();
        Self {
            m,
            n,
            a,
            b,
            sign,
            c: &sf.c,
            basis,
            is_basic,
            binv,
            xb,
            opts,
            pivots: 0,
            since_refactor: 0,
            degenerate: 0,
            bland: false,
        }
    }

    #[inline]
    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n
    }

    fn cost(&self, j: usize, pricing: &Pricing) -> f64 {
        match pricing {
            Pricing::Phase1 => {
                if self.is_artificial(j) {
                    1.0
                } else {
                    0.0
                }
            }
            Pricing::Phase2 => {
                if self.is_artificial(j) {
                    0.0
                } else {
                    self.c[j]
                }
            }
        }
    }

    /// `B⁻¹ a_j` for structural or artificial column `j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if self.is_artificial(j) {
            let i = j - self.n;
            for (r, a) in alpha.iter_mut().enumerate() {
                *a = self.binv[r * m + i];
            }
        } else {
            let col = self.a.column(j);
            for (r, a) in alpha.iter_mut().enumerate() {
                *a = dot(&self.binv[r * m..(r + 1) * m], col);
            }
        }
        alpha
    }

    /// Simplex multipliers `πᵀ = c_Bᵀ B⁻¹`.
    fn multipliers(&self, pricing: &Pricing) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost(self.basis[r], pricing);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (p, v) in pi.iter_mut().zip(row) {
                    *p += cb * v;
                }
            }
        }
        pi
    }

    fn objective(&self, pricing: &Pricing) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&j, &v)| self.cost(j, pricing) * v)
            .sum()
    }

    fn choose_entering(&self, pi: &[f64], pricing: &Pricing) -> Option<usize> {
        let tol = self.opts.feas_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.is_basic[j] {
                continue;
            }
            let d = self.cost(j, pricing) - dot(pi, self.a.column(j));
            if d < -tol {
                if self.bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Ratio test. Returns the leaving row, or `None` if the column is an
    /// unbounded ray.
    fn choose_leaving(&self, alpha: &[f64]) -> Option<usize> {
        let ptol = self.opts.pivot_tol;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let ar = alpha[r];
            let ratio = if self.is_artificial(self.basis[r]) && self.xb[r] <= self.opts.feas_tol {
                // Artificial stuck at zero on a redundant row: must leave
                // before it can move in either direction.
                if ar.abs() > ptol {
                    0.0
                } else {
                    continue;
                }
            } else if ar > ptol {
                self.xb[r].max(0.0) / ar
            } else {
                continue;
            };
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                    let better = if tie {
                        if self.bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            ar.abs() > alpha[br].abs()
                        }
                    } else {
                        ratio < bratio
                    };
                    if better {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let ar = alpha[r];
        let step = self.xb[r].max(0.0) / ar;
        if step.abs() <= 1e-12 {
            self.degenerate += 1;
            if !self.bland && self.degenerate > self.opts.bland_factor * self.n.max(1) {
                self.bland = true;
            }
        }
        {
            let (before, rest) = self.binv.split_at_mut(r * m);
            let (prow, after) = rest.split_at_mut(m);
            for v in prow.iter_mut() {
                *v /= ar;
            }
            for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
                let i = if i < r { i } else { i + 1 };
                let f = alpha[i];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(prow.iter()) {
                        *v -= f * p;
                    }
                }
            }
        }
        for i in 0..m {
            if i != r {
                self.xb[i] -= step * alpha[i];
                if self.xb[i] < 0.0 && self.xb[i] > -self.opts.feas_tol {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = step;
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = q;
        self.is_basic[q] = true;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor()?;
        }
        if self.pivots > self.opts.max_pivots {
            return Err(LpError::PivotLimit {
                limit: self.opts.max_pivots,
                iterate: self.full_x(),
            });
        }
        Ok(())
    }

    /// Recomputes `B⁻¹` from scratch with Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        // Augmented [B | I], row-major.
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (r, &j) in self.basis.iter().enumerate() {
            // column r of B is a_j
            if self.is_artificial(j) {
                aug[(j - self.n) * w + r] = 1.0;
            } else {
                for (i, &v) in self.a.column(j).iter().enumerate() {
                    aug[i * w + r] = v;
                }
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, pval) = (col..m)
                .map(|i| (i, aug[i * w + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pval <= self.opts.pivot_tol {
                return Err(LpError::Numerical("singular basis during refactorization".into()));
            }
            if piv != col {
                for k in 0..w {
                    aug.swap(piv * w + k, col * w + k);
                }
            }
            let d = aug[col * w + col];
            for k in 0..w {
                aug[col * w + k] /= d;
            }
            for i in 0..m {
                if i != col {
                    let f = aug[i * w + col];
                    if f != 0.0 {
                        for k in 0..w {
                            aug[i * w + k] -= f * aug[col * w + k];
                        }
                    }
                }
            }
        }
        for r in 0..m {
            self.binv[r * m..(r + 1) * m].copy_from_slice(&aug[r * w + m..(r + 1) * w]);
        }
        for r in 0..m {
            let v = dot(&self.binv[r * m..(r + 1) * m], &self.b);
            self.xb[r] = if v < 0.0 && v > -self.opts.feas_tol { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn full_x(&self) -> Vec<f64> {
        Iterate {
            basis: &self.basis,
            xb: &self.xb,
            obj: 0.0,
            n: self.n,
        }
        .x()
    }

    fn run_phase<F>(&mut self, pricing: Pricing, observer: &mut F) -> Result<Outcome, LpError>
    where
        F: FnMut(&Iterate<'_>) -> ControlFlow<()>,
    {
        let phase2 = matches!(pricing, Pricing::Phase2);
        loop {
            if phase2 {
                let it = Iterate {
                    basis: &self.basis,
                    xb: &self.xb,
                    obj: self.objective(&pricing),
                    n: self.n,
                };
                if observer(&it).is_break() {
                    return Ok(Outcome::Stopped);
                }
            }
            let pi = self.multipliers(&pricing);
            let Some(q) = self.choose_entering(&pi, &pricing) else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(q);
            let Some(r) = self.choose_leaving(&alpha) else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(q, r, &alpha)?;
        }
    }

    /// Pivots zero-level artificials out of the basis after phase 1.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let entering = (0..self.n)
                .filter(|&j| !self.is_basic[j])
                .map(|j| (j, dot(&row, self.a.column(j)).abs()))
                .filter(|&(_, v)| v > 1e-7)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j);
            if let Some(q) = entering {
                let alpha = self.ftran(q);
                // Degenerate pivot: the artificial is at zero level.
                self.xb[r] = 0.0;
                self.pivot(q, r, &alpha)?;
            }
        }
        Ok(())
    }
}

/// Solves a standard-form LP, reporting every phase-2 basic solution to
/// `observer`. Returning `ControlFlow::Break` from the observer stops the
/// solve with [`Outcome::Stopped`].
pub(crate) fn solve_observed<F>(
    sf: &StandardForm,
    opts: SolverOptions,
    mut observer: F,
) -> Result<SimplexResult, LpError>
where
    F: FnMut(&Iterate<'_>) -> ControlFlow<()>,
{
    let m = sf.a.rows();
    let n = sf.a.cols();
    if sf.b.len() != m || sf.c.len() != n {
        return Err(LpError::Dimension(format!(
            "standard form {m}x{n} with |b|={} |c|={}",
            sf.b.len(),
            sf.c.len()
        )));
    }
    let mut tab = Tableau::new(sf, opts);

    if tab.basis.iter().any(|&j| j >= n) {
        let mut noop = |_: &Iterate<'_>| ControlFlow::Continue(());
        let outcome = tab.run_phase(Pricing::Phase1, &mut noop)?;
        debug_assert_ne!(outcome, Outcome::Unbounded);
        let infeas = tab.objective(&Pricing::Phase1);
        let scale = 1.0 + tab.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > opts.feas_tol * scale {
            return Ok(tab.result(Outcome::Infeasible, &Pricing::Phase1));
        }
        tab.drive_out_artificials()?;
        // Back in a clean state before phase 2.
        tab.refactor()?;
    }
    tab.bland = false;
    tab.degenerate = 0;
    let outcome = tab.run_phase(Pricing::Phase2, &mut observer)?;
    Ok(tab.result(outcome, &Pricing::Phase2))
}

#[cfg(test)]
pub(crate) fn solve(sf: &StandardForm, opts: SolverOptions) -> Result<SimplexResult, LpError> {
    solve_observed(sf, opts, |_| ControlFlow::Continue(()))
}

impl Tableau<'_> {
    fn result(&self, outcome: Outcome, pricing: &Pricing) -> SimplexResult {
        let pi = self.multipliers(pricing);
        let y = pi.iter().zip(&self.sign).map(|(p, s)| p * s).collect();
        SimplexResult {
            outcome,
            basis: self.basis.clone(),
            x: self.full_x(),
            y,
            obj: self.objective(pricing),
            pivots: self.pivots,
        }
    }
}
