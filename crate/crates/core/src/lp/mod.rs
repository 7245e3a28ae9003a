//! Stage-subproblem LP kernel.
//!
//! A stage subproblem has the form
//!
//! ```text
//! min  cᵀx + f
//! s.t. A x = b,  x ≥ 0,
//!      f ≥ θᵢ + βᵢᵀx   for every cut row i,
//! ```
//!
//! where the epigraph variable `f` (and the cut rows) are present only when
//! the LP carries a cost-to-go approximation. Three solve paths are offered:
//!
//! * [`solve_exact`]: basic optimal primal point plus exact multipliers.
//!   Cut rows are brought in lazily, so only cuts that matter at the optimum
//!   enter the basis. The returned point is a vertex.
//! * [`solve_primal_inexact`]: a feasible point within a budget `δ` of the
//!   optimum, chosen as the earliest primal simplex iterate that qualifies.
//! * [`solve_dual_inexact`]: a dual-feasible `(λ, μ)` whose objective is
//!   within `ε` of the optimum. It runs the simplex on the explicit dual, so
//!   every recorded iterate is dual feasible and the dual objective is
//!   monotone.
//!
//! For the LP above the dual reads
//!
//! ```text
//! max  λᵀb + Σ μᵢθᵢ
//! s.t. Aᵀλ − Σ μᵢβᵢ ≤ c,  Σ μᵢ = 1,  μ ≥ 0.
//! ```

mod matrix;
pub(crate) mod simplex;

use std::borrow::Cow;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::{dot, DenseMatrix};
use simplex::{Outcome, StandardForm};

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("pivot limit of {limit} exceeded")]
    PivotLimit { limit: usize, iterate: Vec<f64> },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("LP is infeasible")]
    Infeasible,
    #[error("LP is unbounded")]
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub max_pivots: usize,
    /// Switch to Bland's rule after `bland_factor * num_vars` degenerate pivots.
    pub bland_factor: usize,
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-11,
            max_pivots: 100_000,
            bland_factor: 50,
            refactor_every: 64,
        }
    }
}

/// An affine lower bounding row `f ≥ θ + βᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRow<'a> {
    pub beta: Cow<'a, [f64]>,
    pub theta: f64,
}

impl<'a> CutRow<'a> {
    pub fn new(beta: impl Into<Cow<'a, [f64]>>, theta: f64) -> Self {
        Self {
            beta: beta.into(),
            theta,
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.theta + dot(&self.beta, x)
    }
}

#[derive(Debug, Clone)]
pub struct LinearProgram<'a> {
    pub cost: Cow<'a, [f64]>,
    pub eq_matrix: Cow<'a, DenseMatrix>,
    /// Right-hand side, already net of the state term (`b − B x_prev`).
    pub eq_rhs: Vec<f64>,
    pub cut_rows: Vec<CutRow<'a>>,
    pub has_epigraph: bool,
}

impl<'a> LinearProgram<'a> {
    pub fn new(
        cost: impl Into<Cow<'a, [f64]>>,
        eq_matrix: impl Into<Cow<'a, DenseMatrix>>,
        eq_rhs: Vec<f64>,
    ) -> Self {
        Self {
            cost: cost.into(),
            eq_matrix: eq_matrix.into(),
            eq_rhs,
            cut_rows: Vec::new(),
            has_epigraph: false,
        }
    }

    pub fn with_epigraph(mut self, cut_rows: Vec<CutRow<'a>>) -> Self {
        self.cut_rows = cut_rows;
        self.has_epigraph = true;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let (m, n) = (self.eq_matrix.rows(), self.eq_matrix.cols());
        if m != self.num_eq() || n != self.num_vars() {
            return Err(LpError::Dimension(format!(
                "eq_matrix is {m}x{n}, expected {}x{}",
                self.num_eq(),
                self.num_vars()
            )));
        }
        if let Some((i, c)) = self
            .cut_rows
            .iter()
            .enumerate()
            .find(|(_, c)| c.beta.len() != n)
        {
            return Err(LpError::Dimension(format!(
                "cut row {i} has {} coefficients, expected {n}",
                c.beta.len()
            )));
        }
        if !self.has_epigraph && !self.cut_rows.is_empty() {
            return Err(LpError::Dimension("cut rows given without an epigraph variable".into()));
        }
        Ok(())
    }

    /// `max_i θᵢ + βᵢᵀx` (or `-inf` when there are no cut rows).
    pub fn epigraph_value(&self, x: &[f64]) -> f64 {
        self.cut_rows
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Objective of the structural point `x`, with `f` set to its smallest
    /// feasible value.
    pub fn lifted_objective(&self, x: &[f64]) -> f64 {
        let base = dot(&self.cost, x);
        if self.has_epigraph {
            base + self.epigraph_value(x)
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct PrimalDualSolution {
    pub status: LpStatus,
    /// Structural variables followed by `f` when the LP has an epigraph.
    pub x: Vec<f64>,
    pub obj: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Basic columns: `0..n` structural, `n`/`n+1` the two halves of `f`,
    /// `n+2+i` the slack of cut row `i`.
    pub basis: Vec<usize>,
}

impl PrimalDualSolution {
    fn with_status(status: LpStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            obj: match status {
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::Optimal => f64::NAN,
            },
            lambda: Vec::new(),
            mu: Vec::new(),
            basis: Vec::new(),
        }
    }

    /// The structural part of `x` (without `f`).
    pub fn structural<'s>(&'s self, lp: &LinearProgram<'_>) -> &'s [f64] {
        &self.x[..lp.num_vars()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateMode {
    Exact,
    EarlyStop,
    Retrospective,
}

#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub dual_obj: f64,
    /// Certified distance from `dual_obj` to the optimum.
    pub eps_certified: f64,
    pub mode: CertificateMode,
    /// The LP optimum, when the solve ran to optimality.
    pub optimum: Option<f64>,
}

/// An inexactness budget: absolute, or relative to `max(1, |optimum|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    Absolute(f64),
    Relative(f64),
}

impl Budget {
    pub fn resolve(self, reference: f64) -> f64 {
        match self {
            Budget::Absolute(a) => a,
            Budget::Relative(r) => r * reference.abs().max(1.0),
        }
    }

    fn is_zero(self) -> bool {
        matches!(self, Budget::Absolute(v) | Budget::Relative(v) if v <= 0.0)
    }
}

impl From<f64> for Budget {
    fn from(v: f64) -> Self {
        Budget::Absolute(v)
    }
}

/// A primal point from [`solve_primal_inexact`].
#[derive(Debug, Clone)]
pub struct PrimalPoint {
    /// Structural variables only.
    pub x: Vec<f64>,
    /// `cᵀx + max_i(θᵢ + βᵢᵀx)`.
    pub obj: f64,
    pub optimum: f64,
    pub delta_certified: f64,
}

// ---------------------------------------------------------------------------
// Primal side

struct Restricted {
    sf: StandardForm,
    active: Vec<usize>,
}

fn build_restricted(lp: &LinearProgram<'_>, active: &[usize]) -> Restricted {
    let n = lp.num_vars();
    let me = lp.num_eq();
    let epi = lp.has_epigraph;
    let ncols = if epi { n + 2 + active.len() } else { n };
    let nrows = me + active.len();
    let mut a = DenseMatrix::zeros(nrows, ncols);
    for j in 0..n {
        let col = a.column_mut(j);
        col[..me].copy_from_slice(lp.eq_matrix.column(j));
        for (l, &i) in active.iter().enumerate() {
            col[me + l] = lp.cut_rows[i].beta[j];
        }
    }
    let mut c = lp.cost.to_vec();
    let mut b = lp.eq_rhs.clone();
    if epi {
        for l in 0..active.len() {
            a.set(me + l, n, -1.0);
            a.set(me + l, n + 1, 1.0);
            a.set(me + l, n + 2 + l, 1.0);
        }
        c.extend([1.0, -1.0]);
        c.extend(std::iter::repeat_n(0.0, active.len()));
        b.extend(active.iter().map(|&i| -lp.cut_rows[i].theta));
    }
    Restricted {
        sf: StandardForm { a, b, c },
        active: active.to_vec(),
    }
}

/// Row generation over the cut rows. Calls `observe(round, x)` on every
/// phase-2 iterate of every round.
fn solve_rowgen<F>(
    lp: &LinearProgram<'_>,
    opts: &SolverOptions,
    mut observe: F,
) -> Result<(simplex::SimplexResult, Restricted), LpError>
where
    F: FnMut(usize, &[f64]) -> ControlFlow<()>,
{
    let n = lp.num_vars();
    let total = lp.cut_rows.len();
    let mut active: Vec<usize> = if lp.has_epigraph && total > 0 {
        // Start from the row that is highest at the origin.
        let zero = vec![0.0; n];
        let first = (0..total)
            .max_by(|&a, &b| lp.cut_rows[a].value(&zero).total_cmp(&lp.cut_rows[b].value(&zero)))
            .unwrap_or(0);
        vec![first]
    } else {
        Vec::new()
    };
    let mut in_active = vec![false; total];
    for &i in &active {
        in_active[i] = true;
    }
    for round in 0.. {
        let restricted = build_restricted(lp, &active);
        let res = simplex::solve_observed(&restricted.sf, *opts, |it| observe(round, &it.x()[..n]))?;
        match res.outcome {
            Outcome::Optimal => {}
            Outcome::Unbounded if lp.has_epigraph && active.len() < total => {
                active = (0..total).collect();
                in_active.iter_mut().for_each(|v| *v = true);
                continue;
            }
            _ => return Ok((res, restricted)),
        }
        if !lp.has_epigraph {
            return Ok((res, restricted));
        }
        let x = &res.x[..n];
        let f = res.x[n] - res.x[n + 1];
        let tol = opts.feas_tol * (1.0 + f.abs());
        let mut violated: Vec<(usize, f64)> = (0..total)
            .filter(|&i| !in_active[i])
            .map(|i| (i, lp.cut_rows[i].value(x) - f))
            .filter(|&(_, v)| v > tol)
            .collect();
        if violated.is_empty() {
            return Ok((res, restricted));
        }
        violated.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(i, _) in violated.iter().take(3) {
            in_active[i] = true;
            active.push(i);
        }
    }
    unreachable!()
}

fn status_of(outcome: Outcome) -> LpStatus {
    match outcome {
        Outcome::Optimal | Outcome::Stopped => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
    }
}

/// Solves the LP to optimality and returns a basic optimal solution with its
/// multipliers, or an `Infeasible`/`Unbounded` status.
pub fn solve_exact(lp: &LinearProgram<'_>, opts: &SolverOptions) -> Result<PrimalDualSolution, LpError> {
    lp.validate()?;
    if lp.has_epigraph && lp.cut_rows.is_empty() {
        return Ok(PrimalDualSolution::with_status(LpStatus::Unbounded));
    }
    let (res, restricted) = solve_rowgen(lp, opts, |_, _| ControlFlow::Continue(()))?;
    let status = status_of(res.outcome);
    if status != LpStatus::Optimal {
        return Ok(PrimalDualSolution::with_status(status));
    }
    Ok(extract_primal_dual(lp, &res, &restricted))
}

fn extract_primal_dual(
    lp: &LinearProgram<'_>,
    res: &simplex::SimplexResult,
    restricted: &Restricted,
) -> PrimalDualSolution {
    let n = lp.num_vars();
    let me = lp.num_eq();
    let mut x = res.x[..n].to_vec();
    let mut mu = vec![0.0; lp.cut_rows.len()];
    let ncols = restricted.sf.c.len();
    let mut basis = Vec::with_capacity(res.basis.len());
    for &j in &res.basis {
        if j >= ncols {
            continue;
        }
        basis.push(if j < n + 2 { j } else { n + 2 + restricted.active[j - n - 2] });
    }
    let obj = if lp.has_epigraph {
        x.push(res.x[n] - res.x[n + 1]);
        for (l, &i) in restricted.active.iter().enumerate() {
            mu[i] = -res.y[me + l];
        }
        res.obj
    } else {
        res.obj
    };
    PrimalDualSolution {
        status: LpStatus::Optimal,
        x,
        obj,
        lambda: res.y[..me].to_vec(),
        mu,
        basis,
    }
}

/// Returns a feasible point whose objective is within `delta` of the
/// optimum: the earliest primal simplex iterate of the final row-generation
/// round that qualifies once `f` is lifted onto every cut row.
pub fn solve_primal_inexact(
    lp: &LinearProgram<'_>,
    delta: impl Into<Budget>,
    opts: &SolverOptions,
) -> Result<PrimalPoint, LpError> {
    let delta = delta.into();
    lp.validate()?;
    if lp.has_epigraph && lp.cut_rows.is_empty() {
        return Err(LpError::Unbounded);
    }
    let record = !delta.is_zero();
    let mut trail: Vec<Vec<f64>> = Vec::new();
    let mut trail_round = 0;
    let (res, _) = solve_rowgen(lp, opts, |round, x| {
        if record {
            if round != trail_round {
                trail.clear();
                trail_round = round;
            }
            trail.push(x.to_vec());
        }
        ControlFlow::Continue(())
    })?;
    match res.outcome {
        Outcome::Infeasible => return Err(LpError::Infeasible),
        Outcome::Unbounded => return Err(LpError::Unbounded),
        _ => {}
    }
    let n = lp.num_vars();
    let x_opt = res.x[..n].to_vec();
    let optimum = lp.lifted_objective(&x_opt);
    let budget = delta.resolve(optimum);
    let slack = 1e-12 * (1.0 + optimum.abs());
    let picked = trail
        .into_iter()
        .map(|x| {
            let obj = lp.lifted_objective(&x);
            (x, obj)
        })
        .find(|(_, obj)| *obj <= optimum + budget + slack);
    let (x, obj) = picked.unwrap_or((x_opt, optimum));
    Ok(PrimalPoint {
        delta_certified: (obj - optimum).max(0.0),
        x,
        obj,
        optimum,
    })
}

// ---------------------------------------------------------------------------
// Dual side

struct DualForm {
    sf: StandardForm,
    me: usize,
    k: usize,
}

/// Explicit dual in standard form (as a minimization of the negated dual
/// objective). Columns: λ⁺, λ⁻, μ, dual slacks.
fn build_dual(lp: &LinearProgram<'_>) -> DualForm {
    let n = lp.num_vars();
    let me = lp.num_eq();
    let k = if lp.has_epigraph { lp.cut_rows.len() } else { 0 };
    let nrows = n + usize::from(lp.has_epigraph);
    let ncols = 2 * me + k + n;
    let mut a = DenseMatrix::zeros(nrows, ncols);
    for i in 0..me {
        let row = lp.eq_matrix.row(i);
        a.column_mut(i)[..n].copy_from_slice(&row);
        for (dst, v) in a.column_mut(me + i)[..n].iter_mut().zip(&row) {
            *dst = -v;
        }
    }
    for l in 0..k {
        let col = a.column_mut(2 * me + l);
        for (dst, v) in col[..n].iter_mut().zip(lp.cut_rows[l].beta.iter()) {
            *dst = -v;
        }
        col[n] = 1.0;
    }
    for j in 0..n {
        a.set(j, 2 * me + k + j, 1.0);
    }
    let mut b = lp.cost.to_vec();
    if lp.has_epigraph {
        b.push(1.0);
    }
    let mut c = Vec::with_capacity(ncols);
    c.extend(lp.eq_rhs.iter().map(|v| -v));
    c.extend(lp.eq_rhs.iter().copied());
    c.extend(lp.cut_rows.iter().take(k).map(|r| -r.theta));
    c.extend(std::iter::repeat_n(0.0, n));
    DualForm {
        sf: StandardForm { a, b, c },
        me,
        k,
    }
}

impl DualForm {
    fn sparse_objective(&self, lp: &LinearProgram<'_>, basis: &[usize], xb: &[f64]) -> f64 {
        let me = self.me;
        basis
            .iter()
            .zip(xb)
            .map(|(&j, &v)| {
                if j < me {
                    lp.eq_rhs[j] * v
                } else if j < 2 * me {
                    -lp.eq_rhs[j - me] * v
                } else if j < 2 * me + self.k {
                    lp.cut_rows[j - 2 * me].theta * v
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn unpack(&self, basis: &[usize], xb: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let me = self.me;
        let mut lambda = vec![0.0; me];
        let mut mu = vec![0.0; self.k];
        for (&j, &v) in basis.iter().zip(xb) {
            if j < me {
                lambda[j] += v;
            } else if j < 2 * me {
                lambda[j - me] -= v;
            } else if j < 2 * me + self.k {
                mu[j - 2 * me] = v.max(0.0);
            }
        }
        (lambda, mu)
    }
}

struct TrailEntry {
    basis: Vec<usize>,
    xb: Vec<f64>,
    obj: f64,
}

/// Returns a dual-feasible `(λ, μ)` with `dual_obj ≥ optimum − eps`.
///
/// With `eps = 0` the dual optimum is returned. With a `primal_upper_hint`
/// (which must be an upper bound on the optimum, e.g. the objective of a
/// feasible primal point) the dual simplex stops at the first iterate
/// with `hint − dual_obj ≤ eps`. Without a hint the solve runs to optimality
/// and the earliest iterate within `eps` of the optimum is returned.
///
/// Infeasible or unbounded LPs are faults: a finite optimum is a
/// precondition.
///
/// When the LP has cut rows, the dual is restricted to the rows that are
/// active at the end of primal row generation. Setting the multipliers of
/// the other rows to zero keeps every restricted iterate dual feasible for
/// the full LP, and the restricted optimum equals the full one.
pub fn solve_dual_inexact(
    lp: &LinearProgram<'_>,
    eps: impl Into<Budget>,
    primal_upper_hint: Option<f64>,
    opts: &SolverOptions,
) -> Result<DualCertificate, LpError> {
    let eps = eps.into();
    lp.validate()?;
    if !lp.has_epigraph || lp.cut_rows.len() <= 1 {
        return solve_dual_form(lp, eps, primal_upper_hint, opts);
    }
    let (res, restricted) = solve_rowgen(lp, opts, |_, _| ControlFlow::Continue(()))?;
    match res.outcome {
        Outcome::Infeasible => return Err(LpError::Infeasible),
        Outcome::Unbounded => return Err(LpError::Unbounded),
        _ => {}
    }
    let mut active = restricted.active;
    active.sort_unstable();
    let sub = LinearProgram {
        cost: Cow::Borrowed(&lp.cost),
        eq_matrix: Cow::Borrowed(&lp.eq_matrix),
        eq_rhs: lp.eq_rhs.clone(),
        cut_rows: active
            .iter()
            .map(|&i| CutRow::new(Cow::Borrowed(&*lp.cut_rows[i].beta), lp.cut_rows[i].theta))
            .collect(),
        has_epigraph: true,
    };
    let mut cert = solve_dual_form(&sub, eps, primal_upper_hint, opts)?;
    let mut mu = vec![0.0; lp.cut_rows.len()];
    for (&i, &m) in active.iter().zip(&cert.mu) {
        mu[i] = m;
    }
    cert.mu = mu;
    Ok(cert)
}

fn solve_dual_form(
    lp: &LinearProgram<'_>,
    eps: Budget,
    primal_upper_hint: Option<f64>,
    opts: &SolverOptions,
) -> Result<DualCertificate, LpError> {
    let dual = build_dual(lp);
    let exact = eps.is_zero();
    let mut trail: Vec<TrailEntry> = Vec::new();
    let mut stopped_at: Option<TrailEntry> = None;
    let res = simplex::solve_observed(&dual.sf, *opts, |it| {
        let obj = dual.sparse_objective(lp, it.basis, it.xb);
        match (exact, primal_upper_hint) {
            (true, _) => ControlFlow::Continue(()),
            (false, Some(hint)) => {
                if hint - obj <= eps.resolve(hint) {
                    stopped_at = Some(TrailEntry {
                        basis: it.basis.to_vec(),
                        xb: it.xb.to_vec(),
                        obj,
                    });
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            }
            (false, None) => {
                trail.push(TrailEntry {
                    basis: it.basis.to_vec(),
                    xb: it.xb.to_vec(),
                    obj,
                });
                ControlFlow::Continue(())
            }
        }
    })?;
    match res.outcome {
        // Dual infeasible: primal unbounded (or infeasible).
        Outcome::Infeasible => return Err(LpError::Unbounded),
        // Dual unbounded: primal infeasible.
        Outcome::Unbounded => return Err(LpError::Infeasible),
        _ => {}
    }
    if let Some(entry) = stopped_at {
        let (lambda, mu) = dual.unpack(&entry.basis, &entry.xb);
        let hint = primal_upper_hint.unwrap_or(entry.obj);
        return Ok(DualCertificate {
            lambda,
            mu,
            dual_obj: entry.obj,
            eps_certified: (hint - entry.obj).max(0.0),
            mode: CertificateMode::EarlyStop,
            optimum: None,
        });
    }
    let optimum = dual.sparse_objective(lp, &res.basis, &xb_of(&res));
    let (entry_basis, entry_xb, entry_obj) = if exact || primal_upper_hint.is_some() {
        (res.basis.clone(), xb_of(&res), optimum)
    } else {
        let budget = eps.resolve(optimum);
        match trail.into_iter().find(|e| e.obj >= optimum - budget) {
            Some(e) => (e.basis, e.xb, e.obj),
            None => (res.basis.clone(), xb_of(&res), optimum),
        }
    };
    let (lambda, mu) = dual.unpack(&entry_basis, &entry_xb);
    let mode = if exact {
        CertificateMode::Exact
    } else if primal_upper_hint.is_some() {
        CertificateMode::EarlyStop
    } else {
        CertificateMode::Retrospective
    };
    Ok(DualCertificate {
        lambda,
        mu,
        dual_obj: entry_obj,
        eps_certified: (optimum - entry_obj).max(0.0),
        mode,
        optimum: Some(optimum),
    })
}

fn xb_of(res: &simplex::SimplexResult) -> Vec<f64> {
    res.basis
        .iter()
        .map(|&j| res.x.get(j).copied().unwrap_or(0.0))
        .collect()
}

/// Dual objective `λᵀ(b − Bx̄) + μᵀθ` of an arbitrary `(λ, μ)`.
pub fn dual_objective(lp: &LinearProgram<'_>, lambda: &[f64], mu: &[f64]) -> f64 {
    dot(lambda, &lp.eq_rhs)
        + mu.iter()
            .zip(&lp.cut_rows)
            .map(|(m, r)| m * r.theta)
            .sum::<f64>()
}

/// Largest violation of the dual constraints `Aᵀλ − Σ μᵢβᵢ ≤ c`, `Σ μᵢ = 1`,
/// `μ ≥ 0`. Zero means dual feasible.
pub fn dual_feasibility_residual(lp: &LinearProgram<'_>, lambda: &[f64], mu: &[f64]) -> f64 {
    assert_eq!(lambda.len(), lp.num_eq(), "lambda length");
    assert_eq!(mu.len(), lp.cut_rows.len(), "mu length");
    let mut reduced = lp.eq_matrix.tr_mul_vec(lambda);
    for (m, row) in mu.iter().zip(&lp.cut_rows) {
        if *m != 0.0 {
            for (r, b) in reduced.iter_mut().zip(row.beta.iter()) {
                *r -= m * b;
            }
        }
    }
    let mut resid = reduced
        .iter()
        .zip(lp.cost.iter())
        .map(|(r, c)| (r - c).max(0.0))
        .fold(0.0, f64::max);
    if lp.has_epigraph {
        resid = resid.max((mu.iter().sum::<f64>() - 1.0).abs());
        resid = mu.iter().map(|m| (-m).max(0.0)).fold(resid, f64::max);
    }
    resid
}

/// Largest violation of `Ax = b`, `x ≥ 0` and the cut rows for a point
/// `x` laid out as in [`PrimalDualSolution::x`].
pub fn primal_residual(lp: &LinearProgram<'_>, x: &[f64]) -> f64 {
    let n = lp.num_vars();
    let ax = lp.eq_matrix.mul_vec(&x[..n]);
    let mut resid = ax
        .iter()
        .zip(&lp.eq_rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    resid = x[..n].iter().map(|v| (-v).max(0.0)).fold(resid, f64::max);
    if lp.has_epigraph {
        let f = x[n];
        resid = lp
            .cut_rows
            .iter()
            .map(|r| (r.value(&x[..n]) - f).max(0.0))
            .fold(resid, f64::max);
    }
    resid
}

/// Largest complementarity product between primal slacks and multipliers.
pub fn complementarity_residual(lp: &LinearProgram<'_>, sol: &PrimalDualSolution) -> f64 {
    let n = lp.num_vars();
    let mut reduced = lp.eq_matrix.tr_mul_vec(&sol.lambda);
    for (m, row) in sol.mu.iter().zip(&lp.cut_rows) {
        for (r, b) in reduced.iter_mut().zip(row.beta.iter()) {
            *r -= m * b;
        }
    }
    let mut resid = reduced
        .iter()
        .zip(lp.cost.iter())
        .zip(&sol.x[..n])
        .map(|((r, c), x)| ((c - r) * x).abs())
        .fold(0.0, f64::max);
    if lp.has_epigraph {
        let f = sol.x[n];
        resid = sol
            .mu
            .iter()
            .zip(&lp.cut_rows)
            .map(|(m, r)| (m * (f - r.value(&sol.x[..n]))).abs())
            .fold(resid, f64::max);
    }
    resid
}
