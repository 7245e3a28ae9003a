use isddp::cuts::{build_terminal_cut, CutMeta, RealizationData};
use isddp::engine::ddp::{backward_pass, forward_pass, run_iddp, IddpConfig};
use isddp::engine::{stage_lp, PoolSet};
use isddp::lp::{dual_feasibility_residual, solve_dual_inexact, solve_exact, Budget, SolverOptions};
use isddp::oracle;
use isddp::toys;

const META: CutMeta = CutMeta {
    stage: 2,
    iteration: 1,
    eps: 0.0,
};

#[test]
fn one_dimensional_recourse_cut_is_the_identity() {
    // Q(x) = max(x₁, 0); at x̄ = (2, 0) the exact cut is C(x) = x₁.
    let model = toys::one_dim();
    let pools = PoolSet::new(&model);
    let x = [2.0, 0.0];
    let data = model.realization(2, 0);
    let lp = stage_lp(data, &x, &pools, 2);
    let cert = solve_dual_inexact(&lp, Budget::Absolute(0.0), None, &SolverOptions::default()).unwrap();
    let rhs = data.rhs.clone();
    let cut = build_terminal_cut(
        &[RealizationData {
            rhs: &rhs,
            state_matrix: &data.state_matrix,
            prob: 1.0,
        }],
        &[cert],
        META,
    )
    .unwrap();
    assert!(cut.theta.abs() < 1e-12);
    assert!((cut.beta[0] - 1.0).abs() < 1e-12 && cut.beta[1].abs() < 1e-12, "{:?}", cut.beta);
    assert!((cut.value(&x) - oracle::exact_recourse(&model, 2, &x).unwrap()).abs() < 1e-12);
}

#[test]
fn backward_dual_of_a_terminal_subproblem_is_within_budget() {
    let model = toys::deterministic_t2().to_stochastic();
    let pools = PoolSet::new(&model);
    let opts = SolverOptions::default();
    for x in oracle::sample_reachable_states(&model, 2, 20, 1).unwrap() {
        let lp = stage_lp(model.realization(2, 0), &x, &pools, 2);
        let v = solve_exact(&lp, &opts).unwrap().obj;
        let cert = solve_dual_inexact(&lp, Budget::Absolute(0.1), None, &opts).unwrap();
        assert!(dual_feasibility_residual(&lp, &cert.lambda, &cert.mu) <= opts.feas_tol);
        assert!(cert.dual_obj >= v - 0.1 - 1e-12 && cert.dual_obj <= v + 1e-9, "{} vs {v}", cert.dual_obj);
    }
}

#[test]
fn middle_stage_cuts_on_three_stage_toy() {
    let det = toys::deterministic_t3();
    let model = det.to_stochastic();
    let opts = SolverOptions::default();
    for (eps, lo, hi) in [(0.0, -1e-9, 1e-9), (0.1, -1e-9, 0.1 + 1e-9)] {
        let mut pools = PoolSet::new(&model);
        // A few exact iterations first so the middle stage sees real cuts.
        for k in 1..=2 {
            let path = forward_pass(&det, &pools, &[Budget::Absolute(0.0); 3], &opts).unwrap();
            backward_pass(&det, &mut pools, &path, &[Budget::Absolute(0.0); 2], k, &opts).unwrap();
        }
        let path = forward_pass(&det, &pools, &[Budget::Absolute(0.0); 3], &opts).unwrap();
        let (cuts, _) = backward_pass(&det, &mut pools, &path, &[Budget::Absolute(eps); 2], 3, &opts).unwrap();
        for cut in &cuts {
            let t = cut.stage;
            let x = &path.states[t - 2];
            // The approximate cost-to-go uses the pools after this pass, as
            // the backward pass does.
            let approx = oracle::approx_recourse(&model, &pools, t, x).unwrap();
            let gap = approx - cut.value(x);
            assert!((lo..=hi).contains(&gap), "eps {eps}, stage {t}: gap {gap}");
        }
    }
}

#[test]
fn converged_pools_give_optimal_forward_cost() {
    let det = toys::deterministic_t3();
    let v = oracle::extensive_form_value(&det.to_stochastic()).unwrap();
    let res = run_iddp(
        &det,
        &IddpConfig {
            tol: 1e-9,
            ..IddpConfig::default()
        },
    )
    .unwrap();
    let path = forward_pass(&det, &res.pools, &[Budget::Absolute(0.0); 3], &SolverOptions::default()).unwrap();
    assert!((path.cost - v).abs() < 1e-9, "Ub {} v* {v}", path.cost);
}
