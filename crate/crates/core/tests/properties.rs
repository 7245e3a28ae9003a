use isddp::engine::ddp::{run_iddp_from, IddpConfig};
use isddp::engine::sddp::{evaluate_policy, run_isddp, run_isddp_from, IsddpConfig};
use isddp::engine::{upper_bound_ci, PoolSet, RunResult};
use isddp::lp::SolverOptions;
use isddp::model::Instance;
use isddp::oracle;
use isddp::schedules::ScheduleSpec;
use isddp::toys;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn schedule_strategy() -> impl Strategy<Value = ScheduleSpec> {
    prop_oneof![
        Just(ScheduleSpec::exact()),
        (0.0..0.3f64, 0.0..0.3f64).prop_map(|(d, e)| ScheduleSpec::constant(d, e)),
        (0.01..0.5f64).prop_map(|b| ScheduleSpec::relative(b, 1e-12)),
        (0.01..0.5f64).prop_map(|b| ScheduleSpec::absolute(b, 1e-12)),
    ]
}

fn run(inst: &Instance, schedule: ScheduleSpec, iters: usize, seed: u64, pools: Option<PoolSet>) -> RunResult {
    match inst {
        Instance::Deterministic(m) => run_iddp_from(
            m,
            &IddpConfig {
                schedule,
                tol: 0.0,
                max_iter: iters,
                ..IddpConfig::default()
            },
            pools,
        )
        .unwrap(),
        Instance::Stochastic(m) => run_isddp_from(
            m,
            &IsddpConfig {
                schedule,
                n_paths: 2,
                stop_on_gap: false,
                max_iter: iters,
                seed,
                ..IsddpConfig::default()
            },
            pools,
        )
        .unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cuts_stay_below_cost_to_go(
        toy in 0..toys::NAMES.len(),
        schedule in schedule_strategy(),
        seed in 0u64..1000,
    ) {
        let inst = toys::all().swap_remove(toy);
        let model = inst.to_stochastic();
        let res = run(&inst, schedule, 8, seed, None);
        for t in 2..=model.horizon() {
            let states = oracle::sample_reachable_states(&model, t, 6, seed).unwrap();
            for x in states {
                let q = oracle::exact_recourse(&model, t, &x).unwrap();
                for cut in res.pools.pool(t).cuts() {
                    prop_assert!(cut.value(&x) <= q + 1e-7, "stage {t}: {} > {q}", cut.value(&x));
                }
            }
        }
    }

    #[test]
    fn lower_bound_is_monotone_and_valid(
        toy in 0..toys::NAMES.len(),
        schedule in schedule_strategy(),
        seed in 0u64..1000,
    ) {
        let inst = toys::all().swap_remove(toy);
        let v = oracle::extensive_form(&inst).unwrap();
        let res = run(&inst, schedule, 10, seed, None);
        let lbs: Vec<f64> = res.log.records.iter().map(|r| r.lb).collect();
        for w in lbs.windows(2) {
            prop_assert!(w[1] >= w[0], "{lbs:?}");
        }
        prop_assert!(lbs.iter().all(|lb| *lb <= v + 1e-7), "{lbs:?} vs {v}");
    }

    #[test]
    fn continuing_a_run_only_raises_the_approximation(
        toy in 0..toys::NAMES.len(),
        seed in 0u64..1000,
    ) {
        let inst = toys::all().swap_remove(toy);
        let model = inst.to_stochastic();
        let first = run(&inst, ScheduleSpec::exact(), 3, seed, None);
        let second = run(&inst, ScheduleSpec::exact(), 3, seed + 1, Some(first.pools.clone()));
        for t in 2..=model.horizon() {
            let before = first.pools.pool(t).cuts();
            let after = second.pools.pool(t).cuts();
            prop_assert!(after.len() >= before.len());
            prop_assert_eq!(&after[..before.len()], before);
            for x in oracle::sample_reachable_states(&model, t, 5, seed).unwrap() {
                prop_assert!(second.pools.evaluate(t, &x) >= first.pools.evaluate(t, &x));
            }
        }
    }

    #[test]
    fn cost_to_go_is_convex(toy in 0..toys::NAMES.len(), w in 0.0..=1.0f64, seed in 0u64..1000) {
        let model = toys::all().swap_remove(toy).to_stochastic();
        for t in 2..=model.horizon() {
            let xs = oracle::sample_reachable_states(&model, t, 2, seed).unwrap();
            let mid: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(a, b)| w * a + (1.0 - w) * b).collect();
            let q = |x: &[f64]| oracle::exact_recourse(&model, t, x).unwrap();
            let chord = w * q(&xs[0]) + (1.0 - w) * q(&xs[1]);
            prop_assert!(q(&mid) <= chord + 1e-9, "stage {t}: {} > {chord}", q(&mid));
        }
    }
}

#[test]
fn converged_policy_value_equals_extensive_form() {
    let model = toys::stochastic_t3_m2();
    let v = oracle::extensive_form_value(&model).unwrap();
    let res = run(&Instance::Stochastic(model.clone()), ScheduleSpec::exact(), 40, 5, None);
    let lb = res.log.last().unwrap().lb;
    assert!((lb - v).abs() < 1e-7, "lb {lb} v* {v}");
    let policy = oracle::policy_value_exact(&model, &res.pools).unwrap();
    assert!((policy - v).abs() < 1e-7, "policy {policy} v* {v}");
}

#[test]
fn sampled_evaluation_agrees_with_enumeration() {
    let model = toys::stochastic_t4_m3();
    let res = run(&Instance::Stochastic(model.clone()), ScheduleSpec::exact(), 5, 1, None);
    let exact = oracle::policy_value_exact(&model, &res.pools).unwrap();
    let samples = evaluate_policy(&model, &res.pools, 2000, 9, &SolverOptions::default()).unwrap();
    let ci = upper_bound_ci(&samples, 1.96);
    let se = ci.std / (samples.len() as f64).sqrt();
    assert!((ci.mean - exact).abs() <= 3.0 * se, "mean {} exact {exact} se {se}", ci.mean);
}

#[test]
fn converged_evaluation_mean_is_near_lower_bound() {
    let model = toys::stochastic_t3_m2();
    let res = run_isddp(
        &model,
        &IsddpConfig {
            n_paths: 4,
            stop_on_gap: false,
            max_iter: 30,
            ..IsddpConfig::default()
        },
    )
    .unwrap();
    let lb = res.log.last().unwrap().lb;
    let samples = evaluate_policy(&model, &res.pools, 1000, 4, &SolverOptions::default()).unwrap();
    let ci = upper_bound_ci(&samples, 1.96);
    let se = ci.std / (samples.len() as f64).sqrt();
    assert!((ci.mean - lb).abs() <= 3.0 * se, "mean {} lb {lb}", ci.mean);
}

#[test]
fn confidence_bound_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dist = Normal::new(3.0, 2.0).unwrap();
    let trials = 4000;
    let covered = (0..trials)
        .filter(|_| {
            let s: Vec<f64> = (0..60).map(|_| dist.sample(&mut rng)).collect();
            upper_bound_ci(&s, 1.96).value >= 3.0
        })
        .count();
    let rate = covered as f64 / trials as f64;
    // One-sided 97.5% bound; the t correction at 60 samples is small.
    assert!((0.96..=0.985).contains(&rate), "coverage {rate}");
}
