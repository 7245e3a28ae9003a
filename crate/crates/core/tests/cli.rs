use std::path::Path;
use std::process::{Command, Output};

use isddp::experiment::RunSummary;
use isddp::model::Instance;
use isddp::oracle;
use isddp::toys;
use tempfile::TempDir;

fn isddp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isddp"))
        .args(args)
        .env("ISDDP_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_body_without_timing(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let wall = header.iter().position(|h| *h == "wall_ms");
    lines
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != wall)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn gen_writes_parseable_deterministic_files() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = isddp(&["gen", "-T", "6", "-n", "4", "--seed", "9", "--out", path_str(p)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("T = 6"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let inst = Instance::load(&a).unwrap();
    assert_eq!(inst.horizon(), 6);
    assert_eq!(Instance::load(&a).unwrap(), inst);

    let toy = dir.path().join("toy.json");
    assert_eq!(code(&isddp(&["gen", "--toy", "det-t3", "--out", path_str(&toy)])), 0);
    assert_eq!(Instance::load(&toy).unwrap(), toys::by_name("det-t3").unwrap());
}

#[test]
fn gen_accepts_two_stage_horizon_and_rejects_bad_specs() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("t2.json");
    assert_eq!(code(&isddp(&["gen", "-T", "2", "-n", "2", "-M", "3", "--out", path_str(&p)])), 0);
    let out = dir.path().join("t2.csv");
    let run = isddp(&["solve", "--instance", path_str(&p), "--preset", "ISDDP-LP 1", "--paths", "20", "--out", path_str(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let bad = isddp(&["gen", "-T", "1", "--out", path_str(&dir.path().join("x.json"))]);
    assert_eq!(code(&bad), 1);
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());
}

#[test]
fn solve_exact_preset_closes_the_gap_on_a_toy() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run.csv");
    let res = isddp(&[
        "solve", "--toy", "sto-t3-m2", "--algo", "sddp", "--no-gap-stop", "--max-iter", "30", "--paths", "2",
        "--out", path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("iter,lb,ub,gap,n_paths,wall_ms,eps_bar,eps0"));
    assert_eq!(text.lines().count(), 31);
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.summary.json")).unwrap()).unwrap();
    let v = oracle::extensive_form(&toys::by_name("sto-t3-m2").unwrap()).unwrap();
    assert!((summary.lb - v).abs() < 1e-6, "lb {} v* {v}", summary.lb);
    assert_eq!(summary.iterations, 30);
}

#[test]
fn deterministic_instance_through_either_engine_gives_the_same_log() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("ddp.csv");
    let b = dir.path().join("sddp.csv");
    let common = ["--toy", "det-t5", "--max-iter", "6"];
    let ddp = isddp(&[&["solve", "--algo", "ddp", "--tol", "1e-9", "--out", path_str(&a)][..], &common].concat());
    let sddp = isddp(&[&["solve", "--algo", "sddp", "--gap-tol", "1e-9", "--out", path_str(&b)][..], &common].concat());
    assert_eq!(code(&ddp), 0);
    assert_eq!(code(&sddp), 0);
    assert_eq!(csv_body_without_timing(&a), csv_body_without_timing(&b));
}

#[test]
fn repeated_solves_are_identical() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("p.json");
    assert_eq!(code(&isddp(&["gen", "-T", "4", "-n", "2", "-M", "4", "--seed", "3", "--out", path_str(&inst)])), 0);
    let mut logs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let res = isddp(&[
            "solve", "--instance", path_str(&inst), "--preset", "ISDDP-LP 2", "--paths", "30", "--seed", "4",
            "--no-timing", "--out", path_str(&out),
        ]);
        assert_eq!(code(&res), 0);
        logs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert!(!String::from_utf8_lossy(&logs[0]).contains("wall_ms"));
}

#[test]
fn saved_cuts_warm_start_a_later_run() {
    let dir = TempDir::new().unwrap();
    let cuts = dir.path().join("cuts.json");
    let first = isddp(&[
        "solve", "--toy", "sto-t4-m3", "--algo", "sddp", "--no-gap-stop", "--max-iter", "30",
        "--save-cuts", path_str(&cuts), "--out", path_str(&dir.path().join("a.csv")),
    ]);
    assert_eq!(code(&first), 0);
    let second = isddp(&[
        "solve", "--toy", "sto-t4-m3", "--algo", "sddp", "--no-gap-stop", "--max-iter", "1",
        "--load-cuts", path_str(&cuts), "--out", path_str(&dir.path().join("b.csv")),
    ]);
    assert_eq!(code(&second), 0);
    let read = |name: &str| -> RunSummary {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    assert!(read("b.summary.json").lb >= read("a.summary.json").lb);

    let wrong = isddp(&[
        "solve", "--toy", "sto-t3-m2", "--algo", "sddp", "--load-cuts", path_str(&cuts),
        "--out", path_str(&dir.path().join("c.csv")),
    ]);
    assert_ne!(code(&wrong), 0);
}

#[test]
fn solver_fault_exits_2_and_keeps_the_csv() {
    let dir = TempDir::new().unwrap();
    // Stage 1 forces x = 1; stage 2 then needs x₂ = −x₁ < 0.
    let inst = r#"{"kind": "deterministic",
        "stages": [
            {"A": {"rows": 1, "cols": 1, "data": [[1.0]]}, "B": {"rows": 1, "cols": 1, "data": [[0.0]]}, "b": [1.0], "c": [0.0]},
            {"A": {"rows": 1, "cols": 1, "data": [[1.0]]}, "B": {"rows": 1, "cols": 1, "data": [[1.0]]}, "b": [0.0], "c": [1.0]}
        ],
        "x0": [0.0], "floors": [0.0]}"#;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, inst).unwrap();
    let out = dir.path().join("bad.csv");
    let res = isddp(&["solve", "--instance", path_str(&path), "--algo", "ddp", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("infeasible"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("iter,lb,ub"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&isddp(&["solve", "--bogus"])), 1);
    assert_eq!(code(&isddp(&["oracle", "--toy", "nope"])), 1);
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    let res = isddp(&["solve", "--toy", "det-t2", "--algo", "ddp", "--schedule-mode", "relative", "--out", path_str(&out)]);
    assert_eq!(code(&res), 1);
    assert_eq!(code(&isddp(&["--help"])), 0);
}

#[test]
fn oracle_prints_known_values_and_guards_large_trees() {
    let v = stdout(&isddp(&["oracle", "--toy", "sto-t3-m2"]));
    let want = oracle::extensive_form(&toys::by_name("sto-t3-m2").unwrap()).unwrap();
    assert!((v.trim().parse::<f64>().unwrap() - want).abs() < 1e-9);

    // det-t2, stage 2 from empty stock: cover demand 5 by producing 3 at
    // cost 3 and outsourcing 2 at cost 4.
    let q = stdout(&isddp(&["oracle", "--toy", "det-t2", "--stage", "2", "--state", "0,0,0,3,10"]));
    assert!((q.trim().parse::<f64>().unwrap() - (3.0 * 3.0 + 2.0 * 4.0)).abs() < 1e-9, "{q}");

    let dir = TempDir::new().unwrap();
    let big = dir.path().join("big.json");
    assert_eq!(code(&isddp(&["gen", "-T", "6", "-M", "10", "--out", path_str(&big)])), 0);
    let res = isddp(&["oracle", "--instance", path_str(&big)]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn compare_runs_presets_and_checks_instances() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("p.json");
    assert_eq!(code(&isddp(&["gen", "-T", "4", "-n", "2", "-M", "4", "--seed", "1", "--out", path_str(&inst)])), 0);
    let report = dir.path().join("report.csv");
    let runs = dir.path().join("runs");
    let res = isddp(&[
        "compare", "--instance", path_str(&inst), "--paths", "20", "--assets", "2", "--out-dir", path_str(&runs),
        "--out", path_str(&report),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let text = stdout(&res);
    assert!(text.contains("ISDDP-LP 1") && text.contains("ISDDP-LP 4"), "{text}");
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 5);

    let sddp = runs.join("sddp.summary.json");
    let same = isddp(&["compare", "--summaries", path_str(&sddp), path_str(&sddp)]);
    assert_eq!(code(&same), 0);
    assert!(stdout(&same).contains("1.00"));

    let other = dir.path().join("toy.csv");
    assert_eq!(code(&isddp(&["solve", "--toy", "sto-t3-m2", "--algo", "sddp", "--out", path_str(&other)])), 0);
    let mismatch = isddp(&["compare", "--summaries", path_str(&sddp), path_str(&dir.path().join("toy.summary.json"))]);
    assert_eq!(code(&mismatch), 1);
}

#[test]
fn shipped_instance_files_match_the_toys() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances");
    for name in toys::NAMES {
        let inst = Instance::load(&dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(inst, toys::by_name(name).unwrap(), "{name}");
    }
}
