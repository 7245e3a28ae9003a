use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use isddp::engine::runlog::Timing;
use isddp::engine::PoolSet;
use isddp::experiment::{self, Algorithm, ExperimentError, RunConfig, RunSummary};
use isddp::model::Instance;
use isddp::oracle::{self, OracleError};
use isddp::portfolio::{self, PortfolioSpec, ReturnModel};
use isddp::schedules::{ScheduleSpec, EXACT_TOL};
use isddp::toys;

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser)]
#[command(name = "isddp", version, about = "Nested cutting-plane solvers for multistage linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file: a generated portfolio problem or a shipped toy.
    Gen(GenArgs),
    /// Run one engine on an instance and write its iteration log.
    Solve(SolveArgs),
    /// Run several presets on one instance, or compare saved summaries.
    Compare(CompareArgs),
    /// Print the optimal value of an instance or of one cost-to-go function.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "toy")]
    instance: Option<PathBuf>,
    /// Name of a shipped toy instance.
    #[arg(long)]
    toy: Option<String>,
}

impl InstanceArgs {
    fn load(&self) -> Result<(Instance, PathBuf), Failure> {
        match (&self.instance, &self.toy) {
            (Some(path), _) => {
                let inst = Instance::load(path)
                    .with_context(|| format!("loading {}", path.display()))
                    .map_err(Failure::usage)?;
                Ok((inst, path.clone()))
            }
            (None, Some(name)) => toys::by_name(name)
                .map(|inst| (inst, PathBuf::from(format!("toy:{name}"))))
                .ok_or_else(|| Failure::usage(unknown_toy(name))),
            (None, None) => Err(Failure::usage(anyhow!("pass --instance FILE or --toy NAME"))),
        }
    }
}

fn unknown_toy(name: &str) -> anyhow::Error {
    anyhow!("unknown toy {name:?}; known: {}", toys::NAMES.join(", "))
}

#[derive(Args)]
struct GenArgs {
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Write a shipped toy instead of a portfolio instance.
    #[arg(long)]
    toy: Option<String>,
    #[arg(short = 'T', long = "horizon", default_value_t = 6)]
    horizon: usize,
    /// Number of risky assets.
    #[arg(short, long, default_value_t = 4)]
    n: usize,
    /// Realizations per random stage.
    #[arg(short = 'M', long = "realizations", default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.004)]
    risk_free: f64,
    /// Largest fraction of wealth in one risky asset.
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    /// Read gross returns from this CSV instead of sampling them.
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Same buy and sell cost for every asset instead of sampled ones.
    #[arg(long)]
    transaction_cost: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Relative,
    Absolute,
    Constant,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Named preset, e.g. "SDDP" or "ISDDP-LP 2"; overrides --algo and the
    /// schedule flags.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum, default_value_t = Algorithm::Isddp)]
    algo: Algorithm,
    /// Defaults to exact for ddp and sddp, relative otherwise.
    #[arg(long, value_enum)]
    schedule_mode: Option<ModeArg>,
    #[arg(long, default_value_t = 0.1)]
    eps_bar: f64,
    #[arg(long, default_value_t = EXACT_TOL)]
    eps0: f64,
    /// Forward accuracy in constant mode.
    #[arg(long, default_value_t = 0.05)]
    delta_const: f64,
    /// Backward accuracy in constant mode.
    #[arg(long, default_value_t = 0.05)]
    eps_const: f64,
}

impl ScheduleArgs {
    fn resolve(&self) -> Result<(Algorithm, ScheduleSpec, String), Failure> {
        if let Some(name) = &self.preset {
            let p = experiment::preset_by_name(name).ok_or_else(|| {
                let known: Vec<_> = experiment::presets().iter().map(|p| p.name).collect();
                Failure::usage(anyhow!("unknown preset {name:?}; known: {}", known.join(", ")))
            })?;
            return Ok((p.algorithm, p.schedule, p.name.to_string()));
        }
        let mode = self.schedule_mode.unwrap_or(if self.algo.is_exact() {
            ModeArg::Exact
        } else {
            ModeArg::Relative
        });
        let schedule = match mode {
            ModeArg::Exact => ScheduleSpec::exact(),
            ModeArg::Relative => ScheduleSpec::relative(self.eps_bar, self.eps0),
            ModeArg::Absolute => ScheduleSpec::absolute(self.eps_bar, self.eps0),
            ModeArg::Constant => ScheduleSpec::constant(self.delta_const, self.eps_const),
        };
        Ok((self.algo, schedule, self.algo.to_string()))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Forward paths per iteration.
    #[arg(long, default_value_t = 1)]
    paths: usize,
    #[arg(long, default_value_t = 0.05)]
    gap_tol: f64,
    /// Run all --max-iter iterations of sddp and isddp regardless of the gap.
    #[arg(long)]
    no_gap_stop: bool,
    /// Absolute stopping tolerance of ddp and iddp.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InstanceArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Iteration log CSV. The summary goes to the same path with extension
    /// `.summary.json`.
    #[arg(long)]
    out: PathBuf,
    /// Leave the wall_ms column out of the CSV.
    #[arg(long)]
    no_timing: bool,
    /// Save the final cut pools to this JSON file.
    #[arg(long)]
    save_cuts: Option<PathBuf>,
    /// Start from cut pools saved by an earlier run.
    #[arg(long)]
    load_cuts: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Presets to run, baseline first. Defaults to all five.
    #[arg(long, value_delimiter = ',')]
    presets: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
    /// Compare these saved summaries instead of running anything.
    #[arg(long, num_args = 1.., conflicts_with_all = ["instance", "toy", "presets"])]
    summaries: Vec<PathBuf>,
    /// Number of assets shown in the report.
    #[arg(long)]
    assets: Option<usize>,
    /// Directory for per-run logs and summaries.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Evaluate the cost-to-go function of this stage instead of the root.
    #[arg(long, requires = "state")]
    stage: Option<usize>,
    /// Previous-stage decision, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    state: Option<Vec<f64>>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: error.into(),
        }
    }

    fn solver(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_SOLVER,
            error: error.into(),
        }
    }

    fn io(error: std::io::Error, path: &Path) -> Self {
        Self::usage(anyhow::Error::new(error).context(format!("writing {}", path.display())))
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Fault(_) => Failure::solver(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = if e.is_guard() { EXIT_GUARD } else { EXIT_SOLVER };
        Failure { code, error: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ISDDP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("ISDDP_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::io(e, path))
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let instance = if let Some(name) = &a.toy {
        toys::by_name(name).ok_or_else(|| Failure::usage(unknown_toy(name)))?
    } else {
        let spec = PortfolioSpec {
            horizon: a.horizon,
            n: a.n,
            m: a.m,
            risk_free_return: a.risk_free,
            u: a.u,
            seed: a.seed,
            return_model: match &a.returns {
                Some(path) => ReturnModel::FromFile { path: path.clone() },
                None => ReturnModel::Synthetic,
            },
            transaction_cost: a.transaction_cost,
            initial_holdings: None,
        };
        Instance::Stochastic(portfolio::generate_instance(&spec).map_err(Failure::usage)?)
    };
    write_file(&a.out, &instance.to_json())?;
    let model = instance.to_stochastic();
    let m: Vec<String> = (2..=model.horizon())
        .map(|t| model.num_realizations(t).to_string())
        .collect();
    let floors: Vec<String> = model.floors.iter().map(|f| format!("{f:.4}")).collect();
    println!("wrote {}", a.out.display());
    println!("T = {}", model.horizon());
    if a.toy.is_none() {
        println!("n = {}", a.n);
    }
    println!("stage variables = {}", model.var_dim(1));
    println!("M = [{}]", m.join(", "));
    println!("floors = [{}]", floors.join(", "));
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Runs one configuration and writes its CSV log and summary. On a fault
/// the completed iterations are still written.
fn solve_and_write(
    label: &str,
    cfg: &RunConfig,
    instance: &Instance,
    out: &Path,
    timing: Timing,
    initial: Option<PoolSet>,
) -> Result<(RunSummary, PoolSet), Failure> {
    let write_log = |log: &isddp::engine::RunLog| -> Result<(), Failure> {
        let file = File::create(out).map_err(|e| Failure::io(e, out))?;
        let mut w = BufWriter::new(file);
        log.write_csv(&mut w, timing)
            .map_err(|e| Failure::usage(anyhow::Error::new(e).context(format!("writing {}", out.display()))))?;
        w.flush().map_err(|e| Failure::io(e, out))
    };
    match experiment::run(cfg, instance, initial) {
        Ok(res) => {
            write_log(&res.log)?;
            let summary = RunSummary::new(label, cfg, instance, &res.log);
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            write_file(&summary_path(out), &json)?;
            Ok((summary, res.pools))
        }
        Err(ExperimentError::Fault(fault)) => {
            write_log(&fault.log)?;
            Err(Failure::solver(ExperimentError::Fault(fault)))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_solve(a: SolveArgs) -> Result<(), Failure> {
    let (instance, path) = a.input.load()?;
    let (algorithm, schedule, label) = a.schedule.resolve()?;
    let cfg = RunConfig {
        algorithm,
        schedule,
        n_paths: a.run.paths,
        gap_tol: a.run.gap_tol,
        stop_on_gap: !a.run.no_gap_stop,
        tol: a.run.tol,
        max_iter: a.run.max_iter,
        seed: a.run.seed,
        instance: path,
        out: Some(a.out.clone()),
        ..RunConfig::default()
    };
    cfg.validate()?;
    let initial = match &a.load_cuts {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::usage)?;
            let pools: PoolSet = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::usage)?;
            Some(pools)
        }
        None => None,
    };
    let timing = if a.no_timing { Timing::Omit } else { Timing::Include };
    let (summary, pools) = solve_and_write(&label, &cfg, &instance, &a.out, timing, initial)?;
    if let Some(p) = &a.save_cuts {
        write_file(p, &serde_json::to_string(&pools).expect("pools serialize"))?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn read_summary(path: &Path) -> Result<RunSummary, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::usage)
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let summaries = if !a.summaries.is_empty() {
        a.summaries.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?
    } else {
        let (instance, path) = a.input.load()?;
        let presets = if a.presets.is_empty() {
            experiment::presets()
        } else {
            a.presets
                .iter()
                .map(|name| {
                    experiment::preset_by_name(name)
                        .ok_or_else(|| Failure::usage(anyhow!("unknown preset {name:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let dir = a.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Failure::io(e, &dir))?;
        let mut out = Vec::new();
        for p in &presets {
            let cfg = RunConfig {
                n_paths: a.run.paths,
                gap_tol: a.run.gap_tol,
                stop_on_gap: !a.run.no_gap_stop,
                tol: a.run.tol,
                max_iter: a.run.max_iter,
                seed: a.run.seed,
                instance: path.clone(),
                ..RunConfig::from_preset(p)
            };
            let file = dir.join(format!("{}.csv", p.name.to_lowercase().replace(' ', "-")));
            let (summary, _) = solve_and_write(p.name, &cfg, &instance, &file, Timing::Include, None)?;
            eprintln!(
                "{}: {} iterations, gap {:.4}, {:.0} ms",
                p.name, summary.iterations, summary.gap, summary.total_ms
            );
            out.push(summary);
        }
        out
    };
    let report = experiment::compare(&summaries, a.assets)?;
    print!("{report}");
    if let Some(p) = &a.out {
        let file = File::create(p).map_err(|e| Failure::io(e, p))?;
        report
            .write_csv(BufWriter::new(file))
            .map_err(|e| Failure::usage(anyhow::Error::new(e).context(format!("writing {}", p.display()))))?;
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Failure> {
    let (instance, _) = a.input.load()?;
    let model = instance.to_stochastic();
    match (a.stage, &a.state) {
        (Some(t), Some(x)) => {
            if t == 0 || t > model.horizon() + 1 {
                return Err(Failure::usage(anyhow!("stage must lie in 1..={}", model.horizon() + 1)));
            }
            let want = if t == 1 { model.x0.len() } else { model.var_dim(t - 1) };
            if x.len() != want {
                return Err(Failure::usage(anyhow!("state has {} entries, stage {t} needs {want}", x.len())));
            }
            let v = oracle::exact_recourse(&model, t, x)?;
            println!("{v}");
        }
        (None, Some(_)) => return Err(Failure::usage(anyhow!("--state needs --stage"))),
        _ => {
            let v = oracle::extensive_form(&instance)?;
            println!("{v}");
        }
    }
    Ok(())
}
