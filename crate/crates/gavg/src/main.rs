use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gavg::experiments::{kinds_for, run_check, Report};
use gavg::{emit_outputs, render, with_threads, AppError, AppResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gavg", version, about = "Averaging experiments for two-scale systems under volatility uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the configuration, audit the hypotheses and the G axioms.
    Check(Common),
    /// One two-scale solve at `system.epsilon`.
    Solve(Common),
    /// Build a generator table and/or probe single ergodic constants.
    Generator(Common),
    /// ε-ladder convergence (kinds converge, gheat_oracle, max_oracle).
    Converge(Common),
    /// Two-time expectations along the ε ladder.
    Findim(Common),
    /// Monte Carlo paths under one control policy.
    Simulate(Common),
    /// Mean-square contraction of coupled fast paths.
    Contraction(Common),
    /// Block-frozen fast equation along the ε ladder.
    Khasminskii(Common),
    /// Moment bounds along the ε ladder.
    Moments(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Check(c) => ("check", c),
            Command::Solve(c) => ("solve", c),
            Command::Generator(c) => ("generator", c),
            Command::Converge(c) => ("converge", c),
            Command::Findim(c) => ("findim", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Contraction(c) => ("contraction", c),
            Command::Khasminskii(c) => ("khasminskii", c),
            Command::Moments(c) => ("moments", c),
        }
    }
}

fn load(common: &Common) -> AppResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(AppError::config("--threads must be at least 1"));
        }
        cfg.threads = n;
    }
    if common.out.is_some() {
        cfg.out.clone_from(&common.out);
    }
    Ok(cfg)
}

fn check(cfg: &ExperimentConfig, quiet: bool) -> AppResult<()> {
    let r = with_threads(cfg.threads, || run_check(cfg))??;
    if !quiet {
        let a = &r.audit;
        println!("box slow {:?} fast {:?}", r.sample_box.slow, r.sample_box.fast);
        println!("lipschitz      {:?} (measured {:.4}, claimed {})", a.lipschitz.status, a.measured_lip, cfg.system.lip_claimed);
        println!("dissipativity  {:?} (measured {:.4}, claimed {})", a.dissipativity.status, a.measured_eta, cfg.system.eta_claimed);
        println!("growth         {:?} (measured {:.4}, claimed {})", a.growth.status, a.measured_growth, cfg.system.growth_claimed);
        println!("fast growth    {:?}", a.fast_growth.status);
        println!("G axioms       {} violations in {} trials", r.axioms.violations.len(), r.axioms.trials);
    }
    Report::Check(Box::new(r)).verdict().map_err(|v| AppError::Config(format!("check failed: {v}")))
}

fn execute(cli: &Cli) -> AppResult<()> {
    let (name, common) = cli.command.parts();
    let cfg = load(common)?;
    if name == "check" {
        return check(&cfg, common.quiet);
    }
    let allowed = kinds_for(name);
    let kind = match cfg.kind {
        Some(k) if allowed.contains(&k) => k,
        Some(k) => return Err(AppError::Config(format!("experiment.kind = {} cannot run under `{name}`", k.as_str()))),
        None => allowed[0],
    };
    let out = cfg.out.clone().ok_or_else(|| AppError::config("no output directory (use --out or `out`)"))?;
    cfg.validate_for(kind)?;

    let (report, wall) = with_threads(cfg.threads, || gavg::run(&cfg, kind))??;
    let entries = emit_outputs(&report, &cfg, &out, wall)?;
    if !common.quiet {
        if let Some(first) = render(&report)?.into_iter().find(|a| a.path.ends_with(".csv")) {
            print!("{}", String::from_utf8_lossy(&first.bytes));
        }
        println!("{} files written to {} in {:.1} s", entries.len() + 1, out.display(), wall);
    }
    report.verdict().map_err(AppError::Verdict)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
