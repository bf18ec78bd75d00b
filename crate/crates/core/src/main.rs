use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stalesgd::experiment::{self, ExperimentConfig, Formats, SweepAxis};
use stalesgd::runtime::order_statistic_log_approx;
use stalesgd::{Error, RuntimeDistribution};

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "stalesgd", version, about = "Simulate straggler-tolerant and asynchronous SGD on a parameter server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory; defaults to the config's `outputs`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "STALESGD_WORKERS")]
    workers: Option<usize>,
    /// Comma-separated subset of `csv,plot`.
    #[arg(long, default_value = "csv,plot")]
    formats: Formats,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of an experiment.
    Run(RunArgs),
    /// Run an experiment once per value of one parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `K`, `m` or `eta`.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Closed-form and Monte-Carlo runtime results.
    Theory {
        #[command(subcommand)]
        what: TheoryCommand,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Sync-over-async speed-up `P·E[X_{P:P}]/E[X]` for P = 2, 4, …, p-max.
    Speedup {
        /// Runtime law: `exp:RATE`, `shifted-exp:SHIFT,RATE`, `pareto:SHAPE,SCALE`,
        /// `det:VALUE`, `hyperexp:W1/R1,W2/R2,...`, or an inline TOML table.
        #[arg(long, required = true)]
        dist: Vec<String>,
        #[arg(long, default_value_t = 64)]
        p_max: usize,
        /// Monte-Carlo draws where no closed form exists.
        #[arg(long, default_value_t = experiment::DEFAULT_MONTE_CARLO_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, Error> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidDistribution(format!("{s:?}: {e}")))?;
    if v.len() != n {
        return Err(Error::InvalidDistribution(format!("{s:?}: expected {n} numbers")));
    }
    Ok(v)
}

fn parse_dist(spec: &str) -> Result<RuntimeDistribution, Error> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        #[derive(serde::Deserialize)]
        struct Wrap {
            d: RuntimeDistribution,
        }
        let w: Wrap = toml::from_str(&format!("d = {spec}")).map_err(|e| Error::InvalidDistribution(e.message().to_string()))?;
        return Ok(w.d);
    }
    let (kind, args) = spec.split_once(':').ok_or_else(|| Error::InvalidDistribution(format!("{spec:?}: expected KIND:PARAMS")))?;
    match kind {
        "exp" | "exponential" => RuntimeDistribution::exponential(parse_numbers(args, 1)?[0]),
        "det" | "deterministic" => RuntimeDistribution::deterministic(parse_numbers(args, 1)?[0]),
        "shifted-exp" | "shifted_exponential" => {
            let v = parse_numbers(args, 2)?;
            RuntimeDistribution::shifted_exponential(v[0], v[1])
        }
        "pareto" => {
            let v = parse_numbers(args, 2)?;
            RuntimeDistribution::pareto(v[0], v[1])
        }
        "hyperexp" | "hyper_exponential" => {
            let mut weights = Vec::new();
            let mut rates = Vec::new();
            for part in args.split(',') {
                let (w, r) = part
                    .split_once('/')
                    .ok_or_else(|| Error::InvalidDistribution(format!("{part:?}: expected WEIGHT/RATE")))?;
                weights.push(parse_numbers(w, 1)?[0]);
                rates.push(parse_numbers(r, 1)?[0]);
            }
            RuntimeDistribution::hyper_exponential(weights, rates)
        }
        other => Err(Error::InvalidDistribution(format!("unknown distribution kind {other:?}"))),
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(result: &experiment::ExperimentResult) {
    for v in &result.variants {
        let t = v.runtime.map_or("-".to_string(), |r| format!("{:.6}", r.value));
        println!("{:<24} final_loss={:<14.6e} mean_T={t}", v.name, v.final_loss);
        if !v.diverged.is_empty() {
            eprintln!("warning: variant {} diverged in replications {:?}", v.name, v.diverged);
        }
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let result = experiment::run_experiment(&cfg)?;
            let out = args.out.clone().unwrap_or_else(|| cfg.outputs.clone());
            experiment::emit_outputs(&result, &out, args.formats)?;
            report(&result);
            println!("wrote {}", out.display());
            Ok(if result.has_divergence() { EXIT_DIVERGED } else { 0 })
        }
        Command::Sweep { run, axis, values } => {
            let cfg = load(&run)?;
            let points = experiment::sweep(&cfg, axis, &values)?;
            let out = run.out.clone().unwrap_or_else(|| cfg.outputs.clone());
            experiment::emit_sweep(axis, &points, &out, run.formats)?;
            let mut diverged = false;
            for (value, res) in &points {
                println!("{axis} = {value}");
                report(res);
                diverged |= res.has_divergence();
            }
            println!("wrote {}", out.display());
            Ok(if diverged { EXIT_DIVERGED } else { 0 })
        }
        Command::Theory { what: TheoryCommand::Speedup { dist, p_max, samples, seed } } => {
            let dists: Vec<RuntimeDistribution> = dist.iter().map(|d| parse_dist(d)).collect::<Result<_, _>>()?;
            let learners: Vec<usize> = std::iter::successors(Some(2usize), |p| Some(p * 2)).take_while(|&p| p <= p_max).collect();
            let rows = experiment::speedup_rows(&dists, &learners, samples, seed)?;
            println!("distribution,P,speedup,stderr,log_approx");
            for (r, d) in rows.iter().zip(dists.iter().flat_map(|d| std::iter::repeat_n(d, learners.len()))) {
                let approx = d
                    .exponential_rate()
                    .map(|mu| (r.learners as f64 * order_statistic_log_approx(mu, r.learners, r.learners) * mu).to_string())
                    .unwrap_or_default();
                println!("{},{},{},{},{approx}", r.distribution, r.learners, r.speedup.value, r.speedup.stderr);
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Validation(_)
                | Error::InvalidDistribution(_)
                | Error::InvalidObjective(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidVariant(_) => EXIT_VALIDATION,
                _ => EXIT_FAILURE,
            };
            ExitCode::from(code)
        }
    }
}
