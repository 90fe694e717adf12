//! Command-line front end: single-scenario runs, parameter sweeps and table
//! emission from persisted sweeps.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use risnoma::baselines::SchemeId;
use risnoma::harness::{emit, run_sweep, write_csv, EmitKind, ExperimentResult, Sweep, SweepOptions, SweepParam, SweepPlan};
use risnoma::ScenarioConfig;

#[derive(Parser, Debug)]
#[command(name = "risnoma", version, about = "Beamforming and NOMA power allocation for RIS-aided sensing and communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run schemes on one scenario over a set of seeds.
    Run(RunArgs),
    /// Run schemes over the values of one scenario parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Configuration field to sweep (n_antennas, m_elements, k_clusters,
        /// p_max_dbm, noise_power_dbm, qos_rnu, qos_rfu).
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Write a CSV table computed from a persisted run directory.
    Emit {
        /// Directory written by `run` or `sweep`.
        #[arg(long)]
        from: PathBuf,
        /// beampattern, illumination, targets, ranktable, trace or summary.
        #[arg(long)]
        kind: String,
        /// Restrict the table to one scheme.
        #[arg(long)]
        scheme: Option<String>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (TOML); defaults apply to omitted fields. Without a
    /// file the built-in defaults are used.
    config: Option<PathBuf>,
    /// Scheme to run; repeat for several (ibcd, iao, baseline_zf,
    /// baseline_mrt, ris_isac_no_noma, ris_sensing).
    #[arg(long = "scheme", default_value = "ibcd")]
    schemes: Vec<String>,
    /// Seeds as a comma-separated list or a half-open range `a..b`;
    /// defaults to the seeds of the scenario file.
    #[arg(long)]
    seeds: Option<String>,
    /// Concurrent runs (0 uses every core).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for per-run records and the summary table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse run records already present in the output directory.
    #[arg(long)]
    resume: bool,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().context("range start")?;
        let b: u64 = b.trim().parse().context("range end")?;
        if b <= a {
            bail!("empty seed range {text}");
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed `{s}`"))).collect()
}

fn execute(args: RunArgs, sweep: Sweep) -> Result<()> {
    let config = match &args.config {
        Some(path) => risnoma::load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let schemes = args.schemes.iter().map(|s| s.parse::<SchemeId>()).collect::<risnoma::Result<Vec<_>>>()?;
    let seeds = match &args.seeds {
        Some(text) => parse_seeds(text)?,
        None => config.seeds.clone(),
    };
    let plan = SweepPlan { sweep, schemes, seeds };
    let options = SweepOptions { workers: args.workers, out_dir: args.out.clone(), resume: args.resume };
    let result = run_sweep(&config, &plan, &options)?;
    let summary = emit(&result, EmitKind::Summary, None)?;
    if let Some(dir) = &args.out {
        write_csv(&summary, &dir.join("summary.csv"))?;
    }
    for r in &result.records {
        match (&r.objective, &r.error) {
            (Some(obj), _) => println!("{:<17} value {:<8} seed {:<4} objective {obj:.6e} outer {} time {:.1}s", r.scheme.name(), r.value.map_or("-".into(), |v| v.to_string()), r.seed, r.outer_iterations, r.wall_time),
            (None, err) => println!("{:<17} value {:<8} seed {:<4} failed: {}", r.scheme.name(), r.value.map_or("-".into(), |v| v.to_string()), r.seed, err.as_deref().unwrap_or("unknown")),
        }
    }
    print!("{}", summary.to_csv_string()?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    risnoma::conic::silence_solver_panics();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => execute(args, Sweep::single()),
        Command::Sweep { run, param, values } => {
            let param: SweepParam = param.parse()?;
            execute(run, Sweep::over(param, values))
        }
        Command::Emit { from, kind, scheme, out } => {
            let kind: EmitKind = kind.parse()?;
            let scheme = scheme.map(|s| s.parse::<SchemeId>()).transpose()?;
            let result = ExperimentResult::load(&from).with_context(|| format!("loading {}", from.display()))?;
            let table = emit(&result, kind, scheme)?;
            write_csv(&table, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}
