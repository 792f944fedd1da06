//! Command-line driver for the reverse sampler and the ABC reference
//! methods.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{ExperimentConfig, RawConfig};
use experiments::{AcceptanceSetup, RaceModel, RaceSetup};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rsamp_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for a degenerate sampler, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use rsamp_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::SamplerDegeneracy { .. } | E::DegenerateSample | E::ScheduleInfeasible { .. },
            ) => 3,
            CliError::Core(
                E::Precondition(_) | E::Dimension(_) | E::Domain(_) | E::NotSamplable(_),
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rsamp",
    version,
    about = "Reverse sampler and ABC reference samplers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one sampler from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Option<String>,
        #[arg(long = "B")]
        b: Option<String>,
        #[arg(long)]
        quantile: Option<String>,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        xtol: Option<String>,
        #[arg(long)]
        fd_step: Option<String>,
    },
    /// Acceptance rate of the normal-model experiment as δ shrinks.
    BenchAcceptance {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000_000)]
        proposals: usize,
        #[arg(long, value_delimiter = ',', default_values_t = experiments::TABLE2_DELTAS.to_vec())]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        data_seed: u64,
    },
    /// Time several samplers on the same problem and budget.
    BenchRace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mixture")]
        model: String,
        #[arg(long, value_delimiter = ',', default_values_t = ["rs".to_string(), "abc-ar".into(), "abc-smc".into()])]
        methods: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        proposals: usize,
        #[arg(long, default_value_t = 0.1)]
        keep: f64,
        #[arg(long, default_value_t = 1)]
        data_seed: u64,
    },
    /// Monte Carlo moments of the variance estimators against closed forms.
    Table1 {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 20)]
        t: usize,
        #[arg(long = "S", default_value_t = 10)]
        s: usize,
        #[arg(long, default_value_t = 2.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 500)]
        replications: usize,
        #[arg(long = "B", default_value_t = 1000)]
        b: usize,
    },
}

fn init_threads(threads: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads: must be at least 1".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(rayon::current_num_threads())
}

fn required_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Config("--seed: required".into()))
}

fn out_dir(common: &Common, default: &str) -> PathBuf {
    common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(default))
}

#[allow(clippy::too_many_arguments)]
fn load_config(
    path: &Path,
    common: &Common,
    method: Option<String>,
    b: Option<String>,
    quantile: Option<String>,
    delta: Option<String>,
    xtol: Option<String>,
    fd_step: Option<String>,
) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("--config: cannot read {}: {e}", path.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    let overrides = [
        ("seed", common.seed.map(|s| s.to_string())),
        (
            "output.dir",
            common.out_dir.as_ref().map(|p| p.display().to_string()),
        ),
        ("sampler.method", method),
        ("sampler.B", b),
        ("sampler.quantile", quantile),
        ("sampler.delta", delta),
        ("optim.xtol", xtol),
        ("jacobian.fd_step", fd_step),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            raw.set(key, v)?;
        }
    }
    ExperimentConfig::from_raw(&raw)
}

fn run(cfg: &ExperimentConfig, threads: usize) -> Result<String, CliError> {
    let psi_hat = cfg.psi_hat()?;
    let start = Instant::now();
    let sample = experiments::run_sampler(cfg, &psi_hat)?;
    let seconds = start.elapsed().as_secs_f64();
    let references = experiments::references(cfg, &psi_hat);
    let labels = cfg.model.param_labels();
    let summary = output::write_run(
        &cfg.out_dir,
        &cfg.model_name,
        &sample,
        &labels,
        &references,
        cfg.bins,
    )?;
    let meta = output::MetaJson {
        model: &cfg.model_name,
        method: sample.method.tag(),
        seed: cfg.seed,
        threads,
        delta: sample.delta,
        kept: sample.kept_count(),
        proposed: sample.proposed,
        invalid: sample.invalid.len(),
        sampler_seconds: seconds,
    };
    output::write_json(&cfg.out_dir.join("meta.json"), &meta)?;
    let mut msg = format!(
        "{}: kept {} of {} (delta {:.4e}, ESS {:.1}) in {:.2}s -> {}",
        summary.method,
        summary.b,
        summary.proposed,
        summary.delta,
        summary.ess,
        seconds,
        cfg.out_dir.display()
    );
    for c in &summary.coordinates {
        let _ = write!(msg, "\n  {}: mean {:.5} sd {:.5}", c.name, c.mean, c.sd);
    }
    Ok(msg)
}

#[derive(Serialize)]
struct AcceptanceJson<'a> {
    psi_hat: &'a [f64],
    proposal_sd: f64,
    rows: &'a [experiments::AcceptanceRow],
}

fn acceptance_markdown(rows: &[experiments::AcceptanceRow], psi_hat: &[f64]) -> String {
    let mut md = String::from("# Acceptance rate against delta\n\n");
    let _ = writeln!(
        md,
        "normal model, T = {}, theta0 = (0, 2), observed (mean, variance) = ({:.4}, {:.4}); \
         candidates N((mean, variance), {}^2 I), flat prior on variance >= 0\n",
        experiments::TABLE2_T,
        psi_hat[0],
        psi_hat[1],
        experiments::TABLE2_PROPOSAL_SD
    );
    md.push_str("| delta | accepted | rate | binomial s.e. | published |\n|---|---|---|---|---|\n");
    for r in rows {
        let published = r.published.map_or("-".to_string(), |p| p.to_string());
        let _ = writeln!(
            md,
            "| {} | {} | {:.6} | {:.2e} | {} |",
            r.delta, r.accepted, r.rate, r.binomial_se, published
        );
    }
    md.push_str("\nPublished cells come from a different data draw, so only orders of magnitude are comparable.\n");
    md
}

fn race_markdown(rows: &[experiments::RaceRow], model: &str) -> String {
    let mut md = format!("# Sampler race on {model}\n\nTimes are wall-clock around the sampler call and depend on the machine.\n\n");
    md.push_str("| method | seconds | proposals | kept | delta (norm) | ESS | posterior mean |\n|---|---|---|---|---|---|---|\n");
    for r in rows {
        let mean: Vec<String> = r.posterior_mean.iter().map(|m| format!("{m:.4}")).collect();
        let _ = writeln!(
            md,
            "| {} | {:.3} | {} | {} | {:.3e} | {:.1} | ({}) |",
            r.method,
            r.seconds,
            r.proposals,
            r.kept,
            r.delta_norm,
            r.ess,
            mean.join(", ")
        );
    }
    md
}

fn table1_markdown(rep: &experiments::Table1Report) -> String {
    let mut md = format!(
        "# Variance estimators, T = {}, S = {}, sigma2 = {}\n\n{} replications, {} reverse-sampler draws each. \
         Cells more than 3 s.e. from the exact value are marked with *.\n\n",
        rep.t, rep.s, rep.sigma2, rep.replications, rep.rs_draws
    );
    md.push_str(
        "| estimator | moment | Monte Carlo | s.e. | exact | |\n|---|---|---|---|---|---|\n",
    );
    for row in &rep.rows {
        for c in &row.cells {
            let _ = writeln!(
                md,
                "| {} | {} | {:.5} | {:.5} | {:.5} | {} |",
                row.estimator,
                c.name,
                c.monte_carlo,
                c.se,
                c.oracle,
                if c.flagged { "*" } else { "" }
            );
        }
    }
    md
}

/// Runs a parsed command and returns the message to print.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run {
            config,
            common,
            method,
            b,
            quantile,
            delta,
            xtol,
            fd_step,
        } => {
            let cfg = load_config(&config, &common, method, b, quantile, delta, xtol, fd_step)?;
            let threads = init_threads(common.threads)?;
            run(&cfg, threads)
        }
        Command::BenchAcceptance {
            common,
            proposals,
            deltas,
            data_seed,
        } => {
            let seed = required_seed(common.seed)?;
            if proposals == 0 {
                return Err(CliError::Config("--proposals: must be at least 1".into()));
            }
            if deltas.iter().any(|d| !(*d > 0.0)) {
                return Err(CliError::Config("--deltas: must be positive".into()));
            }
            init_threads(common.threads)?;
            let setup = AcceptanceSetup::new(data_seed)?;
            let rows = experiments::bench_acceptance(&setup, &deltas, proposals, seed)?;
            let dir = out_dir(&common, "rsamp-acceptance");
            fs::create_dir_all(&dir)?;
            let md = acceptance_markdown(&rows, &setup.psi_hat);
            output::write_json(
                &dir.join("acceptance.json"),
                &AcceptanceJson {
                    psi_hat: &setup.psi_hat,
                    proposal_sd: experiments::TABLE2_PROPOSAL_SD,
                    rows: &rows,
                },
            )?;
            fs::write(dir.join("report.md"), &md)?;
            Ok(md)
        }
        Command::BenchRace {
            common,
            model,
            methods,
            proposals,
            keep,
            data_seed,
        } => {
            let seed = required_seed(common.seed)?;
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(CliError::Config("--keep: must lie in (0, 1]".into()));
            }
            if proposals == 0 {
                return Err(CliError::Config("--proposals: must be at least 1".into()));
            }
            init_threads(common.threads)?;
            let setup = RaceSetup::new(RaceModel::parse(&model)?, data_seed)?;
            let rows = experiments::bench_race(&setup, &methods, proposals, keep, seed)?;
            let dir = out_dir(&common, "rsamp-race");
            fs::create_dir_all(&dir)?;
            let md = race_markdown(&rows, &model);
            output::write_json(&dir.join("race.json"), &rows)?;
            fs::write(dir.join("report.md"), &md)?;
            Ok(md)
        }
        Command::Table1 {
            common,
            t,
            s,
            sigma2,
            replications,
            b,
        } => {
            let seed = required_seed(common.seed)?;
            if b == 0 {
                return Err(CliError::Config("--B: must be at least 1".into()));
            }
            init_threads(common.threads)?;
            let rep = experiments::table1(t, s, sigma2, replications, b, seed)?;
            let dir = out_dir(&common, "rsamp-table1");
            fs::create_dir_all(&dir)?;
            let md = table1_markdown(&rep);
            output::write_json(&dir.join("table1.json"), &rep)?;
            fs::write(dir.join("report.md"), &md)?;
            Ok(md)
        }
    }
}
