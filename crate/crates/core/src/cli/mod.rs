//! Command-line front end.
//!
//! Subcommands: `kl-sweep`, `mi-sweep`, `convergence`, `two-sample`,
//! `verify-discrete`. A JSON config file (`--config`) supplies defaults and
//! flags override it; the resolved config is echoed into every output.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error, 4 verification
//! failure.

pub mod commands;
pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::estimators::LambdaPolicy;
use crate::kernels::KernelFamily;
use crate::{Error, Result};
use config::{
    ConvergenceConfig, KlSweepConfig, MiSweepConfig, RunConfig, SweepKind, TwoSampleConfig,
    VerifyConfig,
};

#[derive(Debug, Parser)]
#[command(name = "mmdkl", version, about = "Kernel MMD bounds on KL divergence and mutual information")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// `<real>` or `decay:<c>` for λ = c/√n.
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<LambdaPolicy>().map_err(|e| e.to_string()))]
    pub lambda: Option<LambdaPolicy>,
    /// Comma-separated kernel γ values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    /// rbf | invpoly
    #[arg(long, global = true, value_parser = |s: &str| s.parse::<KernelFamily>().map_err(|e| e.to_string()))]
    pub kernel: Option<KernelFamily>,
    /// Multiplier on the lower-bound statistic before the KL map.
    #[arg(long, global = true)]
    pub lb_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// Samples per distribution.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension of each Gaussian block.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated sweep parameters.
    #[arg(long, value_delimiter = ',')]
    pub epsilon_grid: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian KL sweep (mean shift or covariance scale).
    KlSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// mean-shift | cov-scale
        #[arg(long = "sweep", value_parser = |s: &str| s.parse::<SweepKind>().map_err(|e| e.to_string()))]
        sweep_kind: Option<SweepKind>,
    },
    /// Gaussian mutual-information sweep over the cross-covariance scale.
    MiSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Evaluate every kernel at each λ on the same data.
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        /// Independent resamples of the product-of-marginals sample.
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Finite-sample convergence of the statistics.
    Convergence {
        #[arg(long)]
        dim: Option<usize>,
        /// Seeded repetitions per sample size.
        #[arg(long)]
        replicates: Option<usize>,
        /// Sample sizes for the lower-bound statistic.
        #[arg(long, value_delimiter = ',')]
        lb_sizes: Option<Vec<usize>>,
        /// Sample sizes for the upper-bound statistic.
        #[arg(long, value_delimiter = ',')]
        ub_sizes: Option<Vec<usize>>,
        /// Mean shift per coordinate in the unequal case.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// KL bounds between two CSV sample files.
    TwoSample {
        /// Samples from P, one row per sample.
        file_p: Option<PathBuf>,
        /// Samples from Q.
        file_q: Option<PathBuf>,
        /// γ of the upper-bound kernel (default: grid value closest to 0.3).
        #[arg(long)]
        ub_gamma: Option<f64>,
    },
    /// Checks every KL/MMD inequality on exact discrete distributions.
    VerifyDiscrete {
        /// Number of random pairs.
        #[arg(long)]
        pairs: Option<usize>,
        /// Smallest alphabet size.
        #[arg(long)]
        k_min: Option<usize>,
        /// Largest alphabet size.
        #[arg(long)]
        k_max: Option<usize>,
        /// Fixed P (comma list); requires --q.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// Fixed Q (comma list).
        #[arg(long, value_delimiter = ',')]
        q: Option<Vec<f64>>,
        /// Scales KL before checking; exercises the failure path.
        #[arg(long, hide = true)]
        debug_break_chain: Option<f64>,
    },
}

/// Text to emit and the process exit status.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

fn flag_layer(shared: &Shared, cmd: &Command) -> RunConfig {
    let mut c = RunConfig {
        seed: shared.seed,
        out: shared.out.clone(),
        jobs: shared.jobs,
        lambda: shared.lambda,
        gamma_grid: shared.gamma_grid.clone(),
        kernel: shared.kernel,
        lb_scale: shared.lb_scale,
        ..Default::default()
    };
    match cmd {
        Command::KlSweep { sweep, sweep_kind } => {
            c.n = sweep.n;
            c.dim = sweep.dim;
            c.epsilon_grid = sweep.epsilon_grid.clone();
            c.sweep = *sweep_kind;
        }
        Command::MiSweep {
            sweep,
            lambda_grid,
            permutations,
        } => {
            c.n = sweep.n;
            c.dim = sweep.dim;
            c.epsilon_grid = sweep.epsilon_grid.clone();
            c.lambda_grid = lambda_grid.clone();
            c.permutations = *permutations;
        }
        Command::Convergence {
            dim,
            replicates,
            lb_sizes,
            ub_sizes,
            shift,
        } => {
            c.dim = *dim;
            c.replicates = *replicates;
            c.lb_sizes = lb_sizes.clone();
            c.ub_sizes = ub_sizes.clone();
            c.shift = *shift;
        }
        Command::TwoSample {
            file_p,
            file_q,
            ub_gamma,
        } => {
            c.file_p = file_p.clone();
            c.file_q = file_q.clone();
            c.ub_gamma = *ub_gamma;
        }
        Command::VerifyDiscrete {
            pairs,
            k_min,
            k_max,
            p,
            q,
            ..
        } => {
            c.pairs = *pairs;
            c.k_min = *k_min;
            c.k_max = *k_max;
            c.p = p.clone();
            c.q = q.clone();
        }
    }
    c
}

/// Runs one command against a merged config.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let ok = |output: String| Outcome {
        output,
        exit_code: 0,
    };
    match cmd {
        Command::KlSweep { .. } => {
            Ok(ok(commands::kl_sweep(&KlSweepConfig::resolve(cfg)?)?.to_csv()?))
        }
        Command::MiSweep { .. } => {
            Ok(ok(commands::mi_sweep(&MiSweepConfig::resolve(cfg)?)?.to_csv()?))
        }
        Command::Convergence { .. } => Ok(ok(
            commands::convergence(&ConvergenceConfig::resolve(cfg)?)?.to_csv()?,
        )),
        Command::TwoSample { .. } => {
            let c = TwoSampleConfig::resolve(cfg)?;
            let est = commands::two_sample(&c)?;
            Ok(ok(commands::two_sample_json(&c, &est)?))
        }
        Command::VerifyDiscrete {
            debug_break_chain, ..
        } => {
            let c = VerifyConfig::resolve(cfg, *debug_break_chain)?;
            let report = commands::verify_discrete(&c)?;
            let output = commands::verify_json(&c, &report)?;
            let exit_code = if report.all_hold() {
                0
            } else {
                Error::Verification(String::new()).exit_code()
            };
            Ok(Outcome { output, exit_code })
        }
    }
}

fn run_inner(cli: Cli) -> Result<Outcome> {
    let file = match &cli.shared.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.overlay(flag_layer(&cli.shared, &cli.command));
    let jobs = cfg.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::input(format!("cannot start {jobs} worker threads: {e}")))?;
    let outcome = pool.install(|| execute(&cli.command, &cfg))?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &outcome.output)?,
        None => print!("{}", outcome.output),
    }
    if outcome.exit_code != 0 {
        eprintln!("verification failed: at least one inequality is violated");
    }
    Ok(outcome)
}

/// Parses `args` (including the program name), runs, and returns the exit
/// status. Argument errors exit through clap with status 2.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    match run_inner(cli) {
        Ok(o) => o.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
