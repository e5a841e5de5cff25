//! Command-line front end: configuration, orchestration and report output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqho_core::large_dev::BoundMethod;

use crate::commands::{GridArgs, Output};
use crate::config::{AnalysisConfig, Overrides, Resolved};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "oqho", version, about = "Risk-sensitive analysis of open quantum harmonic oscillators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Built-in model: paper-example or tiny.
    #[arg(long, global = true)]
    pub fixture: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Quadrature tolerance (absolute and relative).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record wall-clock time in the analysis report.
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Closed,
    Numeric,
    Both,
}

impl From<MethodArg> for BoundMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Closed => BoundMethod::Closed,
            MethodArg::Numeric => BoundMethod::Numeric,
            MethodArg::Both => BoundMethod::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Bound,
    Delta,
    Cumulants,
}

#[derive(Debug, Args, Clone, Copy, Default)]
pub struct EpsArgs {
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long)]
    pub eps_steps: Option<usize>,
}

impl From<EpsArgs> for GridArgs {
    fn from(e: EpsArgs) -> Self {
        GridArgs { min: e.eps_min, max: e.eps_max, steps: e.eps_steps }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model and print its certificates.
    Validate,
    /// Run every analysis block and print the JSON report.
    Analyze,
    /// Growth rate of one cumulant order.
    Cumulants {
        #[arg(long)]
        order: Option<usize>,
    },
    /// Large-deviation bound curve as CSV.
    Bound {
        #[command(flatten)]
        eps: EpsArgs,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
    /// Monte Carlo run of the classical twin.
    Simulate {
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        lag: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Descent-set coefficient table as CSV.
    Delta {
        #[arg(long)]
        r: usize,
    },
    /// Plottable CSV: bound curve, descent table or cumulant rates.
    Report {
        #[arg(long, value_enum)]
        which: ReportKind,
        #[arg(long)]
        r: Option<usize>,
        #[command(flatten)]
        eps: EpsArgs,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
    },
}

fn resolve(global: &GlobalArgs) -> Result<Resolved, CliError> {
    let config = match &global.config {
        Some(path) => AnalysisConfig::from_file(path)?,
        None if global.fixture.is_some() => AnalysisConfig { orders: vec![2, 3], ..Default::default() },
        None => return Err(CliError::InvalidConfig("pass --config <file> or --fixture <name>".into())),
    };
    config.resolve(&Overrides {
        fixture: global.fixture.clone(),
        seed: global.seed,
        tol: global.tol,
    })
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate => commands::validate(&resolve(g)?),
        Command::Analyze => commands::analyze(&resolve(g)?, g.timing),
        Command::Cumulants { order } => {
            let cfg = resolve(g)?;
            let order = order.or(cfg.orders.first().copied()).unwrap_or(2);
            commands::cumulants(&cfg, order)
        }
        Command::Bound { eps, method } => commands::bound(&resolve(g)?, (*eps).into(), (*method).into()),
        Command::Simulate { h, steps, paths, lag, theta } => {
            let cfg = resolve(g)?;
            let mut mc = cfg.mc;
            mc.h = h.unwrap_or(mc.h);
            mc.steps = steps.unwrap_or(mc.steps);
            mc.paths = paths.unwrap_or(mc.paths);
            commands::simulate_cmd(&cfg, &mc, *lag, *theta)
        }
        Command::Delta { r } => commands::delta(*r),
        Command::Report { which, r, eps, method } => match which {
            ReportKind::Delta => commands::delta(r.unwrap_or(4)),
            ReportKind::Bound => commands::bound(&resolve(g)?, (*eps).into(), (*method).into()),
            ReportKind::Cumulants => commands::cumulant_csv(&resolve(g)?),
        },
    }
}
