//! Command-line front end.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Result;
use crate::solver::Method;

pub use config::{GridConfig, OutputConfig, Overrides, RunConfig, SweepAxis, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "dlyap", version, about = "Low-rank solvers for differential Lyapunov equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve with one method; writes solve.csv and report.json.
    Solve(RunArgs),
    /// Run both methods and the dense reference; writes compare.csv.
    Compare(RunArgs),
    /// Sweep m, h or the BDF order; writes sweep_<method>.csv.
    Sweep(RunArgs),
    /// Write the problem matrices as Matrix Market files.
    GenProblem(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CliMethod {
    EbaExp,
    EbaBdf,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::EbaExp => Method::EbaExp,
            CliMethod::EbaBdf => Method::EbaBdf,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<CliMethod>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub bdf_order: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method.map(Method::from),
            m_max: self.m_max,
            tol: self.tol,
            h: self.h,
            bdf_order: self.bdf_order.map(|p| p as usize),
            seed: self.seed,
            out: self.out.clone(),
        }
    }

    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

/// Runs a parsed command; `Ok(true)` means converged.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(&a.load()?),
        Command::Compare(a) => commands::cmd_compare(&a.load()?),
        Command::Sweep(a) => commands::cmd_sweep(&a.load()?),
        Command::GenProblem(a) => commands::cmd_gen_problem(&a.load()?),
    }
}

/// Process exit code: 0 when converged, 1 when not, 2 on errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("dlyap: not converged (see report.json)");
            1
        }
        Err(e) => {
            eprintln!("dlyap: {e}");
            2
        }
    }
}
