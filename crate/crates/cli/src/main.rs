//! `flowinfer`: scenario generation, data synthesis, posterior sampling,
//! gradient checks, reference runs and diagnostics.

mod commands;
mod exit;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowinfer::samplers::KernelParams;
use flowinfer::scenarios::Level;

use crate::exit::Failure;

#[derive(Parser)]
#[command(name = "flowinfer", version, about = "Bayesian flow inference from passive-scalar observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a canned scenario as JSON.
    Scenario(commands::scenario::ScenarioArgs),
    /// Evaluate the true flow's forward map at the scenario's observation points.
    GenerateData(commands::data::GenerateDataArgs),
    /// Run MCMC chains.
    Sample(commands::sample::SampleArgs),
    /// Compare adjoint gradients with finite differences.
    GradientCheck(commands::gradient::GradientCheckArgs),
    /// Export chain diagnostics as CSV.
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Build a pooled reference posterior.
    Reference(commands::reference::ReferenceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Pcn,
    Is,
    Mala,
    Hmc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Small,
    Medium,
    Paper,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Small => Level::Small,
            LevelArg::Medium => Level::Medium,
            LevelArg::Paper => Level::Paper,
        }
    }
}

/// Kernel selection shared by `sample` and `reference`.
#[derive(Args, Clone, Debug)]
pub struct KernelArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// pCN step size in (0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// MALA step size.
    #[arg(long)]
    pub h: Option<f64>,
    /// HMC leapfrog step.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// HMC integration time (L = round(tau/epsilon) steps).
    #[arg(long)]
    pub tau: Option<f64>,
}

impl KernelArgs {
    /// Kernel parameters; missing values for the chosen kernel are an error.
    pub fn params(&self, fallback: Option<KernelParams>) -> anyhow::Result<KernelParams> {
        let need = |v: Option<f64>, flag: &str, kernel: &str| {
            v.ok_or_else(|| Failure::usage(format!("--kernel {kernel} requires --{flag}")))
        };
        let p = match self.kernel {
            None => fallback.ok_or_else(|| Failure::usage("--kernel is required"))?,
            Some(KernelName::Pcn) => KernelParams::Pcn { beta: need(self.beta, "beta", "pcn")? },
            Some(KernelName::Is) => KernelParams::Is,
            Some(KernelName::Mala) => KernelParams::Mala { h: need(self.h, "h", "mala")? },
            Some(KernelName::Hmc) => {
                KernelParams::Hmc { epsilon: need(self.epsilon, "epsilon", "hmc")?, tau: need(self.tau, "tau", "hmc")? }
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// Component indices given as `a..b` (inclusive) or a comma-separated list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentList(pub Vec<usize>);

impl std::str::FromStr for ComponentList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_components(s).map(ComponentList)
    }
}

impl std::ops::Deref for ComponentList {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

pub fn parse_components(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if b < a {
            return Err(format!("empty component range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad component {p:?}: {e}"))).collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Scenario(a) => commands::scenario::run(a),
        Command::GenerateData(a) => commands::data::run(a),
        Command::Sample(a) => commands::sample::run(a),
        Command::GradientCheck(a) => commands::gradient::run(a),
        Command::Diagnose(a) => commands::diagnose::run(a),
        Command::Reference(a) => commands::reference::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e) as u8)
        }
    }
}
