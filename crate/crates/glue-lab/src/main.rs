use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use glue_lab::config::{parse_sweep, SweepSpec};
use glue_lab::{run, Command, LabError, RunConfig, Scenario, Status};

#[derive(Parser)]
#[command(name = "glue-lab", version, about = "Adiabatic gluing experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// TOML (or .json) run config; defaults depend on the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the ε sweep, e.g. `2^-4..2^-8`.
    #[arg(long, global = true)]
    sweep: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    scenario: Option<ScenarioArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Pre-glued maps: grid dumps and per-zone residuals.
    Preglue,
    /// Error norm against ε with fitted slope.
    ErrorSweep,
    /// Right-inverse bound and contraction ratio.
    InverseCheck,
    /// Newton correction and IFT bound.
    Newton,
    /// Window energies, three-interval bound, fitted decay rate.
    Decay,
    /// Adiabatic distance of the glued solutions.
    Adia,
    /// Projective worked example sweep.
    Cpn,
    /// Dimension identity and toy index checks.
    Transversality,
}

#[derive(ValueEnum, Clone, Copy)]
enum ScenarioArg {
    FlatToy,
    CpnExample,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Preglue => Command::Preglue,
            Cmd::ErrorSweep => Command::ErrorSweep,
            Cmd::InverseCheck => Command::InverseCheck,
            Cmd::Newton => Command::Newton,
            Cmd::Decay => Command::Decay,
            Cmd::Adia => Command::Adia,
            Cmd::Cpn => Command::Cpn,
            Cmd::Transversality => Command::Transversality,
        }
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_for(if matches!(cli.cmd, Cmd::Cpn) { Scenario::CpnExample } else { Scenario::FlatToy }),
    };
    if let Some(s) = &cli.sweep {
        parse_sweep(s)?;
        cfg.sweep = SweepSpec::Range(s.clone());
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.scenario {
        cfg.scenario = match s {
            ScenarioArg::FlatToy => Scenario::FlatToy,
            ScenarioArg::CpnExample => Scenario::CpnExample,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd: Command = cli.cmd.into();
    let result = build_config(&cli).and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(out) => {
            for m in &out.messages {
                eprintln!("{}: {m}", cmd.name());
            }
            for f in &out.artifacts.files {
                println!("{}", f.display());
            }
            ExitCode::from(out.status.code())
        }
        Err(e) => {
            eprintln!("{}: {e}", cmd.name());
            ExitCode::from(Status::from(&e).code())
        }
    }
}
