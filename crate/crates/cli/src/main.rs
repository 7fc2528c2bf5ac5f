//! `lzfe`: runs the Landau-Zener verification experiments and writes CSV/JSON
//! results and SVG figures.
//!
//! Exit codes: 0 when every asserted tolerance holds, 1 on a tolerance or
//! numerical failure, 2 on usage and domain errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lzfe_core::propagator::StepMethod;

use config::{OutputFormat, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "lzfe",
    version,
    about = "Landau-Zener verification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival probability in the infinite-time limit, or the full transition matrix.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        /// Diabatic level to start and end on (1-based).
        #[arg(long)]
        level: Option<usize>,
        /// Emit the whole transition matrix on the window [−T, T].
        #[arg(long)]
        full_matrix: bool,
        #[arg(long = "T", alias = "half-width")]
        half_width: Option<f64>,
    },
    /// Zero-curvature residuals of a family and its commuting partner.
    VerifyIntegrability {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Grid as t=start:stop:step,tau=start:stop:step (inclusive).
        #[arg(long)]
        grid: Option<String>,
        /// Largest residual still accepted.
        #[arg(long, alias = "tolerance")]
        threshold: Option<f64>,
        /// Negative control: break the partner so the check must fail.
        #[arg(long)]
        corrupt_partner: bool,
    },
    /// Straight path versus the detour through τ₀.
    VerifyDeformation {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long = "T", alias = "half-width")]
        half_width: Option<f64>,
        /// Largest accepted |p(straight) − p(detour)|.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Residuals p(2γ) − p(γ)² over a γ grid.
    VerifyFunctional {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        gammas: Option<Vec<f64>>,
        /// Take p(2γ) from the effective two-level model at --tau.
        #[arg(long)]
        via_reduction: bool,
        #[arg(long)]
        tau: Option<f64>,
        /// Largest accepted |residual|.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Fits ln p = cγ.
    FitExponent {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        gammas: Option<Vec<f64>>,
        /// Fit synthetic data p = exp(c·γ) instead, e.g. exp:-2.
        #[arg(long)]
        synthetic: Option<String>,
        /// Largest accepted distance of c from its reference.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Exact Taylor coefficients of the functional equation's solution.
    Recurrence {
        #[command(flatten)]
        io: IoArgs,
        /// Rational seed: integer, p/q or decimal.
        #[arg(long, allow_hyphen_values = true)]
        a1: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// SVG figure from a JSON result envelope.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: plot::PlotKind,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IoArgs {
    /// TOML config, or a JSON envelope whose config_echo is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Leave the timestamp out so identical runs give identical bytes.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Sets g = √(γ·b).
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct NumericArgs {
    /// Convergence tolerance of the infinite-time limit.
    #[arg(long)]
    limit_tolerance: Option<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<StepMethod>,
    /// Largest step in units of 1/√b.
    #[arg(long)]
    max_step: Option<f64>,
}

fn parse_method(s: &str) -> Result<StepMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown method `{s}` (midpoint, magnus4, adaptive)"))
}

fn flag(on: bool) -> Option<bool> {
    on.then_some(true)
}

impl IoArgs {
    fn apply(&self, flags: &mut RunConfig) {
        flags.output_format = self.format;
        flags.output_path = self.output.clone();
    }
}

impl ModelArgs {
    fn apply(&self, flags: &mut RunConfig) {
        flags.model = self.model.clone();
        flags.b = self.b;
        flags.g = self.g;
        flags.gamma = self.gamma;
        flags.tau = self.tau;
    }
}

impl NumericArgs {
    fn apply(&self, flags: &mut RunConfig) {
        flags.limit_tolerance = self.limit_tolerance;
        flags.method = self.method;
        flags.max_step = self.max_step;
    }
}

/// Defaults < config file < flags.
fn layered(io: &IoArgs, flags: RunConfig) -> Result<RunConfig, CliError> {
    let mut cfg = match &io.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.overlay(&flags);
    if flags.gamma.is_some() && flags.g.is_some() {
        return Err(CliError::Usage(
            "give either --g or --gamma, not both".into(),
        ));
    }
    if flags.g.is_some() {
        cfg.gamma = None;
    }
    if flags.gamma.is_some() {
        cfg.g = None;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut flags = RunConfig::default();
    let (name, target, outcome) = match cli.command {
        Command::Plot {
            input,
            kind,
            output,
        } => {
            let svg = plot::plot(&input, kind)?;
            let stem = format!("plot-{}", format!("{kind:?}").to_lowercase());
            let path = output.or_else(|| {
                std::env::var_os(output::OUTPUT_DIR_ENV)
                    .filter(|d| !d.is_empty())
                    .map(|d| PathBuf::from(d).join(format!("{stem}.svg")))
            });
            match path {
                Some(p) => {
                    output::write_atomic(&p, &svg)?;
                    eprintln!("wrote {}", p.display());
                }
                None => print!("{svg}"),
            }
            return Ok(true);
        }
        Command::Simulate {
            io,
            model,
            numerics,
            level,
            full_matrix,
            half_width,
        } => {
            model.apply(&mut flags);
            numerics.apply(&mut flags);
            flags.level = level;
            flags.full_matrix = flag(full_matrix);
            flags.half_width = half_width;
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "simulate",
                cfg.clone(),
                commands::simulate(cfg, !io.no_timestamp),
            )
        }
        Command::VerifyIntegrability {
            io,
            model,
            grid,
            threshold,
            corrupt_partner,
        } => {
            model.apply(&mut flags);
            flags.grid = grid;
            flags.tolerance = threshold;
            flags.corrupt_partner = flag(corrupt_partner);
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "verify-integrability",
                cfg.clone(),
                commands::verify_integrability(cfg, !io.no_timestamp),
            )
        }
        Command::VerifyDeformation {
            io,
            model,
            numerics,
            tau0,
            half_width,
            tolerance,
        } => {
            model.apply(&mut flags);
            numerics.apply(&mut flags);
            flags.tau0 = tau0;
            flags.half_width = half_width;
            flags.tolerance = tolerance;
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "verify-deformation",
                cfg.clone(),
                commands::verify_deformation(cfg, !io.no_timestamp),
            )
        }
        Command::VerifyFunctional {
            io,
            numerics,
            gammas,
            via_reduction,
            tau,
            tolerance,
        } => {
            numerics.apply(&mut flags);
            flags.gammas = gammas;
            flags.via_reduction = flag(via_reduction);
            flags.tau = tau;
            flags.tolerance = tolerance;
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "verify-functional",
                cfg.clone(),
                commands::verify_functional(cfg, !io.no_timestamp),
            )
        }
        Command::FitExponent {
            io,
            numerics,
            gammas,
            synthetic,
            tolerance,
        } => {
            numerics.apply(&mut flags);
            flags.gammas = gammas;
            flags.synthetic = synthetic;
            flags.tolerance = tolerance;
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "fit-exponent",
                cfg.clone(),
                commands::fit(cfg, !io.no_timestamp),
            )
        }
        Command::Recurrence { io, a1, n } => {
            flags.a1 = a1;
            flags.n = n;
            io.apply(&mut flags);
            let cfg = layered(&io, flags)?;
            (
                "recurrence",
                cfg.clone(),
                commands::recurrence(cfg, !io.no_timestamp),
            )
        }
    };
    let outcome = outcome?;
    output::emit(&target, name, &outcome.text)?;
    if !outcome.passed {
        eprintln!("{name}: tolerance check failed");
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
