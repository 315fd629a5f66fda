//! Thin command-line front end over the polquant library.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or runtime
//! error (the first failing identity is named), 2 on a malformed config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polquant::config::{parse_hbar_expr, parse_mode_expr, ConfigDocument};
use polquant::error::Error;
use polquant::run;

#[derive(Parser)]
#[command(name = "polquant", about = "Polarized deformation quantization on flat models")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed for the randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SweepArgs {
    /// Function in e(q,p) shorthand; falls back to the config's "f".
    #[arg(long)]
    f: Option<String>,
    /// Expansion order N.
    #[arg(long, short = 'N')]
    n_order: Option<u32>,
    /// Comma-separated levels, e.g. 4,8,16,32,64.
    #[arg(long)]
    k: Option<String>,
    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG decay-plot output path.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Sweep every basis class instead of a single one.
    #[arg(long)]
    all_classes: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Weyl-algebra invariant suite.
    VerifyAlgebra,
    /// Compute the quantum jet of f and compare with the closed-form oracle.
    Jet {
        /// Function in e(q,p) shorthand; ';' separates ħ-slices.
        #[arg(long)]
        f: Option<String>,
    },
    /// Compute the star product f ⋆ g to an ħ-order.
    Star {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 2)]
        order: u32,
    },
    /// Classify f as a quantizable function.
    Classify {
        #[arg(long)]
        f: Option<String>,
    },
    /// Evaluate the Fedosov-equation residual on both flat geometries.
    FedosovCheck,
    /// Run the Toeplitz remainder sweep and write CSV / SVG reports.
    ToeplitzSweep(SweepArgs),
}

fn load_config(cli: &Cli) -> Result<ConfigDocument, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigDocument::load(path)?,
        None => ConfigDocument::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn hbar_input(
    cfg: &ConfigDocument,
    flag: &Option<String>,
    name: &str,
) -> Result<polquant::fedosov::HbarPoly, Error> {
    match flag {
        Some(expr) => parse_hbar_expr(expr),
        None => cfg.build_function(name),
    }
}

fn execute(cli: &Cli) -> Result<run::RunSummary, Error> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::VerifyAlgebra => run::run_verify_algebra(&cfg),
        Command::Jet { f } => {
            let f = hbar_input(&cfg, f, "f")?;
            run::run_jet(&cfg, &f)
        }
        Command::Star { f, g, order } => {
            let f = hbar_input(&cfg, f, "f")?;
            let g = hbar_input(&cfg, g, "g")?;
            run::run_star(&cfg, &f, &g, *order)
        }
        Command::Classify { f } => {
            let f = hbar_input(&cfg, f, "f")?;
            run::run_classify(&cfg, &f)
        }
        Command::FedosovCheck => run::run_fedosov_check(&cfg),
        Command::ToeplitzSweep(args) => {
            if let Some(n) = args.n_order {
                cfg.n_order = n;
            }
            if let Some(kspec) = &args.k {
                let parsed: Result<Vec<u32>, _> =
                    kspec.split(',').map(|s| s.trim().parse::<u32>()).collect();
                cfg.k_list =
                    parsed.map_err(|_| Error::Config(format!("bad --k list {kspec:?}")))?;
            }
            if args.out.is_some() {
                cfg.out_csv = args.out.clone();
            }
            if args.plot.is_some() {
                cfg.plot_svg = args.plot.clone();
            }
            if args.all_classes {
                cfg.all_classes = true;
            }
            cfg.validate()?;
            let f = match &args.f {
                Some(expr) => parse_mode_expr(expr)?,
                None => {
                    let hp = cfg.build_function("f")?;
                    if hp.degree() > 0 {
                        return Err(Error::Config("toeplitz-sweep takes an ħ-free function".into()));
                    }
                    hp.coeff(0)
                }
            };
            run::run_toeplitz_sweep(&cfg, &f)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            summary.print();
            if summary.all_passed() {
                ExitCode::SUCCESS
            } else {
                let failing = summary
                    .first_failure()
                    .map(|c| c.name.clone())
                    .unwrap_or_else(|| "unknown".into());
                eprintln!("failed check: {failing}");
                ExitCode::from(1)
            }
        }
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
