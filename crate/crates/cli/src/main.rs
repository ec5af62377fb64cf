//! `sel-lab`: batch runs of the sel-core solvers from TOML configs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;
mod error;
mod output;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sel-lab", version, about = "Radial solvers for singular and blow-up elliptic problems")]
struct Args {
    /// TOML config with [problem], [functions], [numerics] and [output].
    #[arg(long)]
    config: Option<PathBuf>,

    /// Directory for CSV and JSON output.
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Worker threads for level and sweep parallelism.
    #[arg(long, env = "SEL_LAB_JOBS")]
    jobs: Option<usize>,

    /// Reserved; no solver path uses randomness.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    verbose: bool,

    /// Optional command followed by `key=value` overrides
    /// (`N=3`, `functions.f=t^2`).
    #[arg(value_name = "COMMAND|KEY=VALUE")]
    rest: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, overrides) = match args.rest.split_first() {
        Some((first, tail)) if !first.contains('=') => (Some(first.as_str()), tail),
        _ => (None, &args.rest[..]),
    };
    let cfg = match config::load(args.config.as_deref(), command, overrides) {
        Ok(c) => c,
        Err(e) => return fail(&e, None, &args),
    };
    if let Some(j) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let name = cfg.output.name.clone().unwrap_or_else(|| cfg.command().to_string());
    let report = match commands::run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e, Some((&name, cfg.command())), &args),
    };
    let written = output::write_report(
        &report,
        &args.out,
        &name,
        cfg.command(),
        cfg.output.csv.unwrap_or(true),
        cfg.output.json.unwrap_or(true),
    );
    match written {
        Ok(paths) => {
            println!("{}", report.summary_line());
            if args.verbose {
                for n in &report.notes {
                    eprintln!("note: {n}");
                }
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&CliError::Io(e), None, &args),
    }
}

/// Report the error; numerical failures also leave a JSON diagnostic.
/// Config failures write nothing.
fn fail(e: &CliError, ctx: Option<(&str, &str)>, args: &Args) -> ExitCode {
    eprintln!("error: {e}");
    let code = e.exit_code();
    if code == 3 {
        if let Some((name, command)) = ctx {
            match output::write_failure(&args.out, name, command, e.kind(), &e.to_string()) {
                Ok(p) if args.verbose => eprintln!("wrote {}", p.display()),
                Ok(_) => {}
                Err(w) => eprintln!("could not write diagnostics: {w}"),
            }
        }
    }
    ExitCode::from(code as u8)
}
