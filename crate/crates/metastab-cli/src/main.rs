use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use metastab::harness::{self, Module, ScenarioConfig};
use metastab::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Manifold,
    Spectrum,
    Reduce,
    Simulate,
    Hyperbolic,
    Compare,
    /// Runs the module named in the configuration.
    Sweep,
}

/// Metastable shock layers: scenario runner.
#[derive(Debug, Parser)]
#[command(name = "metastab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; METASTAB_OUT takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn module_for(command: Command, configured: Module) -> Module {
    match command {
        Command::Sweep => configured,
        Command::Manifold => Module::Manifold,
        Command::Spectrum => Module::Spectrum,
        Command::Reduce => Module::Reduce,
        Command::Simulate if configured == Module::Figure1 => Module::Figure1,
        Command::Simulate => Module::Simulate,
        Command::Hyperbolic => Module::Hyperbolic,
        Command::Compare => Module::Compare,
    }
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Validation(_) => ExitCode::from(2),
        Error::Numerical(_) => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ScenarioConfig::from_file(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    cfg.module = module_for(cli.command, cfg.module);
    let out = std::env::var_os("METASTAB_OUT")
        .map(PathBuf::from)
        .or(cli.out)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let result = match harness::run_scenario(&cfg, cli.jobs) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let written = harness::write_outputs(&result, &out).and_then(|mut w| {
        w.extend(harness::emit_plots(&result, &out)?);
        Ok(w)
    });
    match written {
        Ok(files) => {
            println!(
                "{}: {} records, {} fits, {} files in {}",
                cfg.name,
                result.records.len(),
                result.fits.len(),
                files.len(),
                out.display()
            );
            for (k, f) in &result.fits {
                println!("fit {k}: slope {:.6} residual {:.3e}", f.slope, f.residual);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", out.display());
            ExitCode::from(1)
        }
    }
}
