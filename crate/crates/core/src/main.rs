use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use kac_relax::cli::run;
use kac_relax::config::{parse_config, Subcommand};
use kac_relax::KacError;

/// Wild-sum solver and relaxation experiments for Kac's equation.
#[derive(Debug, Parser)]
#[command(name = "kac-relax", version)]
struct Args {
    /// One of solve, relax-rate, moment-check, bounds-audit, counterexample.
    subcommand: Subcommand,
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Write per-trial Monte Carlo samples (moment-check).
    #[arg(long)]
    dump_samples: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kac-relax: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), KacError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| KacError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    if config.subcommand != args.subcommand {
        return Err(KacError::Config {
            line: 0,
            key: "subcommand".into(),
            message: format!(
                "config is for `{}` but `{}` was requested",
                config.subcommand, args.subcommand
            ),
        });
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    config.emit_svg |= args.svg;
    config.dump_samples |= args.dump_samples;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let outcome = run(&config, base)?;
    for note in &outcome.notes {
        println!("{note}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
