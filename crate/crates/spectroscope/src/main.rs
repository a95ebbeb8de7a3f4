use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spectroscope::sweep::{self, apply_override, build_config, parse_pairs, Mode};

/// Multiphoton spectroscopy sweeps for two driven, coupled qubits.
#[derive(Parser)]
#[command(name = "spectroscope", version, about)]
struct Cli {
    #[command(subcommand)]
    mode: ModeCommand,
}

#[derive(Subcommand)]
enum ModeCommand {
    /// Quasienergy branches along one parameter axis.
    Quasienergies(RunArgs),
    /// Averaged transition probabilities along one axis: numerical,
    /// perturbative and rotating-wave routes side by side.
    Sweep1d(RunArgs),
    /// Probability maps over two bias axes, with resonance-line overlays.
    Sweep2d(RunArgs),
    /// Probability maps over a bias axis and the coupling strength.
    Gmap(RunArgs),
    /// Dissipative steady-state populations and averaged concurrence.
    Dissipative(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set sweep_points=600`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output CSV path (overrides `out` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores; overrides `workers` from the config).
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match &cli.mode {
        ModeCommand::Quasienergies(a) => (Mode::Quasienergies, a),
        ModeCommand::Sweep1d(a) => (Mode::Sweep1d, a),
        ModeCommand::Sweep2d(a) => (Mode::Sweep2d, a),
        ModeCommand::Gmap(a) => (Mode::GMap, a),
        ModeCommand::Dissipative(a) => (Mode::Dissipative, a),
    };
    match execute(mode, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn execute(mode: Mode, args: &RunArgs) -> Result<(), String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read config {}: {e}", args.config.display()))?;
    let mut map = parse_pairs(&text).map_err(|e| e.to_string())?;
    for pair in &args.sets {
        apply_override(&mut map, pair).map_err(|e| e.to_string())?;
    }
    let mut cfg = build_config(mode, &map).map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    let summary = sweep::run(&cfg).map_err(|e| e.to_string())?;
    println!(
        "wrote {} ({} rows, {} failed)",
        summary.csv_path.display(),
        summary.n_rows,
        summary.n_failed
    );
    println!("metadata: {}", summary.meta_path.display());
    if let Some(p) = &summary.overlay_path {
        println!("overlays: {}", p.display());
    }
    Ok(())
}
