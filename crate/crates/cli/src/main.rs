use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSub};
use rne_cli::pipeline::Inputs;
use rne_cli::{emit_plot_data, load_config, run_experiment, CliError, PlissArgs, Subcommand};

#[derive(Parser)]
#[command(name = "rne", about = "Random non-uniformly expanding torus maps")]
struct Cli {
    /// INI config with [map], [noise] and [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(ClapSub)]
enum Cmd {
    /// Grid check of the hypotheses and the derived constants.
    Check,
    /// One orbit trace as CSV.
    Orbit,
    /// Pliss times of a one-number-per-line sequence.
    Pliss {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "A", alias = "a")]
        cap_a: f64,
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        /// Output the index set even if the hypotheses fail.
        #[arg(long)]
        waive: bool,
    },
    /// Hyperbolic times of an orbit CSV (default: the output dir's orbit.csv).
    Hyptimes {
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    Lyapunov,
    Occupation,
    Empirical,
    Pressure,
    Entropy,
    Equilibrium,
    /// The whole pipeline in dependency order.
    All,
    /// Plot tables from an existing results directory.
    Plot {
        dir: Option<PathBuf>,
    },
}

fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var("RNE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("RNE_SEED = `{s}` is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Cmd::Plot { dir } = &cli.cmd {
        let dir = dir.clone().or(cli.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
        for p in emit_plot_data(&dir)? {
            println!("{}", p.display());
        }
        return Ok(());
    }
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = load_config(&path, seed_override()?)?;
    let mut inputs = Inputs::default();
    let sub = match cli.cmd {
        Cmd::Check => Subcommand::Check,
        Cmd::Orbit => Subcommand::Orbit,
        Cmd::Pliss { input, cap_a, c1, c2, waive } => {
            inputs.pliss = Some(PlissArgs { input, cap_a, c1, c2, waive });
            Subcommand::Pliss
        }
        Cmd::Hyptimes { trace } => {
            inputs.trace = trace;
            Subcommand::Hyptimes
        }
        Cmd::Lyapunov => Subcommand::Lyapunov,
        Cmd::Occupation => Subcommand::Occupation,
        Cmd::Empirical => Subcommand::Empirical,
        Cmd::Pressure => Subcommand::Pressure,
        Cmd::Entropy => Subcommand::Entropy,
        Cmd::Equilibrium => Subcommand::Equilibrium,
        Cmd::All => Subcommand::All,
        Cmd::Plot { .. } => unreachable!(),
    };
    let files = run_experiment(&cfg, sub, cli.out.as_deref(), &inputs)?;
    if sub == Subcommand::Pliss {
        if let Some(p) = files.first() {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            print!("{}", text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
        }
    } else {
        for p in files {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
