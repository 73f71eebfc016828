//! Command-line harness: config loading, the experiment pipeline and plot
//! tables.

use std::path::{Path, PathBuf};

pub mod experiment;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use experiment::{ExperimentConfig, LawKind, NoiseConfig, RunConfig, FORMAT_VERSION};
pub use output::OutputDir;
pub use pipeline::{run_experiment, Inputs, PlissArgs, Subcommand};
pub use plot::emit_plot_data;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(rne_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// Hypotheses or constants that do not hold for this configuration.
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{context}: {source}")]
    Numeric { context: String, source: rne_core::Error },
    #[error("{0}")]
    Usage(String),
    #[error("missing inputs in {dir}: {files}")]
    MissingInputs { dir: PathBuf, files: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Attaches the stage name and sorts the error into an exit class.
    pub fn from_core(context: &str, e: rne_core::Error) -> Self {
        use rne_core::Error as E;
        match e {
            E::HypothesisViolated { .. } | E::ConstantsInfeasible(_) | E::HypothesisUnmet(_) | E::NoCandidateInClass { .. } => {
                CliError::Infeasible(format!("{context}: {e}"))
            }
            E::Config { .. } | E::Parse(_) => CliError::Config(e),
            _ => CliError::Numeric {
                context: context.to_string(),
                source: e,
            },
        }
    }

    /// 2 for infeasible hypotheses or constants, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}

/// Reads a config file; `seed_override` (from `RNE_SEED`) replaces the noise seed.
pub fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let text = output::read(path)?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    if let Some(s) = seed_override {
        cfg.noise.seed = s;
    }
    Ok(cfg)
}
