use std::path::Path;

use faultlm::baselines::BaselineError;
use faultlm::evalkit::EvalError;
use faultlm::features::FeatureError;
use faultlm::llm_client::{ClientError, EvaluateError};
use faultlm::preprocess::PreprocessError;
use faultlm::promptgen::PromptError;
use faultlm::signal::SignalError;
use faultlm::signal_io::{MatError, SignalIoError};
use faultlm::splits::SplitError;
use faultlm::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    SignalIo(#[from] SignalIoError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
}

/// Variant name of an error from its Debug rendering ("TruncatedFile",
/// "MissingSubset", ...).
fn variant<E: std::fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or("")
        .to_string()
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable, machine-parsable class: the failing module and the error
    /// variant, e.g. `signal_io.TruncatedFile`.
    pub fn class(&self) -> String {
        match self {
            CliError::Usage(_) => "usage".into(),
            CliError::Config(_) => "config".into(),
            CliError::Io { .. } => "io".into(),
            CliError::Input(_) => "input".into(),
            CliError::Signal(e) => format!("signal.{}", variant(e)),
            CliError::SignalIo(SignalIoError::Mat(e)) => format!("signal_io.{}", variant::<MatError>(e)),
            CliError::SignalIo(e) => format!("signal_io.{}", variant(e)),
            CliError::Synth(e) => format!("synth.{}", variant(e)),
            CliError::Preprocess(e) => format!("preprocess.{}", variant(e)),
            CliError::Feature(e) => format!("features.{}", variant(e)),
            CliError::Prompt(e) => format!("promptgen.{}", variant(e)),
            CliError::Split(e) => format!("splits.{}", variant(e)),
            CliError::Baseline(e) => format!("baselines.{}", variant(e)),
            CliError::Eval(e) => format!("evalkit.{}", variant(e)),
            CliError::Client(e) => format!("llm_client.{}", variant(e)),
            CliError::Evaluate(EvaluateError::Eval(e)) => format!("evalkit.{}", variant(e)),
            CliError::Evaluate(e) => format!("llm_client.{}", variant(e)),
        }
    }

    /// `error[class]: message` on one line.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.class(), msg.trim())
    }
}
