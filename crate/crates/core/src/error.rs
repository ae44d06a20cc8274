use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },

    #[error("rate limited by service, gave up after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("graphs share {} PMID(s), e.g. {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    OverlappingPmids(Vec<String>),

    #[error("unknown concept {id:?}{}", suggestion_suffix(.suggestions))]
    UnknownConcept { id: String, suggestions: Vec<String> },

    #[error("unknown relation class {0:?} (expected one of disease-chemical, disease-gene, disease-species, disease-mutation, disease-disease)")]
    UnknownRelation(String),

    #[error("non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("graph was built from corpus {graph} but the supplied corpus fingerprints as {corpus}")]
    ProvenanceMismatch { graph: String, corpus: String },
}

fn suggestion_suffix(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!("; closest known: {}", suggestions.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::UnknownRelation(_) => 1,
            Error::Network { .. } | Error::RateLimited { .. } => 3,
            _ => 2,
        }
    }
}
