//! Corpus preprocessing, linguistic feature injection and MT evaluation.
//!
//! The crate is organised by stage:
//!
//! - [`corpus`]: annotated tokens, parallel pairs, alignments, statistics
//! - [`lexicon`]: s-expression lexicons, ambiguity classes, term dictionaries
//! - [`annotate`]: CAT/CL, POS and linearized-tree source representations
//! - [`subword`]: feature-preserving byte-pair encoding
//! - [`entity`]: entity/term tagging, projection, restoration, UNK replacement
//! - [`metrics`]: BLEU, TER, chrF, bootstrap significance
//! - [`pipeline`]: test-set selection, back-translation, vocabulary capping

pub mod annotate;
pub mod corpus;
pub mod entity;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod subword;

use thiserror::Error;

pub use corpus::{AnnotatedToken, ParallelPair, Sentence};

/// Any failure surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Lexicon(#[from] lexicon::LexiconError),
    #[error(transparent)]
    Annotate(#[from] annotate::AnnotateError),
    #[error(transparent)]
    Subword(#[from] subword::SubwordError),
    #[error(transparent)]
    Entity(#[from] entity::EntityError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 1 for invalid input, 2 for I/O or translator
    /// contract failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Pipeline(
                pipeline::PipelineError::Io(_)
                | pipeline::PipelineError::TranslatorFailed(_)
                | pipeline::PipelineError::TranslatorTimeout(_)
                | pipeline::PipelineError::TranslatorLineMismatch { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
