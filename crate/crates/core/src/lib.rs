//! Statistical measurement of file-format compliance from the error messages
//! an ensemble of parsers produces.
//!
//! The pipeline is:
//!
//! 1. [`catalog`]: an ordered registry of per-parser regexes. Each regex is one
//!    row of every relation matrix.
//! 2. [`harness`]: run (or ingest captured output of) every parser on every
//!    corpus file and count which messages fired.
//! 3. [`matrix`]: tabulate the counts into a sparse message × file relation
//!    matrix; binarize, concatenate, aggregate by parser.
//! 4. [`bernoulli`]: the Bernoulli pseudo-likelihood ratio statistic that flags
//!    files behaving more like the other corpus than their own.
//! 5. [`evaluation`]: ROC/AUC against ground truth and the 2×2 χ² test.
//! 6. [`pca`] and [`redundancy`]: exploratory views of files and parsers.
//!
//! [`synth`] generates corpora with known message probabilities and known
//! contamination so the whole pipeline can be checked without private data.

pub mod bernoulli;
pub mod catalog;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod matrix;
pub mod numfmt;
pub mod pca;
pub mod redundancy;
pub mod synth;

pub use bernoulli::{ErrorProbabilities, MisclassificationScore, ScoreOptions, Threshold};
pub use catalog::{MessageCatalog, MessagePattern, ParserSpec, PatternKind};
pub use error::{Error, Result};
pub use evaluation::{ContingencyTable2x2, RocCurve, RocPoint};
pub use harness::{CorpusManifest, ParserRun};
pub use matrix::{BinaryRelationMatrix, ColumnId, GroundTruth, Label, ParserCounts, RelationMatrix};
pub use pca::PcaResult;
pub use redundancy::{MessageCorrelation, ParserRedundancy};
pub use synth::{SyntheticCorpus, SyntheticSpec};
