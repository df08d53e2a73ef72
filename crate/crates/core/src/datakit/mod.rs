//! Dataset construction: root-function labeling, manifests, splits,
//! downsampling, a synthetic corpus generator and evaluation metrics.

mod label;
mod manifest;
mod metrics;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use label::{
    default_allowlist, detect_user_defined_calls, label_functions, label_sources, LabeledFunction, Origin, SourceUnit,
};
pub use manifest::{downsample, split, ClassCounts, DatasetManifest, ManifestEntry};
pub use metrics::{compute_metrics, evaluate, f1_score, ConfusionCounts, MetricsReport};
pub use synth::{synth_generate, write_corpus, Cwe};

/// Class of a function. Bad (vulnerable) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    /// Output index of the class: good = 0, bad = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Good => 0,
            Label::Bad => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Good => "good",
            Label::Bad => "bad",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("{0} is empty")]
    Empty(String),
    #[error("both classes are required (good: {good}, bad: {bad})")]
    MissingClass { good: usize, bad: usize },
    #[error("need at least {needed} entries, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("manifest counts {stated:?} do not match its entries {actual:?}")]
    CountsMismatch { stated: ClassCounts, actual: ClassCounts },
    #[error("function `{function}` not found in {file}")]
    MissingFunction { file: String, function: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("function `{function}` in {file} matches both the good and the bad naming rule")]
    Ambiguous { file: String, function: String },
}
