use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cpg::CfgError;
use crate::datakit::{DataError, LabelError};
use crate::frontend::FrontendError;
use crate::gcgat::ModelError;
use crate::veccpg::VocabError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    InFile { path: PathBuf, source: Box<Error> },
    #[error("function `{0}` not found")]
    NoSuchFunction(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn in_file(path: &Path, source: Error) -> Self {
        Error::InFile { path: path.to_path_buf(), source: Box::new(source) }
    }

    pub fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage { stage, source: Box::new(source) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
