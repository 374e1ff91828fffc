use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure happened in; surfaces in CLI exit messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Library,
    LanguageScore,
    Candidates,
    Execute,
    Retrieve,
    FlowScore,
    AppearanceScore,
    Fusion,
    Oracle,
    Codec,
    Corpus,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Library => "library",
            Stage::LanguageScore => "lang-score",
            Stage::Candidates => "candidates",
            Stage::Execute => "execute",
            Stage::Retrieve => "retrieve",
            Stage::FlowScore => "flow-score",
            Stage::AppearanceScore => "appearance-score",
            Stage::Fusion => "fusion",
            Stage::Oracle => "oracle",
            Stage::Codec => "codec",
            Stage::Corpus => "corpus",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed descriptor: {0}")]
    MalformedDescriptor(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid skill label: {0}")]
    InvalidSkill(String),
    #[error("scene has no particles")]
    NoParticles,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty video")]
    EmptyVideo,
    #[error("histogram is not normalized (sum = {0})")]
    UnnormalizedInput(f64),
    #[error("empty demonstration set")]
    EmptyDemoSet,
    #[error("empty descriptor")]
    EmptyDescriptor,
    #[error("k = {k} exceeds {len} scores")]
    KTooLarge { k: usize, len: usize },
    #[error("no corpus record contains all of {0:?}")]
    NoEligibleRecords(Vec<String>),
    #[error("empty input")]
    EmptyInput,
    #[error("need at least two scores, got {0}")]
    TooFewEntries(usize),
    #[error("score vectors cover different template ids")]
    IdMismatch,
    #[error("empty score vector")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("language model backend: {0}")]
    Backend(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("[{stage}] {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
