//! Crate-wide error type.

use crate::skill::SkillId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown skill name {0:?}")]
    UnknownSkill(String),

    #[error("duplicate skill {0} in registry subset")]
    DuplicateSkill(SkillId),

    #[error("registry must enable at least one skill")]
    EmptyRegistry,

    #[error("skill {0} is not enabled in the registry")]
    SkillNotEnabled(SkillId),

    #[error("reasoner selected {name:?}, which is outside the enabled skill library")]
    SkillNotInLibrary { name: String },

    #[error("reasoner unavailable after {attempts} attempt(s): {message}")]
    ReasonerUnavailable { attempts: usize, message: String },

    #[error("tool {kind} unavailable after {attempts} attempt(s): {message}")]
    ToolUnavailable {
        kind: String,
        attempts: usize,
        message: String,
    },

    #[error("no fixture recorded for key {key:?}")]
    FixtureMissing { key: String },

    #[error("malformed {kind} response: {message}")]
    MalformedToolResponse { kind: String, message: String },

    #[error("no template registered for id {0:?}")]
    TemplateMissing(String),

    #[error("no answer digit after {attempts} attempt(s); last reply: {last_raw:?}")]
    IndeterminateOutput {
        skill: SkillId,
        attempts: usize,
        last_raw: String,
    },

    #[error("image {width}x{height} is below the {min}-pixel minimum for this analyzer")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("invalid pixel buffer: {0}")]
    InvalidPixels(String),

    #[error("rollout group of size {size} is too small (need at least 2)")]
    GroupTooSmall { size: usize },

    #[error("context {0} is outside the policy's context table")]
    UnknownContext(usize),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("manifest line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("manifest line {line}: {source}")]
    ManifestLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest line {line}: duplicate record id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("manifest contains no evaluable records")]
    EmptyManifest,

    #[error("no prediction records to score")]
    EmptyPredictions,

    #[error("prediction references id {0:?} which is not in the manifest")]
    UnknownRecordId(String),

    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),

    #[error("{skill}/{producer}: {source}")]
    Producer {
        skill: SkillId,
        producer: String,
        #[source]
        source: Box<Error>,
    },

    #[error("jpeg codec: {0}")]
    Jpeg(String),

    #[error("record {record_id}: {source}")]
    Record {
        record_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Wraps an error with the id of the record being processed.
    pub fn for_record(self, record_id: &str) -> Error {
        Error::Record {
            record_id: record_id.to_string(),
            source: Box::new(self),
        }
    }

    /// Walks `Record` wrappers and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Record { source, .. } => source.root(),
            other => other,
        }
    }
}
