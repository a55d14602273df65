use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid value for {field}: {reason}")]
    Validation { field: String, reason: String },
    #[error("record {record} references unknown subject `{subject_id}`")]
    DanglingSubject { record: usize, subject_id: String },
    #[error("duplicate subject id `{0}`")]
    DuplicateSubject(String),
    #[error("stored label for subject `{subject_id}` is {stored} but blood pressure means give {computed}")]
    LabelMismatch {
        subject_id: String,
        stored: bool,
        computed: bool,
    },
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("need both classes: {0}")]
    SingleClass(&'static str),
    #[error("class has {got} subjects, fewer than the {k} folds")]
    TooFewSubjects { k: usize, got: usize },
    #[error("expected input length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("no usable beats for feature aggregation")]
    NoUsableBeats,
    #[error("zero segments: unusable recording")]
    UnusableRecording,
    #[error("positive fraction {0} is infeasible under the blood-pressure truncation")]
    InfeasibleSpec(f64),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
