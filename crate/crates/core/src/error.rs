use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("corpus contains no valid sentences")]
    EmptyCorpus,
    #[error("invalid sentence {doc_id}#{sent_index}: {reason}")]
    InvalidSentence {
        doc_id: String,
        sent_index: usize,
        reason: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("rule `{rule}`: {reason}")]
    Rule { rule: String, reason: String },
    #[error("malformed event key `{0}`")]
    BadEventKey(String),
    #[error("vocabulary is empty after applying min_count")]
    EmptyVocabulary,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("pair ({0}, {1}) has no co-occurrence counts")]
    UnknownPair(String, String),
    #[error("event `{0}` has zero frequency")]
    UndefinedEvent(String),
    #[error("dataset needs both classes")]
    SingleClass,
    #[error("dataset too small: {have} examples for {need} folds")]
    DatasetTooSmall { have: usize, need: usize },
    #[error("training diverged (non-finite loss)")]
    Diverged,
    #[error("overlapping causal mentions in {doc_id}#{sent_index}")]
    OverlappingMentions { doc_id: String, sent_index: usize },
    #[error("mention span out of bounds in {doc_id}#{sent_index}")]
    SpanOutOfBounds { doc_id: String, sent_index: usize },
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not enough distractors: need {need}, pool has {have}")]
    DistractorPool { need: usize, have: usize },
}
