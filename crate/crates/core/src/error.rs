use thiserror::Error;

/// Argument outside the domain of a physical or numerical formula.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} must be {requirement} (got {value})")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("selection must contain at least one AUV")]
    EmptySelection,
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

impl DomainError {
    pub(crate) fn range(name: &'static str, requirement: &'static str, value: f64) -> Self {
        DomainError::OutOfRange {
            name,
            requirement,
            value,
        }
    }
}

/// Misuse of the environment's episode protocol.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("environment has not been reset")]
    NotReset,
    #[error("a slot is already running; call end_slot first")]
    SlotInProgress,
    #[error("no slot is running; call begin_slot first")]
    NoActiveSlot,
    #[error("the low-level episode is finished; call end_slot")]
    SlotFinished,
    #[error("the low-level episode is not finished yet")]
    SlotNotFinished,
    #[error("expected {expected} actions (one per selected AUV), got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Invalid configuration values or files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for config key: {0}")]
    BadValue(String),
    #[error("config invariant violated: {0}")]
    Invariant(String),
}

/// Shape or state errors in the network toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("activation cache was produced before the last parameter change")]
    StaleCache,
    #[error("empty batch")]
    EmptyBatch,
}

/// Failure inside training or evaluation.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("checkpoint does not match the configuration: {0}")]
    Checkpoint(String),
}

/// Failure of a CLI-level experiment command.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("no checkpoint at {0}")]
    MissingCheckpoint(String),
    #[error("{0}")]
    Usage(String),
}
