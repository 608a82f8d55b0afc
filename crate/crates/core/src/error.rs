use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("not enough identities: need {needed}, have {available}")]
    NotEnoughIdentities { needed: usize, available: usize },
    #[error("identity {0} has a single sample in the batch")]
    SingletonLabel(u32),
    #[error("batch needs at least two distinct identities")]
    SingleIdentity,
    #[error("could not assemble {needed} distinct identities after {attempts} redraws")]
    GroupAssembly { needed: usize, attempts: usize },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("query identity {0} is absent from the gallery")]
    MissingPositive(u32),
}
