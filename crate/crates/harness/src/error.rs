use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] noisy_sort::Error),

    #[error("refused: {what} = {value} exceeds the limit {limit}")]
    ResourceCap {
        what: &'static str,
        value: String,
        limit: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn cap(what: &'static str, value: impl ToString, limit: impl ToString) -> Self {
        HarnessError::ResourceCap {
            what,
            value: value.to_string(),
            limit: limit.to_string(),
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }
}
