use recon_core::ReconError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error("output: {0}")]
    Output(String),
    #[error("oracle check failed: {0}")]
    Oracle(String),
}

impl BenchError {
    /// 2 for configuration problems, 3 for unreadable code sets, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) => 3,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Output(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Output(e.to_string())
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;
