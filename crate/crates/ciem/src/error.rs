use thiserror::Error;

pub type Result<T> = std::result::Result<T, CiemError>;

#[derive(Debug, Error)]
pub enum CiemError {
    #[error("lattice: {0}")]
    Lattice(String),
    #[error("time grid: {0}")]
    Time(String),
    #[error("norm: {0}")]
    Norm(String),
    #[error("insufficient margin: need {need}, have {have}")]
    Margin { need: String, have: String },
    #[error("geometric solve outside admissible neighborhood S_N: {0}")]
    OutsideAdmissible(String),
    #[error("cutoff parameter: {0}")]
    Cutoff(String),
    #[error("mikado profile: {0}")]
    Profile(String),
    #[error("shift placement failed: {0}")]
    Placement(String),
    #[error("flow map: {0}")]
    Flow(String),
    #[error("building block: {0}")]
    Block(String),
    #[error("scheme: {0}")]
    Scheme(String),
    #[error("bootstrap: {0}")]
    Bootstrap(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
