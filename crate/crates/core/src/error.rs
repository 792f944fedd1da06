use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (volume {volume:e} below tolerance {tolerance:e})")]
    RankDeficient { volume: f64, tolerance: f64 },

    #[error("parameter outside model support: {0}")]
    Domain(String),

    #[error("prior is not samplable: {0}")]
    NotSamplable(String),

    #[error("objective is not finite at {location:?}")]
    Evaluation { location: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("jacobian probe failed for coordinate {coordinate} at {probe:?}: {source}")]
    JacobianProbe {
        coordinate: usize,
        probe: Vec<f64>,
        source: Box<Error>,
    },

    #[error("degenerate jacobian at {theta:?}: {source}")]
    DegenerateJacobian { theta: Vec<f64>, source: Box<Error> },

    #[error("every start failed: {0:?}")]
    AllStartsFailed(Vec<Error>),

    #[error("sampler degeneracy: {invalid} invalid draws out of {proposed} proposals")]
    SamplerDegeneracy { invalid: usize, proposed: usize },

    #[error("sample has no positive weight")]
    DegenerateSample,

    #[error("tolerance {tolerance} in round {round} accepted nothing after {attempts} attempts")]
    ScheduleInfeasible {
        round: usize,
        tolerance: f64,
        attempts: usize,
    },
}
