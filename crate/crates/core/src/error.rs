use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n_t = {n_t} must equal m * n_ttd = {m} * {n_ttd}")]
    AntennaMismatch { n_t: usize, m: usize, n_ttd: usize },

    #[error("n_s = {n_s} exceeds n_rf = {n_rf}")]
    StreamsExceedRf { n_s: usize, n_rf: usize },

    #[error("n_rf = {n_rf} exceeds n_t = {n_t}")]
    RfExceedsAntennas { n_rf: usize, n_t: usize },

    #[error("n_s = {n_s} exceeds receive antennas n_r = {n_r}")]
    StreamsExceedReceive { n_s: usize, n_r: usize },

    #[error("fine grid g = {g} is not a multiple of coarse grid g_c = {g_c}")]
    GridRatio { g: usize, g_c: usize },

    #[error("subcarrier count k = {k} is not a multiple of k_prime = {k_prime}")]
    SubcarrierRatio { k: usize, k_prime: usize },

    #[error("fine grid g = {g} must be even")]
    OddGrid { g: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("Gram matrix is numerically singular (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    SingularGram { min_eig: f64, max_eig: f64 },

    #[error("all singular values are zero; no usable channel")]
    NoUsableChannel,

    #[error(
        "analog precoder at subcarrier {subcarrier} is rank deficient; collinear atoms {atoms:?}"
    )]
    RankDeficient {
        subcarrier: usize,
        atoms: Vec<usize>,
    },

    #[error("delay {delay:e} s outside [0, {t_max:e}] s")]
    DelayOutOfRange { delay: f64, t_max: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("channel at subcarrier {subcarrier} has zero norm")]
    ZeroChannel { subcarrier: usize },

    #[error("need {needed} distinct atoms but only {available} are selectable")]
    InsufficientAtoms { needed: usize, available: usize },

    #[error("requested {requested} peaks from a curve of length {available}")]
    PeakCount { requested: usize, available: usize },

    #[error("{failed} of {trials} trials failed for `{algorithm}` (first error: {first})")]
    TooManyFailures {
        algorithm: String,
        failed: usize,
        trials: usize,
        first: String,
    },

    #[error("user channels at subcarrier {subcarrier} are not full row rank")]
    UserRankDeficient { subcarrier: usize },

    #[error("fixture mismatch: {0}")]
    Fixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
