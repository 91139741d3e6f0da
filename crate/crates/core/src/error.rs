use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modem parameters: {0}")]
    InvalidParams(String),

    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    SampleRateMismatch { a: f64, b: f64 },

    #[error("correlation template is empty")]
    EmptyTemplate,

    #[error("template ({template} samples) is longer than the signal ({signal} samples)")]
    TemplateTooLong { template: usize, signal: usize },

    #[error("span [{start}, {start}+{len}) lies outside a buffer of {buffer} samples")]
    SpanOutOfRange { start: f64, len: f64, buffer: usize },

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("symbol value {value} out of range (must be < {limit})")]
    SymbolOutOfRange { value: u32, limit: u32 },

    #[error("{what}: expected length {expected}, got {actual}")]
    WrongLength {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("inconsistent lengths: {0}")]
    InconsistentLength(String),

    #[error("invalid bit value {0} (bits must be 0 or 1)")]
    InvalidBit(u8),

    #[error("normal equations are singular or ill-conditioned")]
    IllConditioned,

    #[error("packet truncated: located {} of {groups} training symbols", partial_raw.len())]
    Truncated { partial_raw: Vec<f64>, groups: usize },

    #[error("timestamps must be strictly increasing")]
    NonIncreasingTimestamps,

    #[error("unknown channel preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),

    #[error("invalid codec configuration: {0}")]
    InvalidCodec(String),

    #[error("token {token} out of range for a codebook of {k}")]
    TokenOutOfRange { token: u32, k: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
