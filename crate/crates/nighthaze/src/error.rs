use thiserror::Error;

/// Errors produced by image operations, the pipeline and the generators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: {expected_width}x{expected_height} vs {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("expected {expected}-channel image, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate disparity")]
    DegenerateDisparity,

    #[error("insufficient support: need {needed} occupied bins, got {got}")]
    InsufficientSupport { needed: usize, got: usize },

    #[error("unknown config key: {0}")]
    UnknownConfigKey(String),

    #[error("invalid config value for `{key}`: {value}")]
    InvalidConfigValue { key: String, value: String },

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by mismatched image shapes.
    pub fn is_dimension_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. } | Error::ChannelMismatch { .. }
        )
    }

    /// True for errors caused by configuration input.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownConfigKey(_) | Error::InvalidConfigValue { .. }
        )
    }

    /// True for errors caused by file I/O or decoding.
    pub fn is_io_error(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Codec(_))
    }
}
