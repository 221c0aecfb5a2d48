use alloc::string::String;

/// Errors raised by the core pipeline.
///
/// The variants map one-to-one onto the failure classes the CLI reports:
/// configuration problems, bad data, and numerical breakdown.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("numerics error: {0}")]
    Numerics(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
