use alloc::string::String;

/// Errors raised by the numeric core.
///
/// The variants line up with the exit-code classes of the command line:
/// parameter and domain problems are caller mistakes, accuracy and numeric
/// problems are failures of the computation itself.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("accuracy error: {0}")]
    Accuracy(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("certification failure: {0}")]
    Certification(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
