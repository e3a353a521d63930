use alloc::string::String;
use core::fmt;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor shape, data length or operand shape was invalid.
    Shape(String),
    /// An operation produced NaN or infinity.
    NonFinite(&'static str),
    /// A layer or model was used in a state that does not support the call.
    State(String),
    /// A configuration or argument value is out of range.
    Config(String),
    /// A dataset cannot be used as requested.
    Data(String),
    /// A serialized weights blob is malformed.
    Format(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::NonFinite(op) => write!(f, "non-finite value produced by {op}"),
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Data(m) => write!(f, "data error: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
pub(crate) use shape_err;
