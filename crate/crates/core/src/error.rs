use alloc::string::String;
use core::fmt;

/// Failure conditions surfaced by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two quantities that must have matching dimensions did not.
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A configuration value failed validation.
    Config(String),
    /// A gradient, loss, or state value stopped being finite.
    NonFinite(&'static str),
    /// A sample was requested from a buffer holding no episodes.
    EmptyBuffer,
    /// An aggregation that needs at least one input received none.
    NoSamples(&'static str),
    /// `step` was called on an episode that already ran its full length.
    EpisodeOver,
    /// An episode failed structural validation when stored.
    MalformedEpisode(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                got,
            } => write!(f, "{context}: expected dimension {expected}, got {got}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::EmptyBuffer => write!(f, "replay buffer holds no episodes"),
            Error::NoSamples(what) => write!(f, "no samples: {what}"),
            Error::EpisodeOver => write!(f, "episode already finished"),
            Error::MalformedEpisode(msg) => write!(f, "malformed episode: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
