use std::fmt;

use crate::value::Value;

/// A parse-time failure with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub msg: String,
}

impl SyntaxError {
    pub fn new(line: usize, msg: impl Into<String>) -> Self {
        Self { line, msg: msg.into() }
    }
}

/// A raised exception: the exception instance plus the (module, line)
/// frames it propagated through, innermost first.
#[derive(Clone)]
pub struct Exc {
    pub value: Value,
    pub trace: Vec<(String, usize)>,
}

impl Exc {
    pub fn new(value: Value) -> Self {
        Self { value, trace: Vec::new() }
    }

    /// Class name of the exception instance.
    pub fn type_name(&self) -> String {
        self.value.type_name()
    }

    /// `str(exc)`: the single argument, empty for none, the tuple otherwise.
    pub fn message(&self) -> String {
        crate::value::exception_message(&self.value)
    }
}

impl fmt::Debug for Exc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Exc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message();
        if msg.is_empty() {
            write!(f, "{}", self.type_name())?;
        } else {
            write!(f, "{}: {}", self.type_name(), msg)?;
        }
        if let Some((module, line)) = self.trace.first() {
            write!(f, " (at {module}:{line})")?;
        }
        Ok(())
    }
}

impl std::error::Error for Exc {}

/// Failure to load or run source text.
#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("syntax error in {file}: {err}")]
    Syntax { file: String, err: SyntaxError },
    #[error("{0}")]
    Raised(Exc),
}

impl From<Exc> for RunError {
    fn from(e: Exc) -> Self {
        RunError::Raised(e)
    }
}
