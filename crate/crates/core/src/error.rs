use std::fmt;

use thiserror::Error;

/// Where a non-finite value first appeared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSite {
    pub step: Option<usize>,
    pub layer: usize,
    pub a: usize,
    pub b: usize,
}

impl fmt::Display for FaultSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(step) = self.step {
            write!(f, "step {step}, ")?;
        }
        write!(f, "layer {}, cell ({}, {})", self.layer, self.a, self.b)
    }
}

#[derive(Debug, Error)]
pub enum VsmlError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite state at {0}")]
    NumericFault(FaultSite),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("every population member diverged at outer step {step}")]
    Diverged { step: usize },

    /// A verification command ran but its check did not hold.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl VsmlError {
    pub fn config(msg: impl Into<String>) -> Self {
        VsmlError::Config(msg.into())
    }

    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            VsmlError::NumericFault(_) | VsmlError::NonFinite(_) | VsmlError::Diverged { .. }
        )
    }

    /// Process exit code: 1 validation, 2 numeric fault, 3 failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            e if e.is_numeric() => 2,
            VsmlError::CheckFailed(_) => 3,
            _ => 1,
        }
    }

    /// Attach an episode step index to a numeric fault.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            VsmlError::NumericFault(site) => VsmlError::NumericFault(FaultSite {
                step: Some(step),
                ..site
            }),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, VsmlError>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(VsmlError::Dimension {
            what,
            expected,
            actual,
        })
    }
}
