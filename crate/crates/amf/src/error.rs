use thiserror::Error;

/// Coarse classification of codec failures, as used by the conformance corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Truncation,
    Protocol,
    Reference,
    Depth,
    Range,
    Invariant,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Truncation => "truncation",
            ErrorKind::Protocol => "protocol",
            ErrorKind::Reference => "reference",
            ErrorKind::Depth => "depth",
            ErrorKind::Range => "range",
            ErrorKind::Invariant => "invariant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "truncation" => ErrorKind::Truncation,
            "protocol" => ErrorKind::Protocol,
            "reference" => ErrorKind::Reference,
            "depth" => ErrorKind::Depth,
            "range" => ErrorKind::Range,
            "invariant" => ErrorKind::Invariant,
            _ => return None,
        })
    }
}

/// Codec error. Decode-side variants carry the absolute octet offset at
/// which decoding failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmfError {
    #[error("truncated input at offset {offset}")]
    Truncated { offset: usize },

    #[error("protocol error at offset {offset}: {reason}")]
    Protocol { offset: usize, reason: String },

    #[error("dangling {table} reference {index} at offset {offset}")]
    Reference {
        offset: usize,
        table: &'static str,
        index: usize,
    },

    #[error("nesting depth exceeds {limit} at offset {offset}")]
    Depth { offset: usize, limit: usize },

    #[error("value {value} out of U29 range")]
    Range { value: u64 },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl AmfError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            AmfError::Truncated { .. } => ErrorKind::Truncation,
            AmfError::Protocol { .. } => ErrorKind::Protocol,
            AmfError::Reference { .. } => ErrorKind::Reference,
            AmfError::Depth { .. } => ErrorKind::Depth,
            AmfError::Range { .. } => ErrorKind::Range,
            AmfError::Invariant(_) => ErrorKind::Invariant,
        }
    }

    /// Offset for decode-side errors; `None` for encode-side ones.
    pub fn offset(&self) -> Option<usize> {
        match self {
            AmfError::Truncated { offset }
            | AmfError::Protocol { offset, .. }
            | AmfError::Reference { offset, .. }
            | AmfError::Depth { offset, .. } => Some(*offset),
            AmfError::Range { .. } | AmfError::Invariant(_) => None,
        }
    }

    pub(crate) fn protocol(offset: usize, reason: impl Into<String>) -> Self {
        AmfError::Protocol {
            offset,
            reason: reason.into(),
        }
    }

    /// Shifts a decode-side offset by `base`. Used when a value is decoded
    /// out of a sub-slice of a larger buffer.
    pub(crate) fn rebase(self, base: usize) -> Self {
        match self {
            AmfError::Truncated { offset } => AmfError::Truncated {
                offset: offset + base,
            },
            AmfError::Protocol { offset, reason } => AmfError::Protocol {
                offset: offset + base,
                reason,
            },
            AmfError::Reference {
                offset,
                table,
                index,
            } => AmfError::Reference {
                offset: offset + base,
                table,
                index,
            },
            AmfError::Depth { offset, limit } => AmfError::Depth {
                offset: offset + base,
                limit,
            },
            other => other,
        }
    }
}

pub type AmfResult<T> = Result<T, AmfError>;
