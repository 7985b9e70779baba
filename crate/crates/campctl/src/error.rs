use std::fmt;

use camp_core::econ::EconError;
use camp_core::quality::QualityError;
use camp_core::trace::TraceError;
use serde_json::{json, Value};

/// Why a command stopped; each kind maps to one exit code.
#[derive(Debug)]
pub enum Failure {
    /// Inputs did not parse or validate (exit 2).
    Validation(anyhow::Error),
    /// Constraints left nothing to rank (exit 3).
    EmptyFeasible { rejected: usize, excluded: usize },
    /// Anything else, e.g. the output directory is not writable (exit 1).
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::EmptyFeasible { .. } => 3,
            Self::Internal(_) => 1,
        }
    }

    /// Machine-readable description written to standard error.
    pub fn to_json(&self) -> Value {
        match self {
            Self::Validation(e) => {
                let mut v = json!({
                    "error": "validation",
                    "exit_code": 2,
                    "message": format!("{e:#}"),
                });
                if let Some((file, row)) = location(e) {
                    v["file"] = json!(file);
                    if let Some(row) = row {
                        v["row"] = json!(row);
                    }
                }
                v
            }
            Self::EmptyFeasible { rejected, excluded } => json!({
                "error": "empty feasible set",
                "exit_code": 3,
                "rejected": rejected,
                "excluded": excluded,
                "message": "no design point satisfies the constraints",
            }),
            Self::Internal(e) => json!({
                "error": "internal",
                "exit_code": 1,
                "message": format!("{e:#}"),
            }),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(e) | Self::Internal(e) => write!(f, "{e:#}"),
            Self::EmptyFeasible { .. } => f.write_str("empty feasible set"),
        }
    }
}

/// File and row of a trace parse error anywhere in the chain.
fn location(e: &anyhow::Error) -> Option<(String, Option<usize>)> {
    e.chain().find_map(|c| {
        if let Some(q) = c.downcast_ref::<QualityError>() {
            return match q {
                QualityError::Parse { file, row, .. } => Some((file.clone(), Some(*row))),
                QualityError::Io { path, .. } => Some((path.display().to_string(), None)),
                _ => None,
            };
        }
        if let Some(x) = c.downcast_ref::<EconError>() {
            return match x {
                EconError::Parse { file, .. } => Some((file.clone(), None)),
                EconError::Io { path, .. } => Some((path.display().to_string(), None)),
                _ => None,
            };
        }
        let t = c.downcast_ref::<TraceError>()?;
        match t {
            TraceError::Malformed { file, row, .. }
            | TraceError::NonMonotone { file, row, .. }
            | TraceError::NegativePower { file, row, .. }
            | TraceError::OutOfRange { file, row, .. } => Some((file.clone(), Some(*row))),
            TraceError::Empty { file }
            | TraceError::Manifest { file, .. }
            | TraceError::Gap { file, .. } => Some((file.clone(), None)),
            TraceError::Io { path, .. } => Some((path.display().to_string(), None)),
            _ => None,
        }
    })
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags a fallible step as input validation or internal failure.
pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn internal(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn internal(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

pub fn invalid<T>(msg: impl fmt::Display) -> CmdResult<T> {
    Err(Failure::Validation(anyhow::anyhow!("{msg}")))
}
