use std::path::PathBuf;

use thiserror::Error;

use crate::network::{LineId, Violation};

#[derive(Debug, Error)]
pub enum DnrError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown line id {0}")]
    UnknownLine(LineId),

    #[error("configuration is not a spanning tree: {0}")]
    NotSpanningTree(String),

    #[error("line {0} is already closed")]
    AlreadyClosed(LineId),

    #[error("line {0} is not closed")]
    NotClosed(LineId),

    #[error("line {0} is not part of the oriented tree")]
    NotInTree(LineId),

    #[error("tree enumeration exceeded the limit of {limit} trees")]
    LimitExceeded { limit: usize },

    #[error("invalid partition instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("power flow infeasible: bus {bus} voltage fell to {v_pu:.4} p.u.")]
    VoltageCollapse { bus: u32, v_pu: f64 },

    #[error("power flow did not converge after {sweeps} sweeps")]
    Diverged { sweeps: usize },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, DnrError>;
