use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decomposition toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("mesh is not watertight ({boundary_edges} boundary edges, {non_manifold_edges} non-manifold edges)")]
    NotWatertight {
        boundary_edges: usize,
        non_manifold_edges: usize,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh has no surface area")]
    EmptyMesh,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("failed to cap cross-section: {0}")]
    CapFailure(String),

    #[error("no valid split plane")]
    NoValidPlane,

    #[error("GJK did not converge")]
    NoConvergence,

    #[error("regions {0:?} and {1:?} overlap")]
    OverlappingRegions(String, String),

    #[error("invalid region {id:?}: {reason}")]
    InvalidRegion { id: String, reason: String },

    #[error("region {0:?} contains no surface")]
    NoSamplesInRegion(String),

    #[error("empty input")]
    EmptyInput,

    #[error("could not place objects without contact after {0} attempts")]
    ClearanceViolation(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::NotWatertight { .. }
                | Error::EmptyMesh
                | Error::OverlappingRegions(..)
                | Error::InvalidRegion { .. }
                | Error::InvalidParams(_)
                | Error::EmptyInput
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::NotWatertight { .. } => "NotWatertight",
            Error::Io { .. } => "IoError",
            Error::EmptyMesh => "EmptyMesh",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::CapFailure(_) => "CapFailure",
            Error::NoValidPlane => "NoValidPlane",
            Error::NoConvergence => "NoConvergence",
            Error::OverlappingRegions(..) => "OverlappingRegions",
            Error::InvalidRegion { .. } => "InvalidRegion",
            Error::NoSamplesInRegion(_) => "NoSamplesInRegion",
            Error::EmptyInput => "EmptyInput",
            Error::ClearanceViolation(_) => "ClearanceViolation",
            Error::InvalidParams(_) => "InvalidParams",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
