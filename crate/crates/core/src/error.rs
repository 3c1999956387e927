//! Top-level error type and its mapping to process exit statuses.

use thiserror::Error;

use crate::clocks::ClockError;
use crate::elaborate::ElabError;
use crate::emit::VerifyError;
use crate::frontend::ParseError;
use crate::ir::IrError;
use crate::loops::LoopError;
use crate::sim::SimError;
use crate::stimulus::StimulusError;
use crate::testbench::TbError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DESIGN: i32 = 2;
pub const EXIT_SIM: i32 = 3;

#[derive(Debug, Error)]
pub enum AocError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Elab(#[from] ElabError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("stimulus: {0}")]
    Stimulus(#[from] StimulusError),
    #[error(transparent)]
    Testbench(TbError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<TbError> for AocError {
    fn from(e: TbError) -> Self {
        match e {
            TbError::Sim(s) => AocError::Sim(s),
            other => AocError::Testbench(other),
        }
    }
}

impl AocError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AocError::Usage(_) | AocError::Io { .. } | AocError::Stimulus(_) => EXIT_USAGE,
            AocError::Verify(VerifyError::ToolchainMissing | VerifyError::Io(_)) => EXIT_USAGE,
            AocError::Sim(_) | AocError::Verify(_) => EXIT_SIM,
            _ => EXIT_DESIGN,
        }
    }
}
