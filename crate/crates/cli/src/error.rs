//! Error classes and their exit codes.

use attrib_core::attribute::AttributeError;
use attrib_core::datasets::DataError;
use attrib_core::decompose::DecomposeError;
use attrib_core::eval::EvalError;
use attrib_core::gateway::GatewayError;
use attrib_core::registry::RegistryError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_GATEWAY: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("gateway error: {0}")]
    Gateway(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Gateway(_) => EXIT_GATEWAY,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(m) | GatewayError::InvalidRequest(m) => CliError::Config(m),
            other => CliError::Gateway(other.to_string()),
        }
    }
}

impl From<DecomposeError> for CliError {
    fn from(e: DecomposeError) -> Self {
        match e {
            DecomposeError::Gateway { .. } => CliError::Gateway(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<AttributeError> for CliError {
    fn from(e: AttributeError) -> Self {
        match e {
            AttributeError::Mismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Gateway(e.to_string()),
        }
    }
}
