use serde_json::json;
use thiserror::Error;

use skewcorr::Error as NumError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] NumError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Parameter errors from the library count as configuration errors.
    pub fn is_config(&self) -> bool {
        match self {
            CliError::Config(_) => true,
            CliError::Numerical(e) => matches!(
                e,
                NumError::InvalidParameter(_) | NumError::KernelMeasureMismatch(_) | NumError::UnlistedCombination(_)
            ),
            CliError::Io(_) => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            1
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            _ if self.is_config() => "config",
            CliError::Numerical(_) => "numerical",
            _ => "io",
        }
    }

    /// One-line JSON report for standard error.
    pub fn report(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } })
            .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_parameter_errors_map_to_config() {
        assert_eq!(CliError::from(NumError::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(NumError::StepTooLarge(10)).exit_code(), 1);
        let r: serde_json::Value = serde_json::from_str(&CliError::Config("bad".into()).report()).unwrap();
        assert_eq!(r["error"]["kind"], "config");
    }
}
