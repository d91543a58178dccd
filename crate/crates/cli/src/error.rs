use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error, Serialize)]
#[error("{kind:?} error: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<crate::config::FieldError>,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
            experiment: None,
            fields: Vec::new(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
            experiment: None,
            fields: Vec::new(),
        }
    }

    pub fn in_experiment(mut self, name: &str) -> Self {
        self.experiment = Some(name.to_string());
        self
    }

    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config | ErrorKind::Io => 2,
            ErrorKind::Numerical => 3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<supcoupling::Error> for CliError {
    fn from(e: supcoupling::Error) -> Self {
        let kind = match e {
            supcoupling::Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Config,
        };
        Self {
            kind,
            message: e.to_string(),
            experiment: None,
            fields: Vec::new(),
        }
    }
}
