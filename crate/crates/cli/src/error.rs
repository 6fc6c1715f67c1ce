use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: `{key}`: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        key: String,
        reason: String,
    },

    #[error("run `{run}`: {source}")]
    Run {
        run: String,
        #[source]
        source: tracer_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Run { source, .. } => source.kind(),
            CliError::Io { .. } => "io",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
        });
        match self {
            CliError::Config { line, key, .. } => {
                v["key"] = key.clone().into();
                v["line"] = (*line).into();
            }
            CliError::Run { run, .. } => v["run"] = run.clone().into(),
            _ => {}
        }
        v
    }
}
