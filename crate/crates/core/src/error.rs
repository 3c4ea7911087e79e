use thiserror::Error;

/// Errors raised by construction, composition and solver routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum MslError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("B is singular (scaled condition {cond:.3e})")]
    SingularB { cond: f64 },

    #[error("eigensolver failed: {what} (residual {residual:.3e})")]
    Solver { what: String, residual: f64 },

    #[error("cannot split modes into equal plus/minus sets: {0}")]
    Partition(String),

    #[error("{what} is ill-conditioned (condition {cond:.3e})")]
    IllConditioned { what: String, cond: f64 },

    #[error("exponential overflow at max|Im k|*d = {omega_d:.4}{}", layer_suffix(.layer))]
    Overflow { omega_d: f64, layer: Option<usize> },

    #[error("{what} is singular (condition {cond:.3e})")]
    SingularBlock { what: String, cond: f64 },

    #[error("resonant inner factor at composition step {step} (smallest singular value {sigma_min:.3e})")]
    Resonance { step: usize, sigma_min: f64 },

    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("structure file error at {location}: {message}")]
    Structure { location: String, message: String },

    #[error("modeling error: {0}")]
    Modeling(String),
}

fn layer_suffix(layer: &Option<usize>) -> String {
    match layer {
        Some(i) => format!(" in layer {i}"),
        None => String::new(),
    }
}

impl MslError {
    pub fn with_layer(self, index: usize) -> Self {
        match self {
            MslError::Overflow { omega_d, .. } => MslError::Overflow {
                omega_d,
                layer: Some(index),
            },
            other => other,
        }
    }

    pub fn is_overflow(&self) -> bool {
        matches!(self, MslError::Overflow { .. })
    }
}

pub type Result<T> = std::result::Result<T, MslError>;
