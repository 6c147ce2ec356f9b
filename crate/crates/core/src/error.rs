use std::fmt;

/// Errors produced by the tensor, simulator and kernel layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("configuration error: {}", join(.0))]
    Invalid(Vec<crate::costmodel::Violation>),
    #[error("capacity error: {what} needs {required} bytes but only {available} are available")]
    Capacity {
        what: &'static str,
        required: usize,
        available: usize,
    },
    #[error("model violation: {0}")]
    Model(String),
    #[error("wrong kernel: {0}")]
    WrongKernel(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
