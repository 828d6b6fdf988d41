use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an out-of-range parameter.
    #[error("invalid parameter `{field}`: {message}")]
    Parameter { field: String, message: String },

    /// A checkpoint schedule that cannot be realized (non-monotone after
    /// snapping to the dense grid, overflowing step counts, ...).
    #[error("invalid schedule: {0}")]
    Schedule(String),

    /// The quadrature grid cannot support the requested computation
    /// (insufficient endpoint decay, radius outside the grid, ...).
    #[error("oracle grid error: {0}")]
    Grid(String),

    /// An operation was called on inputs violating its documented
    /// precondition (wrong dimension, unordered coupling inputs, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub fn parameter(field: &str, message: impl Into<String>) -> Self {
        Error::Parameter {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
