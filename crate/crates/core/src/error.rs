use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An operation was called outside its documented domain.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Input data failed validation.
    #[error("invalid input: {0}")]
    Validation(String),
    /// Two operands disagree on a dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    /// A NaN or infinity appeared where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    Diverged(String),
    /// A metric has no defined value for the given inputs.
    #[error("undefined metric: {0}")]
    Undefined(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_check(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        });
    }
    Ok(())
}
