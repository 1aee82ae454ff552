use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the domain of the operation (negative coordinate, bad option).
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation at a collision where the quantity is singular.
    #[error("singular configuration: {0}")]
    Singular(String),

    /// A fundamental segment or orbit violates its defining constraints.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// Sample grid not closed under the requested symmetry.
    #[error("incompatible grid: {0}")]
    IncompatibleGrid(String),

    #[error("shooting failed: {0}")]
    Shooting(String),

    /// Newton iteration could not proceed or did not converge.
    #[error("newton solver failed: {0}")]
    Newton(String),

    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepUnderflow { t: f64, h: f64 },

    /// Two square-root coordinates vanish together; the regularization does not apply.
    #[error("quadruple or total collision approach: {0}")]
    MultipleCollision(String),

    #[error("fit window too small: {0}")]
    WindowTooSmall(String),
}

pub type Result<T> = std::result::Result<T, Error>;
