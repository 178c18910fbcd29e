use thiserror::Error;

/// Errors raised by the discretization, the nonlinear solver and the
/// branch tracer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The metric determinant collapsed at a node that is not an exempt grid corner.
    #[error("degenerate surface at node {node} (u index {i}, v index {j}): det g = {detg:e}")]
    DegenerateSurface {
        node: usize,
        i: usize,
        j: usize,
        detg: f64,
    },

    /// The bordered tangent system is singular; the base sits on a bifurcation point.
    #[error("bordered Jacobian is singular (pivot ratio {pivot_ratio:e}); branch point reached")]
    AtBifurcation { pivot_ratio: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("corrector did not converge after {iterations} iterations (last residual {residual:e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("bifurcation refinement failed: {0}")]
    RefinementFailure(String),

    #[error("branch switch failed: {0}")]
    SwitchFailure(String),

    #[error("conformal map evaluation failed: {0}")]
    ConformalMap(String),
}

pub type Result<T> = std::result::Result<T, CmcError>;
