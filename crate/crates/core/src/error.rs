use thiserror::Error;

use crate::hardware::Constraint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("infeasible drive plan: {constraint} still violated at {max_cells} cells (needs {required_cells})")]
    Infeasible {
        constraint: Constraint,
        required_cells: usize,
        max_cells: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
