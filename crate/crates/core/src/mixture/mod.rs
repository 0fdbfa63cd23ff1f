//! The bounded four-component simplex: recipes, feature maps, sampling,
//! projection and acquisition optimization.

mod domain;
mod features;
mod optimize;
mod recipe;

pub use domain::{DomainSpec, SampleReport, REJECTION_BUDGET};
pub use features::{FeatureMap, IngredientSheet, IngredientSheetSet, Role};
pub use optimize::{
    optimize_acquisition, BatchProposal, ConstraintPof, FeasibilityReport, OptimizerOptions, DISTINCT_TOL,
    MIN_START_POF,
};
pub use recipe::{MixtureRecipe, SUM_TOL};

use thiserror::Error;

use crate::acquisition::AcquisitionError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixtureError {
    #[error("upper bounds sum to less than one; no recipe is feasible")]
    EmptyDomain,
    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),
    #[error("recipe outside the domain: {0}")]
    OutOfDomain(String),
    #[error("gave up after {rejections} consecutive Dirichlet rejections")]
    RejectionBudgetExceeded { rejections: u64 },
    #[error("invalid data sheets: {0}")]
    InvalidSheets(String),
    #[error("no start reaches probability of feasibility 1e-6 (best joint log PoF {:.3})", report.best_joint_log_pof)]
    AllStartsInfeasible { report: FeasibilityReport },
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}
