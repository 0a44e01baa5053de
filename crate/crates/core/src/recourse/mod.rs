//! DEAR search, the closed-form direct action, action-set selection and
//! projection onto the admissible set.

mod closed_form;
mod constraints;
mod search;
mod selection;
mod types;

pub use closed_form::{closed_form_action, ClosedFormAction};
pub use constraints::{apply_constraints, Projection, Violation, ViolationKind, CHANGE_TOL};
pub use search::{dear_search, evaluate_action, features_of_columns, ActionEvaluation, DEAR_METHOD};
pub(crate) use search::check_negative;
pub use selection::{
    alignment_score, best_outcome, rank_candidates, recourse_with_selection, select_singletons, Candidate, GeneratorProvider,
    RANK_EPSILON,
};
pub use types::{CandidateStrategy, RecourseOutcome, RecourseRequest, StepRule};

#[cfg(test)]
mod tests;
