//! DECM, RWCM and RECM: parameters, dyad laws, expectations and fitting.

pub mod dyad;
pub mod expectation;
pub mod model;
pub mod solver;

pub use dyad::{
    dyad_probability, log_dyad_probability, recm_case_probabilities, recm_normalizer,
    CaseProbabilities,
};
pub use expectation::{
    expected_constraints, log_likelihood, log_likelihood_gradient, log_partition,
};
pub use model::{constraints_from_graph, param_count, ModelKind, NodeConstraintSet, ParamSet};
pub use solver::{check_feasibility, fit, FitOptions, FitReport};
