//! Graph propagation operators as minimizers of a unified quadratic objective.

pub mod data;
pub mod error;
pub mod graph;
pub mod nn;
pub mod numerics;
pub mod propagation;
pub mod spectral;
pub mod verify;

pub use data::{
    generate_sbm, homophily, load_bundle, load_bundle_with, write_bundle, Dataset, LoadOptions,
    SbmConfig, Splits,
};
pub use error::{Error, Result};
pub use graph::{build_graph, normalize, spmm, Graph, NormalizedOperators, SparseMatrix};
pub use nn::{accuracy, forward, loss_and_grad, train, Metrics, MlpParams, TrainConfig};
pub use numerics::{cg_solve, cholesky_solve, seeded_rng, DenseMatrix, Rng, SolveReport};
pub use propagation::{
    objective_gradient, objective_value, propagate, propagation_matrix, verify_convergence,
    ConvergenceReport, Mode, Model, ModelParams, PropagationConfig,
};
pub use spectral::{
    closed_coefficients, expand_iterate, polynomial_response, rational_response,
    to_laplacian_basis, Basis, FilterCoefficients,
};
pub use verify::{run_battery, VerifyOptions, VerifyReport};
