//! Dense linear algebra, SPD solvers and seeded randomness.

mod dense;
mod rng;
mod solve;

pub use dense::DenseMatrix;
pub use rng::{seeded_rng, Rng};
pub use solve::{cg_solve, cholesky_factor, cholesky_solve, SolveReport};
