//! Fixtures shared by the benchmarks.

use gnn_unify::{generate_sbm, normalize, DenseMatrix, NormalizedOperators, Rng, SbmConfig};

/// Normalized operators of an SBM graph with `n` nodes (average degree
/// near 10) and `f` standard normal feature columns.
pub fn fixture(n: usize, f: usize) -> (NormalizedOperators, DenseMatrix) {
    let d = generate_sbm(&SbmConfig {
        num_nodes: n,
        num_classes: 4,
        p_in: 32.0 / n as f64,
        p_out: 2.0 / n as f64,
        feature_dim: 4,
        train_per_class: 1,
        val_size: 1,
        test_size: 1,
        ..SbmConfig::default()
    })
    .expect("valid fixture config");
    let mut rng = Rng::new(7);
    let h = DenseMatrix::from_fn(n, f, |_, _| rng.normal());
    (normalize(&d.graph), h)
}
