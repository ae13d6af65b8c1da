use serde::{Deserialize, Serialize};

use super::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::numerics::{DenseMatrix, Rng};

/// Stochastic block model with balanced contiguous classes and noisy one-hot
/// class-mean features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Magnitude of the class-mean offset added to unit Gaussian noise.
    pub feature_signal: f64,
    pub seed: u64,
    pub train_per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            num_nodes: 1000,
            num_classes: 4,
            p_in: 0.03,
            p_out: 0.002,
            feature_dim: 16,
            feature_signal: 1.0,
            seed: 0,
            train_per_class: 20,
            val_size: 500,
            test_size: 1000,
        }
    }
}

impl SbmConfig {
    pub const PRESETS: [&'static str; 3] = ["easy", "medium", "hard"];

    /// Named configurations: `easy` is strongly homophilous with clear
    /// features, `hard` has weak features and mixed edges.
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        match name {
            "easy" => Some(Self {
                num_nodes: 400,
                p_in: 0.06,
                p_out: 0.003,
                ..base
            }),
            "medium" => Some(base),
            "hard" => Some(Self {
                p_in: 0.02,
                p_out: 0.004,
                feature_signal: 0.5,
                ..base
            }),
            _ => None,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(prob(self.p_in) && prob(self.p_out) && self.p_out <= self.p_in) {
            return Err(Error::config(format!(
                "need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        if self.num_classes == 0 || self.feature_dim < self.num_classes {
            return Err(Error::config(format!(
                "need num_classes >= 1 and feature_dim >= num_classes, got {} and {}",
                self.num_classes, self.feature_dim
            )));
        }
        if !self.feature_signal.is_finite() {
            return Err(Error::config("feature_signal must be finite"));
        }
        let smallest = self.num_nodes / self.num_classes;
        if self.train_per_class == 0 || smallest < self.train_per_class {
            return Err(Error::config(format!(
                "{} nodes in {} classes cannot supply {} training nodes per class",
                self.num_nodes, self.num_classes, self.train_per_class
            )));
        }
        if self.num_nodes - self.train_per_class * self.num_classes < 2 {
            return Err(Error::config(format!(
                "{} nodes leave no room for validation and test splits",
                self.num_nodes
            )));
        }
        Ok(())
    }

    pub fn class_of(&self, node: usize) -> usize {
        node * self.num_classes / self.num_nodes
    }
}

/// Samples a dataset. Edges, features and splits use independent child
/// streams of `cfg.seed`.
///
/// Splits: `train_per_class` random nodes of every class, then
/// `min(val_size, rest/2)` validation and `min(test_size, rest − val)` test
/// nodes drawn from a shuffle of the rest.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let labels: Vec<usize> = (0..n).map(|i| cfg.class_of(i)).collect();

    let mut rng = Rng::child(cfg.seed, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = build_graph(n, &edges)?;

    let mut rng = Rng::child(cfg.seed, 1);
    let mut features = DenseMatrix::zeros(n, cfg.feature_dim);
    for i in 0..n {
        for j in 0..cfg.feature_dim {
            features[(i, j)] = rng.normal();
        }
        features[(i, labels[i])] += cfg.feature_signal;
    }

    let mut rng = Rng::child(cfg.seed, 2);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for c in 0..cfg.num_classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        rng.shuffle(&mut members);
        train.extend_from_slice(&members[..cfg.train_per_class]);
        rest.extend_from_slice(&members[cfg.train_per_class..]);
    }
    rest.sort_unstable();
    rng.shuffle(&mut rest);
    let num_val = cfg.val_size.min(rest.len() / 2);
    let num_test = cfg.test_size.min(rest.len() - num_val);
    let mut val = rest[..num_val].to_vec();
    let mut test = rest[num_val..num_val + num_test].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();

    Dataset::new(
        graph,
        features,
        labels,
        Splits { train, val, test },
        cfg.num_classes,
    )
}
