//! Datasets: the on-disk graph bundle format and a stochastic block model
//! generator.

mod bundle;
mod sbm;

pub use bundle::{load_bundle, load_bundle_with, write_bundle, LoadOptions};
pub use sbm::{generate_sbm, SbmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub splits: Splits,
    pub num_classes: usize,
}

impl Dataset {
    /// Checks every invariant; the returned message names the offending
    /// field.
    pub fn new(
        graph: Graph,
        features: DenseMatrix,
        labels: Vec<usize>,
        splits: Splits,
        num_classes: usize,
    ) -> Result<Self> {
        let d = Self {
            graph,
            features,
            labels,
            splits,
            num_classes,
        };
        d.validate().map_err(Error::Dataset)?;
        Ok(d)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.num_cols()
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        let n = self.graph.num_nodes();
        if self.num_classes == 0 {
            return Err("num_classes must be positive".into());
        }
        if self.features.num_rows() != n {
            return Err(format!(
                "features have {} rows, expected {n}",
                self.features.num_rows()
            ));
        }
        if !self.features.is_finite() {
            return Err("features contain non-finite values".into());
        }
        if self.labels.len() != n {
            return Err(format!(
                "labels have {} entries, expected {n}",
                self.labels.len()
            ));
        }
        if let Some(i) = self.labels.iter().position(|&l| l >= self.num_classes) {
            return Err(format!(
                "label {} of node {i} is outside [0, {})",
                self.labels[i], self.num_classes
            ));
        }
        let mut owner = vec![None; n];
        for (name, idx) in self.splits.named() {
            for &i in idx {
                if i >= n {
                    return Err(format!("{name} index {i} out of range for {n} nodes"));
                }
                if let Some(other) = owner[i] {
                    return Err(format!("node {i} appears in both {other} and {name}"));
                }
                owner[i] = Some(name);
            }
        }
        let mut seen = vec![false; self.num_classes];
        for &i in &self.splits.train {
            seen[self.labels[i]] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(format!("train split has no node of class {c}"));
        }
        Ok(())
    }

    /// Copy with each feature row scaled to unit L1 norm (zero rows stay
    /// zero).
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        let n = self.features.num_rows();
        let mut norms = vec![0.0; n];
        for col in self.features.columns() {
            for (s, v) in norms.iter_mut().zip(col) {
                *s += v.abs();
            }
        }
        for col in out.features.columns_mut() {
            for (v, s) in col.iter_mut().zip(&norms) {
                if *s > 0.0 {
                    *v /= s;
                }
            }
        }
        out
    }
}

impl Splits {
    pub fn named(&self) -> [(&'static str, &[usize]); 3] {
        [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ]
    }
}

/// Fraction of edges joining nodes of the same class; `None` without edges.
pub fn homophily(graph: &Graph, labels: &[usize]) -> Option<f64> {
    if graph.num_edges() == 0 {
        return None;
    }
    let same = graph
        .edges()
        .iter()
        .filter(|&&(u, v)| labels[u] == labels[v])
        .count();
    Some(same as f64 / graph.num_edges() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn tiny(labels: Vec<usize>, splits: Splits) -> Result<Dataset> {
        let g = build_graph(4, &[(0, 1), (1, 2), (2, 3)])?;
        let x = DenseMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64);
        Dataset::new(g, x, labels, splits, 2)
    }

    fn splits(train: &[usize], val: &[usize], test: &[usize]) -> Splits {
        Splits {
            train: train.to_vec(),
            val: val.to_vec(),
            test: test.to_vec(),
        }
    }

    #[test]
    fn valid_dataset() {
        let d = tiny(vec![0, 0, 1, 1], splits(&[0, 2], &[1], &[3])).unwrap();
        assert_eq!(d.num_nodes(), 4);
        assert_eq!(homophily(&d.graph, &d.labels), Some(2.0 / 3.0));
    }

    #[test]
    fn invariant_violations() {
        let msg = |r: Result<Dataset>| match r {
            Err(Error::Dataset(m)) => m,
            other => panic!("expected dataset error, got {other:?}"),
        };
        assert!(msg(tiny(vec![0, 0, 2, 1], splits(&[0, 3], &[], &[]))).contains("node 2"));
        assert!(
            msg(tiny(vec![0, 0, 1, 1], splits(&[0, 2], &[2], &[]))).contains("both train and val")
        );
        assert!(msg(tiny(vec![0, 0, 1, 1], splits(&[0, 1], &[], &[]))).contains("class 1"));
        assert!(msg(tiny(vec![0, 0, 1, 1], splits(&[0, 2], &[], &[9]))).contains("test index 9"));
    }

    #[test]
    fn l1_rows() {
        let g = build_graph(2, &[(0, 1)]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, -3.0], vec![0.0, 0.0]]).unwrap();
        let d = Dataset::new(g, x, vec![0, 0], splits(&[0], &[1], &[]), 1).unwrap();
        let r = d.row_normalized();
        assert_eq!(r.features.row(0), vec![0.25, -0.75]);
        assert_eq!(r.features.row(1), vec![0.0, 0.0]);
    }
}
