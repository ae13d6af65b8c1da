//! Undirected graphs and their normalized operators.

mod sparse;

pub use sparse::{spmm, SparseMatrix};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// An undirected, unweighted graph.
///
/// Edges are stored once in canonical `(min, max)` order, sorted ascending.
/// Self-loops are never stored; [`normalize`] adds them.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    adjacency: SparseMatrix,
}

impl Graph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, `u < v`, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Symmetric 0/1 adjacency without self-loops.
    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    /// Number of neighbours of each node (self-loop not counted).
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes)
            .map(|i| self.adjacency.row_offsets()[i + 1] - self.adjacency.row_offsets()[i])
            .collect()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(i).map(|(j, _)| j)
    }
}

/// Builds a graph from an undirected edge list.
///
/// Both orientations of an edge and repeated edges collapse to one.
pub fn build_graph(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    if num_nodes == 0 {
        return Err(Error::config("a graph needs at least one node"));
    }
    let mut canonical = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        if u >= num_nodes || v >= num_nodes {
            return Err(Error::InvalidEdge {
                u,
                v,
                reason: format!("node id out of range for {num_nodes} nodes"),
            });
        }
        if u == v {
            return Err(Error::InvalidEdge {
                u,
                v,
                reason: "self-edges are not allowed in input".into(),
            });
        }
        canonical.push((u.min(v), u.max(v)));
    }
    canonical.sort_unstable();
    canonical.dedup();

    let mut triplets = Vec::with_capacity(2 * canonical.len());
    for &(u, v) in &canonical {
        triplets.push((u, v, 1.0));
        triplets.push((v, u, 1.0));
    }
    let adjacency = SparseMatrix::from_triplets(num_nodes, num_nodes, triplets)?;
    Ok(Graph {
        num_nodes,
        edges: canonical,
        adjacency,
    })
}

/// `Â = D̃^{-1/2}(A + I)D̃^{-1/2}` and `L̃ = I − Â`.
#[derive(Debug, Clone)]
pub struct NormalizedOperators {
    a_hat: SparseMatrix,
    l_tilde: SparseMatrix,
    self_loop_degrees: Vec<f64>,
}

impl NormalizedOperators {
    pub fn num_nodes(&self) -> usize {
        self.a_hat.num_rows()
    }

    pub fn a_hat(&self) -> &SparseMatrix {
        &self.a_hat
    }

    pub fn l_tilde(&self) -> &SparseMatrix {
        &self.l_tilde
    }

    /// Diagonal of `D̃ = D + I`.
    pub fn self_loop_degrees(&self) -> &[f64] {
        &self.self_loop_degrees
    }

    pub fn apply_a_hat(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.a_hat.spmm(x)
    }

    pub fn apply_l_tilde(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.l_tilde.spmm(x)
    }
}

pub fn normalize(graph: &Graph) -> NormalizedOperators {
    let n = graph.num_nodes();
    let self_loop_degrees: Vec<f64> = graph.degrees().iter().map(|&d| d as f64 + 1.0).collect();

    let mut a_trip = Vec::with_capacity(graph.adjacency().nnz() + n);
    let mut l_trip = Vec::with_capacity(graph.adjacency().nnz() + n);
    for i in 0..n {
        let diag = 1.0 / self_loop_degrees[i];
        a_trip.push((i, i, diag));
        let l_diag = 1.0 - diag;
        if l_diag != 0.0 {
            l_trip.push((i, i, l_diag));
        }
        for j in graph.neighbors(i) {
            let w = 1.0 / (self_loop_degrees[i] * self_loop_degrees[j]).sqrt();
            a_trip.push((i, j, w));
            l_trip.push((i, j, -w));
        }
    }
    let a_hat = SparseMatrix::from_triplets(n, n, a_trip).expect("indices come from a valid graph");
    let l_tilde =
        SparseMatrix::from_triplets(n, n, l_trip).expect("indices come from a valid graph");
    NormalizedOperators {
        a_hat,
        l_tilde,
        self_loop_degrees,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_smallest_connected_graph() {
        let g = build_graph(2, &[(0, 1)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.adjacency().is_symmetric());
        assert_eq!(g.adjacency().nnz(), 2);
    }

    #[test]
    fn build_empty_graph() {
        let g = build_graph(3, &[]).unwrap();
        assert_eq!(g.num_edges(), 0);
        assert_eq!(g.adjacency().nnz(), 0);
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = build_graph(3, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g = build_graph(4, &[(3, 2), (2, 3), (3, 2), (0, 3)]).unwrap();
        assert_eq!(g.edges(), &[(0, 3), (2, 3)]);
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(matches!(
            build_graph(3, &[(0, 3)]),
            Err(Error::InvalidEdge { u: 0, v: 3, .. })
        ));
        assert!(matches!(
            build_graph(3, &[(1, 1)]),
            Err(Error::InvalidEdge { .. })
        ));
        assert!(build_graph(0, &[]).is_err());
    }

    #[test]
    fn normalize_two_nodes() {
        let ops = normalize(&build_graph(2, &[(0, 1)]).unwrap());
        let a = ops.a_hat().to_dense();
        let l = ops.l_tilde().to_dense();
        assert_eq!(
            a,
            DenseMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap()
        );
        assert_eq!(
            l,
            DenseMatrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]).unwrap()
        );
    }

    #[test]
    fn normalize_empty_graph_is_exact_identity() {
        let ops = normalize(&build_graph(3, &[]).unwrap());
        assert_eq!(ops.a_hat(), &SparseMatrix::identity(3));
        assert_eq!(ops.l_tilde().nnz(), 0);
    }

    #[test]
    fn normalize_path_graph_against_dense_oracle() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        // dense oracle: D̃^{-1/2} (A + I) D̃^{-1/2}
        let a_tilde = [[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]];
        let deg: Vec<f64> = a_tilde.iter().map(|r| r.iter().sum()).collect();
        let oracle = DenseMatrix::from_fn(3, 3, |i, j| a_tilde[i][j] / (deg[i] * deg[j]).sqrt());
        let a = normalize(&g).a_hat().to_dense();
        assert!(a.max_abs_diff(&oracle).unwrap() < 1e-15);
        assert!((a[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((a[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((a[(2, 2)] - 0.5).abs() < 1e-15);
        assert!((a[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn laplacian_rows_are_identity_minus_a_hat() {
        let g = build_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let ops = normalize(&g);
        assert!(ops.a_hat().is_symmetric());
        assert!(ops.l_tilde().is_symmetric());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 } - ops.a_hat().get(i, j);
                assert!((ops.l_tilde().get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn k2_average() {
        let ops = normalize(&build_graph(2, &[(0, 1)]).unwrap());
        let z = ops
            .apply_a_hat(&DenseMatrix::column_vector(vec![1.0, 0.0]))
            .unwrap();
        assert_eq!(z.as_slice(), &[0.5, 0.5]);
    }
}
