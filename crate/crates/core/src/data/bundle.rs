use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::numerics::DenseMatrix;

const META: &str = "meta.json";
const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.csv";
const LABELS: &str = "labels.csv";
const SPLITS: &str = "splits.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Scale every feature row to unit L1 norm after loading.
    pub row_normalize: bool,
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Dataset> {
    load_bundle_with(dir, LoadOptions::default())
}

pub fn load_bundle_with(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset> {
    let dir = dir.as_ref();
    let path = |name: &str| dir.join(name);
    let read = |name: &str| -> Result<String> {
        fs::read_to_string(path(name))
            .map_err(|e| Error::bundle(path(name), format!("cannot read: {e}")))
    };

    let meta: Meta =
        serde_json::from_str(&read(META)?).map_err(|e| Error::bundle(path(META), e.to_string()))?;
    let n = meta.num_nodes;
    if n == 0 {
        return Err(Error::bundle(path(META), "num_nodes must be positive"));
    }

    let edges = parse_edges(&path(EDGES), &read(EDGES)?, n)?;
    let features = parse_features(&path(FEATURES), &read(FEATURES)?, n, meta.num_features)?;
    let labels = parse_labels(&path(LABELS), &read(LABELS)?, n, meta.num_classes)?;
    let splits: Splits = serde_json::from_str(&read(SPLITS)?)
        .map_err(|e| Error::bundle(path(SPLITS), e.to_string()))?;

    let graph = build_graph(n, &edges).map_err(|e| Error::bundle(path(EDGES), e.to_string()))?;
    let dataset = Dataset {
        graph,
        features,
        labels,
        splits,
        num_classes: meta.num_classes,
    };
    dataset
        .validate()
        .map_err(|m| Error::bundle(path(SPLITS), m))?;
    log::debug!(
        "loaded bundle {}: {} nodes, {} edges, {} features, {} classes",
        dir.display(),
        n,
        dataset.graph.num_edges(),
        meta.num_features,
        meta.num_classes
    );
    Ok(if opts.row_normalize {
        dataset.row_normalized()
    } else {
        dataset
    })
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_index(file: &Path, row: usize, field: &str, n: usize) -> Result<usize> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| Error::bundle(file, format!("row {row}: '{field}' is not a node index")))?;
    if v >= n {
        return Err(Error::bundle(
            file,
            format!("row {row}: node {v} out of range for {n} nodes"),
        ));
    }
    Ok(v)
}

fn parse_edges(file: &Path, text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (row, line) in lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::bundle(
                file,
                format!("row {row}: expected 2 tab-separated fields"),
            ));
        }
        let u = parse_index(file, row, fields[0], n)?;
        let v = parse_index(file, row, fields[1], n)?;
        if u == v {
            return Err(Error::bundle(
                file,
                format!("row {row}: self-edge on node {u}"),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_features(file: &Path, text: &str, n: usize, f: usize) -> Result<DenseMatrix> {
    let mut x = DenseMatrix::zeros(n, f);
    let mut count = 0;
    for (row, line) in lines(text) {
        if count == n {
            return Err(Error::bundle(
                file,
                format!("row {row}: more than {n} rows"),
            ));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != f {
            return Err(Error::bundle(
                file,
                format!("row {row}: expected {f} values, found {}", fields.len()),
            ));
        }
        for (j, s) in fields.iter().enumerate() {
            let v: f64 = s.trim().parse().map_err(|_| {
                Error::bundle(
                    file,
                    format!("row {row}, column {}: '{s}' is not a number", j + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::bundle(
                    file,
                    format!("row {row}, column {}: non-finite value", j + 1),
                ));
            }
            x[(count, j)] = v;
        }
        count += 1;
    }
    if count != n {
        return Err(Error::bundle(
            file,
            format!("expected {n} rows, found {count}"),
        ));
    }
    Ok(x)
}

fn parse_labels(file: &Path, text: &str, n: usize, num_classes: usize) -> Result<Vec<usize>> {
    let mut labels = Vec::with_capacity(n);
    for (row, line) in lines(text) {
        let l: usize = line.trim().parse().map_err(|_| {
            Error::bundle(file, format!("row {row}: '{line}' is not a class label"))
        })?;
        if l >= num_classes {
            return Err(Error::bundle(
                file,
                format!("row {row}: label {l} outside [0, {num_classes})"),
            ));
        }
        labels.push(l);
    }
    if labels.len() != n {
        return Err(Error::bundle(
            file,
            format!("expected {n} labels, found {}", labels.len()),
        ));
    }
    Ok(labels)
}

/// Writes `dataset` in canonical form: edges `u < v` ascending, split
/// indices ascending, floats in shortest round-trip notation.
pub fn write_bundle(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let write = |name: &str, body: String| -> Result<()> {
        let p: PathBuf = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::bundle(p, format!("cannot write: {e}")))
    };

    let meta = Meta {
        num_nodes: dataset.num_nodes(),
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes,
    };
    write(META, to_json(&meta)?)?;

    let mut edges = String::new();
    for &(u, v) in dataset.graph.edges() {
        writeln!(edges, "{u}\t{v}").expect("writing to a String");
    }
    write(EDGES, edges)?;

    let mut features = String::new();
    for i in 0..dataset.num_nodes() {
        for j in 0..dataset.num_features() {
            if j > 0 {
                features.push(',');
            }
            write!(features, "{}", dataset.features[(i, j)]).expect("writing to a String");
        }
        features.push('\n');
    }
    write(FEATURES, features)?;

    let mut labels = String::new();
    for l in &dataset.labels {
        writeln!(labels, "{l}").expect("writing to a String");
    }
    write(LABELS, labels)?;

    let mut splits = dataset.splits.clone();
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    write(SPLITS, to_json(&splits)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value).map_err(|e| Error::Dataset(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_files(dir: &Path, files: &[(&str, &str)]) {
        for (name, body) in files {
            fs::write(dir.join(name), body).unwrap();
        }
    }

    fn minimal(dir: &Path) {
        write_files(
            dir,
            &[
                (
                    META,
                    r#"{"num_nodes": 2, "num_features": 2, "num_classes": 2}"#,
                ),
                (EDGES, "0\t1\n"),
                (FEATURES, "1.5,0\n0,2\n"),
                (LABELS, "0\n1\n"),
                (SPLITS, r#"{"train": [0, 1], "val": [], "test": []}"#),
            ],
        );
    }

    #[test]
    fn loads_two_nodes() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        let d = load_bundle(tmp.path()).unwrap();
        assert_eq!(d.num_nodes(), 2);
        assert_eq!(d.graph.edges(), &[(0, 1)]);
        assert_eq!(d.features[(0, 0)], 1.5);
        assert_eq!(d.labels, vec![0, 1]);
    }

    #[test]
    fn label_out_of_range_names_row() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write_files(tmp.path(), &[(LABELS, "0\n2\n")]);
        let err = load_bundle(tmp.path()).unwrap_err();
        match err {
            Error::Bundle { file, message } => {
                assert!(file.ends_with(LABELS));
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        fs::remove_file(tmp.path().join(EDGES)).unwrap();
        assert!(matches!(load_bundle(tmp.path()), Err(Error::Bundle { .. })));
    }

    #[test]
    fn malformed_rows() {
        let cases = [
            (EDGES, "0\t1\n1\t1\n", "row 2"),
            (EDGES, "0 1\n", "row 1"),
            (EDGES, "0\t5\n", "out of range"),
            (FEATURES, "1,2\n3\n", "row 2"),
            (FEATURES, "1,x\n3,4\n", "column 2"),
            (FEATURES, "1,2\n", "expected 2 rows"),
        ];
        for (name, body, needle) in cases {
            let tmp = tempfile::tempdir().unwrap();
            minimal(tmp.path());
            write_files(tmp.path(), &[(name, body)]);
            let msg = load_bundle(tmp.path()).unwrap_err().to_string();
            assert!(msg.contains(needle), "{name}: {msg}");
        }
    }

    #[test]
    fn overlapping_splits_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        write_files(
            tmp.path(),
            &[(SPLITS, r#"{"train": [0, 1], "val": [1], "test": []}"#)],
        );
        let msg = load_bundle(tmp.path()).unwrap_err().to_string();
        assert!(
            msg.contains("splits.json") && msg.contains("node 1"),
            "{msg}"
        );
    }

    #[test]
    fn row_normalize_flag() {
        let tmp = tempfile::tempdir().unwrap();
        minimal(tmp.path());
        let d = load_bundle_with(
            tmp.path(),
            LoadOptions {
                row_normalize: true,
            },
        )
        .unwrap();
        assert_eq!(d.features.row(0), vec![1.0, 0.0]);
        assert_eq!(d.features.row(1), vec![0.0, 1.0]);
    }

    #[test]
    fn byte_identical_round_trip() {
        let src = tempfile::tempdir().unwrap();
        write_files(
            src.path(),
            &[
                (
                    META,
                    "{\"num_nodes\":4,\"num_features\":1,\"num_classes\":2}\n",
                ),
                (EDGES, "0\t1\n0\t3\n1\t2\n"),
                (FEATURES, "0.1\n-2\n0.0000001\n3.25\n"),
                (LABELS, "0\n1\n1\n0\n"),
                (SPLITS, "{\"train\":[0,1],\"val\":[2],\"test\":[3]}\n"),
            ],
        );
        let d = load_bundle(src.path()).unwrap();
        let dst = tempfile::tempdir().unwrap();
        write_bundle(&d, dst.path()).unwrap();
        for name in [META, EDGES, FEATURES, LABELS, SPLITS] {
            let a = fs::read(src.path().join(name)).unwrap();
            let b = fs::read(dst.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
        assert_eq!(load_bundle(dst.path()).unwrap(), d);
    }
}
