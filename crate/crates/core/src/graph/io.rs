use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributedGraph, GraphBuilder, GraphError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Add the reverse of every edge (undirected inputs such as co-authorship).
    pub symmetrize: bool,
    /// Rescale every nonzero node attribute vector to unit Euclidean norm.
    pub normalize: bool,
    /// Edge attribute dimension to use when no edge record carries features.
    pub edge_dim: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            symmetrize: false,
            normalize: true,
            edge_dim: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    features: Vec<f64>,
    #[serde(default)]
    labels: Vec<String>,
    /// Extension: `false` keeps labels as hidden ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labeled: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    src: String,
    dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
}

fn open(path: &Path) -> Result<BufReader<File>, GraphError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|source| GraphError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GraphError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn convert<S: Scalar>(v: &[f64]) -> Vec<S> {
    v.iter().map(|&x| S::of(x)).collect()
}

fn with_line(path: &Path, line: usize, e: GraphError) -> GraphError {
    match e {
        GraphError::FeatureDimension {
            context,
            expected,
            found,
        } => GraphError::FeatureDimension {
            context: format!("{}:{line}: {context}", path.display()),
            expected,
            found,
        },
        GraphError::DanglingEndpoint { context, id } => GraphError::DanglingEndpoint {
            context: format!("{}:{line}: {context}", path.display()),
            id,
        },
        other => other,
    }
}

/// Loads a graph from the node and edge JSON Lines files.
pub fn load_graph<S: Scalar>(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    options: LoadOptions,
) -> Result<AttributedGraph<S>, GraphError> {
    let (nodes_path, edges_path) = (nodes_path.as_ref(), edges_path.as_ref());
    let mut builder = GraphBuilder::<S>::new();
    if let Some(d) = options.edge_dim {
        builder = builder.edge_dim(d);
    }
    for (line, rec) in records::<NodeRecord>(nodes_path)? {
        builder
            .add_node(
                &rec.id,
                &convert::<S>(&rec.features),
                &rec.labels,
                rec.labeled,
            )
            .map_err(|e| with_line(nodes_path, line, e))?;
    }
    for (line, rec) in records::<EdgeRecord>(edges_path)? {
        let feats = rec.features.as_deref().map(convert::<S>);
        builder
            .add_edge(&rec.src, &rec.dst, feats.as_deref())
            .map_err(|e| with_line(edges_path, line, e))?;
    }
    builder.build(options.symmetrize, options.normalize)
}

/// Writes a graph in the same JSON Lines layout `load_graph` reads. Every
/// directed edge is written, so reloading without symmetrization is exact.
pub fn write_graph<S: Scalar>(
    graph: &AttributedGraph<S>,
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<(), GraphError> {
    let io_err = |p: &Path| {
        let p = p.display().to_string();
        move |source| GraphError::Io {
            path: p.clone(),
            source,
        }
    };
    let (np, ep) = (nodes_path.as_ref(), edges_path.as_ref());
    let mut w = BufWriter::new(File::create(np).map_err(io_err(np))?);
    for v in 0..graph.node_count() {
        let labels: Vec<String> = (0..graph.label_count())
            .filter(|&l| graph.has_label(v, l))
            .map(|l| graph.label_names()[l].clone())
            .collect();
        let hidden = !graph.is_labeled(v) && !labels.is_empty();
        let rec = NodeRecord {
            id: graph.node_name(v).to_string(),
            features: graph.node_features(v).iter().map(|x| x.as_f64()).collect(),
            labels,
            labeled: hidden.then_some(false),
        };
        let line = serde_json::to_string(&rec).expect("node record serializes");
        writeln!(w, "{line}").map_err(io_err(np))?;
    }
    w.flush().map_err(io_err(np))?;

    let mut w = BufWriter::new(File::create(ep).map_err(io_err(ep))?);
    for (e, &(s, d)) in graph.edges().iter().enumerate() {
        let rec = EdgeRecord {
            src: graph.node_name(s).to_string(),
            dst: graph.node_name(d).to_string(),
            features: (graph.edge_dim() > 0)
                .then(|| graph.edge_features(e).iter().map(|x| x.as_f64()).collect()),
        };
        let line = serde_json::to_string(&rec).expect("edge record serializes");
        writeln!(w, "{line}").map_err(io_err(ep))?;
    }
    w.flush().map_err(io_err(ep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_and_zero_fills() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(
            dir.path(),
            "n.jsonl",
            "{\"id\":\"a\",\"features\":[3,4],\"labels\":[\"db\"]}\n{\"id\":\"b\",\"features\":[1,0]}\n",
        );
        let e = write(
            dir.path(),
            "e.jsonl",
            "{\"src\":\"a\",\"dst\":\"b\",\"features\":[1,2,3]}\n{\"src\":\"b\",\"dst\":\"a\"}\n",
        );
        let g: AttributedGraph<f64> = load_graph(&n, &e, LoadOptions::default()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_features(1), &[0.0, 0.0, 0.0]);
        assert!((g.node_features(0)[0] - 0.6).abs() < 1e-15);
        assert!(g.is_labeled(0) && !g.is_labeled(1));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(
            dir.path(),
            "n.jsonl",
            "{\"id\":\"a\",\"features\":[1]}\n\n{\"id\":\"b\",\"features\":oops}\n",
        );
        let e = write(dir.path(), "e.jsonl", "");
        let err = load_graph::<f64>(&n, &e, LoadOptions::default()).unwrap_err();
        match err {
            GraphError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_and_dimension_errors() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.jsonl", "{\"id\":\"a\",\"features\":[1]}\n");
        let e = write(dir.path(), "e.jsonl", "{\"src\":\"a\",\"dst\":\"q\"}\n");
        let err = load_graph::<f64>(&n, &e, LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("e.jsonl:1"), "{err}");
        let n2 = write(
            dir.path(),
            "n2.jsonl",
            "{\"id\":\"a\",\"features\":[1]}\n{\"id\":\"b\",\"features\":[1,2]}\n",
        );
        let e2 = write(dir.path(), "e2.jsonl", "");
        assert!(matches!(
            load_graph::<f64>(&n2, &e2, LoadOptions::default()),
            Err(GraphError::FeatureDimension { .. })
        ));
        let empty = write(dir.path(), "n3.jsonl", "");
        assert!(matches!(
            load_graph::<f64>(&empty, &e2, LoadOptions::default()),
            Err(GraphError::Empty)
        ));
        assert!(matches!(
            load_graph::<f64>(
                dir.path().join("missing.jsonl"),
                &e2,
                LoadOptions::default()
            ),
            Err(GraphError::Io { .. })
        ));
    }
}
