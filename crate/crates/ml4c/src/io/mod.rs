//! File formats and persistence: the JSON graph document shared by DAGs,
//! skeletons and CPDAGs; CSV datasets with a cardinality sidecar; corpus
//! manifests; model files; feature matrices; and evaluation reports. All
//! writes go through write-to-temp-then-rename so failures never leave
//! partial output behind.

pub mod bif;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::{feature_names, FeatureVector, FEATURE_DIM};
use crate::graph::{Dag, GraphError, NodeId, Pdag, Skeleton, UnshieldedTriple};
use crate::learner::TrainedModel;
use crate::synth::{DiscreteDataset, GraphModel, SynthConfig, SynthError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes via a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(path))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| FormatError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| malformed(path, format!("serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

/// The graph text document: node names plus directed and undirected edges
/// by name. DAGs use only `directed_edges`, skeletons only
/// `undirected_edges`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub nodes: Vec<String>,
    pub directed_edges: Vec<[String; 2]>,
    pub undirected_edges: Vec<[String; 2]>,
}

impl GraphDoc {
    fn index(&self, path: &Path) -> Result<HashMap<&str, NodeId>, FormatError> {
        let mut map = HashMap::new();
        for (i, name) in self.nodes.iter().enumerate() {
            if map.insert(name.as_str(), i).is_some() {
                return Err(malformed(path, format!("duplicate node name {name}")));
            }
        }
        Ok(map)
    }

    fn resolve(
        &self,
        path: &Path,
        edges: &[[String; 2]],
    ) -> Result<Vec<(NodeId, NodeId)>, FormatError> {
        let index = self.index(path)?;
        edges
            .iter()
            .map(|[a, b]| {
                let ai = *index
                    .get(a.as_str())
                    .ok_or_else(|| malformed(path, format!("unknown node {a}")))?;
                let bi = *index
                    .get(b.as_str())
                    .ok_or_else(|| malformed(path, format!("unknown node {b}")))?;
                Ok((ai, bi))
            })
            .collect()
    }
}

fn edge_names(names: &[String], edges: impl Iterator<Item = (NodeId, NodeId)>) -> Vec<[String; 2]> {
    edges
        .map(|(u, v)| [names[u].clone(), names[v].clone()])
        .collect()
}

pub fn write_dag(path: &Path, dag: &Dag) -> Result<(), FormatError> {
    write_json(
        path,
        &GraphDoc {
            nodes: dag.names().to_vec(),
            directed_edges: edge_names(dag.names(), dag.edges().into_iter()),
            undirected_edges: vec![],
        },
    )
}

pub fn read_dag(path: &Path) -> Result<Dag, FormatError> {
    let doc: GraphDoc = read_json(path)?;
    if !doc.undirected_edges.is_empty() {
        return Err(malformed(
            path,
            "a dag document must not carry undirected edges",
        ));
    }
    let edges = doc.resolve(path, &doc.directed_edges)?;
    Ok(Dag::new(doc.nodes, edges)?)
}

pub fn write_skeleton(path: &Path, skel: &Skeleton) -> Result<(), FormatError> {
    write_json(
        path,
        &GraphDoc {
            nodes: skel.names().to_vec(),
            directed_edges: vec![],
            undirected_edges: edge_names(skel.names(), skel.edges()),
        },
    )
}

pub fn read_skeleton(path: &Path) -> Result<Skeleton, FormatError> {
    let doc: GraphDoc = read_json(path)?;
    if !doc.directed_edges.is_empty() {
        return Err(malformed(
            path,
            "a skeleton document must not carry directed edges",
        ));
    }
    let edges = doc.resolve(path, &doc.undirected_edges)?;
    Ok(Skeleton::new(doc.nodes, edges)?)
}

pub fn write_pdag(path: &Path, pdag: &Pdag) -> Result<(), FormatError> {
    write_json(
        path,
        &GraphDoc {
            nodes: pdag.names().to_vec(),
            directed_edges: edge_names(pdag.names(), pdag.directed_edges()),
            undirected_edges: edge_names(pdag.names(), pdag.undirected_edges()),
        },
    )
}

pub fn read_pdag(path: &Path) -> Result<Pdag, FormatError> {
    let doc: GraphDoc = read_json(path)?;
    let directed = doc.resolve(path, &doc.directed_edges)?;
    let undirected = doc.resolve(path, &doc.undirected_edges)?;
    Ok(Pdag::new(doc.nodes, directed, undirected)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    cardinalities: Vec<u32>,
}

/// Sidecar path holding the per-column cardinalities: `<stem>.meta.json`.
pub fn dataset_meta_path(dataset: &Path) -> PathBuf {
    let mut p = dataset.to_path_buf();
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    p.set_file_name(format!("{stem}.meta.json"));
    p
}

/// Comma-separated integer rows under a column-name header, with the
/// cardinalities in the sidecar file.
pub fn write_dataset(path: &Path, data: &DiscreteDataset) -> Result<(), FormatError> {
    for name in data.column_names() {
        if name.contains(',') || name.contains('\n') {
            return Err(malformed(
                path,
                format!("column name {name:?} is not csv-safe"),
            ));
        }
    }
    let mut text = String::new();
    text.push_str(&data.column_names().join(","));
    text.push('\n');
    for r in 0..data.n_rows() {
        let row = data.row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())?;
    write_json(
        &dataset_meta_path(path),
        &DatasetMeta {
            cardinalities: data.cardinalities().to_vec(),
        },
    )
}

pub fn read_dataset(path: &Path) -> Result<DiscreteDataset, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let meta: DatasetMeta = read_json(&dataset_meta_path(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed(path, "empty dataset file"))?;
    let names: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<u32>, _> = line.split(',').map(|tok| tok.trim().parse()).collect();
        let row = row.map_err(|e| malformed(path, format!("line {}: {e}", lineno + 2)))?;
        if row.len() != names.len() {
            return Err(malformed(
                path,
                format!("line {}: wrong column count", lineno + 2),
            ));
        }
        rows.push(row);
    }
    Ok(DiscreteDataset::new(names, meta.cardinalities, rows)?)
}

/// One corpus entry as recorded in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestItem {
    pub graph: String,
    pub dataset: String,
    pub seed: u64,
    pub model: GraphModel,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub config: SynthConfig,
    pub items: Vec<ManifestItem>,
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<(), FormatError> {
    write_json(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest, FormatError> {
    read_json(path)
}

pub fn write_model(path: &Path, model: &TrainedModel) -> Result<(), FormatError> {
    write_json(path, model)
}

pub fn read_model(path: &Path) -> Result<TrainedModel, FormatError> {
    let model: TrainedModel = read_json(path)?;
    if !model.basis.validate() {
        return Err(malformed(path, "embedding basis has the wrong dimension"));
    }
    Ok(model)
}

/// Feature matrix: three triple-identity columns then the 755 named
/// feature columns.
pub fn write_features(
    path: &Path,
    names: &[String],
    rows: &[(UnshieldedTriple, FeatureVector)],
) -> Result<(), FormatError> {
    let mut text = String::from("x,t,y,");
    text.push_str(&feature_names().join(","));
    text.push('\n');
    for (ut, fv) in rows {
        if fv.len() != FEATURE_DIM {
            return Err(malformed(path, "feature vector has the wrong dimension"));
        }
        text.push_str(&format!("{},{},{}", names[ut.x], names[ut.t], names[ut.y]));
        for v in &fv.values {
            text.push(',');
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// UT label table: triple identity columns and the 0/1 label.
pub fn write_labels(
    path: &Path,
    names: &[String],
    rows: &[(UnshieldedTriple, bool)],
) -> Result<(), FormatError> {
    let mut text = String::from("x,t,y,label\n");
    for (ut, label) in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            names[ut.x],
            names[ut.t],
            names[ut.y],
            u8::from(*label)
        ));
    }
    atomic_write(path, text.as_bytes())
}

/// One evaluation report row.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub dataset: String,
    pub shd: u64,
    pub edge_f1: f64,
    pub ut_f1: Option<f64>,
    pub runtime_s: f64,
}

/// Tab-separated report with a header; `ut_f1` prints as `-` when absent.
pub fn render_report(rows: &[ReportRow]) -> String {
    let mut text = String::from("dataset\tshd\tedge_f1\tut_f1\truntime_s\n");
    for row in rows {
        let ut = row
            .ut_f1
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "-".into());
        text.push_str(&format!(
            "{}\t{}\t{:.4}\t{}\t{:.3}\n",
            row.dataset, row.shd, row.edge_f1, ut, row.runtime_s
        ));
    }
    text
}
