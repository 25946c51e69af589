//! Command-line surface: synth, train, infer, eval, featurize, label.
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::citest::{CiTester, SepsetConfig};
use crate::featurize::{featurize_ut, EmbeddingBasis, SCHEMA_VERSION};
use crate::graph::{skeleton_of, unshielded_triples, Pdag, UnshieldedTriple};
use crate::io;
use crate::learner::{label_uts, train, Classifier, GbdtParams, PredicateKind, TrainedModel};
use crate::metrics::{edge_f1, shd, ut_f1};
use crate::pipeline::{build_training_set, run_ml4c_with_tester, Ml4cConfig};
use crate::synth::{build_corpus, GraphModel, SynthConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<io::FormatError> for CliError {
    fn from(e: io::FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<io::bif::BifError> for CliError {
    fn from(e: io::bif::BifError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::pipeline::PipelineError> for CliError {
    fn from(e: crate::pipeline::PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::learner::LearnerError> for CliError {
    fn from(e: crate::learner::LearnerError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::metrics::MetricsError> for CliError {
    fn from(e: crate::metrics::MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<crate::synth::SynthError> for CliError {
    fn from(e: crate::synth::SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Inclusive `lo:hi` range argument.
fn parse_usize_range(text: &str) -> Result<(usize, usize), String> {
    let parse_one = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());
    match text.split_once(':') {
        Some((lo, hi)) => Ok((parse_one(lo)?, parse_one(hi)?)),
        None => {
            let v = parse_one(text)?;
            Ok((v, v))
        }
    }
}

fn parse_f64_range(text: &str) -> Result<(f64, f64), String> {
    let parse_one = |s: &str| s.parse::<f64>().map_err(|e| e.to_string());
    match text.split_once(':') {
        Some((lo, hi)) => Ok((parse_one(lo)?, parse_one(hi)?)),
        None => {
            let v = parse_one(text)?;
            Ok((v, v))
        }
    }
}

/// Optional JSON config file; every key can be overridden by a flag.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub nodes: Option<(usize, usize)>,
    pub sparsity: Option<(f64, f64)>,
    pub graph_model: Option<GraphModel>,
    pub samples: Option<usize>,
    pub alpha_range: Option<(f64, f64)>,
    pub ci_alpha: Option<f64>,
    pub samples_per_dof: Option<f64>,
    pub max_sepset: Option<usize>,
    pub threshold: Option<f64>,
    pub rounds: Option<usize>,
    pub depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub basis_seed: Option<u64>,
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ml4c",
    version,
    about = "Supervised causal discovery on discrete data: synthesize corpora, train the v-structure classifier, infer CPDAGs, and evaluate them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of Bayesian networks and samples
    Synth(SynthArgs),
    /// Train the tree-ensemble classifier from a corpus manifest
    Train(TrainArgs),
    /// Infer a CPDAG from a dataset and its skeleton
    Infer(InferArgs),
    /// Score predicted graphs against ground truth
    Eval(EvalArgs),
    /// Dump the feature matrix for every unshielded triple
    Featurize(FeaturizeArgs),
    /// Dump ground-truth UT labels for a DAG
    Label(LabelArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (manifest.json, graphs/, data/)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_graphs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Node count range, e.g. 10:20
    #[arg(long, value_parser = parse_usize_range)]
    pub nodes: Option<(usize, usize)>,
    /// Average edges per node, e.g. 1.2:1.7
    #[arg(long, value_parser = parse_f64_range)]
    pub sparsity: Option<(f64, f64)>,
    #[arg(long, value_enum)]
    pub graph_model: Option<ClapGraphModel>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Dirichlet concentration range, e.g. 0.1:1.0
    #[arg(long, value_parser = parse_f64_range)]
    pub alpha_range: Option<(f64, f64)>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClapGraphModel {
    Er,
    Sf,
}

impl From<ClapGraphModel> for GraphModel {
    fn from(m: ClapGraphModel) -> Self {
        match m {
            ClapGraphModel::Er => GraphModel::Er,
            ClapGraphModel::Sf => GraphModel::Sf,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest(s) produced by `synth`
    #[arg(long, required = true)]
    pub corpus: Vec<PathBuf>,
    /// Model file to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Seed recorded with the (deterministic) training run
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for the random-feature embedding basis
    #[arg(long)]
    pub basis_seed: Option<u64>,
    /// Decision threshold stored in the model
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Significance level for the G² dependence decision
    #[arg(long)]
    pub ci_alpha: Option<f64>,
    /// Below samples_per_dof·dof rows the G² test reports independence
    #[arg(long)]
    pub samples_per_dof: Option<f64>,
    /// Largest sepset size searched
    #[arg(long)]
    pub max_sepset: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Trained model file (mutually exclusive with --predicate)
    #[arg(long, conflicts_with = "predicate")]
    pub model: Option<PathBuf>,
    /// Predicate classifier kind
    #[arg(long, value_enum)]
    pub predicate: Option<ClapPredicate>,
    /// Use exact d-separation from this DAG instead of the dataset
    #[arg(long)]
    pub oracle_dag: Option<PathBuf>,
    /// CPDAG file to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub ci_alpha: Option<f64>,
    #[arg(long)]
    pub samples_per_dof: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_sepset: Option<usize>,
    /// Optional run-manifest path (config, seeds, model hash, timings)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClapPredicate {
    StrongCpc,
    StrongMpc,
    StrongGmb,
    Weak1,
    Weak2,
    Weak3,
}

impl From<ClapPredicate> for PredicateKind {
    fn from(p: ClapPredicate) -> Self {
        match p {
            ClapPredicate::StrongCpc => PredicateKind::StrongCpc,
            ClapPredicate::StrongMpc => PredicateKind::StrongMpc,
            ClapPredicate::StrongGmb => PredicateKind::StrongGmb,
            ClapPredicate::Weak1 => PredicateKind::Weak1,
            ClapPredicate::Weak2 => PredicateKind::Weak2,
            ClapPredicate::Weak3 => PredicateKind::Weak3,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth graph file (CPDAG or DAG document)
    #[arg(long, conflicts_with = "truth_dir")]
    pub truth: Option<PathBuf>,
    #[arg(long, conflicts_with = "truth_dir", requires = "truth")]
    pub predicted: Option<PathBuf>,
    /// Directory of truth graphs, matched to --predicted-dir by file name
    #[arg(long, requires = "predicted_dir")]
    pub truth_dir: Option<PathBuf>,
    #[arg(long)]
    pub predicted_dir: Option<PathBuf>,
    /// Report file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub skeleton: PathBuf,
    /// Feature matrix file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Take the embedding basis from a trained model
    #[arg(long, conflicts_with = "basis_seed")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub basis_seed: Option<u64>,
    #[arg(long)]
    pub ci_alpha: Option<f64>,
    #[arg(long)]
    pub samples_per_dof: Option<f64>,
    #[arg(long)]
    pub max_sepset: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub dag: PathBuf,
    /// Label table to write
    #[arg(long)]
    pub out: PathBuf,
}

fn sepset_config(max_sepset: Option<usize>) -> SepsetConfig {
    match max_sepset {
        Some(k) => SepsetConfig {
            max_size: Some(k),
            ..SepsetConfig::default()
        },
        None => SepsetConfig::default(),
    }
}

fn ml4c_config(
    threshold: Option<f64>,
    ci_alpha: Option<f64>,
    samples_per_dof: Option<f64>,
    max_sepset: Option<usize>,
) -> Result<Ml4cConfig, CliError> {
    let mut config = Ml4cConfig::default();
    if let Some(t) = threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("threshold {t} must be in [0, 1]")));
        }
        config.threshold = t;
    }
    if let Some(a) = ci_alpha {
        if !(0.0 < a && a < 1.0) {
            return Err(CliError::Usage(format!("ci alpha {a} must be in (0, 1)")));
        }
        config.g2.alpha = a;
    }
    if let Some(spd) = samples_per_dof {
        // a NaN threshold must be rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(spd >= 0.0) {
            return Err(CliError::Usage(format!(
                "samples per dof {spd} must be non-negative"
            )));
        }
        config.g2.samples_per_dof = spd;
    }
    config.sepset = sepset_config(max_sepset);
    Ok(config)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let file = load_file_config(&args.config)?;
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        node_count_range: args
            .nodes
            .or(file.nodes)
            .unwrap_or(defaults.node_count_range),
        sparsity_range: args
            .sparsity
            .or(file.sparsity)
            .unwrap_or(defaults.sparsity_range),
        graph_model: args
            .graph_model
            .map(GraphModel::from)
            .or(file.graph_model)
            .unwrap_or(defaults.graph_model),
        sample_size: args
            .samples
            .or(file.samples)
            .unwrap_or(defaults.sample_size),
        dirichlet_alpha_range: args
            .alpha_range
            .or(file.alpha_range)
            .unwrap_or(defaults.dirichlet_alpha_range),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    config.validate()?;
    let corpus = build_corpus(&config, args.n_graphs)?;
    let mut items = Vec::new();
    for item in &corpus {
        let graph_rel = format!("graphs/g{:04}.json", item.index);
        let data_rel = format!("data/g{:04}.csv", item.index);
        io::write_dag(&args.out.join(&graph_rel), &item.net.dag)?;
        io::write_dataset(&args.out.join(&data_rel), &item.dataset)?;
        items.push(io::ManifestItem {
            graph: graph_rel,
            dataset: data_rel,
            seed: item.seed,
            model: config.graph_model,
            nodes: item.net.dag.node_count(),
            edges: item.net.dag.edge_count(),
        });
    }
    let manifest = io::CorpusManifest { config, items };
    io::write_manifest(&args.out.join("manifest.json"), &manifest)?;
    println!("wrote {} graphs under {}", corpus.len(), args.out.display());
    Ok(())
}

fn load_corpus_pairs(
    manifest_path: &Path,
) -> Result<Vec<(crate::graph::Dag, crate::synth::DiscreteDataset)>, CliError> {
    let manifest = io::read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .items
        .iter()
        .map(|item| {
            let dag = io::read_dag(&base.join(&item.graph))?;
            let data = io::read_dataset(&base.join(&item.dataset))?;
            Ok((dag, data))
        })
        .collect()
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let file = load_file_config(&args.config)?;
    let basis_seed = args.basis_seed.or(file.basis_seed).unwrap_or(0);
    let basis = EmbeddingBasis::from_seed(basis_seed);
    let config = ml4c_config(
        None,
        args.ci_alpha.or(file.ci_alpha),
        args.samples_per_dof.or(file.samples_per_dof),
        args.max_sepset.or(file.max_sepset),
    )?;
    let defaults = GbdtParams::default();
    let params = GbdtParams {
        n_rounds: args.rounds.or(file.rounds).unwrap_or(defaults.n_rounds),
        max_depth: args.depth.or(file.depth).unwrap_or(defaults.max_depth),
        learning_rate: args
            .learning_rate
            .or(file.learning_rate)
            .unwrap_or(defaults.learning_rate),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    let threshold = args.threshold.or(file.threshold).unwrap_or(0.1);

    let mut examples = Vec::new();
    for manifest in &args.corpus {
        let pairs = load_corpus_pairs(manifest)?;
        let corpus_id = manifest.display().to_string();
        examples.extend(build_training_set(&pairs, &corpus_id, &basis, &config)?);
    }
    let positives = examples.iter().filter(|e| e.label).count();
    let (ensemble, loss_log) = train(&examples, &params)?;
    let model = TrainedModel {
        schema_version: SCHEMA_VERSION.to_string(),
        basis,
        threshold,
        ensemble,
    };
    io::write_model(&args.out, &model)?;
    println!(
        "trained on {} UTs ({} positive); final training loss {:.5}; model at {}",
        examples.len(),
        positives,
        loss_log.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunManifest {
    data: String,
    skeleton: String,
    classifier: String,
    model_sha256: Option<String>,
    basis_seed: Option<u64>,
    threshold: f64,
    ci_alpha: f64,
    samples_per_dof: f64,
    max_sepset: Option<usize>,
    ut_count: usize,
    survivor_count: usize,
    scoring_seconds: f64,
    orientation_seconds: f64,
}

pub fn cmd_infer(args: &InferArgs) -> Result<(), CliError> {
    let file = load_file_config(&args.config)?;
    let skel = io::read_skeleton(&args.skeleton)?;
    let data = io::read_dataset(&args.data)?;
    if data.column_names() != skel.names() {
        return Err(CliError::Data(
            "dataset columns do not match skeleton nodes".into(),
        ));
    }

    let (classifier, model_hash, default_threshold) = match (&args.model, args.predicate) {
        (Some(path), None) => {
            let bytes = std::fs::read(path).map_err(|e| {
                CliError::Data(format!("cannot read model {}: {e}", path.display()))
            })?;
            let hash = format!("{:x}", Sha256::digest(&bytes));
            let model = io::read_model(path)?;
            let threshold = model.threshold;
            (Classifier::Trained(model), Some(hash), threshold)
        }
        (None, Some(kind)) => (Classifier::Predicate(kind.into()), None, 0.1),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --model or --predicate is required".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let threshold = args
        .threshold
        .or(file.threshold)
        .unwrap_or(default_threshold);
    let config = ml4c_config(
        Some(threshold),
        args.ci_alpha.or(file.ci_alpha),
        args.samples_per_dof.or(file.samples_per_dof),
        args.max_sepset.or(file.max_sepset),
    )?;

    let oracle_dag = match &args.oracle_dag {
        Some(path) => Some(io::read_dag(path)?),
        None => None,
    };
    let tester = match &oracle_dag {
        Some(dag) => {
            if dag.names() != skel.names() {
                return Err(CliError::Data(
                    "oracle dag nodes do not match skeleton nodes".into(),
                ));
            }
            CiTester::from_dag(dag)
        }
        None => CiTester::from_data(&data, config.g2),
    };
    let run = run_ml4c_with_tester(&tester, &skel, &classifier, &config)?;
    io::write_pdag(&args.out, &run.cpdag)?;

    if let Some(manifest_path) = &args.manifest {
        let manifest = RunManifest {
            data: args.data.display().to_string(),
            skeleton: args.skeleton.display().to_string(),
            classifier: match (&args.model, args.predicate) {
                (Some(p), _) => p.display().to_string(),
                (None, Some(k)) => serde_json::to_value(PredicateKind::from(k))
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_else(|| "predicate".into()),
                _ => unreachable!(),
            },
            model_sha256: model_hash,
            basis_seed: match &classifier {
                Classifier::Trained(m) => Some(m.basis.seed),
                Classifier::Predicate(_) => None,
            },
            threshold: config.threshold,
            ci_alpha: config.g2.alpha,
            samples_per_dof: config.g2.samples_per_dof,
            max_sepset: config.sepset.max_size,
            ut_count: run.scored_uts.len(),
            survivor_count: run.survivors.len(),
            scoring_seconds: run.scoring_time.as_secs_f64(),
            orientation_seconds: run.orientation_time.as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        io::atomic_write(manifest_path, text.as_bytes())?;
    }
    println!(
        "cpdag written to {} ({} directed, {} undirected edges)",
        args.out.display(),
        run.cpdag.directed_count(),
        run.cpdag.undirected_count()
    );
    Ok(())
}

fn v_structure_labels(pdag: &Pdag, uts: &[UnshieldedTriple]) -> Vec<bool> {
    uts.iter()
        .map(|ut| pdag.has_directed(ut.x, ut.t) && pdag.has_directed(ut.y, ut.t))
        .collect()
}

/// Reads a graph document as a CPDAG; plain DAG documents are converted to
/// their CPDAG so evaluations can target DAG files directly.
fn read_truth_graph(path: &Path) -> Result<Pdag, CliError> {
    let pdag = io::read_pdag(path)?;
    if pdag.undirected_count() == 0 {
        if let Ok(dag) = io::read_dag(path) {
            return Ok(crate::graph::cpdag_of(&dag));
        }
    }
    Ok(pdag)
}

fn eval_pair(name: &str, truth_path: &Path, pred_path: &Path) -> Result<io::ReportRow, CliError> {
    let start = Instant::now();
    let truth = read_truth_graph(truth_path)?;
    let predicted = io::read_pdag(pred_path)?;
    let shd_value = shd(&truth, &predicted)?;
    let f1 = edge_f1(&truth, &predicted)?;
    let ut = if truth.skeleton() == predicted.skeleton() {
        let uts = unshielded_triples(&truth.skeleton());
        Some(ut_f1(
            &v_structure_labels(&truth, &uts),
            &v_structure_labels(&predicted, &uts),
        )?)
    } else {
        None
    };
    Ok(io::ReportRow {
        dataset: name.to_string(),
        shd: shd_value,
        edge_f1: f1,
        ut_f1: ut,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    match (
        &args.truth,
        &args.predicted,
        &args.truth_dir,
        &args.predicted_dir,
    ) {
        (Some(truth), Some(predicted), None, None) => {
            let name = predicted
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| predicted.display().to_string());
            rows.push(eval_pair(&name, truth, predicted)?);
        }
        (None, None, Some(truth_dir), Some(pred_dir)) => {
            let mut names: BTreeMap<String, PathBuf> = BTreeMap::new();
            let entries = std::fs::read_dir(truth_dir)
                .map_err(|e| CliError::Data(format!("cannot list {}: {e}", truth_dir.display())))?;
            for entry in entries {
                let entry = entry.map_err(|e| CliError::Data(e.to_string()))?;
                let path = entry.path();
                if path.extension().map(|e| e == "json").unwrap_or(false) {
                    names.insert(entry.file_name().to_string_lossy().into_owned(), path);
                }
            }
            if names.is_empty() {
                return Err(CliError::Data(format!(
                    "no graph documents in {}",
                    truth_dir.display()
                )));
            }
            for (name, truth_path) in names {
                let pred_path = pred_dir.join(&name);
                if !pred_path.exists() {
                    return Err(CliError::Data(format!(
                        "missing prediction {}",
                        pred_path.display()
                    )));
                }
                rows.push(eval_pair(&name, &truth_path, &pred_path)?);
            }
        }
        _ => {
            return Err(CliError::Usage(
                "use --truth/--predicted for one pair or --truth-dir/--predicted-dir for a batch"
                    .into(),
            ))
        }
    }
    let text = io::render_report(&rows);
    match &args.out {
        Some(path) => io::atomic_write(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_featurize(args: &FeaturizeArgs) -> Result<(), CliError> {
    let file = load_file_config(&args.config)?;
    let skel = io::read_skeleton(&args.skeleton)?;
    let data = io::read_dataset(&args.data)?;
    if data.column_names() != skel.names() {
        return Err(CliError::Data(
            "dataset columns do not match skeleton nodes".into(),
        ));
    }
    let basis = match (&args.model, args.basis_seed.or(file.basis_seed)) {
        (Some(path), _) => io::read_model(path)?.basis,
        (None, seed) => EmbeddingBasis::from_seed(seed.unwrap_or(0)),
    };
    let config = ml4c_config(
        None,
        args.ci_alpha.or(file.ci_alpha),
        args.samples_per_dof.or(file.samples_per_dof),
        args.max_sepset.or(file.max_sepset),
    )?;
    let tester = CiTester::from_data(&data, config.g2);
    let mut rows = Vec::new();
    for ut in unshielded_triples(&skel) {
        let fv = featurize_ut(&skel, &ut, &tester, &basis, &config.sepset)
            .map_err(|e| CliError::Data(e.to_string()))?;
        rows.push((ut, fv));
    }
    io::write_features(&args.out, skel.names(), &rows)?;
    println!(
        "wrote {} feature rows to {}",
        rows.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_label(args: &LabelArgs) -> Result<(), CliError> {
    let dag = io::read_dag(&args.dag)?;
    let skel = skeleton_of(&dag);
    let labels = label_uts(&dag, &skel)?;
    io::write_labels(&args.out, dag.names(), &labels)?;
    println!("wrote {} labels to {}", labels.len(), args.out.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Label(args) => cmd_label(args),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsers() {
        assert_eq!(parse_usize_range("10:20").unwrap(), (10, 20));
        assert_eq!(parse_usize_range("7").unwrap(), (7, 7));
        assert!(parse_usize_range("a:b").is_err());
        assert_eq!(parse_f64_range("1.2:1.7").unwrap(), (1.2, 1.7));
        assert_eq!(parse_f64_range("0.5").unwrap(), (0.5, 0.5));
    }

    #[test]
    fn file_config_rejects_unknown_keys() {
        let err = serde_json::from_str::<FileConfig>(r#"{"nope": 1}"#);
        assert!(err.is_err());
        let ok: FileConfig = serde_json::from_str(r#"{"ci_alpha": 0.01}"#).unwrap();
        assert_eq!(ok.ci_alpha, Some(0.01));
    }

    #[test]
    fn config_validation_errors_are_usage_errors() {
        let err = ml4c_config(Some(2.0), None, None, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = ml4c_config(None, Some(1.5), None, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
