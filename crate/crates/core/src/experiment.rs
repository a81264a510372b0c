//! Config-driven experiments: dataset loading, graph construction, validation
//! grid search, multi-seed evaluation and the on-disk output layout.
//!
//! An output directory holds `config.toml`, `report.json`, `report.csv`,
//! `model.gkd` (the model of the first seed) and `logs/seed_<s>.log`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{
    apply_missing, generate_synthetic, load_csv_dataset, make_splits, write_csv_dataset, Dataset, GraphFeatures,
    SplitSpec, Splits, SyntheticParams, FEATURES_FILE, GRAPH_FEATURES_FILE, LABELS_FILE,
};
use crate::error::{GkdError, Result};
use crate::eval::{run_trials, Metrics, MetricsReport, Summary};
use crate::graph::{similarity_graph, threshold_graph, union_graphs, SparseGraph};
use crate::labels::LabelMatrix;
use crate::lpa::LpaConfig;
use crate::matrix::DenseMatrix;
use crate::nn::{mlp_predict, AutoencoderConfig, TrainConfig};
use crate::nn::autoencoder_embed;
use crate::pipeline::{
    dnn_baseline, dnn_jfc_baseline, gcn_baseline, gcn_predict_isolated, gkd_train, propagated_labels,
    train_student, train_teacher, SavedModel,
};
use crate::rng::derive_seed;

/// Seed stream of the teacher network; the student and baselines use the trial seed itself.
pub const TEACHER_STREAM: u64 = 0x74_6561_6368_6572;
const MISSING_STREAM: u64 = 3;

pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const MODEL_FILE: &str = "model.gkd";
pub const LOG_DIR: &str = "logs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gkd,
    Dnn,
    DnnJfc,
    Gcn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gkd, Method::Dnn, Method::DnnJfc, Method::Gcn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gkd => "gkd",
            Method::Dnn => "dnn",
            Method::DnnJfc => "dnn-jfc",
            Method::Gcn => "gcn",
        }
    }

    fn needs_graph(self) -> bool {
        matches!(self, Method::Gkd | Method::Gcn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = GkdError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| GkdError::usage(format!("unknown method {s:?}; expected gkd, dnn, dnn-jfc or gcn")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvPaths {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub graph_features: PathBuf,
}

impl CsvPaths {
    /// The file names written by the `synth` command inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            features: dir.join(FEATURES_FILE),
            labels: dir.join(LABELS_FILE),
            graph_features: dir.join(GRAPH_FEATURES_FILE),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticParams),
    Csv(CsvPaths),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticParams::default())
    }
}

/// Node numbering of an edge-list file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphNodes {
    /// One node per dataset row; edges touching non-training rows are dropped.
    #[default]
    All,
    /// One node per training row, in training-split order (as written by `build-graph`).
    Train,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    /// Union over graph features of "values closer than the threshold" graphs.
    /// A single threshold applies to every feature.
    Threshold { thresholds: Vec<f64> },
    /// Cosine similarity of an autoencoder embedding of the standardized graph features.
    Similarity {
        threshold: f64,
        #[serde(default)]
        autoencoder: AutoencoderConfig,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        nodes: GraphNodes,
    },
}

/// Candidate hyperparameters. Every depth/width/rate/dropout combination is tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub epochs: usize,
    /// Remembrance weights tried by GKD; empty means `lpa.alpha`.
    pub alphas: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            depths: vec![1, 2, 3],
            widths: vec![16, 64, 256],
            learning_rates: vec![5e-3, 1e-2],
            dropouts: vec![0.1, 0.3, 0.5],
            epochs: 200,
            alphas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
        }
    }
}

impl Grid {
    pub fn train_configs(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &depth in &self.depths {
            for &width in &self.widths {
                for &learning_rate in &self.learning_rates {
                    for &dropout in &self.dropouts {
                        out.push(TrainConfig {
                            hidden: vec![width; depth],
                            learning_rate,
                            dropout,
                            epochs: self.epochs,
                            seed: 0,
                        });
                    }
                }
            }
        }
        out
    }

    /// Single-hidden-layer candidates, one per width/rate/dropout.
    pub fn gcn_configs(&self) -> Vec<TrainConfig> {
        let single = Grid {
            depths: vec![1],
            ..self.clone()
        };
        single.train_configs()
    }

    fn alphas(&self, lpa: &LpaConfig) -> Vec<f64> {
        if self.alphas.is_empty() {
            vec![lpa.alpha]
        } else {
            self.alphas.clone()
        }
    }

    pub fn validate(&self, lpa: &LpaConfig) -> Result<()> {
        let configs = self.train_configs();
        if configs.is_empty() {
            return Err(GkdError::usage("the hyperparameter grid is empty"));
        }
        for c in &configs {
            c.validate()?;
        }
        for a in self.alphas(lpa) {
            lpa.with_alpha(a).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Fraction of graph-feature entries hidden after loading, on top of any already missing.
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitSpec,
    /// Required by `gkd` and `gcn`.
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub lpa: LpaConfig,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            missing_rate: 0.0,
            dataset: DatasetSource::default(),
            split: SplitSpec::default(),
            graph: None,
            grid: Grid::default(),
            lpa: LpaConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].lines().count().max(1) as u64)
                .unwrap_or(0);
            GkdError::parse("config", line, e.message().to_owned())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GkdError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            GkdError::Parse { line, message, .. } => GkdError::parse(path.display().to_string(), line, message),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(GkdError::usage("at least one seed is required"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(GkdError::usage(format!(
                "missing_rate must lie in [0, 1), got {}",
                self.missing_rate
            )));
        }
        self.split.validate()?;
        self.lpa.validate()?;
        self.grid.validate(&self.lpa)?;
        if self.method.needs_graph() && self.graph.is_none() {
            return Err(GkdError::usage(format!("method {} needs a [graph] section", self.method)));
        }
        match &self.graph {
            Some(GraphSpec::Threshold { thresholds }) if thresholds.is_empty() => {
                Err(GkdError::usage("threshold graph needs at least one threshold"))
            }
            Some(GraphSpec::Similarity { threshold, .. }) if !(*threshold > 0.0 && *threshold <= 1.0) => {
                Err(GkdError::usage(format!(
                    "similarity threshold must lie in (0, 1], got {threshold}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Hash of everything that affects results (the output directory is excluded).
    pub fn fingerprint(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Dataset and splits, with the configured extra missingness applied.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(Dataset<f64>, Splits)> {
    let mut ds = match &cfg.dataset {
        DatasetSource::Synthetic(p) => generate_synthetic(p)?,
        DatasetSource::Csv(paths) => load_csv_dataset(&paths.features, &paths.labels, &paths.graph_features)?,
    };
    if cfg.missing_rate > 0.0 {
        ds.graph_features = apply_missing(
            &ds.graph_features,
            cfg.missing_rate,
            derive_seed(cfg.split.seed, MISSING_STREAM),
        )?;
    }
    let splits = make_splits(ds.n(), &cfg.split, ds.num_classes)?;
    Ok((ds, splits))
}

/// Population graph over the training nodes, numbered in `splits.train` order.
/// Only training rows are read.
pub fn build_graph(spec: &GraphSpec, ds: &Dataset<f64>, splits: &Splits) -> Result<SparseGraph> {
    let g = ds.graph_features.select_rows(&splits.train);
    match spec {
        GraphSpec::Threshold { thresholds } => {
            let per_feature: Vec<f64> = match thresholds.len() {
                1 => vec![thresholds[0]; g.cols()],
                n if n == g.cols() => thresholds.clone(),
                n => {
                    return Err(GkdError::usage(format!(
                        "{n} thresholds for {} graph features",
                        g.cols()
                    )))
                }
            };
            let graphs = per_feature
                .iter()
                .enumerate()
                .map(|(j, &t)| threshold_graph(&g.column(j), t))
                .collect::<Result<Vec<_>>>()?;
            union_graphs(&graphs)
        }
        GraphSpec::Similarity { threshold, autoencoder } => {
            let x_aux = standardized(&g)?;
            let targets = LabelMatrix::one_hot(&ds.labels_at(&splits.train), ds.num_classes)?;
            let fit = autoencoder_embed(&x_aux, &targets, &splits.labeled_within_train(), autoencoder)?;
            similarity_graph(&fit.latent, *threshold)
        }
        GraphSpec::File { path, nodes } => {
            let full = SparseGraph::load(path)?;
            match nodes {
                GraphNodes::All if full.n() == ds.n() => full.induced_subgraph(&splits.train),
                GraphNodes::Train if full.n() == splits.train.len() => Ok(full),
                GraphNodes::All => Err(GkdError::usage(format!(
                    "{} has {} nodes but the dataset has {} rows",
                    path.display(),
                    full.n(),
                    ds.n()
                ))),
                GraphNodes::Train => Err(GkdError::usage(format!(
                    "{} has {} nodes but the training split has {} rows",
                    path.display(),
                    full.n(),
                    splits.train.len()
                ))),
            }
        }
    }
}

/// Z-scores per column over observed entries; missing entries become 0 (the column mean).
fn standardized(g: &GraphFeatures<f64>) -> Result<DenseMatrix<f64>> {
    let mut out = DenseMatrix::zeros(g.rows(), g.cols());
    for j in 0..g.cols() {
        let observed: Vec<f64> = g.column(j).into_iter().flatten().collect();
        if observed.is_empty() {
            return Err(GkdError::usage(format!(
                "graph feature {j} is not observed in any training row"
            )));
        }
        let stats = Summary::of(&observed);
        let scale = if stats.std > 0.0 { stats.std } else { 1.0 };
        for i in 0..g.rows() {
            if let Some(v) = g.get(i, j) {
                out[(i, j)] = (v - stats.mean) / scale;
            }
        }
    }
    Ok(out)
}

/// Hyperparameters picked on the validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// The DNN, DNN-JFC or GCN network, or the GKD student.
    pub model: TrainConfig,
    pub teacher: Option<TrainConfig>,
    pub alpha: Option<f64>,
    pub val_accuracy: f64,
}

/// Everything a trial needs; built once per experiment.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub dataset: Dataset<f64>,
    pub splits: Splits,
    pub graph: Option<SparseGraph>,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (dataset, splits) = load_dataset(config)?;
        let graph = match (&config.graph, config.method.needs_graph()) {
            (Some(spec), true) => Some(build_graph(spec, &dataset, &splits)?),
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            dataset,
            splits,
            graph,
        })
    }

    fn graph(&self) -> Result<&SparseGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| GkdError::usage(format!("method {} needs a graph", self.config.method)))
    }

    fn lpa(&self, alpha: f64) -> LpaConfig {
        self.config.lpa.with_alpha(alpha)
    }

    /// Trains the configured method for one seed.
    pub fn fit(&self, selection: &Selection, seed: u64) -> Result<SavedModel<f64>> {
        let ds = &self.dataset;
        let cfg = selection.model.with_seed(seed);
        Ok(match self.config.method {
            Method::Gkd => {
                let teacher = selection
                    .teacher
                    .as_ref()
                    .ok_or_else(|| GkdError::usage("GKD selection lacks a teacher"))?
                    .with_seed(derive_seed(seed, TEACHER_STREAM));
                let alpha = selection.alpha.unwrap_or(self.config.lpa.alpha);
                SavedModel::Gkd(gkd_train(ds, &self.splits, self.graph()?, &teacher, &self.lpa(alpha), &cfg)?)
            }
            Method::Dnn => SavedModel::Mlp(dnn_baseline(ds, &self.splits, &cfg)?),
            Method::DnnJfc => SavedModel::Jfc(dnn_jfc_baseline(ds, &self.splits, &cfg)?),
            Method::Gcn => SavedModel::Gcn(gcn_baseline(ds, &self.splits, self.graph()?, &cfg)?),
        })
    }

    /// Metrics of `model` on `rows`, from node features only.
    pub fn score(&self, model: &SavedModel<f64>, rows: &[usize]) -> Result<Metrics> {
        score_rows(model, &self.dataset, rows)
    }

    fn val_accuracy(&self, probs: &LabelMatrix<f64>) -> Result<f64> {
        crate::eval::accuracy(&probs.argmax(), &self.dataset.labels_at(&self.splits.val))
    }

    /// Grid search on the validation split using `seed`.
    ///
    /// GKD is searched in stages: the teacher by its own validation accuracy,
    /// then the remembrance weight with the chosen teacher architecture as
    /// student, then the student architecture.
    pub fn select(&self, seed: u64) -> Result<Selection> {
        let grid = &self.config.grid;
        let ds = &self.dataset;
        let x_val = ds.features.select_rows(&self.splits.val);
        match self.config.method {
            Method::Dnn => {
                let (model, val_accuracy) = best(&grid.train_configs(), |c| {
                    let m = dnn_baseline(ds, &self.splits, &c.with_seed(seed))?;
                    self.val_accuracy(&mlp_predict(&m, &x_val)?)
                })?;
                Ok(Selection {
                    model,
                    teacher: None,
                    alpha: None,
                    val_accuracy,
                })
            }
            Method::DnnJfc => {
                let (model, val_accuracy) = best(&grid.train_configs(), |c| {
                    let m = dnn_jfc_baseline(ds, &self.splits, &c.with_seed(seed))?;
                    self.val_accuracy(&m.predict_without_graph(&x_val)?)
                })?;
                Ok(Selection {
                    model,
                    teacher: None,
                    alpha: None,
                    val_accuracy,
                })
            }
            Method::Gcn => {
                let graph = self.graph()?;
                let (model, val_accuracy) = best(&grid.gcn_configs(), |c| {
                    let m = gcn_baseline(ds, &self.splits, graph, &c.with_seed(seed))?;
                    self.val_accuracy(&gcn_predict_isolated(&m, &x_val)?)
                })?;
                Ok(Selection {
                    model,
                    teacher: None,
                    alpha: None,
                    val_accuracy,
                })
            }
            Method::Gkd => self.select_gkd(seed, &x_val),
        }
    }

    fn select_gkd(&self, seed: u64, x_val: &DenseMatrix<f64>) -> Result<Selection> {
        let grid = &self.config.grid;
        let ds = &self.dataset;
        let graph = self.graph()?;
        let x = ds.features.select_rows(&self.splits.train);
        let y = LabelMatrix::one_hot(&ds.labels_at(&self.splits.train), ds.num_classes)?;
        let labeled = self.splits.labeled_within_train();
        let teacher_seed = derive_seed(seed, TEACHER_STREAM);

        let student_score = |soft: &LabelMatrix<f64>, c: &TrainConfig| -> Result<f64> {
            let s = train_student(ds, &self.splits, soft, &c.with_seed(seed))?;
            self.val_accuracy(&mlp_predict(&s, x_val)?)
        };
        let alphas = grid.alphas(&self.config.lpa);

        // Teachers are ranked by how well a student of the same shape does on
        // their propagated labels, at the middle candidate alpha.
        let probe = self.lpa(alphas[alphas.len() / 2]);
        let (teacher_cfg, _) = best(&grid.train_configs(), |c| {
            let t = train_teacher(&x, &y, &labeled, &c.with_seed(teacher_seed))?;
            student_score(&propagated_labels(ds, &self.splits, graph, &t, &probe)?, c)
        })?;
        let teacher = train_teacher(&x, &y, &labeled, &teacher_cfg.with_seed(teacher_seed))?;

        let soft_by_alpha = alphas
            .par_iter()
            .map(|&a| propagated_labels(ds, &self.splits, graph, &teacher, &self.lpa(a)))
            .collect::<Result<Vec<_>>>()?;
        let alpha_scores = soft_by_alpha
            .par_iter()
            .map(|soft| student_score(soft, &teacher_cfg))
            .collect::<Result<Vec<_>>>()?;
        let alpha_index = argmax_first(&alpha_scores);

        let soft = &soft_by_alpha[alpha_index];
        let (model, val_accuracy) = best(&grid.train_configs(), |c| student_score(soft, c))?;
        Ok(Selection {
            model,
            teacher: Some(teacher_cfg),
            alpha: Some(alphas[alpha_index]),
            val_accuracy,
        })
    }
}

/// Metrics of a model on the given dataset rows.
pub fn score_rows(model: &SavedModel<f64>, ds: &Dataset<f64>, rows: &[usize]) -> Result<Metrics> {
    let probs = model.predict(&ds.features.select_rows(rows))?;
    Metrics::from_probabilities(&probs, &ds.labels_at(rows))
}

fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Highest-scoring candidate; ties go to the earliest.
fn best<F>(candidates: &[TrainConfig], score: F) -> Result<(TrainConfig, f64)>
where
    F: Fn(&TrainConfig) -> Result<f64> + Sync,
{
    let scores = candidates.par_iter().map(&score).collect::<Result<Vec<f64>>>()?;
    let i = argmax_first(&scores);
    log::debug!("selected {:?} with validation accuracy {}", candidates[i], scores[i]);
    Ok((candidates[i].clone(), scores[i]))
}

pub struct Outcome {
    pub report: MetricsReport,
    pub selection: Selection,
    /// Model trained with the first seed, if that trial succeeded.
    pub model: Option<SavedModel<f64>>,
}

/// Selection with the first seed, then test-set evaluation for every seed. Writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let prepared = Prepared::new(cfg)?;
    let selection = prepared.select(cfg.seeds[0])?;
    let first = Mutex::new(None);
    let mut report = run_trials(cfg.method.name(), &cfg.fingerprint(), &cfg.seeds, |seed| {
        let model = prepared.fit(&selection, seed)?;
        let metrics = prepared.score(&model, &prepared.splits.test)?;
        if seed == cfg.seeds[0] {
            *first.lock().expect("model slot") = Some(model);
        }
        Ok(metrics)
    })?;
    report.details = details(&prepared, &selection);
    Ok(Outcome {
        report,
        selection,
        model: first.into_inner().expect("model slot"),
    })
}

fn details(p: &Prepared, selection: &Selection) -> serde_json::Map<String, Value> {
    let mut d = serde_json::Map::new();
    d.insert("selection".into(), serde_json::to_value(selection).expect("selection serializes"));
    d.insert("missing_rate".into(), json!(p.config.missing_rate));
    d.insert(
        "graph_feature_missing_fraction".into(),
        json!(p.dataset.graph_features.missing_fraction()),
    );
    d.insert(
        "split_sizes".into(),
        json!({
            "train": p.splits.train.len(),
            "val": p.splits.val.len(),
            "test": p.splits.test.len(),
            "labeled": p.splits.labeled.len(),
        }),
    );
    if let Some(g) = &p.graph {
        d.insert("graph_edges".into(), json!(g.num_edges()));
    }
    d
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| GkdError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| GkdError::io(path, e))
}

pub fn report_csv(report: &MetricsReport) -> String {
    let mut out = String::from(MetricsReport::CSV_HEADER);
    out.push('\n');
    for row in report.csv_rows() {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn seed_log(report: &MetricsReport, selection: &Selection, index: usize) -> String {
    let s = &report.per_seed[index];
    let mut log = format!(
        "method {}\nconfig {}\nseed {}\nselection {}\n",
        report.method,
        report.config_fingerprint,
        s.seed,
        serde_json::to_string(selection).expect("selection serializes")
    );
    match (&s.metrics, &s.error) {
        (Some(m), _) => log.push_str(&format!(
            "accuracy {}\nmacro_f1 {}\nauc {}\n",
            m.accuracy, m.macro_f1, m.auc
        )),
        (None, Some(e)) => log.push_str(&format!("failed {e}\n")),
        (None, None) => log.push_str("failed\n"),
    }
    log
}

/// Runs the experiment and writes the output directory.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let outcome = run_experiment(cfg)?;
    let dir = &cfg.output_dir;
    create_dir(&dir.join(LOG_DIR))?;
    write_file(&dir.join(CONFIG_FILE), &cfg.to_toml())?;
    write_file(&dir.join(REPORT_JSON), &outcome.report.to_json())?;
    write_file(&dir.join(REPORT_CSV), &report_csv(&outcome.report))?;
    for (i, s) in outcome.report.per_seed.iter().enumerate() {
        write_file(
            &dir.join(LOG_DIR).join(format!("seed_{}.log", s.seed)),
            &seed_log(&outcome.report, &outcome.selection, i),
        )?;
    }
    if let Some(model) = &outcome.model {
        model.save(&dir.join(MODEL_FILE))?;
    }
    Ok(outcome.report)
}

/// Writes the CSV triple for `params` into `dir`.
pub fn cmd_synth(params: &SyntheticParams, dir: &Path) -> Result<CsvPaths> {
    let ds = generate_synthetic::<f64>(params)?;
    create_dir(dir)?;
    let paths = CsvPaths::in_dir(dir);
    write_csv_dataset(&ds, &paths.features, &paths.labels, &paths.graph_features)?;
    Ok(paths)
}

/// Builds the configured training-node graph and writes it as an edge list.
pub fn cmd_build_graph(cfg: &ExperimentConfig, out: &Path) -> Result<SparseGraph> {
    let spec = cfg
        .graph
        .as_ref()
        .ok_or_else(|| GkdError::usage("the config has no [graph] section"))?;
    cfg.split.validate()?;
    let (ds, splits) = load_dataset(cfg)?;
    let graph = build_graph(spec, &ds, &splits)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    graph.save(out)?;
    Ok(graph)
}

/// Test-split metrics of a saved model. Builds no graph.
pub fn cmd_evaluate(cfg: &ExperimentConfig, model_path: &Path) -> Result<Metrics> {
    cfg.split.validate()?;
    let model = SavedModel::load(model_path)?;
    let (ds, splits) = load_dataset(cfg)?;
    score_rows(&model, &ds, &splits.test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub missing_rate: f64,
    pub method: Method,
    pub report: MetricsReport,
}

pub const SWEEP_CSV_HEADER: &str =
    "missing_rate,method,completed,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,auc_mean,auc_std";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn all_completed(&self) -> bool {
        self.cells.iter().all(|c| c.report.all_completed())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for c in &self.cells {
            let a = &c.report.aggregate;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.missing_rate,
                c.method,
                a.completed,
                a.accuracy.mean,
                a.accuracy.std,
                a.macro_f1.mean,
                a.macro_f1.std,
                a.auc.mean,
                a.auc.std
            ));
        }
        out
    }

    pub fn cell(&self, missing_rate: f64, method: Method) -> Option<&MetricsReport> {
        self.cells
            .iter()
            .find(|c| c.missing_rate == missing_rate && c.method == method)
            .map(|c| &c.report)
    }
}

/// One `train` run per (missing rate, method) cell, each in
/// `<output_dir>/p<rate>/<method>`, plus `sweep.csv` and `sweep.json` at the top.
pub fn cmd_sweep_missing(cfg: &ExperimentConfig, rates: &[f64], methods: &[Method]) -> Result<SweepReport> {
    if rates.is_empty() || methods.is_empty() {
        return Err(GkdError::usage("a sweep needs at least one missing rate and one method"));
    }
    if let Some(p) = rates.iter().find(|p| !(0.0..1.0).contains(*p)) {
        return Err(GkdError::usage(format!("missing rate {p} is outside [0, 1)")));
    }
    let cells: Vec<(f64, Method, ExperimentConfig)> = rates
        .iter()
        .flat_map(|&p| {
            methods.iter().map(move |&m| {
                let mut c = cfg.clone();
                c.method = m;
                c.missing_rate = p;
                c.output_dir = cfg.output_dir.join(format!("p{p}")).join(m.name());
                (p, m, c)
            })
        })
        .collect();
    // Validate everything before spending time on training.
    for (_, _, c) in &cells {
        c.validate()?;
    }
    let reports = cells
        .par_iter()
        .map(|(_, _, c)| cmd_train(c))
        .collect::<Result<Vec<_>>>()?;
    let sweep = SweepReport {
        cells: cells
            .into_iter()
            .zip(reports)
            .map(|((missing_rate, method, _), report)| SweepCell {
                missing_rate,
                method,
                report,
            })
            .collect(),
    };
    create_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("sweep.csv"), &sweep.to_csv())?;
    write_file(
        &cfg.output_dir.join("sweep.json"),
        &serde_json::to_string_pretty(&sweep).expect("sweep serializes"),
    )?;
    Ok(sweep)
}
