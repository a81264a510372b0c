//! Datasets: synthetic multi-modal generation, CSV ingestion, splits and missingness.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

/// Graph-modality features with a per-entry observed flag. Missing entries hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures<T> {
    values: DenseMatrix<T>,
    observed: Vec<bool>,
}

impl<T: Scalar> GraphFeatures<T> {
    pub fn new(values: DenseMatrix<T>, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != values.rows() * values.cols() {
            return Err(GkdError::shape(format!(
                "{} observed flags for a {}x{} feature matrix",
                observed.len(),
                values.rows(),
                values.cols()
            )));
        }
        let mut values = values;
        for (v, &o) in values.as_mut_slice().iter_mut().zip(&observed) {
            if !o {
                *v = T::zero();
            }
        }
        Ok(Self { values, observed })
    }

    pub fn fully_observed(values: DenseMatrix<T>) -> Self {
        let observed = vec![true; values.rows() * values.cols()];
        Self { values, observed }
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.observed[i * self.cols() + j].then(|| self.values[(i, j)])
    }

    pub fn column(&self, j: usize) -> Vec<Option<T>> {
        (0..self.rows()).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &DenseMatrix<T> {
        &self.values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.observed.is_empty() {
            return 0.0;
        }
        self.observed.iter().filter(|&&o| !o).count() as f64 / self.observed.len() as f64
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let d = self.cols();
        let observed = rows
            .iter()
            .flat_map(|&i| self.observed[i * d..(i + 1) * d].iter().copied())
            .collect();
        Self {
            values: self.values.select_rows(rows),
            observed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    /// `N x F` node features.
    pub features: DenseMatrix<T>,
    /// Class id per node.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// `N x d_g` graph-modality features.
    pub graph_features: GraphFeatures<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: DenseMatrix<T>,
        labels: Vec<usize>,
        num_classes: usize,
        graph_features: GraphFeatures<T>,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || graph_features.rows() != n {
            return Err(GkdError::shape(format!(
                "{n} feature rows, {} labels, {} graph-feature rows",
                labels.len(),
                graph_features.rows()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(GkdError::Validation(format!(
                "label {y} at row {i} is outside [0, {num_classes})"
            )));
        }
        if !features.is_finite() || !graph_features.values().is_finite() {
            return Err(GkdError::Validation("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            graph_features,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    /// One-hot label matrix.
    pub fn targets(&self) -> LabelMatrix<T> {
        LabelMatrix::one_hot(&self.labels, self.num_classes).expect("labels validated")
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            graph_features: self.graph_features.select_rows(rows),
        }
    }

    pub fn labels_at(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub n: usize,
    pub node_dim: usize,
    pub graph_dim: usize,
    /// Node-feature dimensions carrying the class signal; the rest are noise.
    pub informative: usize,
    pub class_sep: f64,
    pub p_missing: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: 2000,
            node_dim: 128,
            graph_dim: 4,
            informative: 8,
            class_sep: 1.0,
            p_missing: 0.0,
            seed: 0,
        }
    }
}

/// Two balanced classes. Node features are `Normal(class_sep · v_c, I)` on the
/// informative dimensions, where `v_c` is a distinct random hypercube vertex per
/// class, and standard normal noise elsewhere. Graph features are
/// `Normal(∓class_sep · 1, I)`, then each entry goes missing with probability `p_missing`.
///
/// The node features, labels and observed graph values do not depend on `p_missing`;
/// the missing sets are nested as `p_missing` grows.
pub fn generate_synthetic<T: Scalar>(params: &SyntheticParams) -> Result<Dataset<T>> {
    let SyntheticParams {
        n,
        node_dim,
        graph_dim,
        informative,
        class_sep,
        p_missing,
        seed,
    } = *params;
    if n == 0 || n % 2 != 0 {
        return Err(GkdError::usage(format!("sample count must be even and positive, got {n}")));
    }
    if node_dim < 2 || graph_dim < 1 {
        return Err(GkdError::usage("need node_dim >= 2 and graph_dim >= 1"));
    }
    if informative == 0 || informative > node_dim {
        return Err(GkdError::usage(format!(
            "informative dimensions must lie in [1, {node_dim}], got {informative}"
        )));
    }
    if !(0.0..1.0).contains(&p_missing) {
        return Err(GkdError::usage(format!("p_missing must lie in [0, 1), got {p_missing}")));
    }

    let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    labels.shuffle(&mut seeded(derive_seed(seed, 0)));

    let mut vertex_rng = seeded(derive_seed(seed, 1));
    let draw_vertex = |rng: &mut crate::rng::SeededRng| -> Vec<f64> {
        (0..informative)
            .map(|_| if rng.random::<bool>() { class_sep } else { -class_sep })
            .collect()
    };
    let v0 = draw_vertex(&mut vertex_rng);
    let mut v1 = draw_vertex(&mut vertex_rng);
    while v1 == v0 {
        v1 = draw_vertex(&mut vertex_rng);
    }
    let vertices = [v0, v1];

    let mut node_rng = seeded(derive_seed(seed, 2));
    let mut features = DenseMatrix::zeros(n, node_dim);
    for i in 0..n {
        let row = features.row_mut(i);
        for (j, x) in row.iter_mut().enumerate() {
            let noise: f64 = node_rng.sample(StandardNormal);
            let center = if j < informative { vertices[labels[i]][j] } else { 0.0 };
            *x = T::of(center + noise);
        }
    }

    let mut graph_rng = seeded(derive_seed(seed, 4));
    let mut graph = DenseMatrix::zeros(n, graph_dim);
    for i in 0..n {
        let mean = if labels[i] == 0 { -class_sep } else { class_sep };
        for x in graph.row_mut(i) {
            let noise: f64 = graph_rng.sample(StandardNormal);
            *x = T::of(mean + noise);
        }
    }
    let graph = apply_missing(
        &GraphFeatures::fully_observed(graph),
        p_missing,
        derive_seed(seed, 3),
    )?;

    Dataset::new(features, labels, 2, graph)
}

/// Independently hides each observed entry with probability `p_missing`.
pub fn apply_missing<T: Scalar>(
    g: &GraphFeatures<T>,
    p_missing: f64,
    seed: u64,
) -> Result<GraphFeatures<T>> {
    if !(0.0..1.0).contains(&p_missing) {
        return Err(GkdError::usage(format!("p_missing must lie in [0, 1), got {p_missing}")));
    }
    let mut rng = seeded(seed);
    let observed = g
        .observed
        .iter()
        .map(|&o| {
            let u: f64 = rng.random();
            o && u >= p_missing
        })
        .collect();
    GraphFeatures::new(g.values.clone(), observed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Fraction of the training split whose labels are visible.
    pub labeled: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.1,
            test: 0.3,
            labeled: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train, self.val, self.test];
        if fracs.iter().any(|&f| !(f > 0.0)) {
            return Err(GkdError::usage("split fractions must be positive"));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(GkdError::usage(format!(
                "split fractions sum to {}, not 1",
                fracs.iter().sum::<f64>()
            )));
        }
        if !(self.labeled > 0.0 && self.labeled <= 1.0) {
            return Err(GkdError::usage(format!(
                "labeled fraction must lie in (0, 1], got {}",
                self.labeled
            )));
        }
        Ok(())
    }
}

/// Node indices per split, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Subset of `train` with visible labels.
    pub labeled: Vec<usize>,
}

impl Splits {
    /// Labeled flags aligned with `train` order.
    pub fn labeled_within_train(&self) -> Vec<bool> {
        self.train
            .iter()
            .map(|i| self.labeled.binary_search(i).is_ok())
            .collect()
    }

    pub fn mask(indices: &[usize], n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in indices {
            m[i] = true;
        }
        m
    }
}

fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Seeded shuffle then partition. Validation and test sizes are floored, the
/// remainder goes to training; the labeled count is floored from the training size.
pub fn make_splits(n: usize, spec: &SplitSpec, num_classes: usize) -> Result<Splits> {
    spec.validate()?;
    let n_val = floor_count(spec.val, n);
    let n_test = floor_count(spec.test, n);
    let n_train = n.saturating_sub(n_val + n_test);
    let n_labeled = floor_count(spec.labeled, n_train);
    if n_val == 0 || n_test == 0 || n_train == 0 {
        return Err(GkdError::usage(format!(
            "degenerate split of {n} nodes: {n_train}/{n_val}/{n_test}"
        )));
    }
    if n_labeled < num_classes {
        return Err(GkdError::usage(format!(
            "only {n_labeled} labeled nodes for {num_classes} classes"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(spec.seed, 0)));
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();

    let mut pool = train.clone();
    pool.shuffle(&mut seeded(derive_seed(spec.seed, 1)));
    let mut labeled = pool[..n_labeled].to_vec();

    for v in [&mut train, &mut val, &mut test, &mut labeled] {
        v.sort_unstable();
    }
    Ok(Splits {
        train,
        val,
        test,
        labeled,
    })
}

struct CsvTable {
    header: Vec<String>,
    /// `(line number, cells)`
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<CsvTable> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| GkdError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| GkdError::parse(&name, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            GkdError::parse(&name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(GkdError::parse(
                &name,
                line,
                format!("expected {} cells, found {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    Ok(CsvTable { header, rows })
}

fn parse_cell<T: Scalar>(name: &str, line: u64, cell: &str) -> Result<T> {
    cell.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| GkdError::parse(name, line, format!("non-numeric cell `{cell}`")))
}

/// Reads the features / labels / graph-features CSV triple. Empty graph-feature cells are missing.
pub fn load_csv_dataset<T: Scalar>(
    features_path: &Path,
    labels_path: &Path,
    graph_features_path: &Path,
) -> Result<Dataset<T>> {
    let fname = features_path.display().to_string();
    let ftable = read_table(features_path)?;
    let mut fvals = Vec::with_capacity(ftable.rows.len() * ftable.header.len());
    for (line, cells) in &ftable.rows {
        for cell in cells {
            fvals.push(parse_cell::<T>(&fname, *line, cell)?);
        }
    }
    let features = DenseMatrix::from_vec(ftable.rows.len(), ftable.header.len(), fvals)?;

    let lname = labels_path.display().to_string();
    let ltable = read_table(labels_path)?;
    if ltable.header.len() != 1 {
        return Err(GkdError::parse(&lname, 1, "labels file must have exactly one column"));
    }
    let mut labels = Vec::with_capacity(ltable.rows.len());
    for (line, cells) in &ltable.rows {
        let y = cells[0]
            .parse::<usize>()
            .map_err(|_| GkdError::parse(&lname, *line, format!("non-integer label `{}`", cells[0])))?;
        labels.push(y);
    }

    let gname = graph_features_path.display().to_string();
    let gtable = read_table(graph_features_path)?;
    let mut gvals = Vec::with_capacity(gtable.rows.len() * gtable.header.len());
    let mut observed = Vec::with_capacity(gvals.capacity());
    for (line, cells) in &gtable.rows {
        for cell in cells {
            if cell.is_empty() {
                gvals.push(T::zero());
                observed.push(false);
            } else {
                gvals.push(parse_cell::<T>(&gname, *line, cell)?);
                observed.push(true);
            }
        }
    }
    let graph = GraphFeatures::new(
        DenseMatrix::from_vec(gtable.rows.len(), gtable.header.len(), gvals)?,
        observed,
    )?;

    let n = features.rows();
    if labels.len() != n || graph.rows() != n {
        return Err(GkdError::parse(
            &lname,
            labels.len().min(graph.rows()) as u64 + 2,
            format!(
                "inconsistent row counts: {n} features, {} labels, {} graph features",
                labels.len(),
                graph.rows()
            ),
        ));
    }
    let num_classes = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
    Dataset::new(features, labels, num_classes, graph)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => GkdError::io(path, io),
        other => GkdError::io(path, std::io::Error::other(format!("{other:?}"))),
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> GkdError + '_ {
    move |e| GkdError::io(path, std::io::Error::other(e.to_string()))
}

/// Writes the CSV triple read by [`load_csv_dataset`]. Values round-trip exactly.
pub fn write_csv_dataset<T: Scalar>(
    ds: &Dataset<T>,
    features_path: &Path,
    labels_path: &Path,
    graph_features_path: &Path,
) -> Result<()> {
    let mut w = csv_writer(features_path)?;
    w.write_record((0..ds.features.cols()).map(|j| format!("f{j}")))
        .map_err(csv_err(features_path))?;
    for row in ds.features.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_err(features_path))?;
    }
    w.flush().map_err(|e| GkdError::io(features_path, e))?;

    let mut w = csv_writer(labels_path)?;
    w.write_record(["label"]).map_err(csv_err(labels_path))?;
    for y in &ds.labels {
        w.write_record([y.to_string()]).map_err(csv_err(labels_path))?;
    }
    w.flush().map_err(|e| GkdError::io(labels_path, e))?;

    let g = &ds.graph_features;
    let mut w = csv_writer(graph_features_path)?;
    w.write_record((0..g.cols()).map(|j| format!("g{j}")))
        .map_err(csv_err(graph_features_path))?;
    for i in 0..g.rows() {
        w.write_record((0..g.cols()).map(|j| g.get(i, j).map_or(String::new(), |v| v.to_string())))
            .map_err(csv_err(graph_features_path))?;
    }
    w.flush().map_err(|e| GkdError::io(graph_features_path, e))?;
    Ok(())
}

/// Standard file names inside a dataset directory.
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const GRAPH_FEATURES_FILE: &str = "graph_features.csv";
