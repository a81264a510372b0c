//! Plain-text model files.
//!
//! ```text
//! GKD1
//! model <gkd|mlp|dnn-jfc|gcn>
//! ...sections...
//! ```
//!
//! Every tensor is written as a `matrix <rows> <cols>` line followed by one line
//! per row of space-separated values. An MLP is `mlp <layers>` then, per layer,
//! its weight matrix and a `bias <len>` line. A GKD file holds the teacher, the
//! student, an `lpa <alpha> <max_iterations> <tolerance>` line and the soft
//! labels. Values are printed with the shortest representation that parses
//! back to the same bits, so save/load is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{GkdError, Result};
use crate::labels::LabelMatrix;
use crate::lpa::LpaConfig;
use crate::matrix::DenseMatrix;
use crate::nn::{mlp_predict, DenseLayer, MlpParams};
use crate::pipeline::baselines::JfcModel;
use crate::pipeline::gcn::{gcn_predict_isolated, GcnParams};
use crate::pipeline::gkd::{predict, GkdModel};
use crate::scalar::Scalar;

pub const MAGIC: &str = "GKD1";

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel<T> {
    Gkd(GkdModel<T>),
    Mlp(MlpParams<T>),
    Jfc(JfcModel<T>),
    Gcn(GcnParams<T>),
}

impl<T: Scalar> SavedModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Gkd(_) => "gkd",
            SavedModel::Mlp(_) => "mlp",
            SavedModel::Jfc(_) => "dnn-jfc",
            SavedModel::Gcn(_) => "gcn",
        }
    }

    /// Class probabilities from node features alone. Missing graph features
    /// fall back to training means; a GCN sees every row as an isolated node.
    pub fn predict(&self, x: &DenseMatrix<T>) -> Result<LabelMatrix<T>> {
        match self {
            SavedModel::Gkd(m) => predict(m, x),
            SavedModel::Mlp(m) => mlp_predict(m, x),
            SavedModel::Jfc(m) => m.predict_without_graph(x),
            SavedModel::Gcn(m) => gcn_predict_isolated(m, x),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nmodel {}\n", self.kind());
        match self {
            SavedModel::Gkd(m) => {
                write_mlp(&mut out, &m.teacher);
                write_mlp(&mut out, &m.student);
                let l = &m.lpa;
                let _ = writeln!(out, "lpa {} {} {}", l.alpha, l.max_iterations, l.tolerance);
                write_matrix(&mut out, m.soft_labels.as_matrix());
            }
            SavedModel::Mlp(m) => write_mlp(&mut out, m),
            SavedModel::Jfc(m) => {
                write_mlp(&mut out, &m.mlp);
                write_vector(&mut out, "means", &m.means);
            }
            SavedModel::Gcn(m) => {
                write_matrix(&mut out, &m.w1);
                write_matrix(&mut out, &m.w2);
            }
        }
        out
    }

    pub fn from_reader<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let mut p = Reader {
            lines: r.lines(),
            line: 0,
            source_name,
        };
        let magic = p.next_line()?;
        if magic.trim() != MAGIC {
            return Err(p.error(format!("expected header {MAGIC}, found {:?}", magic.trim())));
        }
        let kind = p.keyword_line("model", 1)?.remove(0);
        let model = match kind.as_str() {
            "gkd" => {
                let teacher = p.mlp()?;
                let student = p.mlp()?;
                let l = p.keyword_line("lpa", 3)?;
                let lpa = LpaConfig {
                    alpha: p.number(&l[0])?,
                    max_iterations: p.number(&l[1])?,
                    tolerance: p.number(&l[2])?,
                };
                let soft_labels = LabelMatrix::new(p.matrix()?)?;
                SavedModel::Gkd(GkdModel {
                    teacher,
                    student,
                    lpa,
                    soft_labels,
                })
            }
            "mlp" => SavedModel::Mlp(p.mlp()?),
            "dnn-jfc" => {
                let mlp = p.mlp()?;
                let means = p.vector("means")?;
                SavedModel::Jfc(JfcModel { mlp, means })
            }
            "gcn" => {
                let w1 = p.matrix()?;
                let w2 = p.matrix()?;
                SavedModel::Gcn(GcnParams::new(w1, w2)?)
            }
            other => return Err(p.error(format!("unknown model kind {other:?}"))),
        };
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| GkdError::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| GkdError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| GkdError::io(path, e))?;
        Self::from_reader(BufReader::new(f), &path.display().to_string())
    }
}

fn write_matrix<T: Scalar>(out: &mut String, m: &DenseMatrix<T>) {
    let _ = writeln!(out, "matrix {} {}", m.rows(), m.cols());
    for row in m.row_iter() {
        write_values(out, row);
    }
}

fn write_vector<T: Scalar>(out: &mut String, keyword: &str, v: &[T]) {
    let _ = writeln!(out, "{keyword} {}", v.len());
    write_values(out, v);
}

fn write_values<T: Scalar>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn write_mlp<T: Scalar>(out: &mut String, m: &MlpParams<T>) {
    let _ = writeln!(out, "mlp {}", m.layers().len());
    for layer in m.layers() {
        write_matrix(out, &layer.weight);
        write_vector(out, "bias", &layer.bias);
    }
}

struct Reader<'a, R> {
    lines: std::io::Lines<R>,
    line: u64,
    source_name: &'a str,
}

impl<R: BufRead> Reader<'_, R> {
    fn error(&self, message: impl Into<String>) -> GkdError {
        GkdError::parse(self.source_name, self.line, message)
    }

    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.error(e.to_string())),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn keyword_line(&mut self, keyword: &str, arity: usize) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(keyword) {
            return Err(self.error(format!("expected `{keyword}`")));
        }
        let rest: Vec<String> = tokens.map(str::to_owned).collect();
        if rest.len() != arity {
            return Err(self.error(format!(
                "`{keyword}` takes {arity} values, found {}",
                rest.len()
            )));
        }
        Ok(rest)
    }

    fn number<N: std::str::FromStr>(&self, token: &str) -> Result<N> {
        token
            .parse()
            .map_err(|_| self.error(format!("cannot parse {token:?} as a number")))
    }

    fn values<T: Scalar>(&mut self, expected: usize) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let values = line
            .split_whitespace()
            .map(|t| self.number(t))
            .collect::<Result<Vec<T>>>()?;
        if values.len() != expected {
            return Err(self.error(format!(
                "expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }

    fn matrix<T: Scalar>(&mut self) -> Result<DenseMatrix<T>> {
        let dims = self.keyword_line("matrix", 2)?;
        let rows: usize = self.number(&dims[0])?;
        let cols: usize = self.number(&dims[1])?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values::<T>(cols)?);
        }
        DenseMatrix::from_vec(rows, cols, data)
    }

    fn vector<T: Scalar>(&mut self, keyword: &str) -> Result<Vec<T>> {
        let len = self.keyword_line(keyword, 1)?;
        let len: usize = self.number(&len[0])?;
        self.values(len)
    }

    fn mlp<T: Scalar>(&mut self) -> Result<MlpParams<T>> {
        let count = self.keyword_line("mlp", 1)?;
        let count: usize = self.number(&count[0])?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let weight = self.matrix()?;
            let bias = self.vector("bias")?;
            layers.push(DenseLayer::new(weight, bias)?);
        }
        MlpParams::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(m: SavedModel<T>) {
        let text = m.to_text();
        let back = SavedModel::<T>::from_reader(text.as_bytes(), "mem").unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn every_kind_round_trips_exactly() {
        let teacher = MlpParams::<f64>::init(&[3, 5, 2], 1).unwrap();
        let student = MlpParams::<f64>::init(&[3, 4, 4, 2], 2).unwrap();
        let soft = LabelMatrix::new(DenseMatrix::from_rows(&[[0.1, 0.9], [1.0 / 3.0, 2.0 / 3.0]]).unwrap()).unwrap();
        roundtrip(SavedModel::Gkd(GkdModel {
            teacher: teacher.clone(),
            student,
            lpa: LpaConfig::default().with_alpha(0.3),
            soft_labels: soft,
        }));
        roundtrip(SavedModel::Mlp(teacher.clone()));
        roundtrip(SavedModel::Jfc(JfcModel {
            mlp: MlpParams::init(&[5, 3, 2], 3).unwrap(),
            means: vec![0.1, -2.5e-7],
        }));
        roundtrip(SavedModel::Gcn(GcnParams::<f64>::init(3, 6, 2, 4)));
        roundtrip(SavedModel::Mlp(MlpParams::<f32>::init(&[2, 7, 2], 5).unwrap()));
    }

    #[test]
    fn header_is_checked() {
        let text = SavedModel::Mlp(MlpParams::<f64>::init(&[2, 2], 0).unwrap())
            .to_text()
            .replacen(MAGIC, "GKD0", 1);
        let err = SavedModel::<f64>::from_reader(text.as_bytes(), "m").unwrap_err();
        assert!(matches!(err, GkdError::Parse { line: 1, .. }));
    }

    #[test]
    fn truncated_row_reports_line() {
        let text = "GKD1\nmodel gcn\nmatrix 1 2\n0.5\n";
        let err = SavedModel::<f64>::from_reader(text.as_bytes(), "m").unwrap_err();
        assert!(matches!(err, GkdError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gkd");
        let model = SavedModel::Gcn(GcnParams::<f64>::init(4, 3, 2, 8));
        model.save(&path).unwrap();
        let x = DenseMatrix::from_rows(&[[0.2, -1.0, 0.4, 3.0]]).unwrap();
        let loaded = SavedModel::<f64>::load(&path).unwrap();
        assert_eq!(loaded.predict(&x).unwrap(), model.predict(&x).unwrap());
        assert!(matches!(
            SavedModel::<f64>::load(&dir.path().join("absent")),
            Err(GkdError::Io { .. })
        ));
    }
}
