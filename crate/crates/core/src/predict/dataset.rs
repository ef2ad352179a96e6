use std::collections::{HashMap, HashSet};
use std::io::{self, Read, Write};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{PredictError, Task, NUM_CLASSES};
use crate::parse::ParseError;

/// Dense feature rows keyed by external id.
///
/// Text form: a `<rows> <dim>` header, then `<id> <f1> ... <fdim>` per row.
/// Embedding exports and precomputed feature files share it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    ids: Vec<String>,
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, values: Array2<f64>) -> Result<Self, PredictError> {
        if ids.len() != values.nrows() {
            return Err(PredictError::LengthMismatch {
                left: ids.len(),
                right: values.nrows(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(PredictError::DuplicateId(dup.clone()));
        }
        Ok(FeatureMatrix { ids, values })
    }

    pub fn empty() -> Self {
        FeatureMatrix {
            ids: Vec::new(),
            values: Array2::zeros((0, 0)),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rows for `ids`, in that order; unknown ids are returned as the error.
    pub fn select(&self, ids: &[String]) -> Result<FeatureMatrix, PredictError> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let missing: Vec<String> = ids.iter().filter(|id| !index.contains_key(id.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(PredictError::Alignment { missing, extra: Vec::new() });
        }
        let rows: Vec<usize> = ids.iter().map(|id| index[id.as_str()]).collect();
        FeatureMatrix::new(ids.to_vec(), self.values.select(Axis(0), &rows))
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| ParseError::new(1, "missing header"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| ParseError::new(1, format!("bad header field {s:?}")));
        if head.len() != 2 {
            return Err(ParseError::new(1, "header must be \"<rows> <dim>\""));
        }
        let (rows, dim) = (parse_usize(head[0])?, parse_usize(head[1])?);
        let mut ids = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (i, line) in lines {
            let mut fields = line.split_whitespace();
            let id = fields.next().expect("non-blank line");
            let before = data.len();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| ParseError::new(i + 1, format!("bad number {f:?}")))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(ParseError::new(
                    i + 1,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            ids.push(id.to_string());
        }
        if ids.len() != rows {
            return Err(ParseError::new(0, format!("header promises {rows} rows, found {}", ids.len())));
        }
        let values = Array2::from_shape_vec((rows, dim), data).expect("row lengths checked");
        FeatureMatrix::new(ids, values).map_err(|e| ParseError::new(0, e.to_string()))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.nrows(), self.dim())?;
        let mut line = String::new();
        for (id, row) in self.ids.iter().zip(self.values.rows()) {
            line.clear();
            line.push_str(id);
            for x in row {
                line.push(' ');
                line.push_str(&format!("{x:?}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Row-wise concatenation `[a | b]`, matching rows by id. The result keeps the
/// row order of `a`; an empty `b` leaves `a` unchanged.
pub fn concat_features(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix, PredictError> {
    if b.is_empty() {
        return Ok(a.clone());
    }
    let in_a: HashSet<&str> = a.ids.iter().map(String::as_str).collect();
    let in_b: HashSet<&str> = b.ids.iter().map(String::as_str).collect();
    let missing: Vec<String> = a.ids.iter().filter(|id| !in_b.contains(id.as_str())).cloned().collect();
    let extra: Vec<String> = b.ids.iter().filter(|id| !in_a.contains(id.as_str())).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(PredictError::Alignment { missing, extra });
    }
    let b_rows = b.select(&a.ids)?;
    let values = ndarray::concatenate(Axis(1), &[a.values.view(), b_rows.values.view()]).expect("row counts agree");
    FeatureMatrix::new(a.ids.clone(), values)
}

/// One row of the label file; either label may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub occ_class: Option<u8>,
    pub income: Option<f64>,
}

/// Per-user labels: CSV with header `id,occ_class,income`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labels {
    pub rows: Vec<LabelRow>,
}

impl Labels {
    pub fn read_from<R: Read>(r: R) -> Result<Self, PredictError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "occ_class", "income"] {
            return Err(ParseError::new(1, "header must be id,occ_class,income").into());
        }
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, rec) in reader.deserialize::<LabelRow>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| ParseError::new(line, e.to_string()))?;
            if row.id.is_empty() {
                return Err(ParseError::new(line, "empty id").into());
            }
            if let Some(c) = row.occ_class {
                if c == 0 || usize::from(c) > NUM_CLASSES {
                    return Err(ParseError::new(line, format!("occ_class {c} outside 1..={NUM_CLASSES}")).into());
                }
            }
            if let Some(x) = row.income {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(ParseError::new(line, format!("income {x} must be positive")).into());
                }
            }
            if !seen.insert(row.id.clone()) {
                return Err(ParseError::new(line, format!("duplicate id {}", row.id)).into());
            }
            rows.push(row);
        }
        Ok(Labels { rows })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), PredictError> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(["id", "occ_class", "income"])?;
        for r in &self.rows {
            writer.write_record([
                r.id.clone(),
                r.occ_class.map(|c| c.to_string()).unwrap_or_default(),
                r.income.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.clone()).collect()
    }
}

/// Features joined with labels, one row per labelled user that has features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub ids: Vec<String>,
    pub features: Array2<f64>,
    pub occ_class: Vec<Option<u8>>,
    pub income: Vec<Option<f64>>,
}

/// Targets of one prediction task.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<u8>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Targets::Classes(_) => Task::Classification,
            Targets::Values(_) => Task::Regression,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(rows.iter().map(|&i| c[i]).collect()),
            Targets::Values(v) => Targets::Values(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Design matrix and targets for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub ids: Vec<String>,
    pub x: Array2<f64>,
    pub y: Targets,
}

impl LabeledDataset {
    /// Join on id. Rows follow the label file; labelled users without features
    /// are returned separately.
    pub fn join(features: &FeatureMatrix, labels: &Labels) -> (LabeledDataset, Vec<String>) {
        let index: HashMap<&str, usize> = features.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut rows = Vec::new();
        let mut dropped = Vec::new();
        let mut ds = LabeledDataset {
            ids: Vec::new(),
            features: Array2::zeros((0, features.dim())),
            occ_class: Vec::new(),
            income: Vec::new(),
        };
        for r in &labels.rows {
            match index.get(r.id.as_str()) {
                Some(&i) => {
                    rows.push(i);
                    ds.ids.push(r.id.clone());
                    ds.occ_class.push(r.occ_class);
                    ds.income.push(r.income);
                }
                None => dropped.push(r.id.clone()),
            }
        }
        ds.features = features.values.select(Axis(0), &rows);
        (ds, dropped)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rows carrying the label `task` needs.
    pub fn task_data(&self, task: Task) -> TaskData {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| match task {
                Task::Classification => self.occ_class[i].is_some(),
                Task::Regression => self.income[i].is_some(),
            })
            .collect();
        let y = match task {
            Task::Classification => Targets::Classes(keep.iter().map(|&i| self.occ_class[i].unwrap()).collect()),
            Task::Regression => Targets::Values(keep.iter().map(|&i| self.income[i].unwrap()).collect()),
        };
        TaskData {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            x: self.features.select(Axis(0), &keep),
            y,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fm(ids: &[&str], values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(ids.iter().map(|s| s.to_string()).collect(), values).unwrap()
    }

    #[test]
    fn concat_dimensions() {
        let a = fm(&["u", "v"], Array2::ones((2, 32)));
        let b = fm(&["u", "v"], Array2::zeros((2, 200)));
        assert_eq!(concat_features(&a, &b).unwrap().dim(), 232);
        assert_eq!(concat_features(&a, &FeatureMatrix::empty()).unwrap(), a);
    }

    #[test]
    fn concat_aligns_by_id() {
        // Brute force: every permutation of b's rows gives the same result.
        let ids = ["a", "b", "c", "d", "e"];
        let a = fm(&ids, Array2::from_shape_fn((5, 2), |(i, j)| (i * 10 + j) as f64));
        let b_vals = |i: usize| [100.0 + i as f64, -(i as f64)];
        let sorted = fm(&ids, Array2::from_shape_fn((5, 2), |(i, j)| b_vals(i)[j]));
        let expected = concat_features(&a, &sorted).unwrap();
        let perms: [[usize; 5]; 4] = [[4, 3, 2, 1, 0], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [0, 1, 2, 4, 3]];
        for p in perms {
            let pid: Vec<&str> = p.iter().map(|&i| ids[i]).collect();
            let b = fm(&pid, Array2::from_shape_fn((5, 2), |(r, j)| b_vals(p[r])[j]));
            assert_eq!(concat_features(&a, &b).unwrap(), expected);
        }
        assert_eq!(expected.values().row(3).to_vec(), vec![30.0, 31.0, 103.0, -3.0]);
    }

    #[test]
    fn concat_reports_offending_ids() {
        let a = fm(&["a", "b"], Array2::zeros((2, 1)));
        let b = fm(&["a", "z"], Array2::zeros((2, 1)));
        match concat_features(&a, &b) {
            Err(PredictError::Alignment { missing, extra }) => {
                assert_eq!(missing, vec!["b"]);
                assert_eq!(extra, vec!["z"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn feature_text_round_trip() {
        let a = fm(&["x", "y"], array![[0.1, -2.5e-7], [3.0, 1e300]]);
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("2 2\n"));
        assert_eq!(FeatureMatrix::parse(&text).unwrap(), a);
    }

    #[test]
    fn feature_parse_errors() {
        assert!(FeatureMatrix::parse("").is_err());
        assert_eq!(FeatureMatrix::parse("1 2\na 1.0\n").unwrap_err().line, 2);
        assert!(FeatureMatrix::parse("2 1\na 1.0\n").is_err());
        assert!(FeatureMatrix::parse("1 1\na x\n").is_err());
        assert!(FeatureMatrix::parse("2 1\na 1\na 2\n").is_err());
    }

    #[test]
    fn labels_csv() {
        let text = "id,occ_class,income\nu1,3,25000\nu2,,31000.5\nu3,9,\n";
        let labels = Labels::read_from(text.as_bytes()).unwrap();
        assert_eq!(labels.rows[1].occ_class, None);
        assert_eq!(labels.rows[2].income, None);
        let mut buf = Vec::new();
        labels.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);

        assert!(Labels::read_from("id,occ_class,income\nu1,10,1\n".as_bytes()).is_err());
        assert!(Labels::read_from("id,occ_class,income\nu1,1,-5\n".as_bytes()).is_err());
        assert!(Labels::read_from("id,class,income\n".as_bytes()).is_err());
    }

    #[test]
    fn join_and_task_filtering() {
        let features = fm(&["a", "b", "c"], array![[1.0], [2.0], [3.0]]);
        let labels = Labels {
            rows: vec![
                LabelRow { id: "c".into(), occ_class: Some(2), income: None },
                LabelRow { id: "zz".into(), occ_class: Some(1), income: Some(1.0) },
                LabelRow { id: "a".into(), occ_class: None, income: Some(5.0) },
            ],
        };
        let (ds, dropped) = LabeledDataset::join(&features, &labels);
        assert_eq!(dropped, vec!["zz"]);
        assert_eq!(ds.ids, vec!["c", "a"]);
        let cls = ds.task_data(Task::Classification);
        assert_eq!(cls.y, Targets::Classes(vec![2]));
        assert_eq!(cls.x, array![[3.0]]);
        let reg = ds.task_data(Task::Regression);
        assert_eq!(reg.ids, vec!["a"]);
        assert_eq!(reg.y, Targets::Values(vec![5.0]));
    }
}
