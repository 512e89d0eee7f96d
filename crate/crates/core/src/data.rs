//! The observed data table and row-level resampling.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{invalid, Error, Result};
use crate::seed::RngSeed;

/// Feature matrix (n x p), real-valued target and unique feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    target: Array1<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        target: Array1<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 {
            return invalid("dataset has no rows");
        }
        if p == 0 {
            return invalid("dataset has no features");
        }
        if target.len() != n {
            return invalid(format!("target length {} != row count {n}", target.len()));
        }
        if feature_names.len() != p {
            return invalid(format!(
                "{} feature names for {p} columns",
                feature_names.len()
            ));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return invalid(format!("duplicate feature name '{name}'"));
            }
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return invalid("dataset contains missing or non-finite values");
        }
        Ok(Dataset {
            features: features.as_standard_layout().into_owned(),
            target,
            feature_names,
        })
    }

    /// Names features `X1..Xp`.
    pub fn from_arrays(features: Array2<f64>, target: Array1<f64>) -> Result<Self> {
        let names = default_names(features.ncols());
        Self::new(features, target, names)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn target(&self) -> ArrayView1<'_, f64> {
        self.target.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn check_feature(&self, j: usize) -> Result<()> {
        if j >= self.p() {
            return Err(Error::FeatureOutOfRange { index: j, p: self.p() });
        }
        Ok(())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            target: self.target.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same features, different target.
    pub fn with_target(&self, target: Array1<f64>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), target, self.feature_names.clone())
    }

    /// `size` distinct rows drawn without replacement.
    pub fn subsample(&self, size: usize, seed: RngSeed) -> Result<Dataset> {
        if size == 0 || size > self.n() {
            return invalid(format!("subsample size {size} not in 1..={}", self.n()));
        }
        let mut rows: Vec<usize> = (0..self.n()).collect();
        rows.shuffle(&mut seed.rng());
        rows.truncate(size);
        Ok(self.select_rows(&rows))
    }

    /// n rows drawn with replacement.
    pub fn bootstrap(&self, seed: RngSeed) -> Dataset {
        let mut rng = seed.rng();
        let n = self.n();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        self.select_rows(&rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, target: &str) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, target)
    }

    /// Reads a header row followed by numeric rows; `target` names the
    /// response column, every other column becomes a feature.
    pub fn from_csv_reader<R: Read>(reader: R, target: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let target_col = headers
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| Error::InvalidInput(format!("target column '{target}' not in header")))?;
        let names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target_col)
            .map(|(_, h)| h.clone())
            .collect();
        let mut values = Vec::new();
        let mut y = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return invalid(format!("row {} has {} fields", line + 2, record.len()));
            }
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "row {}: '{field}' in column '{}' is not a number",
                        line + 2,
                        headers[i]
                    ))
                })?;
                if i == target_col {
                    y.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        let n = y.len();
        let features = Array2::from_shape_vec((n, names.len()), values)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Dataset::new(features, Array1::from(y), names)
    }

    /// Writes features then the target column (named `target_name`).
    pub fn write_csv<W: Write>(&self, writer: W, target_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_name);
        w.write_record(&header)?;
        for (row, y) in self.features.outer_iter().zip(self.target.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}

/// Seeded shuffle-and-cut of the rows into (train, test).
///
/// The test partition receives `round(n * test_fraction)` rows.
pub fn train_test_split(
    data: &Dataset,
    test_fraction: f64,
    seed: RngSeed,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return invalid(format!("test fraction {test_fraction} not in (0, 1)"));
    }
    let n = data.n();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return invalid(format!(
            "test fraction {test_fraction} leaves an empty partition for n = {n}"
        ));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut seed.rng());
    let (test_rows, train_rows) = rows.split_at(n_test);
    Ok((data.select_rows(train_rows), data.select_rows(test_rows)))
}
