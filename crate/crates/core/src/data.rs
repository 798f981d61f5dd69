//! The observed data and, for simulations, the generating truth.

use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A regression sample: design matrix with one observation per row and the
/// response vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Validates shapes and finiteness.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput(
                "design matrix must be non-empty".into(),
            ));
        }
        if y.len() != x.nrows() {
            return Err(Error::InvalidInput(format!(
                "response length {} does not match {} observations",
                y.len(),
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in data".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same design with a fresh response (used by Monte Carlo risk loops).
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Dataset::new(self.x.clone(), y)
    }

    /// Restricts to the given row indices (train/test splitting).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        Dataset::new(x, y)
    }

    /// Restricts to the given feature columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let x = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.x[(i, cols[j])]);
        Dataset::new(x, self.y.clone())
    }
}

/// The quantities that generated the data: true coefficients, noise variance
/// and (optionally) the population feature covariance.
#[derive(Debug, Clone)]
pub struct ModelTruth {
    beta0: DVector<f64>,
    sigma2: f64,
    sigma: Option<DMatrix<f64>>,
}

impl ModelTruth {
    pub fn new(beta0: DVector<f64>, sigma2: f64) -> Result<Self> {
        if beta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient entry".into()));
        }
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise variance must be >= 0, got {sigma2}"
            )));
        }
        Ok(ModelTruth {
            beta0,
            sigma2,
            sigma: None,
        })
    }

    /// Attaches the population covariance, checking symmetry and positive
    /// semidefiniteness up to a small relative tolerance.
    pub fn with_population_covariance(mut self, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() || sigma.nrows() != self.beta0.len() {
            return Err(Error::InvalidInput("covariance dimension mismatch".into()));
        }
        let scale = sigma.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let asym = (&sigma - sigma.transpose())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if asym > 1e-8 * scale {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&e| e < -1e-8 * scale) {
            return Err(Error::InvalidInput(
                "covariance is not positive semidefinite".into(),
            ));
        }
        self.sigma = Some(sym);
        Ok(self)
    }

    pub fn beta0(&self) -> &DVector<f64> {
        &self.beta0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn population_covariance(&self) -> Option<&DMatrix<f64>> {
        self.sigma.as_ref()
    }
}

/// A dataset read from CSV together with the column names that survived.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub response_name: String,
    /// Columns dropped because they failed to parse as numbers.
    pub skipped_columns: Vec<String>,
}

/// Reads a CSV file with a header row: the named column is the response, every
/// other column whose entries all parse as numbers becomes a feature. With
/// `standardise`, each used column (features and response) is centred and
/// scaled to unit sample standard deviation; constant columns are only
/// centred.
pub fn read_csv_dataset(
    path: impl AsRef<Path>,
    response_column: &str,
    standardise: bool,
) -> Result<CsvDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(BufReader::new(file), response_column, standardise)
}

pub fn read_csv_from<R: BufRead>(
    reader: R,
    response_column: &str,
    standardise: bool,
) -> Result<CsvDataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(Error::InvalidInput(format!("cannot read CSV header: {e}"))),
        None => return Err(Error::InvalidInput("empty CSV input".into())),
    };
    let names: Vec<String> = header
        .split(',')
        .map(|s| s.trim().trim_matches('"').to_string())
        .collect();
    let response_idx = names
        .iter()
        .position(|c| c == response_column)
        .ok_or_else(|| {
            Error::InvalidInput(format!("response column '{response_column}' not found"))
        })?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(format!("cannot read CSV line: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<String> = line
            .split(',')
            .map(|s| s.trim().trim_matches('"').to_string())
            .collect();
        if row.len() != names.len() {
            return Err(Error::InvalidInput(format!(
                "row {} has {} fields, header has {}",
                lineno + 2,
                row.len(),
                names.len()
            )));
        }
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(Error::InvalidInput(
            "CSV contains a header but no observations".into(),
        ));
    }

    let parse_column = |j: usize| -> Option<Vec<f64>> {
        cells
            .iter()
            .map(|row| row[j].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect()
    };

    let y_raw = parse_column(response_idx).ok_or_else(|| {
        Error::InvalidInput(format!(
            "response column '{response_column}' has non-numeric entries"
        ))
    })?;

    let mut feature_names = Vec::new();
    let mut skipped_columns = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (j, name) in names.iter().enumerate() {
        if j == response_idx {
            continue;
        }
        match parse_column(j) {
            Some(col) => {
                feature_names.push(name.clone());
                columns.push(col);
            }
            None => skipped_columns.push(name.clone()),
        }
    }
    if columns.is_empty() {
        return Err(Error::InvalidInput(
            "no numeric feature columns found".into(),
        ));
    }

    let n = cells.len();
    let mut y = DVector::from_vec(y_raw);
    let mut x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    if standardise {
        for j in 0..x.ncols() {
            let mut col = x.column_mut(j);
            standardise_in_place(col.as_mut_slice());
        }
        standardise_in_place(y.as_mut_slice());
    }

    Ok(CsvDataset {
        dataset: Dataset::new(x, y)?,
        feature_names,
        response_name: names[response_idx].clone(),
        skipped_columns,
    })
}

fn standardise_in_place(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    for v in values.iter_mut() {
        *v -= mean;
    }
    if values.len() > 1 {
        let sd = (values.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).sqrt();
        if sd > 0.0 {
            for v in values.iter_mut() {
                *v /= sd;
            }
        }
    }
}
