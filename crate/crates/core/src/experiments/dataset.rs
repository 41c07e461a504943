//! Dataset loading from CSV or LIBSVM files, plus the bundled synthetic designs.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::effective_dimension_of_gram;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Comma-separated, target in the last column, optional header row.
    Csv,
    /// `<label> <index>:<value> ...` with 1-based indices.
    Libsvm,
}

impl DataFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" => Ok(DataFormat::Libsvm),
            other => Err(Error::Config(format!("unknown data format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preprocessing {
    None,
    StandardizeColumns,
    /// Standardize, then append a column of ones.
    AddIntercept,
}

impl Preprocessing {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Preprocessing::None),
            "standardize" | "standardize_columns" => Ok(Preprocessing::StandardizeColumns),
            "intercept" | "add_intercept" => Ok(Preprocessing::AddIntercept),
            other => Err(Error::Config(format!("unknown preprocessing `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preprocessing::None => "none",
            Preprocessing::StandardizeColumns => "standardize",
            Preprocessing::AddIntercept => "intercept",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub preprocessing: Preprocessing,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn preprocess(mut self, how: Preprocessing) -> Self {
        match how {
            Preprocessing::None => {}
            Preprocessing::StandardizeColumns => standardize_columns(&mut self.x),
            Preprocessing::AddIntercept => {
                standardize_columns(&mut self.x);
                let d = self.x.ncols();
                self.x = self.x.clone().insert_column(d, 1.0);
            }
        }
        self.preprocessing = how;
        self
    }
}

/// Centers every column and scales it to unit population variance; constant
/// columns become zero.
pub fn standardize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            col /= sd;
        } else {
            col.fill(0.0);
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat, preprocessing: Preprocessing) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (x, y) = match format {
        DataFormat::Csv => parse_csv(BufReader::new(file))?,
        DataFormat::Libsvm => parse_libsvm(BufReader::new(file), None)?,
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Dataset {
        name,
        x,
        y,
        preprocessing: Preprocessing::None,
    }
    .preprocess(preprocessing))
}

/// Parses y-last CSV. The first record is a header when none of its fields is
/// numeric.
pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in rdr.records().enumerate() {
        let line = k + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if k == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("field {} is not numeric: `{f}`", col + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature and a target".into(),
            });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            _ => {}
        }
        rows.push(values);
    }
    let w = width.ok_or(Error::Parse {
        line: 0,
        message: "no data rows".into(),
    })?;
    let n = rows.len();
    let x = DMatrix::from_fn(n, w - 1, |i, j| rows[i][j]);
    let y = DVector::from_fn(n, |i, _| rows[i][w - 1]);
    linalg::check_finite_matrix(&x, "features")?;
    Ok((x, y))
}

/// Parses LIBSVM text. The number of features is `d` when given, otherwise the
/// largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R, d: Option<usize>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut labels = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        let label: f64 = label_token.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("label is not numeric: `{label_token}`"),
        })?;
        let mut row = Vec::new();
        for token in tokens {
            let (idx, val) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("expected index:value, found `{token}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad feature index `{idx}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("feature value is not numeric: `{val}`"),
            })?;
            if let Some(d) = d {
                if idx > d {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("feature index {idx} exceeds d = {d}"),
                    });
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        labels.push(label);
        entries.push(row);
    }
    let d = d.unwrap_or(max_index);
    let mut x = DMatrix::zeros(labels.len(), d);
    for (i, row) in entries.iter().enumerate() {
        for &(j, v) in row {
            x[(i, j)] = v;
        }
    }
    Ok((x, DVector::from_vec(labels)))
}

/// Names accepted by [`synthetic`].
pub const SYNTHETIC_NAMES: [&str; 6] = [
    "regression",
    "boston_like",
    "quadratic",
    "logistic",
    "log_barrier",
    "wide",
];

/// Target `d_λ` at `λ = 10` for the `boston_like` design.
pub const BOSTON_LIKE_D_LAMBDA: f64 = 29.7;

/// Bundled seeded designs:
///
/// * `regression`: 506×13, correlated heavy-tailed rows, planted solution.
/// * `boston_like`: 506×40 design rescaled so that `d_λ(λ = 10) = 29.7`.
/// * `quadratic`: 2000×20 Gaussian design with decaying spectrum.
/// * `logistic`: 690×14 with labels from a planted logistic model.
/// * `log_barrier`: 500×50 Gaussian design (targets unused).
/// * `wide`: 2000×300 with decaying spectrum.
pub fn synthetic(name: &str, seed: u64) -> Result<Dataset> {
    let mut r = rng::stream(seed, &[0xDA7A, name_key(name)?]);
    let (x, y) = match name {
        "regression" => {
            let x = correlated_heavy_tailed(506, 13, &mut r);
            let y = planted_targets(&x, 0.5, &mut r);
            (x, y)
        }
        "boston_like" => {
            let mut x = correlated_heavy_tailed(506, 40, &mut r);
            calibrate_effective_dimension(&mut x, 10.0, BOSTON_LIKE_D_LAMBDA);
            let y = planted_targets(&x, 0.5, &mut r);
            (x, y)
        }
        "quadratic" => {
            let x = decaying_gaussian(2000, 20, 0.85, &mut r);
            let y = planted_targets(&x, 1.0, &mut r);
            (x, y)
        }
        "logistic" => {
            let x = decaying_gaussian(690, 14, 0.8, &mut r);
            let beta = DVector::from_fn(14, |_, _| r.sample::<f64, _>(StandardNormal));
            let margin = &x * beta;
            let y = margin.map(|z| {
                let p = 1.0 / (1.0 + (-z).exp());
                if r.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            });
            (x, y)
        }
        "log_barrier" => {
            let x = DMatrix::from_fn(500, 50, |_, _| r.sample::<f64, _>(StandardNormal));
            (x, DVector::zeros(500))
        }
        "wide" => {
            let x = decaying_gaussian(2000, 300, 0.99, &mut r);
            let y = planted_targets(&x, 1.0, &mut r);
            (x, y)
        }
        _ => unreachable!(),
    };
    Ok(Dataset {
        name: format!("synthetic:{name}"),
        x,
        y,
        preprocessing: Preprocessing::None,
    })
}

fn name_key(name: &str) -> Result<u64> {
    SYNTHETIC_NAMES
        .iter()
        .position(|n| *n == name)
        .map(|p| p as u64)
        .ok_or_else(|| {
            Error::Config(format!(
                "unknown synthetic dataset `{name}` (known: {})",
                SYNTHETIC_NAMES.join(", ")
            ))
        })
}

/// Student-t (3 degrees of freedom) rows mixed by a random lower-triangular
/// factor, then column-standardized.
fn correlated_heavy_tailed<R: Rng>(n: usize, d: usize, r: &mut R) -> DMatrix<f64> {
    let chi = ChiSquared::new(3.0).expect("valid degrees of freedom");
    let z = DMatrix::from_fn(n, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let scales: Vec<f64> = (0..n).map(|_| (3.0 / r.sample::<f64, _>(chi)).sqrt()).collect();
    let mix = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if j < i {
            0.6 * r.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut x = z * mix.transpose();
    for (i, s) in scales.iter().enumerate() {
        x.row_mut(i).scale_mut(*s);
    }
    standardize_columns(&mut x);
    x
}

/// Gaussian rows with column `j` scaled by `decay^j`.
fn decaying_gaussian<R: Rng>(n: usize, d: usize, decay: f64, r: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, j| decay.powi(j as i32) * r.sample::<f64, _>(StandardNormal))
}

fn planted_targets<R: Rng>(x: &DMatrix<f64>, noise: f64, r: &mut R) -> DVector<f64> {
    let beta = DVector::from_fn(x.ncols(), |_, _| r.sample::<f64, _>(StandardNormal));
    x * beta + DVector::from_fn(x.nrows(), |_, _| noise * r.sample::<f64, _>(StandardNormal))
}

/// Rescales `x` by the scalar `c` with `d_λ(c·x) = target`, found by bisection
/// on `log c`.
fn calibrate_effective_dimension(x: &mut DMatrix<f64>, lambda: f64, target: f64) {
    let g = linalg::gram(x);
    let eig: Vec<f64> = linalg::sym_eigenvalues(&g).into_iter().map(|v| v.max(0.0)).collect();
    let d_of = |log_c: f64| {
        let c2 = (2.0 * log_c).exp();
        eig.iter().map(|v| c2 * v / (c2 * v + lambda)).sum::<f64>()
    };
    let (mut lo, mut hi) = (-30.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    *x *= (0.5 * (lo + hi)).exp();
    debug_assert!((effective_dimension_of_gram(&linalg::gram(x), lambda) - target).abs() < 1e-8);
}
