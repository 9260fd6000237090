//! Response + covariate container shared by the regression fitters and the
//! diagnostics. Validation happens once, at construction: finite covariates,
//! matching lengths, and a full-rank design matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Name used for the intercept column in design matrices and fit output.
pub const INTERCEPT_NAME: &str = "(intercept)";

/// A count response with its covariate matrix (intercept not stored; it is
/// appended to the design matrix when `add_intercept` is set).
#[derive(Debug, Clone)]
pub struct Dataset {
    response: Vec<u64>,
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
    add_intercept: bool,
}

impl Dataset {
    /// Build and validate a dataset. `covariates` is n × p with column `j`
    /// named by `covariate_names[j]`; p = 0 with an intercept is the
    /// intercept-only design.
    pub fn new(
        response: Vec<u64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
        add_intercept: bool,
    ) -> Result<Self> {
        let n = response.len();
        if n == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".to_string()));
        }
        if covariates.nrows() != n {
            return Err(Error::InvalidDataset(format!(
                "response has {} rows but the covariate matrix has {}",
                n,
                covariates.nrows()
            )));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::InvalidDataset(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.ncols()
            )));
        }
        if !add_intercept && covariates.ncols() == 0 {
            return Err(Error::InvalidDataset(
                "no covariates and no intercept: the design matrix would be empty".to_string(),
            ));
        }
        for j in 0..covariates.ncols() {
            for i in 0..n {
                let v = covariates[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidDataset(format!(
                        "covariate `{}` has a non-finite value at row {}",
                        covariate_names[j],
                        i + 1
                    )));
                }
            }
        }
        let dataset = Self {
            response,
            covariates,
            covariate_names,
            add_intercept,
        };
        let dependent = dataset.dependent_design_columns();
        if !dependent.is_empty() {
            return Err(Error::RankDeficient { columns: dependent });
        }
        Ok(dataset)
    }

    /// Build from row-major covariate data: `rows[i]` holds the covariate
    /// values of observation `i` in the order of `covariate_names`.
    pub fn from_rows(
        response: Vec<u64>,
        rows: &[Vec<f64>],
        covariate_names: Vec<String>,
        add_intercept: bool,
    ) -> Result<Self> {
        let p = covariate_names.len();
        if rows.len() != response.len() {
            return Err(Error::InvalidDataset(format!(
                "response has {} rows but {} covariate rows were given",
                response.len(),
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "covariate row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    p
                )));
            }
        }
        let matrix = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(response, matrix, covariate_names, add_intercept)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn response(&self) -> &[u64] {
        &self.response
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn add_intercept(&self) -> bool {
        self.add_intercept
    }

    /// Covariate row `i` (without the intercept), in column order.
    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        (0..self.covariates.ncols()).map(|j| self.covariates[(i, j)]).collect()
    }

    /// n × P design matrix, with a leading column of ones when the intercept
    /// is enabled.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.covariates.ncols();
        if !self.add_intercept {
            return self.covariates.clone();
        }
        let mut design = DMatrix::<f64>::zeros(n, p + 1);
        for i in 0..n {
            design[(i, 0)] = 1.0;
            for j in 0..p {
                design[(i, j + 1)] = self.covariates[(i, j)];
            }
        }
        design
    }

    /// Column names of [`design_matrix`](Self::design_matrix), intercept first.
    pub fn design_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.covariate_names.len() + 1);
        if self.add_intercept {
            names.push(INTERCEPT_NAME.to_string());
        }
        names.extend(self.covariate_names.iter().cloned());
        names
    }

    /// Names of design columns that are (numerically) linear combinations of
    /// the columns before them, found by modified Gram-Schmidt.
    fn dependent_design_columns(&self) -> Vec<String> {
        let design = self.design_matrix();
        let names = self.design_names();
        let n = design.nrows();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut dependent = Vec::new();
        for j in 0..design.ncols() {
            let mut column: Vec<f64> = (0..n).map(|i| design[(i, j)]).collect();
            let scale = column.iter().map(|v| v * v).sum::<f64>().sqrt();
            for u in &basis {
                let proj: f64 = u.iter().zip(&column).map(|(a, b)| a * b).sum();
                for (c, &ui) in column.iter_mut().zip(u) {
                    *c -= proj * ui;
                }
            }
            let residual_norm = column.iter().map(|v| v * v).sum::<f64>().sqrt();
            if residual_norm <= 1e-8 * scale.max(1.0) {
                dependent.push(names[j].clone());
            } else {
                for c in column.iter_mut() {
                    *c /= residual_norm;
                }
                basis.push(column);
            }
        }
        dependent
    }
}
