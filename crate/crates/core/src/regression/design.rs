use alloc::vec::Vec;

use libm::sqrt;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Row-major predictor matrix (intercept column included by the caller).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Matrix,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("design matrix contains non-finite values"));
        }
        Ok(DesignMatrix { values: Matrix::from_row_major(rows, cols, data) })
    }

    /// `[1, c]` rows for a single covariate column.
    pub fn intercept_and(column: &[f64]) -> Result<Self> {
        let mut data = Vec::with_capacity(2 * column.len());
        for &c in column {
            data.push(1.0);
            data.push(c);
        }
        DesignMatrix::new(column.len(), 2, data)
    }

    pub fn intercept_only(rows: usize) -> Self {
        DesignMatrix { values: Matrix::from_row_major(rows, 1, alloc::vec![1.0; rows]) }
    }

    pub fn nrows(&self) -> usize {
        self.values.rows()
    }

    pub fn ncols(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.values[(i, j)]).collect()
    }

    /// Copy with column `j` multiplied by `factor`.
    pub fn with_scaled_column(&self, j: usize, factor: f64) -> DesignMatrix {
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            values[(i, j)] *= factor;
        }
        DesignMatrix { values }
    }

    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.ncols()).find(|&j| (0..self.nrows()).all(|i| self.values[(i, j)] == 1.0))
    }

    /// `XᵀX`.
    pub fn gram(&self) -> Matrix {
        let p = self.ncols();
        let mut g = Matrix::zeros(p, p);
        for i in 0..self.nrows() {
            let r = self.row(i);
            for a in 0..p {
                for b in 0..=a {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(b, a)] = g[(a, b)];
            }
        }
        g
    }
}

/// Centers (when an intercept exists) and scales the non-intercept columns.
/// Fitting happens on the standardized design; `back_transform` maps
/// coefficients estimated there to the caller's scale.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    intercept: Option<usize>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(design: &DesignMatrix) -> Result<(Standardizer, DesignMatrix)> {
        let n = design.nrows() as f64;
        let p = design.ncols();
        let intercept = design.intercept_column();
        let mut center = alloc::vec![0.0; p];
        let mut scale = alloc::vec![1.0; p];
        for j in 0..p {
            if Some(j) == intercept {
                continue;
            }
            let col = design.column(j);
            let c = if intercept.is_some() { col.iter().sum::<f64>() / n } else { 0.0 };
            let s = sqrt(col.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / n);
            if !(s > 0.0) {
                return Err(Error::Rank);
            }
            center[j] = c;
            scale[j] = s;
        }
        let mut data = Vec::with_capacity(design.nrows() * p);
        for i in 0..design.nrows() {
            for j in 0..p {
                data.push((design.get(i, j) - center[j]) / scale[j]);
            }
        }
        let standardized = DesignMatrix::new(design.nrows(), p, data)?;
        if !full_rank(&standardized.gram()) {
            return Err(Error::Rank);
        }
        Ok((Standardizer { intercept, center, scale }, standardized))
    }

    /// Linear map `A` with `beta_original = A · beta_standardized`.
    pub fn back_transform(&self) -> Matrix {
        let p = self.scale.len();
        let mut a = Matrix::zeros(p, p);
        for j in 0..p {
            a[(j, j)] = 1.0 / self.scale[j];
            if let Some(k) = self.intercept {
                if j != k {
                    a[(k, j)] = -self.center[j] / self.scale[j];
                }
            }
        }
        if let Some(k) = self.intercept {
            a[(k, k)] = 1.0;
        }
        a
    }
}

/// Cholesky with a relative pivot floor, so exactly collinear columns are
/// not rescued by rounding noise.
pub(crate) fn full_rank(gram: &Matrix) -> bool {
    let Some(ch) = gram.cholesky() else {
        return false;
    };
    let max_diag = gram.diag().into_iter().fold(0.0_f64, f64::max);
    ch.factor().diag().into_iter().all(|l| l * l > 1e-12 * max_diag)
}
