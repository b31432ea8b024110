use alloc::vec;
use alloc::vec::Vec;

use super::design::DesignMatrix;
use super::kernel::{Kernel, ETA, NUISANCE, ZETA};
use super::{CountFamily, ZeroModel};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Sizes of the three parameter blocks `[beta | gamma | s]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub mean: usize,
    pub zero: usize,
    pub nuisance: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        self.mean + self.zero + self.nuisance
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zero_offset(&self) -> usize {
        self.mean
    }

    pub fn nuisance_offset(&self) -> usize {
        self.mean + self.zero
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<Matrix>,
}

/// Log-likelihood of a count regression (or logistic) model as a function of
/// the full unconstrained parameter vector.
#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    kernel: Kernel,
    design: &'a DesignMatrix,
    zero_constant: bool,
    y: &'a [u64],
    layout: ParamLayout,
}

impl<'a> Likelihood<'a> {
    pub fn count(
        family: CountFamily,
        zero_model: ZeroModel,
        design: &'a DesignMatrix,
        y: &'a [u64],
    ) -> Result<Self> {
        Self::with_kernel(family.kernel(), zero_model, design, y)
    }

    pub fn logistic(design: &'a DesignMatrix, y: &'a [u64]) -> Result<Self> {
        Self::with_kernel(Kernel::Logistic, ZeroModel::Constant, design, y)
    }

    pub(crate) fn with_kernel(
        kernel: Kernel,
        zero_model: ZeroModel,
        design: &'a DesignMatrix,
        y: &'a [u64],
    ) -> Result<Self> {
        if design.nrows() != y.len() {
            return Err(Error::Dimension { expected: design.nrows(), found: y.len() });
        }
        let zero_constant = zero_model == ZeroModel::Constant;
        let p = design.ncols();
        let layout = ParamLayout {
            mean: p,
            zero: if !kernel.has_zero_model() {
                0
            } else if zero_constant {
                1
            } else {
                p
            },
            nuisance: usize::from(kernel.has_nuisance()),
        };
        Ok(Likelihood { kernel, design, zero_constant, y, layout })
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(theta, false)?.value)
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(theta, false)?.gradient)
    }

    pub fn hessian(&self, theta: &[f64]) -> Result<Matrix> {
        Ok(self.evaluate(theta, true)?.hessian.expect("hessian requested"))
    }

    /// Value, gradient and (optionally) Hessian. An invalid parameter point
    /// yields a value of negative infinity rather than an error.
    pub fn evaluate(&self, theta: &[f64], want_hessian: bool) -> Result<Evaluation> {
        let layout = self.layout;
        if theta.len() != layout.len() {
            return Err(Error::Dimension { expected: layout.len(), found: theta.len() });
        }
        let p = layout.mean;
        let beta = &theta[..p];
        let gamma = &theta[layout.zero_offset()..layout.nuisance_offset()];
        let s = if layout.nuisance == 1 { theta[layout.nuisance_offset()] } else { 0.0 };
        let k = layout.len();

        let mut value = 0.0;
        let mut gradient = vec![0.0; k];
        let mut hessian = if want_hessian { Some(Matrix::zeros(k, k)) } else { None };
        let one = [1.0];
        for (i, &y) in self.y.iter().enumerate() {
            let row = self.design.row(i);
            let eta = crate::linalg::dot(row, beta);
            let zero_row: &[f64] = if self.zero_constant { &one } else { row };
            let zeta = if layout.zero > 0 { crate::linalg::dot(zero_row, gamma) } else { 0.0 };
            let obs = self.kernel.eval(y, [eta, zeta, s])?;
            if !obs.ll.is_finite() {
                return Ok(Evaluation { value: f64::NEG_INFINITY, gradient, hessian });
            }
            value += obs.ll;

            // (local index, global offset, coefficients)
            let mut blocks: [(usize, usize, &[f64]); 3] = [(ETA, 0, row), (ZETA, 0, &[]), (NUISANCE, 0, &[])];
            let mut nb = 1;
            if layout.zero > 0 {
                blocks[nb] = (ZETA, layout.zero_offset(), zero_row);
                nb += 1;
            }
            if layout.nuisance > 0 {
                blocks[nb] = (NUISANCE, layout.nuisance_offset(), &one);
                nb += 1;
            }
            let blocks = &blocks[..nb];
            for &(a, off, coef) in blocks {
                let g = obs.grad[a];
                for (j, c) in coef.iter().enumerate() {
                    gradient[off + j] += g * c;
                }
            }
            if let Some(h) = hessian.as_mut() {
                for &(a, off_a, coef_a) in blocks {
                    for &(b, off_b, coef_b) in blocks {
                        let hab = obs.hess[a][b];
                        if hab == 0.0 {
                            continue;
                        }
                        for (j, ca) in coef_a.iter().enumerate() {
                            for (l, cb) in coef_b.iter().enumerate() {
                                h[(off_a + j, off_b + l)] += hab * ca * cb;
                            }
                        }
                    }
                }
            }
        }
        Ok(Evaluation { value, gradient, hessian })
    }
}
