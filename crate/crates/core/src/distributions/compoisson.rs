use libm::{exp, floor, log};

use crate::special::ln_factorial;
use crate::{Error, Result};

/// Relative truncation tolerance used for the normalizer unless the caller
/// asks for another one.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 1_000_000;

/// Conway–Maxwell–Poisson with rate `lambda` and dispersion `nu`:
/// `p(x) = lambda^x / ((x!)^nu Z(lambda, nu))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoissonParams {
    lambda: f64,
    nu: f64,
}

impl CompoissonParams {
    pub fn new(lambda: f64, nu: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(alloc::format!("COM-Poisson lambda must be positive, got {lambda}")));
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::domain(alloc::format!("COM-Poisson nu must be nonnegative, got {nu}")));
        }
        if nu == 0.0 && lambda >= 1.0 {
            return Err(Error::Divergent { lambda });
        }
        Ok(CompoissonParams { lambda, nu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn series(&self) -> Result<SeriesMoments> {
        series(self.lambda, self.nu, DEFAULT_REL_TOL)
    }

    /// Log pmf given a precomputed `ln Z`.
    pub fn ln_pmf_with(&self, x: u64, ln_z: f64) -> f64 {
        x as f64 * log(self.lambda) - self.nu * ln_factorial(x) - ln_z
    }

    pub fn ln_pmf(&self, x: u64) -> Result<f64> {
        Ok(self.ln_pmf_with(x, self.series()?.ln_z))
    }

    pub(crate) fn ln_ratio(&self, x: u64) -> f64 {
        log(self.lambda) - self.nu * log(x as f64 + 1.0)
    }
}

/// Quantities obtained from one pass over the normalizing series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMoments {
    pub ln_z: f64,
    pub mean: f64,
    pub variance: f64,
    /// `E[ln X!]`.
    pub mean_ln_fact: f64,
    /// `Var[ln X!]`.
    pub var_ln_fact: f64,
    /// `Cov[X, ln X!]`.
    pub cov_x_ln_fact: f64,
    pub terms: usize,
}

/// Normalizing constant `Z(lambda, nu) = Σ_j lambda^j / (j!)^nu`.
pub fn compoisson_normalizer(lambda: f64, nu: f64, rel_tol: f64) -> Result<f64> {
    Ok(exp(series(lambda, nu, rel_tol)?.ln_z))
}

/// Sums the normalizing series together with the first two moments of `X`
/// and `ln X!`.
///
/// Terms are scaled by the largest term (at `floor(lambda^(1/nu))`) so the
/// sum never overflows. Summation stops once the terms are decreasing with
/// ratio `rho < 1` and the geometric tail bound `t·rho/(1−rho)` is below
/// `rel_tol` times the running sum; since `rho` only shrinks from there on,
/// the neglected tail is below that bound.
pub fn series(lambda: f64, nu: f64, rel_tol: f64) -> Result<SeriesMoments> {
    if !(lambda > 0.0) || !(nu >= 0.0) || !(rel_tol > 0.0) {
        return Err(Error::domain(alloc::format!(
            "COM-Poisson series needs lambda > 0, nu >= 0, rel_tol > 0 (got {lambda}, {nu}, {rel_tol})"
        )));
    }
    if nu == 0.0 && lambda >= 1.0 {
        return Err(Error::Divergent { lambda });
    }
    let ln_lambda = log(lambda);
    let mode = if nu == 0.0 || ln_lambda <= 0.0 {
        0.0
    } else {
        floor(exp(ln_lambda / nu)).min(MAX_TERMS as f64)
    };
    let ln_max = mode * ln_lambda - nu * libm::lgamma(mode + 1.0);

    let (mut s0, mut sx, mut sxx, mut sl, mut sll, mut sxl) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut ln_term = 0.0;
    let mut ln_fact = 0.0;
    for j in 0..MAX_TERMS {
        let jf = j as f64;
        let w = exp(ln_term - ln_max);
        s0 += w;
        sx += jf * w;
        sxx += jf * jf * w;
        sl += ln_fact * w;
        sll += ln_fact * ln_fact * w;
        sxl += jf * ln_fact * w;

        let ln_next = log(jf + 1.0);
        let ln_rho = ln_lambda - nu * ln_next;
        if jf >= mode && ln_rho < 0.0 {
            let rho = exp(ln_rho);
            if w * rho / (1.0 - rho) < rel_tol * s0 {
                let mean = sx / s0;
                let mean_l = sl / s0;
                return Ok(SeriesMoments {
                    ln_z: ln_max + log(s0),
                    mean,
                    variance: (sxx / s0 - mean * mean).max(0.0),
                    mean_ln_fact: mean_l,
                    var_ln_fact: (sll / s0 - mean_l * mean_l).max(0.0),
                    cov_x_ln_fact: sxl / s0 - mean * mean_l,
                    terms: j + 1,
                });
            }
        }
        ln_term += ln_rho;
        ln_fact += ln_next;
    }
    Err(Error::Truncation { terms: MAX_TERMS, ln_partial_sum: ln_max + log(s0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_closed_forms() {
        let z = compoisson_normalizer(2.0, 1.0, DEFAULT_REL_TOL).unwrap();
        assert!((z - 7.389_056_098_930_65).abs() < 1e-10);
        let z = compoisson_normalizer(0.5, 0.0, DEFAULT_REL_TOL).unwrap();
        assert!((z - 2.0).abs() < 1e-11);
    }

    #[test]
    fn divergent_geometric_regime_is_rejected() {
        assert_eq!(series(1.0, 0.0, 1e-12), Err(Error::Divergent { lambda: 1.0 }));
        assert!(matches!(CompoissonParams::new(3.0, 0.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn huge_mode_reports_truncation() {
        // lambda^(1/nu) = 1e40 puts the mode beyond the term cap.
        let err = series(1e4, 0.1, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Truncation { terms: MAX_TERMS, .. }));
    }

    #[test]
    fn poisson_case_moments() {
        let s = series(2.0, 1.0, 1e-14).unwrap();
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.variance - 2.0).abs() < 1e-11);
    }
}
