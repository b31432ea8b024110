use libm::{lgamma, log, log1p};

use crate::special::ln_factorial;
use crate::{Error, Result};

/// Negative binomial in the mean / dispersion-index parameterization:
/// variance is `mu * d`, size is `mu / (d - 1)` and the success probability
/// is `1 / d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinParams {
    mu: f64,
    d: f64,
}

impl NegBinParams {
    pub fn new(mu: f64, d: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::domain(alloc::format!("negative binomial mean must be positive, got {mu}")));
        }
        if !(d > 1.0) || !d.is_finite() {
            return Err(Error::domain(alloc::format!(
                "negative binomial dispersion index must exceed 1, got {d}"
            )));
        }
        Ok(NegBinParams { mu, d })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn size(&self) -> f64 {
        self.mu / (self.d - 1.0)
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        let r = self.size();
        ln_rising(r, x) - ln_factorial(x) - r * log(self.d) + x as f64 * ln_excess(self.d)
    }

    pub(crate) fn ln_ratio(&self, x: u64) -> f64 {
        let x = x as f64;
        log(self.size() + x) - log(x + 1.0) + ln_excess(self.d)
    }
}

/// `ln((d - 1) / d)`.
fn ln_excess(d: f64) -> f64 {
    -log1p(1.0 / (d - 1.0))
}

/// `ln Γ(r + x) − ln Γ(r)`, summed term by term for moderate `x` so that a
/// huge size (dispersion index close to one) does not cancel catastrophically.
pub(crate) fn ln_rising(r: f64, x: u64) -> f64 {
    if x <= 1000 {
        (0..x).map(|k| log(r + k as f64)).sum()
    } else {
        lgamma(r + x as f64) - lgamma(r)
    }
}
