use libm::log;

use crate::special::ln_factorial;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParams {
    lambda: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(alloc::format!("Poisson lambda must be positive, got {lambda}")));
        }
        Ok(PoissonParams { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        x as f64 * log(self.lambda) - self.lambda - ln_factorial(x)
    }

    pub(crate) fn ln_ratio(&self, x: u64) -> f64 {
        log(self.lambda) - log(x as f64 + 1.0)
    }
}
