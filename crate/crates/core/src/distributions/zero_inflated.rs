use libm::{exp, log, log1p};

use super::{NegBinParams, PoissonParams};
use crate::special::log_add_exp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroBase {
    Poisson(PoissonParams),
    NegBin(NegBinParams),
}

impl ZeroBase {
    pub fn ln_pmf(&self, x: u64) -> f64 {
        match self {
            ZeroBase::Poisson(p) => p.ln_pmf(x),
            ZeroBase::NegBin(p) => p.ln_pmf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ZeroBase::Poisson(p) => p.lambda(),
            ZeroBase::NegBin(p) => p.mu(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ZeroBase::Poisson(p) => p.lambda(),
            ZeroBase::NegBin(p) => p.mu() * p.d(),
        }
    }
}

/// Mixture of a point mass at zero (weight `pi`) and a base count law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroInflatedParams {
    pi: f64,
    base: ZeroBase,
}

impl ZeroInflatedParams {
    pub fn new(pi: f64, base: ZeroBase) -> Result<Self> {
        if !(0.0..1.0).contains(&pi) {
            return Err(Error::domain(alloc::format!("zero-inflation probability must be in [0, 1), got {pi}")));
        }
        Ok(ZeroInflatedParams { pi, base })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn base(&self) -> &ZeroBase {
        &self.base
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        let ln_keep = log1p(-self.pi);
        let base = self.base.ln_pmf(x);
        if x == 0 {
            if self.pi == 0.0 {
                base
            } else {
                log_add_exp(log(self.pi), ln_keep + base)
            }
        } else {
            ln_keep + base
        }
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.pi) * self.base.mean()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.base.mean();
        let second = self.base.variance() + mu * mu;
        let mean = self.mean();
        (1.0 - self.pi) * second - mean * mean
    }

    pub fn zero_probability(&self) -> f64 {
        exp(self.ln_pmf(0))
    }
}
