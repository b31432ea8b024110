use alloc::vec::Vec;

use libm::log;

use crate::special::log_add_exp;
use crate::{Error, Result};

/// Hermite distribution of order `m`: the law of `X1 + m·X2` with
/// independent `X1 ~ Poisson(a1)` and `X2 ~ Poisson(am)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteParams {
    a1: f64,
    am: f64,
    m: u32,
}

impl HermiteParams {
    pub fn new(a1: f64, am: f64, m: u32) -> Result<Self> {
        if !(a1 > 0.0) || !a1.is_finite() || !(am > 0.0) || !am.is_finite() {
            return Err(Error::domain(alloc::format!(
                "Hermite rates must be positive, got a1={a1}, am={am}"
            )));
        }
        if m < 2 {
            return Err(Error::domain(alloc::format!("Hermite order must be at least 2, got {m}")));
        }
        Ok(HermiteParams { a1, am, m })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn am(&self) -> f64 {
        self.am
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn mean(&self) -> f64 {
        self.a1 + self.m as f64 * self.am
    }

    pub fn variance(&self) -> f64 {
        let m = self.m as f64;
        self.a1 + m * m * self.am
    }

    /// `ln p(0), …, ln p(upto)` from the PGF recursion
    /// `(n+1) p(n+1) = a1 p(n) + m am p(n+1−m)`, carried out in log space.
    pub fn ln_pmf_table(&self, upto: u64) -> Vec<f64> {
        let mut lp = Vec::with_capacity(upto as usize + 1);
        lp.push(-self.a1 - self.am);
        let ln_a1 = log(self.a1);
        let ln_mam = log(self.m as f64 * self.am);
        let m = self.m as usize;
        for n in 0..upto as usize {
            let mut next = ln_a1 + lp[n];
            if n + 1 >= m {
                next = log_add_exp(next, ln_mam + lp[n + 1 - m]);
            }
            lp.push(next - log(n as f64 + 1.0));
        }
        lp
    }

    pub fn ln_pmf(&self, x: u64) -> f64 {
        self.ln_pmf_table(x)[x as usize]
    }
}
