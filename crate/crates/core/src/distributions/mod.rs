//! Count distributions: pmf, cdf, moments and inverse-CDF sampling.
//!
//! Every pmf is evaluated in log space and exponentiated at the boundary.

mod compoisson;
mod hermite;
mod negbin;
mod poisson;
mod zero_inflated;

use alloc::vec::Vec;

use libm::{exp, log};
use rand::Rng;

pub use compoisson::{compoisson_normalizer, series, CompoissonParams, SeriesMoments, DEFAULT_REL_TOL, MAX_TERMS};
pub use hermite::HermiteParams;
pub use negbin::NegBinParams;
pub use poisson::PoissonParams;
pub use zero_inflated::{ZeroBase, ZeroInflatedParams};

use crate::{Error, Result};

/// Upper cdf level to which sampling tables are built.
pub const TABLE_LEVEL: f64 = 1.0 - 1e-15;
/// Safety bound on the support walked by cdf / sampling routines.
const MAX_SUPPORT: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionParams {
    Poisson(PoissonParams),
    NegBin(NegBinParams),
    Hermite(HermiteParams),
    ComPoisson(CompoissonParams),
    ZeroInflated(ZeroInflatedParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub dispersion_index: f64,
}

impl Moments {
    fn new(mean: f64, variance: f64) -> Self {
        Moments { mean, variance, dispersion_index: variance / mean }
    }
}

impl DistributionParams {
    pub fn ln_pmf(&self, x: u64) -> Result<f64> {
        Ok(match self {
            DistributionParams::Poisson(p) => p.ln_pmf(x),
            DistributionParams::NegBin(p) => p.ln_pmf(x),
            DistributionParams::Hermite(p) => p.ln_pmf(x),
            DistributionParams::ComPoisson(p) => p.ln_pmf(x)?,
            DistributionParams::ZeroInflated(p) => p.ln_pmf(x),
        })
    }

    pub fn pmf(&self, x: u64) -> Result<f64> {
        Ok(exp(self.ln_pmf(x)?).min(1.0))
    }

    pub fn cdf(&self, x: u64) -> Result<f64> {
        let mut walk = self.ln_pmf_iter()?;
        let mut total = 0.0;
        for _ in 0..=x {
            total += exp(walk.next_ln_pmf());
        }
        Ok(total.min(1.0))
    }

    pub fn moments(&self) -> Result<Moments> {
        Ok(match self {
            DistributionParams::Poisson(p) => Moments::new(p.lambda(), p.lambda()),
            DistributionParams::NegBin(p) => Moments::new(p.mu(), p.mu() * p.d()),
            DistributionParams::Hermite(p) => Moments::new(p.mean(), p.variance()),
            DistributionParams::ComPoisson(p) => {
                let s = p.series()?;
                Moments::new(s.mean, s.variance)
            }
            DistributionParams::ZeroInflated(p) => Moments::new(p.mean(), p.variance()),
        })
    }

    /// Successive log-probabilities `ln p(0), ln p(1), …`.
    pub fn ln_pmf_iter(&self) -> Result<LnPmfIter> {
        let state = match *self {
            DistributionParams::Poisson(p) => Walk::Ratio { kind: RatioKind::Poisson(p), ln_p: -p.lambda() },
            DistributionParams::NegBin(p) => {
                Walk::Ratio { kind: RatioKind::NegBin(p), ln_p: p.ln_pmf(0) }
            }
            DistributionParams::ComPoisson(p) => {
                let ln_z = p.series()?.ln_z;
                Walk::Ratio { kind: RatioKind::ComPoisson(p), ln_p: -ln_z }
            }
            DistributionParams::Hermite(p) => Walk::Hermite { params: p, history: Vec::new() },
            DistributionParams::ZeroInflated(z) => {
                let base = match *z.base() {
                    ZeroBase::Poisson(p) => RatioKind::Poisson(p),
                    ZeroBase::NegBin(p) => RatioKind::NegBin(p),
                };
                Walk::ZeroInflated {
                    zero: z.ln_pmf(0),
                    ln_keep: libm::log1p(-z.pi()),
                    kind: base,
                    ln_base: z.base().ln_pmf(0),
                }
            }
        };
        Ok(LnPmfIter { state, x: 0 })
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> Result<u64> {
        Ok(CdfTable::new(self, p.min(TABLE_LEVEL))?.quantile(p))
    }

    /// Draws `n` i.i.d. values by inverse-CDF lookup.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<u64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let table = CdfTable::new(self, TABLE_LEVEL)?;
        Ok((0..n).map(|_| table.draw(rng)).collect())
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        Ok(CdfTable::new(self, TABLE_LEVEL)?.draw(rng))
    }
}

#[derive(Debug, Clone)]
enum RatioKind {
    Poisson(PoissonParams),
    NegBin(NegBinParams),
    ComPoisson(CompoissonParams),
}

impl RatioKind {
    fn ln_ratio(&self, x: u64) -> f64 {
        match self {
            RatioKind::Poisson(p) => p.ln_ratio(x),
            RatioKind::NegBin(p) => p.ln_ratio(x),
            RatioKind::ComPoisson(p) => p.ln_ratio(x),
        }
    }
}

#[derive(Debug, Clone)]
enum Walk {
    Ratio { kind: RatioKind, ln_p: f64 },
    Hermite { params: HermiteParams, history: Vec<f64> },
    ZeroInflated { zero: f64, ln_keep: f64, kind: RatioKind, ln_base: f64 },
}

/// Walks the support from zero, producing `ln p(x)` one value at a time.
#[derive(Debug, Clone)]
pub struct LnPmfIter {
    state: Walk,
    x: u64,
}

impl LnPmfIter {
    /// Support point of the next value returned.
    pub fn position(&self) -> u64 {
        self.x
    }

    pub fn next_ln_pmf(&mut self) -> f64 {
        let x = self.x;
        self.x += 1;
        match &mut self.state {
            Walk::Ratio { kind, ln_p } => {
                let out = *ln_p;
                *ln_p += kind.ln_ratio(x);
                out
            }
            Walk::Hermite { params, history } => {
                let value = if x == 0 {
                    -params.a1() - params.am()
                } else {
                    let n = x as usize - 1;
                    let m = params.order() as usize;
                    let mut next = log(params.a1()) + history[n];
                    if n + 1 >= m {
                        next = crate::special::log_add_exp(
                            next,
                            log(params.order() as f64 * params.am()) + history[n + 1 - m],
                        );
                    }
                    next - log(x as f64)
                };
                history.push(value);
                value
            }
            Walk::ZeroInflated { zero, ln_keep, kind, ln_base } => {
                let base = *ln_base;
                *ln_base += kind.ln_ratio(x);
                if x == 0 {
                    *zero
                } else {
                    *ln_keep + base
                }
            }
        }
    }
}

impl Iterator for LnPmfIter {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.next_ln_pmf())
    }
}

/// Cumulative probabilities `F(0), F(1), …` up to a requested level.
#[derive(Debug, Clone)]
pub struct CdfTable {
    cumulative: Vec<f64>,
}

impl CdfTable {
    /// Tabulates the cdf until it reaches `level` or the remaining terms are
    /// numerically negligible.
    pub fn new(params: &DistributionParams, level: f64) -> Result<Self> {
        let mut walk = params.ln_pmf_iter()?;
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        loop {
            let p = exp(walk.next_ln_pmf());
            total += p;
            cumulative.push(total);
            if total >= level || (total > 0.999 && p < 1e-20 * total) {
                break;
            }
            if walk.position() > MAX_SUPPORT {
                return Err(Error::Truncation { terms: MAX_SUPPORT as usize, ln_partial_sum: log(total) });
            }
        }
        Ok(CdfTable { cumulative })
    }

    pub fn max_support(&self) -> u64 {
        self.cumulative.len() as u64 - 1
    }

    pub fn quantile(&self, p: f64) -> u64 {
        let idx = self.cumulative.partition_point(|&c| c < p);
        idx.min(self.cumulative.len() - 1) as u64
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.quantile(u)
    }
}
