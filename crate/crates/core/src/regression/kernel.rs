//! Per-observation log-likelihood with gradient and Hessian with respect to
//! the local linear predictors: `eta` (log mean or log rate), `zeta` (logit
//! of the structural-zero probability) and `s` (the family's nuisance
//! parameter on its unconstrained scale).

use libm::{exp, log, log1p};

use crate::distributions::series;
use crate::distributions::DEFAULT_REL_TOL;
use crate::special::{ln_factorial, log_add_exp, logistic, softplus};
use crate::Result;

pub(crate) const ETA: usize = 0;
pub(crate) const ZETA: usize = 1;
pub(crate) const NUISANCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    Poisson,
    /// `s = ln(d − 1)`.
    NegBin,
    /// `s = ln am`; `a1 = mean − m·am`.
    Hermite(u32),
    /// `eta = ln lambda`, `s = ln nu`.
    ComPoisson,
    ZeroInflatedPoisson,
    ZeroInflatedNegBin,
    Logistic,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ObsEval {
    pub ll: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl ObsEval {
    fn invalid() -> Self {
        ObsEval { ll: f64::NEG_INFINITY, ..Default::default() }
    }
}

impl Kernel {
    pub fn has_zero_model(self) -> bool {
        matches!(self, Kernel::ZeroInflatedPoisson | Kernel::ZeroInflatedNegBin)
    }

    pub fn has_nuisance(self) -> bool {
        matches!(
            self,
            Kernel::NegBin | Kernel::Hermite(_) | Kernel::ComPoisson | Kernel::ZeroInflatedNegBin
        )
    }

    pub fn eval(self, y: u64, local: [f64; 3]) -> Result<ObsEval> {
        let [eta, zeta, s] = local;
        match self {
            Kernel::Poisson => Ok(poisson(y, eta)),
            Kernel::NegBin => Ok(negbin(y, eta, s)),
            Kernel::Hermite(m) => Ok(hermite(y, eta, s, m)),
            Kernel::ComPoisson => compoisson(y, eta, s),
            Kernel::ZeroInflatedPoisson => Ok(zero_inflate(y, zeta, poisson(y, eta), poisson(0, eta))),
            Kernel::ZeroInflatedNegBin => {
                Ok(zero_inflate(y, zeta, negbin(y, eta, s), negbin(0, eta, s)))
            }
            Kernel::Logistic => Ok(logistic_obs(y, eta)),
        }
    }
}

fn poisson(y: u64, eta: f64) -> ObsEval {
    let mu = exp(eta);
    let mut out = ObsEval { ll: y as f64 * eta - mu - ln_factorial(y), ..Default::default() };
    out.grad[ETA] = y as f64 - mu;
    out.hess[ETA][ETA] = -mu;
    out
}

fn negbin(y: u64, eta: f64, s: f64) -> ObsEval {
    let mu = exp(eta);
    let e = exp(s);
    if !(e > 0.0) || !e.is_finite() || !mu.is_finite() {
        return ObsEval::invalid();
    }
    let d = 1.0 + e;
    let ln_d = log1p(e);
    let r = mu / e;
    let yf = y as f64;
    let (mut rising, mut a, mut b) = (0.0, 0.0, 0.0);
    for k in 0..y {
        let t = r + k as f64;
        rising += log(t);
        a += 1.0 / t;
        b += 1.0 / (t * t);
    }
    // ln((d-1)/d) = s - ln d
    let ll = rising - ln_factorial(y) - r * ln_d + yf * (s - ln_d);
    let core = a - ln_d;
    let mut out = ObsEval { ll, ..Default::default() };
    out.grad[ETA] = r * core;
    out.grad[NUISANCE] = -r * core - r * e / d + yf / d;
    out.hess[ETA][ETA] = r * core - r * r * b;
    let cross = -r * core + r * r * b - r * e / d;
    out.hess[ETA][NUISANCE] = cross;
    out.hess[NUISANCE][ETA] = cross;
    out.hess[NUISANCE][NUISANCE] =
        r * core - r * r * b + r * e / d + r * e * e / (d * d) - yf * e / (d * d);
    out
}

fn hermite(y: u64, eta: f64, s: f64, m: u32) -> ObsEval {
    let mu = exp(eta);
    let am = exp(s);
    let mf = m as f64;
    let a1 = mu - mf * am;
    if !(a1 > 0.0) || !(am > 0.0) || !mu.is_finite() {
        return ObsEval::invalid();
    }
    let params = match crate::distributions::HermiteParams::new(a1, am, m) {
        Ok(p) => p,
        Err(_) => return ObsEval::invalid(),
    };
    let lp = params.ln_pmf_table(y);
    let top = lp[y as usize];
    // p(y − k) / p(y)
    let ratio = |k: u64| if k <= y { exp(lp[(y - k) as usize] - top) } else { 0.0 };
    let m64 = m as u64;
    let (r1, r2, rm, r1m, r2m) = (ratio(1), ratio(2), ratio(m64), ratio(1 + m64), ratio(2 * m64));
    let g1 = r1 - 1.0;
    let gm = rm - 1.0;
    let l11 = r2 - 2.0 * r1 + 1.0 - g1 * g1;
    let l1m = r1m - r1 - rm + 1.0 - g1 * gm;
    let lmm = r2m - 2.0 * rm + 1.0 - gm * gm;

    let mut out = ObsEval { ll: top, ..Default::default() };
    out.grad[ETA] = mu * g1;
    out.grad[NUISANCE] = am * (gm - mf * g1);
    out.hess[ETA][ETA] = mu * mu * l11 + mu * g1;
    let cross = mu * am * (l1m - mf * l11);
    out.hess[ETA][NUISANCE] = cross;
    out.hess[NUISANCE][ETA] = cross;
    out.hess[NUISANCE][NUISANCE] = am * am * (mf * mf * l11 - 2.0 * mf * l1m + lmm) - mf * am * g1 + am * gm;
    out
}

fn compoisson(y: u64, eta: f64, s: f64) -> Result<ObsEval> {
    let lambda = exp(eta);
    let nu = exp(s);
    if !lambda.is_finite() || !(lambda > 0.0) || !nu.is_finite() {
        return Ok(ObsEval::invalid());
    }
    let sm = series(lambda, nu, DEFAULT_REL_TOL)?;
    let ln_fact = ln_factorial(y);
    let yf = y as f64;
    let mut out = ObsEval { ll: yf * eta - nu * ln_fact - sm.ln_z, ..Default::default() };
    out.grad[ETA] = yf - sm.mean;
    let gs = nu * (sm.mean_ln_fact - ln_fact);
    out.grad[NUISANCE] = gs;
    out.hess[ETA][ETA] = -sm.variance;
    let cross = nu * sm.cov_x_ln_fact;
    out.hess[ETA][NUISANCE] = cross;
    out.hess[NUISANCE][ETA] = cross;
    out.hess[NUISANCE][NUISANCE] = gs - nu * nu * sm.var_ln_fact;
    Ok(out)
}

/// Wraps a base observation evaluation in the zero-inflation mixture with
/// `pi = logistic(zeta)`. `base_zero` is the base evaluation at `y = 0`.
fn zero_inflate(y: u64, zeta: f64, base: ObsEval, base_zero: ObsEval) -> ObsEval {
    if !base.ll.is_finite() || !base_zero.ll.is_finite() {
        return ObsEval::invalid();
    }
    let pi = logistic(zeta);
    let keep_hess = -pi * (1.0 - pi);
    if y > 0 {
        let mut out = base;
        out.ll = base.ll - softplus(zeta);
        out.grad[ZETA] = -pi;
        out.hess[ZETA][ZETA] = keep_hess;
        return out;
    }
    let u = log_add_exp(zeta, base_zero.ll);
    let w = exp(zeta - u);
    let v = 1.0 - w;
    let mut out = ObsEval { ll: u - softplus(zeta), ..Default::default() };
    out.grad[ZETA] = w - pi;
    out.hess[ZETA][ZETA] = w * v + keep_hess;
    for a in [ETA, NUISANCE] {
        out.grad[a] = v * base_zero.grad[a];
        out.hess[ZETA][a] = -w * v * base_zero.grad[a];
        out.hess[a][ZETA] = out.hess[ZETA][a];
        for b in [ETA, NUISANCE] {
            out.hess[a][b] = v * base_zero.hess[a][b] + w * v * base_zero.grad[a] * base_zero.grad[b];
        }
    }
    out
}

fn logistic_obs(y: u64, eta: f64) -> ObsEval {
    let p = logistic(eta);
    let mut out = ObsEval { ll: y as f64 * eta - softplus(eta), ..Default::default() };
    out.grad[ETA] = y as f64 - p;
    out.hess[ETA][ETA] = -p * (1.0 - p);
    out
}
