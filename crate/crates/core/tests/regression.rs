use countimpute_core::distributions::{
    CompoissonParams, DistributionParams, HermiteParams, NegBinParams, PoissonParams, ZeroBase, ZeroInflatedParams,
};
use countimpute_core::linalg::Matrix;
use countimpute_core::regression::{
    confint, fit_analysis_model, fit_count_model, fit_count_model_with, AnalysisKind, CountFamily, DesignMatrix,
    FitOptions, FittedModel, Likelihood, Nuisance, ZeroModel,
};
use countimpute_core::rng::substream;
use countimpute_core::special::{logistic, normal_cdf};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const FAMILIES: [CountFamily; 6] = [
    CountFamily::Poisson,
    CountFamily::NegBin,
    CountFamily::HERMITE,
    CountFamily::ComPoisson,
    CountFamily::ZeroInflatedPoisson,
    CountFamily::ZeroInflatedNegBin,
];

struct Instance {
    design: DesignMatrix,
    y: Vec<u64>,
}

/// Data drawn from `family` with a random regression on one standard-normal
/// covariate.
fn instance(family: CountFamily, n: usize, rng: &mut ChaCha8Rng) -> Instance {
    let b0 = rng.random_range(0.6..1.4);
    let b1 = rng.random_range(-0.3..0.3);
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).clamp(-3.0, 3.0)).collect();
    let nuisance = rng.random_range(0.0..1.0);
    let y = z
        .iter()
        .map(|&zi| {
            let mu = (b0 + b1 * zi).exp();
            let pi = logistic(-1.0 + 0.4 * zi);
            let params = match family {
                CountFamily::Poisson => DistributionParams::Poisson(PoissonParams::new(mu).unwrap()),
                CountFamily::NegBin => DistributionParams::NegBin(NegBinParams::new(mu, 1.5 + 2.0 * nuisance).unwrap()),
                CountFamily::Hermite { order } => {
                    let am = 0.05 + 0.2 * nuisance;
                    DistributionParams::Hermite(HermiteParams::new(mu - order as f64 * am, am, order).unwrap())
                }
                CountFamily::ComPoisson => {
                    DistributionParams::ComPoisson(CompoissonParams::new(mu, 0.6 + 1.2 * nuisance).unwrap())
                }
                CountFamily::ZeroInflatedPoisson => DistributionParams::ZeroInflated(
                    ZeroInflatedParams::new(pi, ZeroBase::Poisson(PoissonParams::new(mu).unwrap())).unwrap(),
                ),
                CountFamily::ZeroInflatedNegBin => DistributionParams::ZeroInflated(
                    ZeroInflatedParams::new(pi, ZeroBase::NegBin(NegBinParams::new(mu, 1.5 + 2.0 * nuisance).unwrap()))
                        .unwrap(),
                ),
            };
            params.sample_one(rng).unwrap()
        })
        .collect();
    Instance { design: DesignMatrix::intercept_and(&z).unwrap(), y }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn score_vanishes_at_optimum() {
    for (f, family) in FAMILIES.into_iter().enumerate() {
        let mut rng = substream(100, &[f as u64]);
        for k in 0..50 {
            let inst = instance(family, 400, &mut rng);
            let fit = fit_count_model(family, &inst.design, &inst.y)
                .unwrap_or_else(|e| panic!("{family:?} instance {k}: {e}"));
            let lik = Likelihood::count(family, ZeroModel::Regressed, &inst.design, &inst.y).unwrap();
            let g = lik.gradient(fit.params()).unwrap();
            let free = if fit.nuisance_pinned() { g.len() - 1 } else { g.len() };
            assert!(max_abs(&g[..free]) < 1e-6, "{family:?} instance {k}: score {g:?}");
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for (f, family) in FAMILIES.into_iter().enumerate() {
        let mut rng = substream(200, &[f as u64]);
        for k in 0..50 {
            let inst = instance(family, 150, &mut rng);
            let lik = Likelihood::count(family, ZeroModel::Regressed, &inst.design, &inst.y).unwrap();
            let mut theta: Vec<f64> = (0..lik.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
            theta[0] += 1.0;
            if let CountFamily::Hermite { .. } = family {
                // keep a1 = mu − 2 am positive on every row
                let last = theta.len() - 1;
                theta[last] = -3.0;
                theta[1] = theta[1].clamp(-0.2, 0.2);
            }
            let g = lik.gradient(&theta).unwrap();
            for j in 0..theta.len() {
                let h = 1e-6;
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (lik.value(&up).unwrap() - lik.value(&down).unwrap()) / (2.0 * h);
                let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1.0);
                assert!(rel < 1e-4, "{family:?} instance {k}, coord {j}: {} vs {fd}", g[j]);
            }
        }
    }
}

fn fd_hessian(lik: &Likelihood<'_>, theta: &[f64]) -> Matrix {
    let k = theta.len();
    let mut h = Matrix::zeros(k, k);
    let step = 1e-5;
    for j in 0..k {
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += step;
        down[j] -= step;
        let gu = lik.gradient(&up).unwrap();
        let gd = lik.gradient(&down).unwrap();
        for i in 0..k {
            h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    h.symmetrize();
    h
}

#[test]
fn covariance_is_inverse_observed_information() {
    for (f, family) in FAMILIES.into_iter().enumerate() {
        let mut rng = substream(300, &[f as u64]);
        let mut checked = 0;
        for _ in 0..10 {
            let inst = instance(family, 1000, &mut rng);
            let fit = fit_count_model(family, &inst.design, &inst.y).unwrap();
            if fit.nuisance_pinned() {
                continue;
            }
            let lik = Likelihood::count(family, ZeroModel::Regressed, &inst.design, &inst.y).unwrap();
            let mut info = fd_hessian(&lik, fit.params());
            info.scale(-1.0);
            let v = info.cholesky().expect("information positive definite").inverse();
            let cov = fit.covariance();
            for i in 0..v.rows() {
                for j in 0..v.cols() {
                    let scale = (v[(i, i)] * v[(j, j)]).sqrt();
                    assert!((cov[(i, j)] - v[(i, j)]).abs() < 1e-3 * scale, "{family:?} ({i},{j})");
                }
            }
            checked += 1;
        }
        assert!(checked >= 5, "{family:?}: only {checked} unpinned fits");
    }
}

#[test]
fn rescaling_a_column_rescales_its_coefficient() {
    for (f, family) in FAMILIES.into_iter().enumerate() {
        let inst = instance(family, 600, &mut substream(400, &[f as u64]));
        let c = 10.0;
        let base = fit_count_model(family, &inst.design, &inst.y).unwrap();
        let scaled = fit_count_model(family, &inst.design.with_scaled_column(1, c), &inst.y).unwrap();
        assert!((scaled.beta()[1] * c - base.beta()[1]).abs() < 1e-7 * (1.0 + base.beta()[1].abs()), "{family:?}");
        assert!((scaled.loglik() - base.loglik()).abs() < 1e-8, "{family:?}: {} vs {}", scaled.loglik(), base.loglik());
    }
}

#[test]
fn compoisson_nests_poisson() {
    let inst = instance(CountFamily::Poisson, 500, &mut substream(500, &[]));
    let pois = fit_count_model(CountFamily::Poisson, &inst.design, &inst.y).unwrap();
    let lik = Likelihood::count(CountFamily::ComPoisson, ZeroModel::Regressed, &inst.design, &inst.y).unwrap();
    let mut theta = pois.params().to_vec();
    theta.push(0.0);
    assert!((lik.value(&theta).unwrap() - pois.loglik()).abs() < 1e-8);
    let cmp = fit_count_model(CountFamily::ComPoisson, &inst.design, &inst.y).unwrap();
    assert!(cmp.loglik() >= pois.loglik() - 1e-9);
}

#[test]
fn fit_beats_null_model() {
    for (f, family) in FAMILIES.into_iter().enumerate() {
        let inst = instance(family, 500, &mut substream(600, &[f as u64]));
        let fit = fit_count_model(family, &inst.design, &inst.y).unwrap();
        let null = fit_count_model(family, &DesignMatrix::intercept_only(inst.y.len()), &inst.y).unwrap();
        assert!(fit.loglik() >= null.loglik() - 1e-9, "{family:?}");
    }
}

#[test]
fn intercept_only_poisson_is_log_mean() {
    let y: Vec<u64> = vec![0, 3, 1, 4, 2, 2, 7, 0, 1];
    let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
    let fit = fit_count_model(CountFamily::Poisson, &DesignMatrix::intercept_only(y.len()), &y).unwrap();
    assert!((fit.beta()[0] - mean.ln()).abs() < 1e-12);
}

#[test]
fn poisson_estimates_cover_truth() {
    let mut rng = substream(700, &[]);
    let reps = 500;
    let mut inside = 0;
    for _ in 0..reps {
        let z: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<u64> = z
            .iter()
            .map(|&zi| DistributionParams::Poisson(PoissonParams::new(2.0 * (0.5 * zi).exp()).unwrap()).sample_one(&mut rng).unwrap())
            .collect();
        let fit = fit_count_model(CountFamily::Poisson, &DesignMatrix::intercept_and(&z).unwrap(), &y).unwrap();
        let se = fit.std_errors();
        let ok0 = (fit.beta()[0] - 2f64.ln()).abs() < 3.0 * se[0];
        let ok1 = (fit.beta()[1] - 0.5).abs() < 3.0 * se[1];
        inside += usize::from(ok0 && ok1);
    }
    assert!(inside as f64 >= 0.99 * reps as f64, "{inside}/{reps}");
}

#[test]
fn compoisson_on_poisson_data_finds_unit_nu() {
    let mut rng = substream(800, &[]);
    let reps = 100;
    let mut inside = 0;
    for _ in 0..reps {
        let inst = instance(CountFamily::Poisson, 1000, &mut rng);
        let fit = fit_count_model(CountFamily::ComPoisson, &inst.design, &inst.y).unwrap();
        let k = fit.params().len() - 1;
        let s = fit.params()[k];
        let se = fit.covariance()[(k, k)].sqrt();
        inside += usize::from(s.abs() < 3.0 * se);
        assert!(matches!(fit.nuisance(), Some(Nuisance::Nu(_))));
    }
    assert!(inside >= 97, "{inside}/{reps}");
}

#[test]
fn constant_zero_model_fits() {
    let inst = instance(CountFamily::ZeroInflatedPoisson, 800, &mut substream(900, &[]));
    let options = FitOptions { zero_model: ZeroModel::Constant, ..FitOptions::default() };
    let fit = fit_count_model_with(CountFamily::ZeroInflatedPoisson, &inst.design, &inst.y, &options).unwrap();
    assert_eq!(fit.zero_coefficients().len(), 1);
    let lik = Likelihood::count(CountFamily::ZeroInflatedPoisson, ZeroModel::Constant, &inst.design, &inst.y).unwrap();
    assert!(max_abs(&lik.gradient(fit.params()).unwrap()) < 1e-6);
}

fn model(family: CountFamily, params: Vec<f64>) -> FittedModel {
    let k = params.len();
    FittedModel::count_from_parts(family, ZeroModel::Regressed, 2, params, Matrix::zeros(k, k)).unwrap()
}

#[test]
fn prediction_examples() {
    let m = model(CountFamily::Poisson, vec![2f64.ln(), 0.0]);
    assert!(matches!(m.predict_params(&[1.0, 37.0]).unwrap(), DistributionParams::Poisson(p) if (p.lambda() - 2.0).abs() < 1e-15));

    // s = ln(d − 1) = 0 gives d = 2.
    let m = model(CountFamily::NegBin, vec![0.0, 0.0, 0.0]);
    match m.predict_params(&[1.0, 0.0]).unwrap() {
        DistributionParams::NegBin(p) => assert!((p.mu() - 1.0).abs() < 1e-15 && (p.d() - 2.0).abs() < 1e-15),
        other => panic!("{other:?}"),
    }

    let logit = (0.1f64 / 0.9).ln();
    let m = model(CountFamily::ZeroInflatedPoisson, vec![2f64.ln(), 0.0, logit, 0.0]);
    match m.predict_params(&[1.0, 5.0]).unwrap() {
        DistributionParams::ZeroInflated(z) => {
            assert!((z.pi() - 0.1).abs() < 1e-15);
            assert!((z.mean() - 0.9 * 2.0).abs() < 1e-14);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn wald_interval_examples() {
    let m = model(CountFamily::Poisson, vec![0.3, -0.2]);
    let ci = confint(&m, 0.95).unwrap();
    assert_eq!(ci[0].lower, 0.3);
    assert_eq!(ci[0].upper, 0.3);

    let mut cov = Matrix::identity(2);
    cov[(1, 1)] = 4.0;
    let m = m.with_covariance(cov).unwrap();
    let ci = confint(&m, 0.95).unwrap();
    assert!((ci[0].upper - 0.3 - 1.959964).abs() < 1e-6);

    // z by bisection on the normal cdf
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < 0.975 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((ci[1].length() - 2.0 * lo * 2.0).abs() < 1e-9);
}

#[test]
fn poisson_analysis_recovers_beta() {
    let mut rng = substream(1000, &[]);
    let x: Vec<u64> = DistributionParams::Poisson(PoissonParams::new(2.0).unwrap()).sample(20_000, &mut rng).unwrap();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| DistributionParams::Poisson(PoissonParams::new((0.5 * v as f64).exp()).unwrap()).sample_one(&mut rng).unwrap() as f64)
        .collect();
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let fit = fit_analysis_model(AnalysisKind::Poisson, &DesignMatrix::intercept_and(&xf).unwrap(), &y).unwrap();
    assert!((fit.beta()[1] - 0.5).abs() < 4.0 * fit.std_errors()[1]);
}
