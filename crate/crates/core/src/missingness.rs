//! MCAR and MAR amputation of the count covariate.

use alloc::vec::Vec;

use libm::round;
use rand::seq::index::sample;
use rand::Rng;

use crate::regression::AnalysisKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResponseKind {
    Binary,
    Continuous,
    Discrete,
}

impl ResponseKind {
    /// The analysis model fitted to this kind of response.
    pub fn analysis_kind(self) -> AnalysisKind {
        match self {
            ResponseKind::Binary => AnalysisKind::Logistic,
            ResponseKind::Continuous => AnalysisKind::Linear,
            ResponseKind::Discrete => AnalysisKind::Poisson,
        }
    }
}

/// Response `y` and count covariate `x` with an observation mask.
///
/// The value behind a masked cell is kept (when known) so simulations can
/// compare imputations with the truth, but it is only reachable through
/// [`Dataset::hidden_x`]; fitting code uses [`Dataset::observed_x`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    kind: ResponseKind,
    y: Vec<f64>,
    truth: Vec<Option<u64>>,
    mask: Vec<bool>,
}

impl Dataset {
    pub fn complete(kind: ResponseKind, y: Vec<f64>, x: Vec<u64>) -> Result<Self> {
        Self::with_missing(kind, y, x.into_iter().map(Some).collect())
    }

    /// `None` cells are missing.
    pub fn with_missing(kind: ResponseKind, y: Vec<f64>, x: Vec<Option<u64>>) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::Dimension { expected: y.len(), found: x.len() });
        }
        let mask = x.iter().map(Option::is_some).collect();
        Ok(Dataset { kind, y, truth: x, mask })
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `true` where `x` is observed.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn observed_x(&self, i: usize) -> Option<u64> {
        if self.mask[i] {
            self.truth[i]
        } else {
            None
        }
    }

    /// True covariate value regardless of the mask (simulation oracles only).
    pub fn hidden_x(&self, i: usize) -> Option<u64> {
        self.truth[i]
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn observed_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub fn missing_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| !m).map(|(i, _)| i)
    }

    /// Rows `indices` (in that order) as a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            kind: self.kind,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            truth: indices.iter().map(|&i| self.truth[i]).collect(),
            mask: indices.iter().map(|&i| self.mask[i]).collect(),
        }
    }

    fn hide(&self, rows: impl IntoIterator<Item = usize>) -> Dataset {
        let mut out = self.clone();
        for i in rows {
            out.mask[i] = false;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Mcar,
    Mar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingSpec {
    mechanism: Mechanism,
    fraction: f64,
}

impl MissingSpec {
    pub fn new(mechanism: Mechanism, fraction: f64) -> Result<Self> {
        check_fraction(fraction)?;
        Ok(MissingSpec { mechanism, fraction })
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!("missing fraction must be in (0, 1), got {fraction}")))
    }
}

/// `round(fraction · n)`.
pub fn deletion_count(fraction: f64, n: usize) -> usize {
    round(fraction * n as f64) as usize
}

pub fn ampute<R: Rng + ?Sized>(data: &Dataset, spec: &MissingSpec, rng: &mut R) -> Result<Dataset> {
    match spec.mechanism {
        Mechanism::Mcar => ampute_mcar(data, spec.fraction, rng),
        Mechanism::Mar => ampute_mar(data, spec.fraction, rng),
    }
}

/// Hides `round(fraction · n)` covariate cells chosen uniformly without
/// replacement.
pub fn ampute_mcar<R: Rng + ?Sized>(data: &Dataset, fraction: f64, rng: &mut R) -> Result<Dataset> {
    check_fraction(fraction)?;
    if !data.is_complete() {
        return Err(Error::Incomplete);
    }
    let k = deletion_count(fraction, data.len());
    Ok(data.hide(sample(rng, data.len(), k)))
}

/// Splits rows into a low stratum (`y = 0`, or `y` below the sample mean)
/// and a high stratum (`y = 1`, or `y` at/above the mean) and draws
/// `ceil(0.8 k)` deletions from the low stratum and the rest from the high
/// one. For a discrete response, rows exactly at the mean count as low. A
/// stratum that runs out passes its remaining quota to the other stratum.
pub fn ampute_mar<R: Rng + ?Sized>(data: &Dataset, fraction: f64, rng: &mut R) -> Result<Dataset> {
    check_fraction(fraction)?;
    if !data.is_complete() {
        return Err(Error::Incomplete);
    }
    let (low, high) = mar_strata(data);
    if low.is_empty() {
        return Err(Error::EmptyStratum("low"));
    }
    if high.is_empty() {
        return Err(Error::EmptyStratum("high"));
    }
    let k = deletion_count(fraction, data.len());
    let (take_low, take_high) = mar_split(k, low.len(), high.len());
    let chosen_low = sample(rng, low.len(), take_low).into_iter().map(|i| low[i]);
    let chosen_high: Vec<usize> = sample(rng, high.len(), take_high).into_iter().map(|i| high[i]).collect();
    Ok(data.hide(chosen_low.chain(chosen_high)))
}

/// Row indices of the low and high MAR strata.
pub fn mar_strata(data: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let y = data.y();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let is_low = |v: f64| match data.kind() {
        ResponseKind::Binary => v == 0.0,
        ResponseKind::Continuous => v < mean,
        ResponseKind::Discrete => v <= mean,
    };
    (0..y.len()).partition(|&i| is_low(y[i]))
}

/// Deletions per stratum for `k` total: `ceil(4k/5)` low, the rest high,
/// with overflow spilling into the other stratum.
pub fn mar_split(k: usize, n_low: usize, n_high: usize) -> (usize, usize) {
    let mut low = (4 * k).div_ceil(5);
    let mut high = k - low;
    if low > n_low {
        high += low - n_low;
        low = n_low;
    }
    if high > n_high {
        low = (low + high - n_high).min(n_low);
        high = n_high;
    }
    (low, high)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn continuous(n: usize) -> Dataset {
        let y = (0..n).map(|i| i as f64).collect();
        let x = (0..n as u64).map(|i| i % 5).collect();
        Dataset::complete(ResponseKind::Continuous, y, x).unwrap()
    }

    #[test]
    fn mcar_deletes_exact_count() {
        let data = continuous(2000);
        let out = ampute_mcar(&data, 0.30, &mut substream(1, &[])).unwrap();
        assert_eq!(out.missing_count(), 600);
        assert_eq!(out.y(), data.y());
        let out = ampute_mcar(&data, 1.0 / 2000.0, &mut substream(2, &[])).unwrap();
        assert_eq!(out.missing_count(), 1);
    }

    #[test]
    fn fraction_domain() {
        let data = continuous(10);
        assert!(ampute_mcar(&data, 0.0, &mut substream(1, &[])).is_err());
        assert!(ampute_mar(&data, 1.0, &mut substream(1, &[])).is_err());
        assert!(MissingSpec::new(Mechanism::Mar, 1.5).is_err());
    }

    #[test]
    fn mar_split_rules() {
        assert_eq!(mar_split(200, 1000, 1000), (160, 40));
        assert_eq!(mar_split(5, 10, 10), (4, 1));
        assert_eq!(mar_split(10, 3, 20), (3, 7));
        assert_eq!(mar_split(10, 20, 1), (9, 1));
    }

    #[test]
    fn mar_counts_per_stratum() {
        let data = continuous(2000);
        let out = ampute_mar(&data, 0.10, &mut substream(3, &[])).unwrap();
        let mean = data.y().iter().sum::<f64>() / 2000.0;
        let low = out.missing_rows().filter(|&i| data.y()[i] < mean).count();
        let high = out.missing_rows().filter(|&i| data.y()[i] >= mean).count();
        assert_eq!((low, high), (160, 40));
    }

    #[test]
    fn mar_binary_needs_both_strata() {
        let data = Dataset::complete(ResponseKind::Binary, alloc::vec![0.0; 10], alloc::vec![1; 10]).unwrap();
        assert_eq!(ampute_mar(&data, 0.2, &mut substream(1, &[])).unwrap_err(), Error::EmptyStratum("high"));
    }

    #[test]
    fn discrete_ties_go_low() {
        let y = alloc::vec![1.0, 1.0, 1.0, 1.0];
        let data = Dataset::complete(ResponseKind::Discrete, y, alloc::vec![0; 4]).unwrap();
        let (low, high) = mar_strata(&data);
        assert_eq!(low.len(), 4);
        assert!(high.is_empty());
    }

    #[test]
    fn amputation_requires_complete_data() {
        let data = Dataset::with_missing(ResponseKind::Continuous, alloc::vec![1.0, 2.0], alloc::vec![Some(1), None]).unwrap();
        assert_eq!(ampute_mcar(&data, 0.5, &mut substream(1, &[])).unwrap_err(), Error::Incomplete);
    }
}
