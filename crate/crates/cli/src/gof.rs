//! Binned chi-square goodness of fit between two count samples.

use countimpute_core::special::chi_square_sf;

use crate::error::DataError;

/// Smallest expected count allowed in a bin.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Lower edge of each merged bin; the last bin is open above.
    pub bin_edges: Vec<u64>,
}

/// Tests whether `observed` follows the distribution of `reference`.
///
/// Values are tabulated on the integers, expected counts are the reference
/// frequencies scaled to the size of `observed`, and adjacent cells are
/// merged left to right until each holds an expected count of at least
/// [`MIN_EXPECTED`] (an underfilled top cell is folded into its left
/// neighbour).
pub fn chi_square_gof(observed: &[u64], reference: &[u64]) -> Result<GofResult, DataError> {
    if observed.is_empty() || reference.is_empty() {
        return Err(DataError::InsufficientSupport(0));
    }
    let top = observed.iter().chain(reference).copied().max().unwrap_or(0) as usize;
    let mut obs = vec![0.0; top + 1];
    let mut refc = vec![0.0; top + 1];
    for &v in observed {
        obs[v as usize] += 1.0;
    }
    for &v in reference {
        refc[v as usize] += 1.0;
    }
    let scale = observed.len() as f64 / reference.len() as f64;

    let mut bins: Vec<(u64, f64, f64)> = Vec::new();
    let mut open: Option<(u64, f64, f64)> = None;
    for k in 0..=top {
        let (start, o, e) = open.unwrap_or((k as u64, 0.0, 0.0));
        let cell = (start, o + obs[k], e + refc[k] * scale);
        if cell.2 >= MIN_EXPECTED {
            bins.push(cell);
            open = None;
        } else {
            open = Some(cell);
        }
    }
    if let Some((start, o, e)) = open {
        match bins.last_mut() {
            Some(last) => {
                last.1 += o;
                last.2 += e;
            }
            None => bins.push((start, o, e)),
        }
    }
    if bins.len() < 2 {
        return Err(DataError::InsufficientSupport(bins.len()));
    }
    let statistic: f64 = bins.iter().map(|&(_, o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len() - 1;
    Ok(GofResult {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df as f64).clamp(0.0, 1.0),
        bin_edges: bins.iter().map(|b| b.0).collect(),
    })
}
