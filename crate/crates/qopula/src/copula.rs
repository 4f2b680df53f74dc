//! Copula-space plumbing: daily returns, the probability integral
//! transform (PIT) and its empirical inverse, and 2D histogram
//! distributions on a regular grid over the unit square.
//!
//! The PIT uses average ranks for ties and divides by `N + 1` so
//! transformed values stay strictly inside (0, 1). The inverse transform
//! interpolates between order statistics at position `u * (N + 1)` and
//! clamps to the observed data range, which makes
//! `inverse_pit(pit(x)) = x` exact for distinct samples.

use crate::{Error, Result};

/// Simple returns between consecutive prices: `(P_{t+1} - P_t) / P_t`.
pub fn daily_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::NotEnoughData {
            context: "daily_returns",
            min: 2,
            got: prices.len(),
        });
    }
    if let Some(i) = prices.iter().position(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::NonPositivePrice(i));
    }
    Ok(prices.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect())
}

/// Maps each value to its average rank divided by `N + 1`, giving
/// pseudo-uniform observations strictly inside (0, 1).
pub fn pit_transform(data: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::NotEnoughData {
            context: "pit_transform",
            min: 1,
            got: 0,
        });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "pit_transform",
        });
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| data[i].partial_cmp(&data[j]).unwrap());

    let mut u = vec![0.0; n];
    let denom = (n + 1) as f64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && data[order[end]] == data[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share the average rank.
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            u[idx] = avg_rank / denom;
        }
        start = end;
    }
    Ok(u)
}

/// Empirical marginal distribution stored as sorted order statistics.
#[derive(Clone, Debug)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_sample(data: &[f64]) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::NotEnoughData {
                context: "EmpiricalCdf::from_sample",
                min: 2,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "EmpiricalCdf::from_sample",
            });
        }
        let mut sorted = data.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalCdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }
}

/// Maps `u` in (0, 1) back to data space by linear interpolation between
/// order statistics at position `u * (N + 1)`, clamped to the sample range.
pub fn inverse_pit(u: f64, cdf: &EmpiricalCdf) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::OutOfDomain {
            context: "inverse_pit",
            value: u,
            expected: "the open interval (0, 1)",
        });
    }
    let n = cdf.sorted.len();
    let pos = u * (n + 1) as f64; // 1-based fractional order-statistic index
    if pos <= 1.0 {
        return Ok(cdf.min());
    }
    if pos >= n as f64 {
        return Ok(cdf.max());
    }
    let lo = pos.floor() as usize; // 1-based
    let frac = pos - lo as f64;
    let x0 = cdf.sorted[lo - 1];
    let x1 = cdf.sorted[lo];
    Ok(x0 + frac * (x1 - x0))
}

/// A probability distribution on a `bins x bins` grid over the unit
/// square, stored row-major: `probs[i * bins + j]` is the cell with the
/// first coordinate in bin `i` and the second in bin `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDistribution {
    bins: usize,
    probs: Vec<f64>,
}

impl GridDistribution {
    /// Validates an explicit probability table (must sum to 1).
    pub fn from_probs(bins: usize, probs: Vec<f64>) -> Result<Self> {
        if bins == 0 || probs.len() != bins * bins {
            return Err(Error::DimensionMismatch(format!(
                "grid of {bins} bins needs {} probabilities, got {}",
                bins * bins,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite {
                context: "GridDistribution::from_probs",
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfDomain {
                context: "GridDistribution::from_probs",
                value: total,
                expected: "a probability total of 1",
            });
        }
        Ok(GridDistribution { bins, probs })
    }

    /// The uniform distribution on the grid.
    pub fn uniform(bins: usize) -> Self {
        let cells = bins * bins;
        GridDistribution {
            bins,
            probs: vec![1.0 / cells as f64; cells],
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.bins + j]
    }

    /// Marginal over the first coordinate (sums each row).
    pub fn row_marginal(&self) -> Vec<f64> {
        (0..self.bins)
            .map(|i| self.probs[i * self.bins..(i + 1) * self.bins].iter().sum())
            .collect()
    }

    /// Marginal over the second coordinate (sums each column).
    pub fn col_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.bins];
        for i in 0..self.bins {
            for j in 0..self.bins {
                m[j] += self.probs[i * self.bins + j];
            }
        }
        m
    }
}

/// Index of the bin containing `u` on a `bins`-cell grid over [0, 1];
/// the right edge `u = 1` belongs to the last bin.
#[inline]
pub fn bin_index(u: f64, bins: usize) -> usize {
    ((u * bins as f64) as usize).min(bins - 1)
}

/// Histograms points from the unit square into a `bins x bins`
/// [`GridDistribution`] of relative frequencies.
pub fn bin_2d(points: &[[f64; 2]], bins: usize) -> Result<GridDistribution> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bin count must be at least 1".into()));
    }
    if points.is_empty() {
        return Err(Error::NotEnoughData {
            context: "bin_2d",
            min: 1,
            got: 0,
        });
    }
    let mut counts = vec![0u64; bins * bins];
    for p in points {
        for &u in p {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::OutOfDomain {
                    context: "bin_2d",
                    value: u,
                    expected: "the unit interval [0, 1]",
                });
            }
        }
        counts[bin_index(p[0], bins) * bins + bin_index(p[1], bins)] += 1;
    }
    let total = points.len() as f64;
    Ok(GridDistribution {
        bins,
        probs: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}
