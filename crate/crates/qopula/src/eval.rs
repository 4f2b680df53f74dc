//! Model evaluation: the two-dimensional two-sample Kolmogorov–Smirnov
//! test (Peacock's construction), KL-divergence reporting, and
//! marginal-uniformity diagnostics.
//!
//! The KS statistic maximizes, over every pooled data point as anchor and
//! all four quadrant orientations, the absolute difference between the two
//! samples' empirical quadrant probabilities. Points lying on an anchor's
//! axes count toward the "≤" quadrants for both samples. The maximization
//! runs as an x-sweep with two Fenwick trees over compressed y-ranks, so
//! one evaluation is O(N log N) instead of the naive O(N²); all quadrant
//! differences are kept as integer numerators over the common denominator
//! `n_a * n_b`, making the result exactly equal to a brute-force scan.
//!
//! Significance comes from a label-permutation test: replicate RNG streams
//! are derived from (seed, replicate index), so the p-value is identical
//! for a fixed seed no matter how replicates are scheduled.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Outcome of [`ks2d_test`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ks2dResult {
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Evaluation report serialized by the command-line pipeline.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub d_ks: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub permutations: usize,
}

struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0; len + 1],
        }
    }

    /// Adds one at 0-based position `i`.
    fn add(&mut self, i: usize) {
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += 1;
            j += j & j.wrapping_neg();
        }
    }

    /// Count of items at positions `<= i` (0-based, inclusive).
    fn prefix(&self, i: usize) -> i64 {
        let mut j = i + 1;
        let mut s = 0u32;
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s as i64
    }
}

/// Label-independent sweep structure shared by the observed statistic and
/// every permutation replicate.
struct PooledKs {
    n_a: i64,
    n_b: i64,
    /// Pooled indices sorted by x.
    order_x: Vec<u32>,
    /// Exclusive end offset in `order_x` of each equal-x group.
    group_ends: Vec<u32>,
    /// Compressed y-rank per pooled index; equal y values share a rank.
    y_rank: Vec<u32>,
    n_ranks: usize,
}

impl PooledKs {
    fn new(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::NotEnoughData {
                context: "ks2d",
                min: 1,
                got: 0,
            });
        }
        if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "ks2d" });
        }
        let xs: Vec<f64> = a.iter().chain(b).map(|p| p[0]).collect();
        let ys: Vec<f64> = a.iter().chain(b).map(|p| p[1]).collect();
        let n = xs.len();

        let mut order_x: Vec<u32> = (0..n as u32).collect();
        order_x.sort_by(|&i, &j| xs[i as usize].partial_cmp(&xs[j as usize]).unwrap());
        let mut group_ends = Vec::new();
        for w in 0..n {
            if w + 1 == n || xs[order_x[w + 1] as usize] != xs[order_x[w] as usize] {
                group_ends.push(w as u32 + 1);
            }
        }

        let mut sorted_y = ys.clone();
        sorted_y.sort_by(|p, q| p.partial_cmp(q).unwrap());
        sorted_y.dedup();
        let y_rank: Vec<u32> = ys
            .iter()
            .map(|y| sorted_y.partition_point(|v| v < y) as u32)
            .collect();

        Ok(PooledKs {
            n_a: a.len() as i64,
            n_b: b.len() as i64,
            order_x,
            group_ends,
            y_rank,
            n_ranks: sorted_y.len(),
        })
    }

    /// Maximum quadrant discrepancy as an integer numerator over the
    /// common denominator `n_a * n_b`. `is_a[i]` labels pooled index `i`.
    fn statistic_num(&self, is_a: &[bool]) -> i64 {
        let (n_a, n_b) = (self.n_a, self.n_b);

        // Whole-sample y-prefix counts: points with y-rank <= r per label.
        let mut y_pre_a = vec![0i64; self.n_ranks];
        let mut y_pre_b = vec![0i64; self.n_ranks];
        for (i, &r) in self.y_rank.iter().enumerate() {
            if is_a[i] {
                y_pre_a[r as usize] += 1;
            } else {
                y_pre_b[r as usize] += 1;
            }
        }
        for r in 1..self.n_ranks {
            y_pre_a[r] += y_pre_a[r - 1];
            y_pre_b[r] += y_pre_b[r - 1];
        }

        let mut fen_a = Fenwick::new(self.n_ranks);
        let mut fen_b = Fenwick::new(self.n_ranks);
        let mut ins_a = 0i64;
        let mut ins_b = 0i64;
        let mut best = 0i64;
        let mut start = 0usize;
        for &end in &self.group_ends {
            let group = &self.order_x[start..end as usize];
            // Insert the whole equal-x group before anchoring on it, so
            // "x <= anchor.x" includes ties.
            for &idx in group {
                let r = self.y_rank[idx as usize] as usize;
                if is_a[idx as usize] {
                    fen_a.add(r);
                    ins_a += 1;
                } else {
                    fen_b.add(r);
                    ins_b += 1;
                }
            }
            for &idx in group {
                let r = self.y_rank[idx as usize] as usize;
                // f, gx, gy are the (x<=, y<=), (x<=), (y<=) probability
                // differences; the four quadrant differences follow.
                let f = fen_a.prefix(r) * n_b - fen_b.prefix(r) * n_a;
                let gx = ins_a * n_b - ins_b * n_a;
                let gy = y_pre_a[r] * n_b - y_pre_b[r] * n_a;
                best = best
                    .max(f.abs())
                    .max((gx - f).abs())
                    .max((gy - f).abs())
                    .max((f - gx - gy).abs());
            }
            start = end as usize;
        }
        best
    }

    fn denominator(&self) -> f64 {
        (self.n_a * self.n_b) as f64
    }
}

/// Peacock's 2D two-sample KS statistic.
pub fn ks2d_statistic(sample_a: &[[f64; 2]], sample_b: &[[f64; 2]]) -> Result<f64> {
    let pooled = PooledKs::new(sample_a, sample_b)?;
    let mut is_a = vec![false; sample_a.len() + sample_b.len()];
    is_a[..sample_a.len()].fill(true);
    Ok(pooled.statistic_num(&is_a) as f64 / pooled.denominator())
}

/// Permutation version of the 2D KS test. The p-value is the add-one
/// smoothed fraction of label permutations whose statistic is at least the
/// observed one: `(count + 1) / (permutations + 1)`.
pub fn ks2d_test(
    sample_a: &[[f64; 2]],
    sample_b: &[[f64; 2]],
    permutations: usize,
    seed: u64,
) -> Result<Ks2dResult> {
    if permutations < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 permutations for a usable p-value, got {permutations}"
        )));
    }
    let pooled = PooledKs::new(sample_a, sample_b)?;
    let mut labels = vec![false; sample_a.len() + sample_b.len()];
    labels[..sample_a.len()].fill(true);
    let observed = pooled.statistic_num(&labels);

    // Replicates are embarrassingly parallel; stream i+1 of the seeded
    // ChaCha generator belongs to replicate i, so results do not depend on
    // scheduling.
    let exceed = (0..permutations)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let mut perm = labels.clone();
            perm.shuffle(&mut rng);
            u64::from(pooled.statistic_num(&perm) >= observed)
        })
        .sum::<u64>();

    Ok(Ks2dResult {
        statistic: observed as f64 / pooled.denominator(),
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

/// Which way a KL divergence between a model distribution `q` and a target
/// `p` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlDirection {
    /// `sum_i p_i ln(p_i / q_i)` with a clipped denominator.
    Forward,
    /// `sum_i q_i ln(q_i / p_i)` with a clipped denominator.
    Reverse,
}

/// KL divergence between two discrete distributions given as flat slices.
/// Zero-mass terms in the numerator distribution contribute zero; the
/// denominator is clipped at `clip` before the log.
pub fn kl_report(q: &[f64], p: &[f64], direction: KlDirection, clip: f64) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions have {} and {} cells",
            q.len(),
            p.len()
        )));
    }
    if !(clip > 0.0) {
        return Err(Error::InvalidConfig(format!("clip must be positive, got {clip}")));
    }
    if q.iter().chain(p).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite { context: "kl_report" });
    }
    let (num, den): (&[f64], &[f64]) = match direction {
        KlDirection::Forward => (p, q),
        KlDirection::Reverse => (q, p),
    };
    Ok(num
        .iter()
        .zip(den)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, d)| n * (n / d.max(clip)).ln())
        .sum())
}

/// Uniformity diagnostic for one or more variables.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalReport {
    /// Per-variable max |frequency - 1/B|.
    pub max_deviation: Vec<f64>,
    /// Statistical band width 1/sqrt(shots) around 1/B.
    pub band: f64,
    /// Variables whose deviation exceeds three bands.
    pub flagged: Vec<bool>,
}

impl MarginalReport {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|f| *f)
    }
}

/// Uniformity check on per-variable bin frequencies (or probabilities).
/// `shots` sets the 1/sqrt(N) band the deviations are compared against.
pub fn marginal_uniformity_from_probs(
    per_var_freqs: &[Vec<f64>],
    shots: usize,
) -> Result<MarginalReport> {
    if per_var_freqs.is_empty() || shots == 0 {
        return Err(Error::InvalidConfig(
            "need at least one variable and one shot".into(),
        ));
    }
    let bins = per_var_freqs[0].len();
    if bins < 2 || per_var_freqs.iter().any(|f| f.len() != bins) {
        return Err(Error::DimensionMismatch(
            "all variables need the same bin count >= 2".into(),
        ));
    }
    let target = 1.0 / bins as f64;
    let band = 1.0 / (shots as f64).sqrt();
    let max_deviation: Vec<f64> = per_var_freqs
        .iter()
        .map(|freqs| {
            freqs
                .iter()
                .map(|f| (f - target).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let flagged = max_deviation.iter().map(|d| *d > 3.0 * band).collect();
    Ok(MarginalReport {
        max_deviation,
        band,
        flagged,
    })
}

/// Histogram-based uniformity check on sampled points in `[0,1]^d`; the
/// band uses the sample size as the shot count.
pub fn marginal_uniformity_from_points(
    points: &[Vec<f64>],
    bins: usize,
) -> Result<MarginalReport> {
    if points.is_empty() {
        return Err(Error::NotEnoughData {
            context: "marginal_uniformity_from_points",
            min: 1,
            got: 0,
        });
    }
    let dims = points[0].len();
    if dims == 0 || points.iter().any(|p| p.len() != dims) {
        return Err(Error::DimensionMismatch(
            "points must share a positive dimension".into(),
        ));
    }
    if bins < 2 {
        return Err(Error::InvalidConfig("need at least 2 bins".into()));
    }
    let mut freqs = vec![vec![0.0; bins]; dims];
    for p in points {
        for (v, &u) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::OutOfDomain {
                    context: "marginal_uniformity_from_points",
                    value: u,
                    expected: "the unit interval [0, 1]",
                });
            }
            freqs[v][crate::copula::bin_index(u, bins)] += 1.0;
        }
    }
    let n = points.len() as f64;
    for f in &mut freqs {
        for c in f.iter_mut() {
            *c /= n;
        }
    }
    marginal_uniformity_from_probs(&freqs, points.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// Naive O(N^2) Peacock scan with the same tie rule, kept as the
    /// oracle the sweep implementation must match exactly.
    fn brute_force_ks2d(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let mut best_num = 0i64;
        let (n_a, n_b) = (a.len() as i64, b.len() as i64);
        for anchor in a.iter().chain(b) {
            let count = |s: &[[f64; 2]]| -> [i64; 4] {
                let mut c = [0i64; 4];
                for p in s {
                    let left = p[0] <= anchor[0];
                    let low = p[1] <= anchor[1];
                    c[match (left, low) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    }] += 1;
                }
                c
            };
            let ca = count(a);
            let cb = count(b);
            for q in 0..4 {
                best_num = best_num.max((ca[q] * n_b - cb[q] * n_a).abs());
            }
        }
        best_num as f64 / (n_a * n_b) as f64
    }

    fn uniform_points<R: Rng>(n: usize, rng: &mut R) -> Vec<[f64; 2]> {
        (0..n).map(|_| [rng.gen(), rng.gen()]).collect()
    }

    /// Points snapped to a coarse grid so ties in both coordinates are
    /// common.
    fn gridded_points<R: Rng>(n: usize, rng: &mut R) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                [
                    rng.gen_range(0..6) as f64 / 6.0,
                    rng.gen_range(0..6) as f64 / 6.0,
                ]
            })
            .collect()
    }

    #[test]
    fn identical_samples_have_zero_statistic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = uniform_points(25, &mut rng);
        assert_eq!(ks2d_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_reach_one() {
        let a: Vec<[f64; 2]> = (0..10).map(|i| [0.01 * i as f64, 0.01 * i as f64]).collect();
        let b: Vec<[f64; 2]> = (0..10).map(|i| [0.9 + 0.01 * i as f64, 0.95]).collect();
        assert_abs_diff_eq!(ks2d_statistic(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn statistic_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = gridded_points(17, &mut rng);
            let b = gridded_points(23, &mut rng);
            assert_eq!(
                ks2d_statistic(&a, &b).unwrap(),
                ks2d_statistic(&b, &a).unwrap()
            );
        }
    }

    #[test]
    fn statistic_invariant_under_point_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gridded_points(15, &mut rng);
        let b = gridded_points(12, &mut rng);
        let d = ks2d_statistic(&a, &b).unwrap();
        let mut a2 = a.clone();
        a2.reverse();
        let mut b2 = b.clone();
        b2.shuffle(&mut rng);
        assert_eq!(ks2d_statistic(&a2, &b2).unwrap(), d);
    }

    #[test]
    fn sweep_equals_brute_force_on_random_instances() {
        // 50 instances, N <= 20, half with heavy ties; equality is exact
        // because both sides compare integer numerators.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for inst in 0..50 {
            let na = rng.gen_range(1..=20);
            let nb = rng.gen_range(1..=20);
            let (a, b) = if inst % 2 == 0 {
                (uniform_points(na, &mut rng), uniform_points(nb, &mut rng))
            } else {
                (gridded_points(na, &mut rng), gridded_points(nb, &mut rng))
            };
            let fast = ks2d_statistic(&a, &b).unwrap();
            let slow = brute_force_ks2d(&a, &b);
            assert_eq!(fast, slow, "instance {inst}: sweep {fast} vs brute {slow}");
        }
    }

    #[test]
    fn ks2d_input_validation() {
        let a = [[0.1, 0.2]];
        assert!(ks2d_statistic(&a, &[]).is_err());
        assert!(ks2d_statistic(&[[f64::NAN, 0.0]], &a).is_err());
        assert!(ks2d_test(&a, &a, 99, 0).is_err());
    }

    #[test]
    fn identical_samples_give_p_value_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = uniform_points(30, &mut rng);
        let r = ks2d_test(&a, &a, 100, 7).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn test_is_deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = uniform_points(40, &mut rng);
        let b = uniform_points(35, &mut rng);
        let r1 = ks2d_test(&a, &b, 200, 11).unwrap();
        let r2 = ks2d_test(&a, &b, 200, 11).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn null_rejection_rate_is_calibrated() {
        // Two samples from the same uniform square: rejection at 0.05
        // should happen rarely, and p >= 0.05 in >= 90% of trials.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let trials = 100;
        let mut rejections = 0;
        for t in 0..trials {
            let a = uniform_points(40, &mut rng);
            let b = uniform_points(40, &mut rng);
            let r = ks2d_test(&a, &b, 150, 1000 + t).unwrap();
            if r.p_value < 0.05 {
                rejections += 1;
            }
        }
        assert!(
            rejections <= 10,
            "rejected {rejections}/{trials} null instances"
        );
    }

    #[test]
    fn distinct_distributions_are_detected() {
        // Uniform square vs a tight diagonal strip.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = uniform_points(200, &mut rng);
        let b: Vec<[f64; 2]> = (0..200)
            .map(|_| {
                let t: f64 = rng.gen();
                [t, (t + rng.gen::<f64>() * 0.05).min(1.0)]
            })
            .collect();
        let r = ks2d_test(&a, &b, 200, 3).unwrap();
        assert!(r.statistic > 0.3);
        assert!(r.p_value < 0.02);
    }

    #[test]
    fn kl_reference_values() {
        let p = [0.75, 0.25];
        let q = [0.5, 0.5];
        let forward = kl_report(&q, &p, KlDirection::Forward, 1e-6).unwrap();
        assert_abs_diff_eq!(forward, 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(forward, 0.13081, epsilon = 1e-5);
        // p = q gives zero in both directions.
        assert_eq!(kl_report(&q, &q, KlDirection::Forward, 1e-6).unwrap(), 0.0);
        assert_eq!(kl_report(&q, &q, KlDirection::Reverse, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn kl_is_asymmetric() {
        let p = [0.9, 0.1];
        let q = [0.5, 0.5];
        let f = kl_report(&q, &p, KlDirection::Forward, 1e-6).unwrap();
        let r = kl_report(&q, &p, KlDirection::Reverse, 1e-6).unwrap();
        assert!((f - r).abs() > 1e-3);
    }

    #[test]
    fn kl_clip_handles_empty_model_cells() {
        // Reverse KL with q mass on a cell where p = 0: the clip keeps the
        // value finite.
        let q = [1.0, 0.0];
        let p = [0.0, 1.0];
        let v = kl_report(&q, &p, KlDirection::Reverse, 1e-6).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 1e-6).ln(), epsilon = 1e-9);
    }

    #[test]
    fn kl_validation() {
        assert!(kl_report(&[0.5], &[0.5, 0.5], KlDirection::Forward, 1e-6).is_err());
        assert!(kl_report(&[0.5, 0.5], &[0.5, 0.5], KlDirection::Forward, 0.0).is_err());
        assert!(kl_report(&[-0.1, 1.1], &[0.5, 0.5], KlDirection::Forward, 1e-6).is_err());
    }

    #[test]
    fn uniform_probs_pass_the_band_check() {
        let report = marginal_uniformity_from_probs(&[vec![0.25; 4], vec![0.25; 4]], 500).unwrap();
        assert!(report.max_deviation.iter().all(|d| *d <= 1e-12));
        assert!(!report.any_flagged());
        assert_abs_diff_eq!(report.band, 1.0 / 500f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn concentrated_input_is_flagged() {
        let report =
            marginal_uniformity_from_probs(&[vec![1.0, 0.0, 0.0, 0.0]], 500).unwrap();
        assert!(report.flagged[0]);
        assert_abs_diff_eq!(report.max_deviation[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn point_histogram_matches_probs_route() {
        let points = vec![
            vec![0.1, 0.6],
            vec![0.3, 0.6],
            vec![0.6, 0.1],
            vec![0.9, 0.9],
        ];
        let by_points = marginal_uniformity_from_points(&points, 2).unwrap();
        let by_probs =
            marginal_uniformity_from_probs(&[vec![0.5, 0.5], vec![0.25, 0.75]], 4).unwrap();
        assert_eq!(by_points, by_probs);
    }

    #[test]
    fn marginal_input_validation() {
        assert!(marginal_uniformity_from_probs(&[], 10).is_err());
        assert!(marginal_uniformity_from_probs(&[vec![1.0]], 10).is_err());
        assert!(marginal_uniformity_from_points(&[vec![0.5, 1.4]], 4).is_err());
    }
}
