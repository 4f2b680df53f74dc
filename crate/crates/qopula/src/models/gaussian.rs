//! Parametric baseline: a bivariate Gaussian copula fitted by the Pearson
//! correlation of normal scores, sampled through a Cholesky factor.
//!
//! The normal CDF uses a power series in the bulk and a Mills-ratio
//! continued fraction in the far tails; the quantile starts from Acklam's
//! rational approximation and takes one Halley step against the CDF,
//! which brings the absolute error well under 1e-8.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF. Power series `0.5 + phi(x)·Σ x^(2k+1)/(2k+1)!!`
/// for |x| <= 6, continued fraction for the tail beyond.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax <= 6.0 {
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1.0) {
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
        }
        0.5 + phi(x) * sum
    } else {
        // Upper-tail Q(ax) = phi(ax) / (ax + 1/(ax + 2/(ax + 3/(...)))).
        let mut f = 0.0;
        for n in (1..=60).rev() {
            f = n as f64 / (ax + f);
        }
        let q = phi(ax) / (ax + f);
        if x > 0.0 {
            1.0 - q
        } else {
            q
        }
    }
}

/// Acklam's rational approximation to the standard normal quantile;
/// relative error below 1.2e-9 on its own.
fn quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal quantile Φ⁻¹(p) for p strictly inside (0, 1).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfDomain {
            context: "normal_quantile",
            value: p,
            expected: "a probability strictly inside (0, 1)",
        });
    }
    let mut x = quantile_seed(p);
    // One Halley step against the accurate CDF. Guard the density
    // reciprocal against overflow in the extreme tail, where the seed is
    // already as good as f64 resolution allows.
    if 0.5 * x * x < 700.0 {
        let e = normal_cdf(x) - p;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// A bivariate Gaussian copula, parameterized by the correlation of the
/// underlying normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianCopulaModel {
    rho: f64,
}

impl GaussianCopulaModel {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho.abs() < 1.0) {
            return Err(Error::OutOfDomain {
                context: "GaussianCopulaModel",
                value: rho,
                expected: "a correlation strictly inside (-1, 1)",
            });
        }
        Ok(GaussianCopulaModel { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Fits the copula by the Pearson correlation of the normal scores
/// Φ⁻¹(u), clamped into (-0.999, 0.999).
pub fn fit_gaussian_copula(points: &[[f64; 2]]) -> Result<GaussianCopulaModel> {
    if points.len() < 10 {
        return Err(Error::NotEnoughData {
            context: "fit_gaussian_copula",
            min: 10,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mut z = Vec::with_capacity(points.len());
    for p in points {
        z.push([normal_quantile(p[0])?, normal_quantile(p[1])?]);
    }
    let mean = z.iter().fold([0.0, 0.0], |acc, p| {
        [acc[0] + p[0] / n, acc[1] + p[1] / n]
    });
    let mut cov = 0.0;
    let mut var = [0.0, 0.0];
    for p in &z {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        cov += d[0] * d[1];
        var[0] += d[0] * d[0];
        var[1] += d[1] * d[1];
    }
    if var[0] <= 0.0 || var[1] <= 0.0 {
        return Err(Error::DegenerateData(
            "normal scores have zero variance in at least one coordinate".into(),
        ));
    }
    let rho = (cov / (var[0] * var[1]).sqrt()).clamp(-0.999, 0.999);
    GaussianCopulaModel::new(rho)
}

/// Box–Muller pair of independent standard normals.
fn standard_normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    // 1 - gen() lies in (0, 1], keeping the log finite.
    let r = (-2.0 * (1.0 - rng.gen::<f64>()).ln()).sqrt();
    let angle = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
    (r * angle.cos(), r * angle.sin())
}

/// Draws `count` copula-space points: correlated normals through the
/// Cholesky factor of [[1, rho], [rho, 1]], mapped through Φ.
pub fn sample_gaussian_copula(
    model: &GaussianCopulaModel,
    count: usize,
    seed: u64,
) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = (1.0 - model.rho * model.rho).sqrt();
    (0..count)
        .map(|_| {
            let (g1, g2) = standard_normal_pair(&mut rng);
            let z2 = model.rho * g1 + tail * g2;
            [
                normal_cdf(g1).clamp(1e-15, 1.0 - 1e-15),
                normal_cdf(z2).clamp(1e-15, 1.0 - 1e-15),
            ]
        })
        .collect()
}
