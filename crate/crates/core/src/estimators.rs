//! The three power estimators: the Stieltjes-transform estimator, the
//! classical large-ratio estimator and the moment (free-deconvolution)
//! estimator.
//!
//! Cluster-position convention: with separability holding, the noise cluster
//! occupies the lowest `N - n` positions of the ascending eigenvalue list
//! and the cluster of power `k` occupies the next `n_k` ascending positions,
//! in profile order; the same index positions select the `eta` and `mu`
//! roots, which interlace the eigenvalues.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::secular::EigenSample;
use crate::types::{NoiseLevel, SystemShape};

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Stieltjes,
    Classical,
    Moment,
}

impl Method {
    /// Stable lowercase name used in CSV output and CLI flags.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Stieltjes => "stieltjes",
            Method::Classical => "classical",
            Method::Moment => "moment",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stieltjes" => Ok(Method::Stieltjes),
            "classical" => Ok(Method::Classical),
            "moment" => Ok(Method::Moment),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Result of one estimation: per-power estimates aligned with ascending
/// profile order, plus diagnostics.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    pub method: Method,
    pub estimates: Vec<f64>,
    /// Estimated noise variance (classical method only).
    pub sigma2_hat: Option<f64>,
    /// The moment method hit non-real roots and reports real parts.
    pub complex_roots_encountered: bool,
    /// The method is only consistent under cluster separability.
    pub separability_assumed: bool,
}

/// Ascending index ranges of each power cluster under the top-of-spectrum
/// convention.
fn cluster_positions(
    num_eigs: usize,
    multiplicities: &[usize],
) -> Result<Vec<std::ops::Range<usize>>> {
    let n: usize = multiplicities.iter().sum();
    if multiplicities.is_empty() || multiplicities.iter().any(|&m| m == 0) {
        return Err(Error::Contract("multiplicities must be nonempty and positive".into()));
    }
    if n > num_eigs {
        return Err(Error::Contract(format!(
            "total multiplicity {n} exceeds the number of eigenvalues {num_eigs}; \
             the smallest powers cannot be estimated"
        )));
    }
    let mut start = num_eigs - n;
    let mut ranges = Vec::with_capacity(multiplicities.len());
    for &nk in multiplicities {
        ranges.push(start..start + nk);
        start += nk;
    }
    Ok(ranges)
}

/// Stieltjes-transform estimator. Blind to the noise variance.
pub fn estimate_stieltjes(sample: &EigenSample, multiplicities: &[usize]) -> Result<EstimateSet> {
    let n_sensors = sample.num_sensors();
    let n_samples = sample.num_samples();
    let ranges = cluster_positions(n_sensors, multiplicities)?;
    let n: usize = multiplicities.iter().sum();

    let estimates = if n_sensors != n_samples {
        // The cluster sums of the weight-1/M roots minus the weight-1/N
        // roots, scaled by NM/(n_k (M - N)); this orientation recovers +P_k
        // (check the rank-one spectrum: the top-root difference is
        // L (1/N - 1/M)).
        let etas = sample.etas();
        let mus = sample.mus();
        let coef = (n_sensors as f64) * (n_samples as f64)
            / (n_samples as f64 - n_sensors as f64);
        ranges
            .iter()
            .zip(multiplicities)
            .map(|(range, &nk)| {
                let s: f64 = range.clone().map(|i| mus[i] - etas[i]).sum();
                coef / nk as f64 * s
            })
            .collect()
    } else {
        if n == n_sensors {
            return Err(Error::Contract(
                "the M = N estimator needs N - n > 0".into(),
            ));
        }
        let etas = sample.etas();
        let lambdas = sample.lambdas();
        let coef = n_sensors as f64 / (n_sensors - n) as f64;
        ranges
            .iter()
            .zip(multiplicities)
            .map(|(range, &nk)| {
                let s: f64 = range
                    .clone()
                    .map(|i| {
                        let eta = etas[i];
                        let denom: f64 =
                            lambdas.iter().map(|&l| eta / ((l - eta) * (l - eta))).sum();
                        1.0 / denom
                    })
                    .sum();
                coef / nk as f64 * s
            })
            .collect()
    };

    Ok(EstimateSet {
        method: Method::Stieltjes,
        estimates,
        sigma2_hat: None,
        complex_roots_encountered: false,
        separability_assumed: true,
    })
}

/// Classical estimator: noise variance from the lowest `N - n` eigenvalues,
/// powers from the cluster means.
pub fn estimate_classical(sample: &EigenSample, multiplicities: &[usize]) -> Result<EstimateSet> {
    let n_sensors = sample.num_sensors();
    let n: usize = multiplicities.iter().sum();
    if n >= n_sensors {
        return Err(Error::Contract(
            "classical estimator needs n < N to estimate the noise variance".into(),
        ));
    }
    let ranges = cluster_positions(n_sensors, multiplicities)?;
    let lambdas = sample.lambdas();
    let noise_dim = n_sensors - n;
    let sigma2_hat = lambdas[..noise_dim].iter().sum::<f64>() / noise_dim as f64;
    let estimates = ranges
        .iter()
        .zip(multiplicities)
        .map(|(range, &nk)| {
            lambdas[range.clone()].iter().map(|&l| l - sigma2_hat).sum::<f64>() / nk as f64
        })
        .collect();
    Ok(EstimateSet {
        method: Method::Classical,
        estimates,
        sigma2_hat: Some(sigma2_hat),
        complex_roots_encountered: false,
        separability_assumed: true,
    })
}

/// Deconvolved moments of the power distribution from the spectral moments
/// of `B_N`: `(1/n) sum n_k P_k^j` for `j = 1..=depth`.
///
/// Derived by expanding the limiting fixed point at large `z`; the order-one
/// relation is `b_1 = sigma^2 + m_1/c_0`, and orders two and three follow the
/// triangular pattern below.
pub fn deconvolved_moments(
    spectral_moments: &[f64],
    sigma2: f64,
    c: f64,
    c0: f64,
    depth: usize,
) -> Vec<f64> {
    let b1 = spectral_moments[0];
    let mut m = Vec::with_capacity(depth);
    m.push(c0 * (b1 - sigma2));
    if depth >= 2 {
        let b2 = spectral_moments[1];
        m.push(c0 * (b2 - (1.0 + 1.0 / c) * b1 * b1));
    }
    if depth >= 3 {
        let b3 = spectral_moments[2];
        let m2 = m[1];
        m.push(
            c0 * (b3
                - 3.0 * (1.0 + 1.0 / c) * b1 * m2 / c0
                - (1.0 + 3.0 / c + 1.0 / (c * c)) * b1 * b1 * b1),
        );
    }
    m
}

/// Forward map used to cross-check the deconvolution: spectral moments of
/// the limit distribution from the power moments.
pub fn spectral_moments_from_power_moments(
    power_moments: &[f64],
    sigma2: f64,
    c: f64,
    c0: f64,
) -> Vec<f64> {
    let m1 = power_moments[0];
    let b1 = sigma2 + m1 / c0;
    let mut b = vec![b1];
    if power_moments.len() >= 2 {
        b.push((1.0 + 1.0 / c) * b1 * b1 + power_moments[1] / c0);
    }
    if power_moments.len() >= 3 {
        let b2 = b[1];
        b.push(
            (1.0 + 3.0 / c + 1.0 / (c * c)) * b1 * b1 * b1
                + 3.0 * (1.0 + 1.0 / c) * b1 * (power_moments[1] / c0)
                + power_moments[2] / c0,
        );
        let _ = b2;
    }
    b
}

/// Roots of the monic polynomial with elementary symmetric coefficients
/// `e`, via the companion matrix. Returns `(sorted real parts, any_complex)`.
fn monic_roots(e: &[f64]) -> (Vec<f64>, bool) {
    match e.len() {
        1 => (vec![e[0]], false),
        2 => {
            let disc = e[0] * e[0] - 4.0 * e[1];
            if disc >= 0.0 {
                let s = disc.sqrt();
                (vec![0.5 * (e[0] - s), 0.5 * (e[0] + s)], false)
            } else {
                (vec![0.5 * e[0], 0.5 * e[0]], true)
            }
        }
        3 => {
            let companion = DMatrix::from_row_slice(
                3,
                3,
                &[0.0, 0.0, e[2], 1.0, 0.0, -e[1], 0.0, 1.0, e[0]],
            );
            let roots: Vec<Complex64> =
                companion.complex_eigenvalues().iter().copied().collect();
            let any_complex = roots
                .iter()
                .any(|r| r.im.abs() > 1e-9 * (1.0 + r.re.abs()));
            let mut reals: Vec<f64> = roots.iter().map(|r| r.re).collect();
            reals.sort_by(f64::total_cmp);
            (reals, any_complex)
        }
        _ => unreachable!("guarded by the depth check"),
    }
}

/// Moment estimator. Needs the noise variance and the multiplicities; only
/// depths `K <= 3` are implemented.
pub fn estimate_moment(
    sample: &EigenSample,
    multiplicities: &[usize],
    noise: &NoiseLevel,
    shape: &SystemShape,
) -> Result<EstimateSet> {
    let k = multiplicities.len();
    if k == 0 {
        return Err(Error::Contract("multiplicities must be nonempty".into()));
    }
    if k > 3 {
        return Err(Error::Unsupported(format!(
            "moment estimator implemented for K <= 3, got K = {k}"
        )));
    }
    let n: usize = multiplicities.iter().sum();
    let n_sensors = sample.num_sensors();
    let n_samples = sample.num_samples();
    if shape.sensors() != n_sensors || shape.samples() != n_samples || shape.antennas() != n {
        return Err(Error::Contract(
            "shape disagrees with the sample dimensions or multiplicities".into(),
        ));
    }
    let lambdas = sample.lambdas();
    let spectral: Vec<f64> = (1..=k as i32)
        .map(|j| lambdas.iter().map(|l| l.powi(j)).sum::<f64>() / n_sensors as f64)
        .collect();
    let c = shape.sample_ratio();
    let c0 = shape.sensor_ratio();
    let m = deconvolved_moments(&spectral, noise.sigma2(), c, c0, k);

    let equal_mults = multiplicities.iter().all(|&nk| nk == multiplicities[0]);
    let (estimates, complex_flag) = if equal_mults {
        // Power sums of the K distinct powers, then Newton-Girard.
        let p: Vec<f64> = m.iter().map(|&mj| k as f64 * mj).collect();
        let mut e = vec![p[0]];
        if k >= 2 {
            e.push(0.5 * (e[0] * p[0] - p[1]));
        }
        if k >= 3 {
            e.push((e[1] * p[0] - e[0] * p[1] + p[2]) / 3.0);
        }
        monic_roots(&e)
    } else {
        weighted_moment_roots(&m, multiplicities, sample, n)?
    };

    Ok(EstimateSet {
        method: Method::Moment,
        estimates,
        sigma2_hat: None,
        complex_roots_encountered: complex_flag,
        separability_assumed: false,
    })
}

/// Solve `sum_k (n_k/n) P_k^j = m_j` for unequal multiplicities by damped
/// Newton iteration, seeded from the classical cluster means.
fn weighted_moment_roots(
    m: &[f64],
    multiplicities: &[usize],
    sample: &EigenSample,
    n: usize,
) -> Result<(Vec<f64>, bool)> {
    let k = multiplicities.len();
    let weights: Vec<f64> = multiplicities.iter().map(|&nk| nk as f64 / n as f64).collect();
    let init: Vec<f64> = match estimate_classical(sample, multiplicities) {
        Ok(est) => est.estimates.iter().map(|&p| p.max(1e-6)).collect(),
        Err(_) => vec![m[0].max(1e-6); k],
    };
    let mut p = DVector::from_vec(init.clone());
    let mut converged = false;
    for _ in 0..100 {
        let residual = DVector::from_fn(k, |j, _| {
            weights.iter().zip(p.iter()).map(|(&w, &pk)| w * pk.powi(j as i32 + 1)).sum::<f64>()
                - m[j]
        });
        if residual.amax() < 1e-12 * (1.0 + m[0].abs()) {
            converged = true;
            break;
        }
        let jac = DMatrix::from_fn(k, k, |j, col| {
            (j as f64 + 1.0) * weights[col] * p[col].powi(j as i32)
        });
        match jac.lu().solve(&residual) {
            Some(step) => {
                let mut scale = 1.0;
                // Keep iterates positive.
                for _ in 0..30 {
                    let cand = &p - scale * &step;
                    if cand.iter().all(|&v| v > 0.0) {
                        p = cand;
                        break;
                    }
                    scale *= 0.5;
                }
            }
            None => break,
        }
    }
    let mut estimates: Vec<f64> = p.iter().copied().collect();
    estimates.sort_by(f64::total_cmp);
    if converged {
        Ok((estimates, false))
    } else {
        let mut fallback = init;
        fallback.sort_by(f64::total_cmp);
        Ok((fallback, true))
    }
}
