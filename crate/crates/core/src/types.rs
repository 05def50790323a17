//! Shared domain types: the population power profile, the system dimensions
//! and the noise level.

use crate::error::{Error, Result};

/// The diagonal of the population power matrix: distinct transmit powers in
/// ascending order together with their multiplicities (antennas per source).
///
/// Construction canonicalizes: powers are sorted ascending and exact
/// duplicates are merged by summing their multiplicities, since the limiting
/// spectrum depends only on the induced distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    powers: Vec<f64>,
    multiplicities: Vec<usize>,
}

impl PowerProfile {
    /// Build a profile from `(power, multiplicity)` data in any order.
    pub fn new(powers: &[f64], multiplicities: &[usize]) -> Result<Self> {
        if powers.len() != multiplicities.len() {
            return Err(Error::Contract(format!(
                "powers ({}) and multiplicities ({}) must have equal length",
                powers.len(),
                multiplicities.len()
            )));
        }
        for &p in powers {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Contract(format!("powers must be finite and > 0, got {p}")));
            }
        }
        for &m in multiplicities {
            if m == 0 {
                return Err(Error::Contract("multiplicities must be >= 1".into()));
            }
        }
        let mut pairs: Vec<(f64, usize)> =
            powers.iter().copied().zip(multiplicities.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, usize)> = Vec::with_capacity(pairs.len());
        for (p, m) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += m,
                _ => merged.push((p, m)),
            }
        }
        Ok(Self {
            powers: merged.iter().map(|&(p, _)| p).collect(),
            multiplicities: merged.iter().map(|&(_, m)| m).collect(),
        })
    }

    /// The noise-only profile (no transmitting source).
    pub fn empty() -> Self {
        Self { powers: Vec::new(), multiplicities: Vec::new() }
    }

    /// Distinct powers, ascending.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    /// Multiplicity of each distinct power.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Number of distinct powers.
    pub fn num_powers(&self) -> usize {
        self.powers.len()
    }

    /// Total number of transmit antennas.
    pub fn total_antennas(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// `j`-th moment of the power distribution, `(1/n) * sum_k n_k P_k^j`.
    pub fn moment(&self, j: u32) -> f64 {
        let n = self.total_antennas();
        if n == 0 {
            return 0.0;
        }
        self.powers
            .iter()
            .zip(&self.multiplicities)
            .map(|(&p, &m)| m as f64 * p.powi(j as i32))
            .sum::<f64>()
            / n as f64
    }

    /// Profile with every power scaled by `t > 0`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            powers: self.powers.iter().map(|p| p * t).collect(),
            multiplicities: self.multiplicities.clone(),
        }
    }
}

/// System dimensions: `N` sensors, `M` samples, `n` total transmit antennas,
/// with the derived ratios `c = M/N`, `c_0 = N/n` and `c_k = N/n_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemShape {
    sensors: usize,
    samples: usize,
    antennas: usize,
}

impl SystemShape {
    /// Build a shape. `antennas` may be zero for noise-only scenarios.
    pub fn new(sensors: usize, samples: usize, antennas: usize) -> Result<Self> {
        if sensors == 0 || samples == 0 {
            return Err(Error::Contract("N and M must be >= 1".into()));
        }
        Ok(Self { sensors, samples, antennas })
    }

    /// Number of sensors `N`.
    pub fn sensors(&self) -> usize {
        self.sensors
    }

    /// Number of samples `M`.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Total transmit antennas `n`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Sample ratio `c = M/N`.
    pub fn sample_ratio(&self) -> f64 {
        self.samples as f64 / self.sensors as f64
    }

    /// Sensor ratio `c_0 = N/n`; infinite for noise-only shapes.
    pub fn sensor_ratio(&self) -> f64 {
        if self.antennas == 0 {
            f64::INFINITY
        } else {
            self.sensors as f64 / self.antennas as f64
        }
    }

    /// Per-power ratios `c_k = N/n_k`, checking that the profile accounts for
    /// every transmit antenna of the shape.
    pub fn power_ratios(&self, profile: &PowerProfile) -> Result<Vec<f64>> {
        if profile.total_antennas() != self.antennas {
            return Err(Error::Contract(format!(
                "profile has {} antennas but shape expects {}",
                profile.total_antennas(),
                self.antennas
            )));
        }
        Ok(profile
            .multiplicities()
            .iter()
            .map(|&nk| self.sensors as f64 / nk as f64)
            .collect())
    }
}

/// Additive noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel {
    sigma2: f64,
}

impl NoiseLevel {
    /// Noise variance `sigma^2 >= 0`.
    pub fn new(sigma2: f64) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(Error::Contract(format!("sigma2 must be finite and >= 0, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }

    /// Noise variance from an SNR in dB, using `SNR = 1/sigma^2`.
    pub fn from_snr_db(snr_db: f64) -> Self {
        Self { sigma2: 10f64.powf(-snr_db / 10.0) }
    }

    /// The variance `sigma^2`.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}
