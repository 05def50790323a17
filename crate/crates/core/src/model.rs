//! Synthetic received-signal generation: `Y = H P^(1/2) X + sigma W` with
//! reproducible per-matrix random streams, and the eigenvalues of
//! `B_N = (1/M) Y Y^H`.
//!
//! Randomness discipline: every matrix draws from its own ChaCha8 stream
//! keyed by `(seed, tag)` through a splitmix64 chain, so the channel, signal
//! and noise streams are independent, trials are independent, and results do
//! not depend on thread count.

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::secular::EigenSample;
use crate::types::{NoiseLevel, PowerProfile, SystemShape};

/// Guard against runaway allocations: largest N*M (and N*N) element count.
const MAX_ELEMENTS: usize = 200_000_000;

/// Stream tag for the channel matrix `H`.
const TAG_CHANNEL: u64 = 0x48;
/// Stream tag for the signal matrix `X`.
const TAG_SIGNAL: u64 = 0x58;
/// Stream tag for the noise matrix `W`.
const TAG_NOISE: u64 = 0x57;

/// Magic bytes of the raw-matrix export format.
pub const RAW_MAGIC: [u8; 8] = *b"EPRAW001";

/// Transmitted symbol constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    /// Unit-variance QPSK: entries uniform over `{+-1 +- i}/sqrt(2)`.
    Qpsk,
    /// Circularly-symmetric complex Gaussian with unit variance.
    GaussianComplex,
}

/// Everything that determines one synthetic draw, including the seed.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub profile: PowerProfile,
    pub shape: SystemShape,
    pub noise: NoiseLevel,
    pub constellation: Constellation,
    pub seed: u64,
}

impl ScenarioSpec {
    fn validate(&self) -> Result<()> {
        if self.profile.total_antennas() != self.shape.antennas() {
            return Err(Error::Contract(format!(
                "profile antennas ({}) disagree with shape ({})",
                self.profile.total_antennas(),
                self.shape.antennas()
            )));
        }
        let n = self.shape.sensors();
        let m = self.shape.samples();
        if n.saturating_mul(m) > MAX_ELEMENTS || n.saturating_mul(n) > MAX_ELEMENTS {
            return Err(Error::Resource(format!(
                "draw of {n} x {m} exceeds the element cap {MAX_ELEMENTS}"
            )));
        }
        Ok(())
    }

    /// Copy of the spec with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.seed = seed;
        s
    }
}

/// The raw received matrix in row-major order, kept for export or
/// cross-implementation comparison.
#[derive(Debug, Clone)]
pub struct RawMatrix {
    sensors: usize,
    samples: usize,
    data: Vec<Complex64>,
}

impl RawMatrix {
    /// Sensor dimension `N`.
    pub fn sensors(&self) -> usize {
        self.sensors
    }

    /// Sample dimension `M`.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.samples + j]
    }

    /// Squared Frobenius norm.
    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Write the documented little-endian binary layout: magic, `N` and `M`
    /// as u64, then row-major interleaved real/imaginary f64 pairs.
    pub fn write_to(&self, w: &mut impl std::io::Write) -> Result<()> {
        w.write_all(&RAW_MAGIC)?;
        w.write_all(&(self.sensors as u64).to_le_bytes())?;
        w.write_all(&(self.samples as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read the layout written by [`RawMatrix::write_to`].
    pub fn read_from(r: &mut impl std::io::Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != RAW_MAGIC {
            return Err(Error::Config("raw matrix file has wrong magic bytes".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let sensors = u64::from_le_bytes(buf) as usize;
        r.read_exact(&mut buf)?;
        let samples = u64::from_le_bytes(buf) as usize;
        if sensors.saturating_mul(samples) > MAX_ELEMENTS {
            return Err(Error::Resource("raw matrix file exceeds the element cap".into()));
        }
        let mut data = Vec::with_capacity(sensors * samples);
        for _ in 0..sensors * samples {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            data.push(Complex64::new(re, im));
        }
        Ok(RawMatrix { sensors, samples, data })
    }
}

/// One realized draw: the ascending eigenvalues of `B_N`, and the raw data
/// matrix when requested.
#[derive(Debug, Clone)]
pub struct SampleDraw {
    pub eigenvalues: Vec<f64>,
    pub raw: Option<RawMatrix>,
}

impl SampleDraw {
    /// Wrap the eigenvalues into an [`EigenSample`] (computes the estimator
    /// root sets).
    pub fn eigen_sample(&self, num_samples: usize) -> Result<EigenSample> {
        EigenSample::new(self.eigenvalues.clone(), num_samples)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit stream key for `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut state = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

fn stream_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut state = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Column-major standard-normal matrix scaled by `scale` per component.
fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        re.push(a * scale);
        im.push(b * scale);
    }
    (re, im)
}

fn qpsk_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut re = Vec::with_capacity(rows * cols);
    let mut im = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let bits = rng.next_u32();
        re.push(if bits & 1 == 0 { amp } else { -amp });
        im.push(if bits & 2 == 0 { amp } else { -amp });
    }
    (re, im)
}

/// Draw the scenario and return the ascending eigenvalues of `B_N`.
pub fn draw(spec: &ScenarioSpec) -> Result<SampleDraw> {
    draw_impl(spec, false)
}

/// Like [`draw`], additionally retaining the raw received matrix.
pub fn draw_with_raw(spec: &ScenarioSpec) -> Result<SampleDraw> {
    draw_impl(spec, true)
}

fn draw_impl(spec: &ScenarioSpec, retain_raw: bool) -> Result<SampleDraw> {
    spec.validate()?;
    let n_sensors = spec.shape.sensors();
    let n_samples = spec.shape.samples();
    let n_antennas = spec.shape.antennas();
    let sigma = spec.noise.sigma2().sqrt();

    // Noise term, scaled to unit complex variance per entry.
    let comp = std::f64::consts::FRAC_1_SQRT_2;
    let mut rng_w = stream_rng(spec.seed, TAG_NOISE);
    let (mut y_re, mut y_im) = gaussian_matrix(&mut rng_w, n_sensors, n_samples, comp * sigma);

    if n_antennas > 0 {
        // Channel with entries of variance 1/N.
        let mut rng_h = stream_rng(spec.seed, TAG_CHANNEL);
        let h_scale = (0.5 / n_sensors as f64).sqrt();
        let (h_re, h_im) = gaussian_matrix(&mut rng_h, n_sensors, n_antennas, h_scale);
        let h_re = DMatrix::from_vec(n_sensors, n_antennas, h_re);
        let h_im = DMatrix::from_vec(n_sensors, n_antennas, h_im);

        // Unit-variance signals, rows scaled by sqrt(P).
        let mut rng_x = stream_rng(spec.seed, TAG_SIGNAL);
        let (x_re, x_im) = match spec.constellation {
            Constellation::Qpsk => qpsk_matrix(&mut rng_x, n_antennas, n_samples),
            Constellation::GaussianComplex => {
                gaussian_matrix(&mut rng_x, n_antennas, n_samples, comp)
            }
        };
        let mut x_re = DMatrix::from_vec(n_antennas, n_samples, x_re);
        let mut x_im = DMatrix::from_vec(n_antennas, n_samples, x_im);
        let mut row = 0;
        for (&p, &mult) in spec.profile.powers().iter().zip(spec.profile.multiplicities()) {
            let amp = p.sqrt();
            for _ in 0..mult {
                for j in 0..n_samples {
                    x_re[(row, j)] *= amp;
                    x_im[(row, j)] *= amp;
                }
                row += 1;
            }
        }

        // Y += H * (P^(1/2) X), complex product via four real products.
        let signal_re = &h_re * &x_re - &h_im * &x_im;
        let signal_im = &h_re * &x_im + &h_im * &x_re;
        let mut idx = 0;
        for j in 0..n_samples {
            for i in 0..n_sensors {
                // Column-major traversal matching DMatrix storage.
                y_re[idx] += signal_re[(i, j)];
                y_im[idx] += signal_im[(i, j)];
                idx += 1;
            }
        }
    }

    let y_re = DMatrix::from_vec(n_sensors, n_samples, y_re);
    let y_im = DMatrix::from_vec(n_sensors, n_samples, y_im);

    let raw = retain_raw.then(|| {
        let mut data = Vec::with_capacity(n_sensors * n_samples);
        for i in 0..n_sensors {
            for j in 0..n_samples {
                data.push(Complex64::new(y_re[(i, j)], y_im[(i, j)]));
            }
        }
        RawMatrix { sensors: n_sensors, samples: n_samples, data }
    });

    let eigenvalues = covariance_eigenvalues(&y_re, &y_im, n_samples)?;
    Ok(SampleDraw { eigenvalues, raw })
}

/// Ascending eigenvalues of `(1/M) Y Y^H` through the Hermitian
/// eigendecomposition of the N x N Gram matrix.
fn covariance_eigenvalues(
    y_re: &DMatrix<f64>,
    y_im: &DMatrix<f64>,
    n_samples: usize,
) -> Result<Vec<f64>> {
    let m = n_samples as f64;
    let b_re = (y_re * y_re.transpose() + y_im * y_im.transpose()) / m;
    let b_im = (y_im * y_re.transpose() - y_re * y_im.transpose()) / m;
    let n = b_re.nrows();
    let b = DMatrix::from_fn(n, n, |i, j| Complex::new(b_re[(i, j)], b_im[(i, j)]));
    // Scrub asymmetry left by rounding before the Hermitian solver.
    let b = (&b + b.adjoint()) * Complex::new(0.5, 0.0);
    let mut eigenvalues: Vec<f64> = b.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let top = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    for v in &mut eigenvalues {
        if *v < 0.0 {
            if *v < -1e-10 * (1.0 + top) {
                return Err(Error::Numerical {
                    what: format!("covariance eigenvalue {v} is negative beyond rounding"),
                    residual: None,
                });
            }
            *v = 0.0;
        }
    }
    Ok(eigenvalues)
}

/// Scenario (a): `P = (1, 3, 10)` with equal antenna counts, `N = 10 n`,
/// `M = 10 N`, QPSK signals.
pub fn scenario_a(n_total: usize, snr_db: f64) -> Result<ScenarioSpec> {
    if n_total == 0 || n_total % 3 != 0 {
        return Err(Error::Contract(format!(
            "scenario (a) needs a positive multiple of 3 antennas, got {n_total}"
        )));
    }
    let nk = n_total / 3;
    let profile = PowerProfile::new(&[1.0, 3.0, 10.0], &[nk, nk, nk])?;
    let sensors = 10 * n_total;
    let shape = SystemShape::new(sensors, 10 * sensors, n_total)?;
    Ok(ScenarioSpec {
        profile,
        shape,
        noise: NoiseLevel::from_snr_db(snr_db),
        constellation: Constellation::Qpsk,
        seed: 0,
    })
}

/// Scenario (b): `P = (1/16, 1/4, 1)` with 4 antennas each, `N = 24`,
/// `M = 128`, QPSK signals.
pub fn scenario_b(snr_db: f64) -> ScenarioSpec {
    let profile = PowerProfile::new(&[1.0 / 16.0, 0.25, 1.0], &[4, 4, 4])
        .expect("static profile is valid");
    let shape = SystemShape::new(24, 128, 12).expect("static shape is valid");
    ScenarioSpec {
        profile,
        shape,
        noise: NoiseLevel::from_snr_db(snr_db),
        constellation: Constellation::Qpsk,
        seed: 0,
    }
}
