//! Fixed-point solver for the limiting Stieltjes transform and the inverse
//! transform density.
//!
//! For `z` in the upper half plane the companion transform `m_uF(z)` is the
//! unique upper-half-plane solution of
//!
//! ```text
//!   1/m_uF = -sigma^2 + 1/f - sum_k (1/c_k) P_k / (1 + P_k f),
//!   f      = (1 - c) m_uF - c z m_uF^2,
//! ```
//!
//! and `m_F(z) = c m_uF(z) + (c - 1)/z`. Iterating that single equation
//! directly is branch-unstable: inside the support its attracting fixed
//! point is the lower-half-plane conjugate. The solver instead runs the
//! damped two-level form. The inner level evaluates the channel-spectrum
//! transform `f = m_G(-1/m_uF - sigma^2)` exactly, as the unique
//! upper-half-plane root of a polynomial of degree `K + 1`; the outer update
//!
//! ```text
//!   m_uF <- 1 / ( -z + (1/c) (1/m_uF - f/m_uF^2) )
//! ```
//!
//! maps the upper half plane into itself, so the iteration cannot leave it
//! and converges to the correct branch; a safeguarded Aitken step
//! accelerates it near support edges. Damping is halved and the iteration
//! restarted if rounding ever pushes an iterate out of the half plane.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{NoiseLevel, PowerProfile, SystemShape};

/// Residual tolerance on the implicit equation.
const FP_TOL: f64 = 1e-12;
/// Iteration cap for one fixed-point solve.
const FP_MAX_ITER: usize = 10_000;
/// Floor below which damping cannot shrink.
const FP_MIN_DAMPING: f64 = 1e-8;
/// Density floor for support-interval extraction.
const DENSITY_FLOOR: f64 = 1e-4;
/// Negative density beyond this magnitude indicates solver breakdown rather
/// than rounding noise.
const DENSITY_NOISE_TOL: f64 = 1e-8;

/// One converged evaluation of the limiting Stieltjes transforms.
#[derive(Debug, Clone, Copy)]
pub struct StieltjesPoint {
    /// Evaluation point, `Im z > 0`.
    pub z: Complex64,
    /// Stieltjes transform of the sensor-side spectrum.
    pub m_f: Complex64,
    /// Companion transform of the sample-side spectrum.
    pub m_uf: Complex64,
    /// Auxiliary value `f = (1 - c) m_uF - c z m_uF^2`.
    pub f: Complex64,
    /// Iterations spent.
    pub iterations: usize,
    /// Final residual of the implicit equation (dimensionless).
    pub residual: f64,
}

/// Roots of a complex polynomial (coefficients low to high, nonzero leading
/// entry) by the Durand-Kerner iteration. Degrees here never exceed
/// `K + 1`, so the fixed budget is generous.
fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let degree = coeffs.len() - 1;
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    // Cauchy bound on the root magnitudes sizes the starting ring.
    let radius = 1.0 + monic[..degree].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> =
        (0..degree).map(|k| radius * seed.powu(k as u32 + 1)).collect();
    for _ in 0..200 {
        let mut shift = 0.0f64;
        for k in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if j != k {
                    denom *= roots[k] - roots[j];
                }
            }
            let step = eval(roots[k]) / denom;
            roots[k] -= step;
            shift = shift.max(step.norm() / (1.0 + roots[k].norm()));
        }
        if shift < 1e-15 {
            break;
        }
    }
    roots
}

/// Multiply a real polynomial (coefficients low to high) by `(1 + p x)`.
fn poly_mul_linear(q: &[f64], p: f64) -> Vec<f64> {
    let mut out = vec![0.0; q.len() + 1];
    for (i, &qi) in q.iter().enumerate() {
        out[i] += qi;
        out[i + 1] += p * qi;
    }
    out
}

struct FixedPoint<'a> {
    powers: &'a [f64],
    inv_cks: Vec<f64>,
    c: f64,
    sigma2: f64,
    z: Complex64,
}

impl FixedPoint<'_> {
    /// `sum_k (1/c_k) P_k / (1 + P_k g)`.
    fn power_sum(&self, g: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&p, &ick) in self.powers.iter().zip(&self.inv_cks) {
            acc += ick * p / (1.0 + p * g);
        }
        acc
    }

    /// One evaluation at `u`: the outer map image and the residual of the
    /// implicit equation. The residual is the disagreement between the two
    /// routes to the auxiliary value (the channel transform and the
    /// quadratic relation), relative to the term magnitudes; the absolute
    /// form is numerically meaningless near zero, where the quadratic route
    /// cancels catastrophically.
    fn eval(&self, u: Complex64) -> (Complex64, f64) {
        let w = -1.0 / u - self.sigma2;
        let g = self.channel_transform(w);
        let phi = 1.0 / (-self.z + (1.0 / u - g / (u * u)) / self.c);
        let linear = (1.0 - self.c) * u;
        let quadratic = self.c * self.z * u * u;
        let scale = linear.norm() + quadratic.norm() + g.norm() + f64::MIN_POSITIVE;
        let residual = (linear - quadratic - g).norm() / scale;
        (phi, residual)
    }

    /// Channel-spectrum transform `m_G(w)`, `Im w > 0`: the unique
    /// upper-half-plane solution of
    /// `w = -1/g + sum_k (1/c_k) P_k / (1 + P_k g)`,
    /// computed from the equivalent polynomial of degree `K + 1` (clearing
    /// denominators only introduces real artifact roots) and polished by a
    /// few Newton steps.
    fn channel_transform(&self, w: Complex64) -> Complex64 {
        let k = self.powers.len();
        if k == 0 {
            return -1.0 / w;
        }
        let mut q = vec![1.0f64];
        for &p in self.powers {
            q = poly_mul_linear(&q, p);
        }
        // F(g) = w g q(g) + q(g) - g sum_k (P_k/c_k) q_{-k}(g).
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k + 2];
        for (i, &qi) in q.iter().enumerate() {
            coeffs[i + 1] += w * qi;
            coeffs[i] += qi;
        }
        for (j, &p) in self.powers.iter().enumerate() {
            let mut omitted = vec![1.0f64];
            for (i, &pi) in self.powers.iter().enumerate() {
                if i != j {
                    omitted = poly_mul_linear(&omitted, pi);
                }
            }
            let scale = p * self.inv_cks[j];
            for (i, &qi) in omitted.iter().enumerate() {
                coeffs[i + 1] -= scale * qi;
            }
        }
        let roots = polynomial_roots(&coeffs);
        let mut g = roots[0];
        for &r in &roots[1..] {
            if r.im > g.im {
                g = r;
            }
        }
        for _ in 0..3 {
            let value = -1.0 / g + self.power_sum(g) - w;
            let slope = 1.0 / (g * g)
                - self
                    .powers
                    .iter()
                    .zip(&self.inv_cks)
                    .map(|(&p, &ick)| {
                        let d = 1.0 + p * g;
                        ick * p * p / (d * d)
                    })
                    .sum::<Complex64>();
            let step = value / slope;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            g -= step;
        }
        g
    }

}

fn aitken(a: Complex64, b: Complex64, c: Complex64) -> Complex64 {
    let denom = c - 2.0 * b + a;
    c - (c - b) * (c - b) / denom
}

/// Solve the coupled fixed point at `z` (upper half plane).
pub fn solve_m_f(
    z: Complex64,
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
) -> Result<StieltjesPoint> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Contract(format!("solve_m_f requires Im z > 0, got {z}")));
    }
    let cks = shape.power_ratios(profile)?;
    let fp = FixedPoint {
        powers: profile.powers(),
        inv_cks: cks.iter().map(|c| 1.0 / c).collect(),
        c: shape.sample_ratio(),
        sigma2: noise.sigma2(),
        z,
    };

    let bad = |v: Complex64| !v.re.is_finite() || !v.im.is_finite() || v.im <= 0.0;
    let u0 = -1.0 / z;
    let mut u = u0;
    let mut ev = fp.eval(u);
    let mut damping = 1.0;
    let mut iterations = 0;
    // Steffensen cycles: two damped plain steps, then an Aitken candidate
    // accepted only when it stays in the half plane and beats the plain
    // iterate's residual. The plain map cannot leave the half plane, so the
    // damping/restart path only fires on rounding-level breakdowns.
    let res = loop {
        if ev.1 <= FP_TOL {
            break ev.1;
        }
        if iterations >= FP_MAX_ITER {
            return Err(Error::Numerical {
                what: format!("fixed point did not converge at z = {z}"),
                residual: Some(ev.1),
            });
        }
        let a = (1.0 - damping) * u + damping * ev.0;
        iterations += 1;
        if bad(a) {
            damping *= 0.5;
            if damping < FP_MIN_DAMPING {
                return Err(Error::Numerical {
                    what: format!("fixed point left the upper half plane at z = {z}"),
                    residual: Some(ev.1),
                });
            }
            u = u0;
            ev = fp.eval(u);
            continue;
        }
        let ev_a = fp.eval(a);
        if ev_a.1 <= FP_TOL {
            u = a;
            break ev_a.1;
        }
        let b = (1.0 - damping) * a + damping * ev_a.0;
        iterations += 1;
        if bad(b) {
            damping *= 0.5;
            if damping < FP_MIN_DAMPING {
                return Err(Error::Numerical {
                    what: format!("fixed point left the upper half plane at z = {z}"),
                    residual: Some(ev_a.1),
                });
            }
            u = u0;
            ev = fp.eval(u);
            continue;
        }
        let ev_b = fp.eval(b);
        let candidate = aitken(u, a, b);
        if !bad(candidate) {
            let ev_c = fp.eval(candidate);
            if ev_c.1 < ev_b.1 {
                u = candidate;
                ev = ev_c;
                continue;
            }
        }
        u = b;
        ev = ev_b;
    };

    let c = fp.c;
    let m_f = c * u + (c - 1.0) / z;
    let f = (1.0 - c) * u - c * z * u * u;
    Ok(StieltjesPoint { z, m_f, m_uf: u, f, iterations, residual: res })
}

/// Density curve of the limit spectrum together with the extracted support.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    /// Ascending abscissae.
    pub grid: Vec<f64>,
    /// Density values, clamped at zero.
    pub density: Vec<f64>,
    /// Imaginary offset used in the inverse-transform limit.
    pub y_offset: f64,
    /// Intervals where the density exceeds the extraction floor.
    pub support_intervals: Vec<(f64, f64)>,
    /// Point mass of the sensor-side spectrum at zero (`1 - c` when `c < 1`).
    pub zero_mass: f64,
    /// Point mass of the sample-side co-spectrum at zero (`(c-1)/c` when
    /// `c > 1`); reported for reference, not part of the sensor-side mass.
    pub co_spectrum_zero_mass: f64,
}

/// Default imaginary offset: a small multiple of the spectrum scale. The
/// offset must stay well below `floor * grid_step^2` or the Lorentzian
/// smoothing tails of neighboring clusters cross the support-extraction
/// floor far from the true edges.
pub fn default_y_offset(profile: &PowerProfile, shape: &SystemShape, noise: &NoiseLevel) -> f64 {
    1e-10 * (1.0 + spectrum_scale(profile, shape, noise))
}

/// Rough upper bound for the top support edge, used for grids and offsets.
pub(crate) fn spectrum_scale(
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
) -> f64 {
    let c = shape.sample_ratio();
    let g_top = if profile.num_powers() > 0 {
        let c0 = shape.sensor_ratio();
        let edge = (1.0 + (1.0 / c0).sqrt()).powi(2);
        profile.powers().last().copied().unwrap_or(0.0) * edge
    } else {
        0.0
    };
    (noise.sigma2() + g_top) * (1.0 + (1.0 / c).sqrt()).powi(2)
}

/// Evaluate the inverse-transform density on `grid`, clamping negative
/// rounding noise at zero, and extract the support intervals above the
/// density floor.
pub fn lsd_density(
    grid: &[f64],
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
    y_offset: f64,
) -> Result<DensityCurve> {
    if grid.is_empty() {
        return Err(Error::Contract("density grid must be nonempty".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Contract("density grid must be strictly ascending".into()));
    }
    if !(y_offset > 0.0) {
        return Err(Error::Contract(format!("y_offset must be > 0, got {y_offset}")));
    }

    let c = shape.sample_ratio();
    let density: Vec<f64> = grid
        .par_iter()
        .map(|&x| -> Result<f64> {
            let z = Complex64::new(x, y_offset);
            let point = solve_m_f(z, profile, shape, noise).map_err(|e| annotate(e, x))?;
            let d = point.m_f.im / std::f64::consts::PI;
            // m_F combines two large canceling terms near zero when c > 1;
            // the admissible rounding noise scales with their magnitude.
            let noise_scale = DENSITY_NOISE_TOL
                + 64.0 * f64::EPSILON * (c * point.m_uf.norm() + ((c - 1.0) / z).norm());
            if d < -noise_scale {
                return Err(Error::Numerical {
                    what: format!("negative density {d} at grid point {x}"),
                    residual: None,
                });
            }
            Ok(d.max(0.0))
        })
        .collect::<Result<_>>()?;

    let mut support_intervals = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &d) in density.iter().enumerate() {
        if d > DENSITY_FLOOR {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            support_intervals.push((grid[s], grid[i - 1]));
        }
    }
    if let Some(s) = start {
        support_intervals.push((grid[s], grid[grid.len() - 1]));
    }

    Ok(DensityCurve {
        grid: grid.to_vec(),
        density,
        y_offset,
        support_intervals,
        zero_mass: if c < 1.0 { 1.0 - c } else { 0.0 },
        co_spectrum_zero_mass: if c > 1.0 { (c - 1.0) / c } else { 0.0 },
    })
}

fn annotate(e: Error, x: f64) -> Error {
    match e {
        Error::Numerical { what, residual } => {
            Error::Numerical { what: format!("{what} (grid point {x})"), residual }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_only_shape() -> (PowerProfile, SystemShape, NoiseLevel) {
        (
            PowerProfile::empty(),
            SystemShape::new(60, 600, 0).unwrap(),
            NoiseLevel::new(0.1).unwrap(),
        )
    }

    /// Closed-form Marchenko-Pastur Stieltjes transform for the spectrum of
    /// `(sigma^2/M) W W^H` with `W` of size `N x M`, `y = N/M`.
    fn mp_stieltjes(z: Complex64, y: f64, s2: f64) -> Complex64 {
        let a = Complex64::new(s2 * (1.0 - y), 0.0);
        let disc = ((z - a) * (z - a) - 4.0 * s2 * y * z).sqrt();
        let denom = 2.0 * y * s2 * z;
        // Choose the branch with positive imaginary part.
        let c1 = (a - z + disc) / denom;
        let c2 = (a - z - disc) / denom;
        if c1.im > 0.0 {
            c1
        } else {
            c2
        }
    }

    #[test]
    fn matches_marchenko_pastur_closed_form() {
        let (p, sh, noise) = noise_only_shape();
        for &x in &[0.05, 0.1, 0.15, 0.3] {
            let z = Complex64::new(x, 1e-3);
            let got = solve_m_f(z, &p, &sh, &noise).unwrap();
            let want = mp_stieltjes(z, 0.1, 0.1);
            assert!(
                (got.m_f - want).norm() < 1e-8,
                "x = {x}: {} vs {}",
                got.m_f,
                want
            );
        }
    }

    #[test]
    fn upper_half_plane_and_transform_identity() {
        let p = PowerProfile::new(&[1.0, 3.0, 10.0], &[2, 2, 2]).unwrap();
        let sh = SystemShape::new(60, 600, 6).unwrap();
        let noise = NoiseLevel::new(0.1).unwrap();
        let c = sh.sample_ratio();
        for &x in &[0.05, 0.9, 3.1, 10.5, 12.0] {
            for &y in &[1e-2, 1e-6] {
                let z = Complex64::new(x, y);
                let pt = solve_m_f(z, &p, &sh, &noise).unwrap();
                assert!(pt.m_uf.im > 0.0);
                assert!(pt.m_f.im > 0.0);
                let gap = (pt.m_f - c * pt.m_uf - (c - 1.0) / z).norm();
                assert!(gap < 1e-10, "identity residual {gap}");
                assert!(pt.residual <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_lower_half_plane() {
        let (p, sh, noise) = noise_only_shape();
        assert!(solve_m_f(Complex64::new(1.0, -1e-3), &p, &sh, &noise).is_err());
        assert!(solve_m_f(Complex64::new(1.0, 0.0), &p, &sh, &noise).is_err());
    }

    #[test]
    fn noise_only_density_has_mp_support() {
        let (p, sh, noise) = noise_only_shape();
        let grid: Vec<f64> = (0..1200).map(|i| 0.3 * i as f64 / 1199.0).collect();
        let y = default_y_offset(&p, &sh, &noise);
        let curve = lsd_density(&grid, &p, &sh, &noise, y).unwrap();
        assert_eq!(curve.support_intervals.len(), 1);
        let (lo, hi) = curve.support_intervals[0];
        let want_lo = 0.1 * (1.0 - (0.1f64).sqrt()).powi(2);
        let want_hi = 0.1 * (1.0 + (0.1f64).sqrt()).powi(2);
        let step = 0.3 / 1199.0;
        assert!((lo - want_lo).abs() < 4.0 * step, "lower edge {lo} vs {want_lo}");
        assert!((hi - want_hi).abs() < 4.0 * step, "upper edge {hi} vs {want_hi}");
        // Total mass close to one.
        let mass = trapezoid(&curve.grid, &curve.density);
        assert!((mass - 1.0).abs() < 0.01, "mass {mass}");
    }

    fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
        x.windows(2)
            .zip(y.windows(2))
            .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
            .sum()
    }

    #[test]
    fn scenario_a_has_four_clusters() {
        let p = PowerProfile::new(&[1.0, 3.0, 10.0], &[2, 2, 2]).unwrap();
        let sh = SystemShape::new(60, 600, 6).unwrap();
        let noise = NoiseLevel::new(0.1).unwrap();
        let grid: Vec<f64> = (0..1600).map(|i| 13.0 * i as f64 / 1599.0).collect();
        let y = default_y_offset(&p, &sh, &noise);
        let curve = lsd_density(&grid, &p, &sh, &noise, y).unwrap();
        assert_eq!(curve.support_intervals.len(), 4, "{:?}", curve.support_intervals);
        let mass = trapezoid(&curve.grid, &curve.density);
        assert!((mass - 1.0).abs() < 0.01, "mass {mass}");
    }

    #[test]
    fn merged_variant_has_three_clusters() {
        let p = PowerProfile::new(&[1.0, 3.0, 5.0], &[2, 2, 2]).unwrap();
        let sh = SystemShape::new(60, 600, 6).unwrap();
        let noise = NoiseLevel::new(0.1).unwrap();
        let grid: Vec<f64> = (0..1600).map(|i| 8.0 * i as f64 / 1599.0).collect();
        let y = default_y_offset(&p, &sh, &noise);
        let curve = lsd_density(&grid, &p, &sh, &noise, y).unwrap();
        assert_eq!(curve.support_intervals.len(), 3, "{:?}", curve.support_intervals);
    }

    #[test]
    fn support_edges_scale_with_common_power_noise_factor() {
        let p = PowerProfile::new(&[1.0, 3.0, 10.0], &[2, 2, 2]).unwrap();
        let sh = SystemShape::new(60, 600, 6).unwrap();
        let t = 4.0;
        let scaled_p = p.scaled(t);
        let noise = NoiseLevel::new(0.1).unwrap();
        let scaled_noise = NoiseLevel::new(0.1 * t).unwrap();
        let grid: Vec<f64> = (1..2000).map(|i| 13.0 * i as f64 / 1999.0).collect();
        let scaled_grid: Vec<f64> = grid.iter().map(|x| x * t).collect();
        let c1 = lsd_density(&grid, &p, &sh, &noise, 1e-9).unwrap();
        let c2 = lsd_density(&scaled_grid, &scaled_p, &sh, &scaled_noise, t * 1e-9).unwrap();
        assert_eq!(c1.support_intervals.len(), c2.support_intervals.len());
        for (a, b) in c1.support_intervals.iter().zip(&c2.support_intervals) {
            assert!((a.0 * t - b.0).abs() < 1e-6 * t + 13.0 * t / 1999.0);
            assert!((a.1 * t - b.1).abs() < 1e-6 * t + 13.0 * t / 1999.0);
        }
    }
}
