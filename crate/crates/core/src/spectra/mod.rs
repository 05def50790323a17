//! Deterministic limiting-spectrum analysis: the support function of the
//! channel-power spectrum, cluster separability certificates, the coupled
//! Stieltjes-transform fixed point and the limit density.

mod solver;
mod support;

pub use solver::{default_y_offset, lsd_density, solve_m_f, DensityCurve, StieltjesPoint};
pub(crate) use solver::spectrum_scale;
pub use support::{
    check_assumption1, check_assumption2, critical_c, critical_c0, separability_report,
    support_g, support_upper_bound, AssumptionCheck, AssumptionWitness, GSupport,
    SeparabilityReport, SupportRegime,
};

use crate::error::{Error, Result};
use crate::types::{PowerProfile, SystemShape};

/// Relative tolerance at which an evaluation point counts as sitting on a
/// pole of the support function.
const POLE_REL_TOL: f64 = 1e-14;
/// Relative bisection tolerance for all real root finding in this module.
const ROOT_REL_TOL: f64 = 1e-13;
/// Bisection iteration cap.
const MAX_BISECT: usize = 240;

fn guard_poles(m: f64, powers: &[f64]) -> Result<()> {
    if m == 0.0 {
        return Err(Error::Domain("x_G evaluated at the pole m = 0".into()));
    }
    for &p in powers {
        let t = p * m;
        if (1.0 + t).abs() <= POLE_REL_TOL * (1.0 + t.abs()) {
            return Err(Error::Domain(format!("x_G evaluated at the pole m = -1/{p}")));
        }
    }
    Ok(())
}

pub(crate) fn x_g_ratios(m: f64, powers: &[f64], cks: &[f64]) -> f64 {
    let mut acc = -1.0 / m;
    for (&p, &ck) in powers.iter().zip(cks) {
        acc += (1.0 / ck) * p / (1.0 + p * m);
    }
    acc
}

pub(crate) fn x_g_prime_ratios(m: f64, powers: &[f64], cks: &[f64]) -> f64 {
    let mut acc = 1.0 / (m * m);
    for (&p, &ck) in powers.iter().zip(cks) {
        let d = 1.0 + p * m;
        acc -= (1.0 / ck) * p * p / (d * d);
    }
    acc
}

pub(crate) fn x_g_second_ratios(m: f64, powers: &[f64], cks: &[f64]) -> f64 {
    let mut acc = -2.0 / (m * m * m);
    for (&p, &ck) in powers.iter().zip(cks) {
        let d = 1.0 + p * m;
        acc += (1.0 / ck) * 2.0 * p * p * p / (d * d * d);
    }
    acc
}

/// The support function `x_G(m) = -1/m + sum_r (1/c_r) P_r / (1 + P_r m)`
/// whose increasing stretches lie outside the support of the channel-power
/// spectrum.
pub fn x_g(m: f64, profile: &PowerProfile, shape: &SystemShape) -> Result<f64> {
    guard_poles(m, profile.powers())?;
    let cks = shape.power_ratios(profile)?;
    Ok(x_g_ratios(m, profile.powers(), &cks))
}

/// First derivative of [`x_g`] in closed form.
pub fn x_g_prime(m: f64, profile: &PowerProfile, shape: &SystemShape) -> Result<f64> {
    guard_poles(m, profile.powers())?;
    let cks = shape.power_ratios(profile)?;
    Ok(x_g_prime_ratios(m, profile.powers(), &cks))
}

/// Second derivative of [`x_g`] in closed form.
pub fn x_g_second(m: f64, profile: &PowerProfile, shape: &SystemShape) -> Result<f64> {
    guard_poles(m, profile.powers())?;
    let cks = shape.power_ratios(profile)?;
    Ok(x_g_second_ratios(m, profile.powers(), &cks))
}

/// Bisection on `(lo, hi)` for a function with `f(lo) < 0 < f(hi)` or
/// `f(lo) > 0 > f(hi)`; the bracket signs are taken from the arguments.
pub(crate) fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::Numerical {
            what: format!("no sign change on bracket ({lo}, {hi}): f = ({f_lo}, {f_hi})"),
            residual: None,
        });
    }
    for _ in 0..MAX_BISECT {
        if hi - lo <= ROOT_REL_TOL * (lo.abs() + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == f_lo.signum() {
            lo = mid;
            f_lo = v;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Walk from the `pole` end of the interval `(pole, interior)` (in either
/// direction) toward `interior` until `f` is finite and has sign
/// `want_positive`; returns the abscissa found.
pub(crate) fn offset_from_pole(
    f: &dyn Fn(f64) -> f64,
    pole: f64,
    interior: f64,
    want_positive: bool,
) -> Result<f64> {
    let mut t = 1e-12;
    while t < 0.5 {
        let x = pole + t * (interior - pole);
        let v = f(x);
        if v.is_finite() && ((v > 0.0) == want_positive) && v != 0.0 {
            return Ok(x);
        }
        t *= 4.0;
    }
    Err(Error::Numerical {
        what: format!(
            "no {} sign found near pole {pole} toward {interior}",
            if want_positive { "positive" } else { "negative" }
        ),
        residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::NoiseLevel;

    fn profile_1_3_10() -> PowerProfile {
        PowerProfile::new(&[1.0, 3.0, 10.0], &[2, 2, 2]).unwrap()
    }

    fn shape_a6() -> SystemShape {
        SystemShape::new(60, 600, 6).unwrap()
    }

    #[test]
    fn x_g_direct_evaluation() {
        // K = 1, P = 1, c_1 = 10, m = -2: -1/(-2) + (1/10) * 1/(1 - 2) = 0.4.
        let p = PowerProfile::new(&[1.0], &[1]).unwrap();
        let shape = SystemShape::new(10, 100, 1).unwrap();
        let v = x_g(-2.0, &p, &shape).unwrap();
        assert!((v - 0.4).abs() < 1e-15);
    }

    #[test]
    fn x_g_vanishes_from_above_at_minus_infinity() {
        let p = PowerProfile::new(&[1.0], &[1]).unwrap();
        let shape = SystemShape::new(10, 100, 1).unwrap();
        let mut prev = f64::INFINITY;
        for &m in &[-1e2, -1e4, -1e6] {
            let v = x_g(m, &p, &shape).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn x_g_matches_rational_oracle() {
        // Exact fractions: P = (1,3,10), c_k = 30, m = -2/3 (midpoint of
        // (-1, -1/3)) gives 3/2 + (1/30)(3 - 3 - 30/17) = 49/34.
        use num_rational::BigRational;
        type R = BigRational;
        let big = |v: i64| R::from_integer(v.into());
        let m = -big(2) / big(3);
        let mut exact = -big(1) / m.clone();
        for &p in &[1i64, 3, 10] {
            let pr = big(p);
            exact += (big(1) / big(30)) * pr.clone() / (big(1) + pr * m.clone());
        }
        let expected = {
            let num: f64 = exact.numer().to_string().parse().unwrap();
            let den: f64 = exact.denom().to_string().parse().unwrap();
            num / den
        };
        let got = x_g(-2.0 / 3.0, &profile_1_3_10(), &shape_a6()).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
        assert!((got - 49.0 / 34.0).abs() < 1e-12);
    }

    #[test]
    fn x_g_pole_rejected() {
        let p = profile_1_3_10();
        let shape = shape_a6();
        assert!(matches!(x_g(0.0, &p, &shape), Err(Error::Domain(_))));
        assert!(matches!(x_g(-1.0 / 3.0, &p, &shape), Err(Error::Domain(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = profile_1_3_10();
        let shape = shape_a6();
        let h = 1e-6;
        for &m in &[-5.0, -0.7, -0.2, -0.05] {
            let d = x_g_prime(m, &p, &shape).unwrap();
            let fd =
                (x_g(m + h, &p, &shape).unwrap() - x_g(m - h, &p, &shape).unwrap()) / (2.0 * h);
            assert!((d - fd).abs() < 1e-4 * (1.0 + d.abs()), "m={m}: {d} vs {fd}");
            let d2 = x_g_second(m, &p, &shape).unwrap();
            let fd2 = (x_g_prime(m + h, &p, &shape).unwrap()
                - x_g_prime(m - h, &p, &shape).unwrap())
                / (2.0 * h);
            assert!((d2 - fd2).abs() < 1e-3 * (1.0 + d2.abs()), "m={m}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn x_g_increasing_on_nonnegative_derivative_set() {
        // Sampled monotonicity on the set where x_G' >= 0.
        let p = profile_1_3_10();
        let shape = shape_a6();
        let noise = NoiseLevel::new(0.1).unwrap();
        let _ = noise;
        let mut last: Option<(f64, f64)> = None;
        let mut m = -30.0;
        while m < -1e-3 {
            if let (Ok(v), Ok(d)) = (x_g(m, &p, &shape), x_g_prime(m, &p, &shape)) {
                if d >= 0.0 {
                    if let Some((pm, pv)) = last {
                        if v > 0.0 && pv > 0.0 {
                            assert!(
                                v > pv,
                                "x_G not increasing between {pm} and {m}: {pv} vs {v}"
                            );
                        }
                    }
                    last = Some((m, v));
                }
            }
            m += 0.01;
        }
    }
}
