//! Support boundaries of the channel-power spectrum `G` and the
//! cluster-separability certificates for both `G` and the full spectrum `F`.
//!
//! The support of `G` is carved out of the real line by the sign of
//! `x_G'(m)`: every cluster contributes one downward and one upward zero
//! crossing. Inflexion points of `x_G` (the roots of a cubic-sum equation,
//! one per pole gap) anchor the root brackets, since `x_G'` is unimodal
//! between consecutive poles. The `F`-side certificate replaces each cluster
//! of `G` by its worst edge, which turns the support condition into another
//! finite cubic-sum equation.

use super::{bisect, offset_from_pole, x_g_prime_ratios, x_g_ratios};
use crate::error::{Error, Result};
use crate::types::{NoiseLevel, PowerProfile, SystemShape};

/// Whether the spectrum near zero is resolvable at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportRegime {
    /// `c_0 > 1`: the zero mass is a separate atom and every pole gap holds
    /// one inflexion point.
    Resolved,
    /// `c_0 <= 1`: the leftmost cluster merges with the mass at zero and the
    /// smallest power cannot be estimated.
    MergedAtZero,
}

/// Support analysis of the channel-power spectrum `G`.
#[derive(Debug, Clone)]
pub struct GSupport {
    /// Regime marker; all lists below are empty in the merged regime.
    pub regime: SupportRegime,
    /// Per-cluster zero crossings `(m_i^-, m_i^+)` of `x_G'`.
    pub boundary_roots: Vec<(f64, f64)>,
    /// Per-cluster support edges `(x_i^-, x_i^+)`, ascending and disjoint.
    pub cluster_edges: Vec<(f64, f64)>,
    /// Inflexion roots of `x_G`, one per pole gap (length `K`).
    pub inflexion_roots: Vec<f64>,
    /// Mass of `G` at zero, `(c_0 - 1)/c_0`.
    pub zero_mass: f64,
    /// Cluster index of every power (nondecreasing, onto `0..num_clusters`).
    pub power_to_cluster: Vec<usize>,
}

impl GSupport {
    /// Number of disjoint clusters `K_G <= K`.
    pub fn num_clusters(&self) -> usize {
        self.cluster_edges.len()
    }

    fn merged() -> Self {
        GSupport {
            regime: SupportRegime::MergedAtZero,
            boundary_roots: Vec::new(),
            cluster_edges: Vec::new(),
            inflexion_roots: Vec::new(),
            zero_mass: 0.0,
            power_to_cluster: Vec::new(),
        }
    }
}

/// Witness data for one assumption check.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionWitness {
    /// The two roots the inequalities are evaluated at.
    pub roots: (f64, f64),
    /// Left-hand sides of the two inequalities. The right entry is NaN when
    /// the check is vacuous (topmost cluster has no right neighbor).
    pub lhs: (f64, f64),
    /// The bound both left-hand sides are compared against.
    pub bound: f64,
}

/// Outcome of a separability assumption check.
#[derive(Debug, Clone, Copy)]
pub enum AssumptionCheck {
    /// Both inequalities hold.
    Satisfied(AssumptionWitness),
    /// At least one inequality fails.
    Violated(AssumptionWitness),
    /// `c_0 <= 1`: the check is undefined and the power inseparable.
    MergedAtZero,
}

impl AssumptionCheck {
    /// True only for [`AssumptionCheck::Satisfied`].
    pub fn is_satisfied(&self) -> bool {
        matches!(self, AssumptionCheck::Satisfied(_))
    }
}

/// Full separability report: per-power verdicts for both assumptions plus
/// the `F`-side roots and cluster-edge estimates.
#[derive(Debug, Clone)]
pub struct SeparabilityReport {
    /// Support analysis of `G`.
    pub support: GSupport,
    /// Assumption-1 verdict per power.
    pub assumption1_ok: Vec<bool>,
    /// Assumption-2 verdict per power (only evaluated where assumption 1
    /// holds; false otherwise).
    pub assumption2_ok: Vec<bool>,
    /// Combined verdict per power.
    pub separable: Vec<bool>,
    /// `F`-side gap roots, one per gap `0..=K_G` (the last entry is the zero
    /// of the edge bound function, marking the right end of the support).
    pub f_roots: Vec<f64>,
    /// Estimated `F`-cluster edges per cluster of `G`.
    pub f_cluster_edges: Vec<(f64, f64)>,
}

fn s2_g(m: f64, powers: &[f64], cks: &[f64]) -> f64 {
    powers
        .iter()
        .zip(cks)
        .map(|(&p, &ck)| {
            let t = p * m / (1.0 + p * m);
            t * t / ck
        })
        .sum()
}

fn s3_g(m: f64, powers: &[f64], cks: &[f64]) -> f64 {
    powers
        .iter()
        .zip(cks)
        .map(|(&p, &ck)| {
            let t = p * m / (1.0 + p * m);
            t * t * t / ck
        })
        .sum()
}

fn inverse_c0(cks: &[f64]) -> f64 {
    cks.iter().map(|c| 1.0 / c).sum()
}

/// The `K` real roots of the cubic-sum inflexion equation, one per pole gap,
/// ascending. Requires `c_0 > 1`.
fn inflexion_roots_impl(powers: &[f64], cks: &[f64]) -> Result<Vec<f64>> {
    let k = powers.len();
    let poles: Vec<f64> = powers.iter().map(|p| -1.0 / p).collect();
    let g = |m: f64| s3_g(m, powers, cks) - 1.0;
    let mut roots = Vec::with_capacity(k);

    // Leftmost gap (-inf, -1/P_1): the cubic sum rises from 1/c_0 < 1.
    let hi = offset_from_pole(&g, poles[0], 2.0 * poles[0], true)?;
    let mut dist = poles[0].abs();
    let mut lo = poles[0] - dist;
    let mut guard = 0;
    while g(lo) >= 0.0 {
        dist *= 2.0;
        lo = poles[0] - dist;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numerical {
                what: "no lower bracket for the leftmost inflexion root".into(),
                residual: None,
            });
        }
    }
    roots.push(bisect(&g, lo, hi)?);

    // Interior gaps: the cubic sum spans (-inf, +inf) and is increasing.
    for i in 1..k {
        let lo = offset_from_pole(&g, poles[i - 1], poles[i], false)?;
        let hi = offset_from_pole(&g, poles[i], poles[i - 1], true)?;
        roots.push(bisect(&g, lo, hi)?);
    }
    Ok(roots)
}

pub(crate) fn support_impl(profile: &PowerProfile, cks: &[f64]) -> Result<GSupport> {
    let powers = profile.powers();
    let k = powers.len();
    if k == 0 {
        return Err(Error::Contract("support analysis requires a nonempty profile".into()));
    }
    let c0 = 1.0 / inverse_c0(cks);
    if c0 <= 1.0 {
        return Ok(GSupport::merged());
    }
    let poles: Vec<f64> = powers.iter().map(|p| -1.0 / p).collect();
    let infl = inflexion_roots_impl(powers, cks)?;
    let dx = |m: f64| x_g_prime_ratios(m, powers, cks);

    // Boundary i > 0 separates powers i-1 and i iff x_G' is positive at the
    // inflexion point between their poles.
    let mut power_to_cluster = vec![0usize; k];
    for i in 1..k {
        let open = dx(infl[i]) > 0.0;
        power_to_cluster[i] = power_to_cluster[i - 1] + open as usize;
    }

    if dx(infl[0]) <= 0.0 {
        return Err(Error::Numerical {
            what: "x_G' not positive at the leftmost inflexion point despite c_0 > 1".into(),
            residual: Some(dx(infl[0])),
        });
    }

    let mut m_minus: Vec<f64> = Vec::new();
    let mut m_plus: Vec<f64> = Vec::new();

    // Left edge of the first cluster: downward crossing left of the first
    // pole.
    let hi = offset_from_pole(&dx, poles[0], infl[0], false)?;
    m_minus.push(bisect(&dx, infl[0], hi)?);

    for i in 1..k {
        if power_to_cluster[i] != power_to_cluster[i - 1] {
            let lo = offset_from_pole(&dx, poles[i - 1], infl[i], false)?;
            m_plus.push(bisect(&dx, lo, infl[i])?);
            let hi = offset_from_pole(&dx, poles[i], infl[i], false)?;
            m_minus.push(bisect(&dx, infl[i], hi)?);
        }
    }

    // Right edge of the last cluster: upward crossing right of the last pole.
    let lo = offset_from_pole(&dx, poles[k - 1], 0.0, false)?;
    let hi = offset_from_pole(&dx, 0.0, poles[k - 1], true)?;
    m_plus.push(bisect(&dx, lo, hi)?);

    let boundary_roots: Vec<(f64, f64)> =
        m_minus.iter().copied().zip(m_plus.iter().copied()).collect();
    let cluster_edges: Vec<(f64, f64)> = boundary_roots
        .iter()
        .map(|&(lo, hi)| (x_g_ratios(lo, powers, cks), x_g_ratios(hi, powers, cks)))
        .collect();

    Ok(GSupport {
        regime: SupportRegime::Resolved,
        boundary_roots,
        cluster_edges,
        inflexion_roots: infl,
        zero_mass: (c0 - 1.0) / c0,
        power_to_cluster,
    })
}

fn assumption1_impl(k: usize, profile: &PowerProfile, cks: &[f64]) -> Result<AssumptionCheck> {
    let powers = profile.powers();
    let num = powers.len();
    if k >= num {
        return Err(Error::Contract(format!("power index {k} out of range (K = {num})")));
    }
    let c0 = 1.0 / inverse_c0(cks);
    if c0 <= 1.0 {
        return Ok(AssumptionCheck::MergedAtZero);
    }
    let infl = inflexion_roots_impl(powers, cks)?;
    let root_lo = infl[k];
    let root_hi = if k + 1 < num { infl[k + 1] } else { 0.0 };
    let lhs_lo = s2_g(root_lo, powers, cks);
    let lhs_hi = if k + 1 < num { s2_g(root_hi, powers, cks) } else { 0.0 };
    let witness =
        AssumptionWitness { roots: (root_lo, root_hi), lhs: (lhs_lo, lhs_hi), bound: 1.0 };
    if lhs_lo < 1.0 && lhs_hi < 1.0 {
        Ok(AssumptionCheck::Satisfied(witness))
    } else {
        Ok(AssumptionCheck::Violated(witness))
    }
}

/// Check the power-ratio separability condition for power `k` (0-based):
/// the cluster of `P_k` in `G` is disjoint from both neighbors.
pub fn check_assumption1(
    k: usize,
    profile: &PowerProfile,
    shape: &SystemShape,
) -> Result<AssumptionCheck> {
    let cks = shape.power_ratios(profile)?;
    assumption1_impl(k, profile, &cks)
}

/// Precomputed quantities for the `F`-side analysis.
struct FSideContext {
    /// Per-cluster mass of `G` (sum of `1/c_j` over powers in the cluster).
    weights: Vec<f64>,
    /// Mass of `G` at zero.
    zero_weight: f64,
    /// Per-cluster right edges shifted by the noise variance.
    a_plus: Vec<f64>,
    /// Per-cluster left edges shifted by the noise variance.
    a_minus: Vec<f64>,
    sigma2: f64,
}

impl FSideContext {
    fn new(support: &GSupport, cks: &[f64], sigma2: f64) -> Self {
        let kg = support.num_clusters();
        let mut weights = vec![0.0; kg];
        for (j, &cluster) in support.power_to_cluster.iter().enumerate() {
            weights[cluster] += 1.0 / cks[j];
        }
        let c0 = 1.0 / inverse_c0(cks);
        FSideContext {
            weights,
            zero_weight: (c0 - 1.0) / c0,
            a_plus: support.cluster_edges.iter().map(|&(_, hi)| hi + sigma2).collect(),
            a_minus: support.cluster_edges.iter().map(|&(lo, _)| lo + sigma2).collect(),
            sigma2,
        }
    }

    /// Sum of cubes with the split at gap `g`: clusters left of the gap enter
    /// through their right edge, clusters right of it through their left edge.
    fn s3_f(&self, gap: usize, m: f64) -> f64 {
        let mut acc = {
            let t = self.sigma2 * m / (1.0 + self.sigma2 * m);
            self.zero_weight * t * t * t
        };
        for (r, &w) in self.weights.iter().enumerate() {
            let a = if r < gap { self.a_plus[r] } else { self.a_minus[r] };
            let t = a * m / (1.0 + a * m);
            acc += w * t * t * t;
        }
        acc
    }

    /// Sum of squares with the split at gap `g`.
    fn s2_f(&self, gap: usize, m: f64) -> f64 {
        let mut acc = {
            let t = self.sigma2 * m / (1.0 + self.sigma2 * m);
            self.zero_weight * t * t
        };
        for (r, &w) in self.weights.iter().enumerate() {
            let a = if r < gap { self.a_plus[r] } else { self.a_minus[r] };
            let t = a * m / (1.0 + a * m);
            acc += w * t * t;
        }
        acc
    }

    /// Edge-discretized estimate of the `F` support function at `m`.
    fn x_f_bound(&self, gap: usize, m: f64, c: f64) -> f64 {
        let mut acc = self.zero_weight * self.sigma2 / (1.0 + self.sigma2 * m);
        for (r, &w) in self.weights.iter().enumerate() {
            let a = if r < gap { self.a_plus[r] } else { self.a_minus[r] };
            acc += w * a / (1.0 + a * m);
        }
        -1.0 / m + acc / c
    }

    /// Left pole of gap `g`: the noise atom for the first gap, otherwise the
    /// shifted right edge of the cluster left of the gap.
    fn left_pole(&self, gap: usize) -> f64 {
        if gap == 0 {
            -1.0 / self.sigma2
        } else {
            -1.0 / self.a_plus[gap - 1]
        }
    }

    /// Root of the cubic-sum equation `s3_f(g, m) = c` inside gap
    /// `g < K_G`.
    fn gap_root(&self, gap: usize, c: f64) -> Result<f64> {
        let left = self.left_pole(gap);
        let right = -1.0 / self.a_minus[gap];
        let g = |m: f64| self.s3_f(gap, m) - c;
        let lo = offset_from_pole(&g, left, right, false)?;
        let hi = offset_from_pole(&g, right, left, true)?;
        bisect(&g, lo, hi)
    }

    /// Zero of the edge bound beyond the last cluster; to its right the
    /// support function certifiably increases, so its image bounds the top
    /// support edge.
    fn top_edge_root(&self, c: f64) -> Result<f64> {
        let kg = self.weights.len();
        let left = self.left_pole(kg);
        let g = |m: f64| self.s2_f(kg, m) - c;
        let lo = offset_from_pole(&g, left, 0.0, true)?;
        let hi = offset_from_pole(&g, 0.0, left, false)?;
        bisect(&g, lo, hi)
    }
}

fn assumption2_impl(
    k: usize,
    profile: &PowerProfile,
    cks: &[f64],
    c: f64,
    sigma2: f64,
) -> Result<AssumptionCheck> {
    if sigma2 <= 0.0 {
        return Err(Error::Contract("assumption 2 requires sigma2 > 0".into()));
    }
    match assumption1_impl(k, profile, cks)? {
        AssumptionCheck::Satisfied(_) => {}
        AssumptionCheck::MergedAtZero => return Ok(AssumptionCheck::MergedAtZero),
        AssumptionCheck::Violated(_) => {
            return Err(Error::Contract(format!(
                "assumption 2 for power {k} requires assumption 1 to hold"
            )));
        }
    }
    let support = support_impl(profile, cks)?;
    let ctx = FSideContext::new(&support, cks, sigma2);
    let kg = support.power_to_cluster[k];
    let num_clusters = support.num_clusters();

    let root_lo = ctx.gap_root(kg, c)?;
    let lhs_lo = ctx.s2_f(kg, root_lo);
    let (root_hi, lhs_hi, hi_ok) = if kg + 1 < num_clusters {
        let r = ctx.gap_root(kg + 1, c)?;
        let lhs = ctx.s2_f(kg + 1, r);
        (r, lhs, lhs < c)
    } else {
        // No cluster above: the support is always bounded on the right.
        (ctx.top_edge_root(c)?, f64::NAN, true)
    };

    let witness =
        AssumptionWitness { roots: (root_lo, root_hi), lhs: (lhs_lo, lhs_hi), bound: c };
    if lhs_lo < c && hi_ok {
        Ok(AssumptionCheck::Satisfied(witness))
    } else {
        Ok(AssumptionCheck::Violated(witness))
    }
}

/// Check the sample-ratio separability condition for power `k` (0-based):
/// the cluster of `P_k` in the full spectrum stays disjoint from its
/// neighbors and from the noise cluster.
pub fn check_assumption2(
    k: usize,
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
) -> Result<AssumptionCheck> {
    let cks = shape.power_ratios(profile)?;
    assumption2_impl(k, profile, &cks, shape.sample_ratio(), noise.sigma2())
}

/// Support analysis of the channel-power spectrum for the given system shape.
pub fn support_g(profile: &PowerProfile, shape: &SystemShape) -> Result<GSupport> {
    let cks = shape.power_ratios(profile)?;
    support_impl(profile, &cks)
}

/// Full per-power separability report for the given system.
pub fn separability_report(
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
) -> Result<SeparabilityReport> {
    let cks = shape.power_ratios(profile)?;
    let c = shape.sample_ratio();
    let sigma2 = noise.sigma2();
    let num = profile.num_powers();
    let support = support_impl(profile, &cks)?;

    if support.regime == SupportRegime::MergedAtZero {
        return Ok(SeparabilityReport {
            support,
            assumption1_ok: vec![false; num],
            assumption2_ok: vec![false; num],
            separable: vec![false; num],
            f_roots: Vec::new(),
            f_cluster_edges: Vec::new(),
        });
    }

    let assumption1_ok: Vec<bool> = (0..num)
        .map(|k| Ok(assumption1_impl(k, profile, &cks)?.is_satisfied()))
        .collect::<Result<_>>()?;

    let ctx = FSideContext::new(&support, &cks, sigma2);
    let kg = support.num_clusters();
    let mut f_roots = Vec::with_capacity(kg + 1);
    for gap in 0..kg {
        f_roots.push(ctx.gap_root(gap, c)?);
    }
    f_roots.push(ctx.top_edge_root(c)?);
    let f_cluster_edges: Vec<(f64, f64)> = (0..kg)
        .map(|r| {
            (ctx.x_f_bound(r, f_roots[r], c), ctx.x_f_bound(r + 1, f_roots[r + 1], c))
        })
        .collect();

    let mut assumption2_ok = vec![false; num];
    for k in 0..num {
        if !assumption1_ok[k] {
            continue;
        }
        let cluster = support.power_to_cluster[k];
        let lo_ok = ctx.s2_f(cluster, f_roots[cluster]) < c;
        let hi_ok =
            cluster + 1 >= kg || ctx.s2_f(cluster + 1, f_roots[cluster + 1]) < c;
        assumption2_ok[k] = lo_ok && hi_ok;
    }
    let separable: Vec<bool> =
        (0..num).map(|k| assumption1_ok[k] && assumption2_ok[k]).collect();

    Ok(SeparabilityReport {
        support,
        assumption1_ok,
        assumption2_ok,
        separable,
        f_roots,
        f_cluster_edges,
    })
}

/// Upper bound for the top edge of the full-spectrum support, suitable for
/// sizing density grids: the bound-function estimate of the rightmost
/// F-edge when available, otherwise a coarse product-of-edges bound.
pub fn support_upper_bound(
    profile: &PowerProfile,
    shape: &SystemShape,
    noise: &NoiseLevel,
) -> f64 {
    let coarse = super::spectrum_scale(profile, shape, noise);
    if profile.num_powers() == 0 || noise.sigma2() <= 0.0 {
        return coarse;
    }
    match separability_report(profile, shape, noise) {
        Ok(report) => report
            .f_cluster_edges
            .last()
            .map(|&(_, hi)| hi)
            .filter(|hi| hi.is_finite() && *hi > 0.0)
            .unwrap_or(coarse),
        Err(_) => coarse,
    }
}

/// Smallest sensor ratio `c_0` at which assumption 1 holds for every power,
/// by bisection on `[1, c0_max]`. Depends only on power ratios and
/// multiplicity ratios.
pub fn critical_c0(profile: &PowerProfile, c0_max: f64) -> Result<f64> {
    if profile.num_powers() < 2 {
        return Err(Error::Contract("critical c_0 requires at least two distinct powers".into()));
    }
    let n = profile.total_antennas() as f64;
    let mults = profile.multiplicities();
    let pass = |c0: f64| -> Result<bool> {
        let cks: Vec<f64> = mults.iter().map(|&nk| c0 * n / nk as f64).collect();
        for k in 0..profile.num_powers() {
            if !assumption1_impl(k, profile, &cks)?.is_satisfied() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if !pass(c0_max)? {
        return Err(Error::Numerical {
            what: format!("critical c_0 exceeds the search cap {c0_max} (unbounded result)"),
            residual: None,
        });
    }
    let mut lo = 1.0;
    let mut hi = c0_max;
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if pass(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest sample ratio `c` at which assumption 2 holds for every power, at
/// fixed sensor ratio `c_0`, by bisection on `(0, c_max]`.
pub fn critical_c(
    profile: &PowerProfile,
    c0: f64,
    noise: &NoiseLevel,
    c_max: f64,
) -> Result<f64> {
    let n = profile.total_antennas() as f64;
    let cks: Vec<f64> =
        profile.multiplicities().iter().map(|&nk| c0 * n / nk as f64).collect();
    for k in 0..profile.num_powers() {
        if !assumption1_impl(k, profile, &cks)?.is_satisfied() {
            return Err(Error::Contract(format!(
                "critical c requires assumption 1 for every power at c_0 = {c0}"
            )));
        }
    }
    let pass = |c: f64| -> Result<bool> {
        for k in 0..profile.num_powers() {
            if !assumption2_impl(k, profile, &cks, c, noise.sigma2())?.is_satisfied() {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut lo = 1e-6;
    if pass(lo)? {
        return Ok(lo);
    }
    if !pass(c_max)? {
        return Err(Error::Numerical {
            what: format!("critical c exceeds the search cap {c_max} (unbounded result)"),
            residual: None,
        });
    }
    let mut hi = c_max;
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if pass(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
