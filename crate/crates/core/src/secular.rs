//! Eigenvalues of rank-one-modified diagonal matrices.
//!
//! Given the ascending sample eigenvalues `lambda`, the estimator needs the
//! spectra of `diag(lambda) - (1/N) sqrt(lambda) sqrt(lambda)^T` (the `eta`
//! set) and `diag(lambda) - (1/M) sqrt(lambda) sqrt(lambda)^T` (the `mu`
//! set). Both are computed from the secular equation
//!
//! ```text
//!   sum_i (lambda_i / W) / (lambda_i - x) = 1,      W in {N, M}
//! ```
//!
//! whose roots interlace the `lambda_i`. Tied eigenvalues are deflated
//! analytically: a value of multiplicity `m` contributes `m - 1` exact roots,
//! and zeros contribute exact roots at zero.

use crate::error::{Error, Result};

/// Relative gap below which neighboring eigenvalues are treated as tied.
const TIE_REL_TOL: f64 = 1e-12;
/// Relative bisection tolerance for secular roots.
const ROOT_REL_TOL: f64 = 1e-13;
/// Bisection iteration cap.
const MAX_BISECT: usize = 200;

/// Sample eigenvalues of `B_N = (1/M) Y Y^H` together with the derived root
/// sets `eta` and `mu` used by the power estimators.
#[derive(Debug, Clone)]
pub struct EigenSample {
    lambdas: Vec<f64>,
    etas: Vec<f64>,
    mus: Vec<f64>,
    num_samples: usize,
}

impl EigenSample {
    /// Build a sample from eigenvalues (sorted internally) and the sample
    /// count `M`. Negative eigenvalues are a contract violation.
    pub fn new(mut lambdas: Vec<f64>, num_samples: usize) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Contract("eigenvalue list must be nonempty".into()));
        }
        if num_samples == 0 {
            return Err(Error::Contract("sample count M must be >= 1".into()));
        }
        lambdas.sort_by(f64::total_cmp);
        let etas = etas(&lambdas)?;
        let mus = mus(&lambdas, num_samples)?;
        Ok(Self { lambdas, etas, mus, num_samples })
    }

    /// Sensor dimension `N` (the number of eigenvalues).
    pub fn num_sensors(&self) -> usize {
        self.lambdas.len()
    }

    /// Sample dimension `M`.
    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    /// Ascending eigenvalues of `B_N`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Ascending roots of the empirical Stieltjes transform (weight `1/N`).
    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// Ascending roots of the companion transform (weight `1/M`).
    pub fn mus(&self) -> &[f64] {
        &self.mus
    }
}

/// Eigenvalues of `diag(lambda) - (1/N) sqrt(lambda) sqrt(lambda)^T` where
/// `N = lambda.len()`, ascending.
pub fn etas(lambdas: &[f64]) -> Result<Vec<f64>> {
    rank_one_roots(lambdas, lambdas.len())
}

/// Eigenvalues of `diag(lambda) - (1/M) sqrt(lambda) sqrt(lambda)^T`,
/// ascending.
pub fn mus(lambdas: &[f64], num_samples: usize) -> Result<Vec<f64>> {
    if num_samples == 0 {
        return Err(Error::Contract("sample count M must be >= 1".into()));
    }
    rank_one_roots(lambdas, num_samples)
}

/// Distinct eigenvalue groups after tie deflation.
struct Group {
    value: f64,
    mult: usize,
}

fn group_ties(sorted: &[f64]) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    for &v in sorted {
        match groups.last_mut() {
            Some(g) if v - g.value <= TIE_REL_TOL * v.abs() => {
                g.mult += 1;
            }
            _ => groups.push(Group { value: v, mult: 1 }),
        }
    }
    groups
}

/// All `N` eigenvalues of `diag(lambda) - (1/W) sqrt(lambda) sqrt(lambda)^T`.
fn rank_one_roots(lambdas: &[f64], weight_denom: usize) -> Result<Vec<f64>> {
    let n = lambdas.len();
    if n == 0 {
        return Err(Error::Contract("eigenvalue list must be nonempty".into()));
    }
    for &l in lambdas {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::Contract(format!("eigenvalues must be finite and >= 0, got {l}")));
        }
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = weight_denom as f64;

    let mut roots: Vec<f64> = Vec::with_capacity(n);
    let groups = group_ties(&sorted);

    // Zeros are exact roots; tied values of multiplicity m deflate to m - 1
    // exact roots at that value.
    let mut active: Vec<Group> = Vec::new();
    for g in groups {
        if g.value == 0.0 {
            for _ in 0..g.mult {
                roots.push(0.0);
            }
        } else {
            for _ in 0..g.mult - 1 {
                roots.push(g.value);
            }
            active.push(g);
        }
    }

    if active.is_empty() {
        roots.sort_by(f64::total_cmp);
        return Ok(roots);
    }

    let values: Vec<f64> = active.iter().map(|g| g.value).collect();
    let weights: Vec<f64> = active.iter().map(|g| g.mult as f64 * g.value / w).collect();
    let secular = |x: f64| -> f64 {
        values.iter().zip(&weights).map(|(&v, &wt)| wt / (v - x)).sum::<f64>() - 1.0
    };

    // Leftmost root: below values[0]. When the weight denominator equals the
    // total count and no zero deflated out, x = 0 solves exactly.
    let zero_count = n - active.iter().map(|g| g.mult).sum::<usize>();
    if weight_denom == n && zero_count == 0 {
        roots.push(0.0);
    } else {
        let hi = values[0];
        let total_weight: f64 = weights.iter().sum();
        let mut span = total_weight.max(values[0] * 1e-3);
        let mut lo = hi - span;
        let mut guard = 0;
        while secular(lo) >= 0.0 {
            span *= 2.0;
            lo = hi - span;
            guard += 1;
            if guard > 200 {
                return Err(Error::Numerical {
                    what: format!("no left bracket for secular root below {hi}"),
                    residual: None,
                });
            }
        }
        roots.push(bisect_increasing(&secular, lo, hi));
    }

    // One root strictly inside every gap between consecutive distinct values.
    for g in 1..values.len() {
        roots.push(bisect_increasing(&secular, values[g - 1], values[g]));
    }

    roots.sort_by(f64::total_cmp);
    debug_assert_eq!(roots.len(), n);
    Ok(roots)
}

/// Bisection for a function increasing from negative to positive on
/// `(lo, hi)`; the endpoints themselves may be poles and are never evaluated
/// as candidate roots.
fn bisect_increasing(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
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
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Dense symmetric eigendecomposition oracle for the rank-one update.
    fn dense_oracle(lambdas: &[f64], weight_denom: usize) -> Vec<f64> {
        let n = lambdas.len();
        let sqrt = DVector::from_iterator(n, lambdas.iter().map(|l| l.sqrt()));
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(lambdas));
        m -= &sqrt * sqrt.transpose() / weight_denom as f64;
        let mut eigs = m.symmetric_eigen().eigenvalues.as_slice().to_vec();
        eigs.sort_by(f64::total_cmp);
        eigs
    }

    #[test]
    fn two_by_two_by_hand() {
        // lambda = (1, 2), N = 2: trace 1.5, determinant 0 -> eta = (0, 1.5).
        let e = etas(&[1.0, 2.0]).unwrap();
        assert!((e[0] - 0.0).abs() < 1e-14);
        assert!((e[1] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn all_equal_deflates() {
        let e = etas(&[3.0, 3.0, 3.0, 3.0]).unwrap();
        assert!((e[0] - 0.0).abs() < 1e-14);
        for &v in &e[1..] {
            assert_eq!(v, 3.0);
        }
    }

    #[test]
    fn mu_equals_eta_when_m_equals_n() {
        let m = mus(&[1.0, 2.0], 2).unwrap();
        assert!((m[0] - 0.0).abs() < 1e-14);
        assert!((m[1] - 1.5).abs() < 1e-13);
    }

    #[test]
    fn mu_approaches_lambda_for_large_m() {
        let m = mus(&[1.0, 2.0], 1_000_000_000).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-8);
        assert!((m[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn matches_dense_oracle_size_12() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut l: Vec<f64> = (0..12).map(|_| rng.gen_range(0.01..10.0)).collect();
            l.sort_by(f64::total_cmp);
            for (ours, dense) in etas(&l).unwrap().iter().zip(dense_oracle(&l, 12)) {
                assert!((ours - dense).abs() < 1e-9, "eta {ours} vs dense {dense}");
            }
            for (ours, dense) in mus(&l, 128).unwrap().iter().zip(dense_oracle(&l, 128)) {
                assert!((ours - dense).abs() < 1e-9, "mu {ours} vs dense {dense}");
            }
        }
    }

    #[test]
    fn zeros_give_exact_zero_roots() {
        let l = [0.0, 0.0, 1.0, 2.0];
        let e = etas(&l).unwrap();
        assert_eq!(e[0], 0.0);
        assert_eq!(e[1], 0.0);
        for (ours, dense) in e.iter().zip(dense_oracle(&l, 4)) {
            assert!((ours - dense).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_input_rejected() {
        assert!(etas(&[-1.0, 2.0]).is_err());
        assert!(EigenSample::new(vec![-0.5], 10).is_err());
    }

    #[test]
    fn trace_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.gen_range(2..40);
            let m = rng.gen_range(n + 1..3 * n + 2);
            let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..5.0)).collect();
            l.sort_by(f64::total_cmp);
            let sum: f64 = l.iter().sum();
            let e = etas(&l).unwrap();
            let u = mus(&l, m).unwrap();
            let e_sum: f64 = e.iter().sum();
            let u_sum: f64 = u.iter().sum();
            assert!((e_sum - (1.0 - 1.0 / n as f64) * sum).abs() < 1e-9 * sum);
            assert!((u_sum - (1.0 - 1.0 / m as f64) * sum).abs() < 1e-9 * sum);
            // Global identity behind the estimator's sum rule.
            let lhs =
                (n as f64 * m as f64 / (m as f64 - n as f64)) * (e_sum - u_sum);
            assert!((lhs + sum).abs() < 1e-8 * sum);
        }
    }

    #[test]
    fn interlacing_with_lambdas() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let n = rng.gen_range(2..30);
            let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..8.0)).collect();
            l.sort_by(f64::total_cmp);
            let m = 2 * n;
            for roots in [etas(&l).unwrap(), mus(&l, m).unwrap()] {
                for i in 0..n {
                    assert!(roots[i] < l[i] + 1e-12);
                    if i > 0 {
                        assert!(roots[i] > l[i - 1] - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let sorted = vec![0.3, 1.1, 2.0, 5.5];
        let shuffled = vec![2.0, 0.3, 5.5, 1.1];
        let a = EigenSample::new(sorted, 40).unwrap();
        let b = EigenSample::new(shuffled, 40).unwrap();
        assert_eq!(a.etas(), b.etas());
        assert_eq!(a.mus(), b.mus());
    }

    #[test]
    fn lemma_equivalence_on_dense_eigenvalues() {
        // For diag(a) - y y^T, each dense eigenvalue satisfies
        // sum y_i^2 / (a_i - x) = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 8;
        let a: Vec<f64> = {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..6.0)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(&a));
        let yv = DVector::from_column_slice(&y);
        m -= &yv * yv.transpose();
        let eigs = m.symmetric_eigen().eigenvalues;
        for &x in eigs.iter() {
            let s: f64 = a.iter().zip(&y).map(|(&ai, &yi)| yi * yi / (ai - x)).sum();
            assert!((s - 1.0).abs() < 1e-8, "secular residual {}", s - 1.0);
        }
    }
}
