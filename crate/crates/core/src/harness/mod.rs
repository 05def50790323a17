//! Experiment runners reproducing the evaluation protocol at desk scale:
//! density curves, support reports, separability frontiers, NMSE sweeps,
//! estimator distribution dumps and joint-inference RCI tables.
//!
//! All runners are deterministic functions of `(config, seed)`: Monte Carlo
//! trials draw from per-trial streams and results merge in trial order, so
//! output bytes never depend on thread count.

pub mod config;

pub use config::{ExperimentConfig, ScenarioKind, SweepKind};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_classical, estimate_moment, estimate_stieltjes, Method};
use crate::inference::{infer_joint, Constraints};
use crate::model::{derive_seed, draw, ScenarioSpec};
use crate::secular::EigenSample;
use crate::spectra::{
    default_y_offset, lsd_density, separability_report, support_upper_bound, DensityCurve,
    SupportRegime,
};
use crate::types::{NoiseLevel, PowerProfile};

const NMSE_TAG: u64 = 0x4E4D_5345;
const CDF_TAG: u64 = 0x4344_4600;
const RCI_TAG: u64 = 0x5243_4900;
const OVERLAY_TAG: u64 = 0x4F56_4C59;

/// Full-precision decimal formatting (17 significant digits).
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Density curve output.
#[derive(Debug, Clone)]
pub struct DensityRun {
    pub curve: DensityCurve,
    /// Eigenvalues of one seeded draw when the overlay was requested.
    pub empirical: Option<Vec<f64>>,
    /// CSV with columns `x,density`.
    pub csv: String,
}

/// Evaluate the limit density on the configured grid.
pub fn run_density(cfg: &ExperimentConfig) -> Result<DensityRun> {
    let (_, sigma2) = cfg.noise_grid()?[0];
    let spec = cfg.spec_at(sigma2)?;
    let hi = cfg
        .grid_max
        .unwrap_or_else(|| 1.1 * spectrum_scale(&spec.profile, &spec.shape, &spec.noise));
    let lo = cfg.grid_min.unwrap_or(0.0);
    let points = cfg.grid_points.unwrap_or(1500).max(2);
    if !(hi > lo) {
        return Err(Error::Config(format!("empty density grid [{lo}, {hi}]")));
    }
    let grid: Vec<f64> =
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let y = cfg
        .y_offset
        .unwrap_or_else(|| default_y_offset(&spec.profile, &spec.shape, &spec.noise));
    let curve = lsd_density(&grid, &spec.profile, &spec.shape, &spec.noise, y)?;

    let empirical = if cfg.overlay.unwrap_or(false) {
        let seeded = spec.with_seed(derive_seed(cfg.seed(), OVERLAY_TAG));
        Some(draw(&seeded)?.eigenvalues)
    } else {
        None
    };

    let mut csv = String::from("x,density\n");
    for (x, d) in curve.grid.iter().zip(&curve.density) {
        csv.push_str(&format!("{},{}\n", fmt(*x), fmt(*d)));
    }
    Ok(DensityRun { curve, empirical, csv })
}

/// Support and separability report output.
#[derive(Debug, Clone)]
pub struct SupportRun {
    pub report: crate::spectra::SeparabilityReport,
    /// CSV with one row per power.
    pub csv: String,
}

/// Compute the support and per-power separability report.
pub fn run_support(cfg: &ExperimentConfig) -> Result<SupportRun> {
    let (_, sigma2) = cfg.noise_grid()?[0];
    let spec = cfg.spec_at(sigma2)?;
    let report = separability_report(&spec.profile, &spec.shape, &spec.noise)?;
    let mut csv = String::from(
        "power_index,power,cluster,g_lo,g_hi,f_lo,f_hi,assumption1_ok,assumption2_ok,separable\n",
    );
    let merged = report.support.regime == SupportRegime::MergedAtZero;
    for (k, &p) in spec.profile.powers().iter().enumerate() {
        let (cluster, g_lo, g_hi, f_lo, f_hi) = if merged {
            (String::new(), f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let c = report.support.power_to_cluster[k];
            let (g_lo, g_hi) = report.support.cluster_edges[c];
            let (f_lo, f_hi) = report.f_cluster_edges[c];
            (c.to_string(), g_lo, g_hi, f_lo, f_hi)
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            k,
            fmt(p),
            cluster,
            fmt(g_lo),
            fmt(g_hi),
            fmt(f_lo),
            fmt(f_hi),
            report.assumption1_ok[k],
            report.assumption2_ok[k],
            report.separable[k]
        ));
    }
    Ok(SupportRun { report, csv })
}

/// Separability frontier sweep output.
#[derive(Debug, Clone)]
pub struct SeparabilityRun {
    /// `(parameter, critical ratio)` pairs.
    pub points: Vec<(f64, f64)>,
    pub csv: String,
}

/// Sweep a critical ratio across the configured parameter values.
pub fn run_separability(cfg: &ExperimentConfig) -> Result<SeparabilityRun> {
    let sweep = cfg
        .sweep
        .ok_or_else(|| Error::Config("separability needs sweep = c0-vs-ratio | c-vs-sigma2".into()))?;
    let values = cfg
        .sweep_values
        .clone()
        .ok_or_else(|| Error::Config("separability needs sweep_values".into()))?;
    let cap = cfg.cap.unwrap_or(1e6);
    let mut points = Vec::with_capacity(values.len());
    match sweep {
        SweepKind::C0VsRatio => {
            for &ratio in &values {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::Config(format!(
                        "c0-vs-ratio sweep values must lie in (0, 1), got {ratio}"
                    )));
                }
                let profile = PowerProfile::new(&[ratio, 1.0], &[1, 1])
                    .map_err(|e| Error::Config(e.to_string()))?;
                points.push((ratio, crate::spectra::critical_c0(&profile, cap)?));
            }
        }
        SweepKind::CVsSigma2 => {
            let (_, sigma2) = cfg.noise_grid().unwrap_or_else(|_| vec![(20.0, 0.01)])[0];
            let spec = cfg.spec_at(sigma2)?;
            let c0 = cfg.c0.unwrap_or_else(|| spec.shape.sensor_ratio());
            for &s2 in &values {
                let noise = NoiseLevel::new(s2).map_err(|e| Error::Config(e.to_string()))?;
                points.push((s2, crate::spectra::critical_c(&spec.profile, c0, &noise, cap)?));
            }
        }
    }
    let mut csv = String::from("parameter,critical_ratio\n");
    for &(p, v) in &points {
        csv.push_str(&format!("{},{}\n", fmt(p), fmt(v)));
    }
    Ok(SeparabilityRun { points, csv })
}

/// One NMSE summary row.
#[derive(Debug, Clone)]
pub struct NmseRecord {
    pub snr_db: f64,
    pub method: Method,
    pub power_index: usize,
    pub truth: f64,
    pub nmse: f64,
    pub trials: usize,
    pub excluded: usize,
}

/// NMSE sweep output.
#[derive(Debug, Clone)]
pub struct NmseRun {
    pub records: Vec<NmseRecord>,
    /// CSV with columns `snr_db,estimator,power_index,truth,nmse,trials,excluded`.
    pub csv: String,
    /// Per-trial dump (`snr_db,estimator,power_index,trial,estimate`) when
    /// requested.
    pub trial_dump: Option<String>,
}

fn apply_estimator(
    method: Method,
    sample: &EigenSample,
    spec: &ScenarioSpec,
) -> Result<Vec<f64>> {
    let mults = spec.profile.multiplicities();
    let set = match method {
        Method::Stieltjes => estimate_stieltjes(sample, mults)?,
        Method::Classical => estimate_classical(sample, mults)?,
        Method::Moment => estimate_moment(sample, mults, &spec.noise, &spec.shape)?,
    };
    Ok(set.estimates)
}

type TrialOutcome = Vec<(Method, std::result::Result<Vec<f64>, String>)>;

fn run_trials(spec: &ScenarioSpec, methods: &[Method], seeds: &[u64]) -> Vec<TrialOutcome> {
    seeds
        .par_iter()
        .map(|&seed| {
            let trial_spec = spec.with_seed(seed);
            match draw(&trial_spec)
                .and_then(|d| EigenSample::new(d.eigenvalues, trial_spec.shape.samples()))
            {
                Ok(sample) => methods
                    .iter()
                    .map(|&m| {
                        (m, apply_estimator(m, &sample, &trial_spec).map_err(|e| e.to_string()))
                    })
                    .collect(),
                Err(e) => {
                    let msg = e.to_string();
                    methods.iter().map(|&m| (m, Err(msg.clone()))).collect()
                }
            }
        })
        .collect()
}

fn trial_seeds(base: u64, runner_tag: u64, grid_index: usize, count: usize) -> Vec<u64> {
    let point_seed = derive_seed(derive_seed(base, runner_tag), grid_index as u64);
    (0..count).map(|t| derive_seed(point_seed, t as u64)).collect()
}

/// Monte Carlo NMSE sweep over the SNR grid and estimator set.
pub fn run_nmse(cfg: &ExperimentConfig) -> Result<NmseRun> {
    let methods = cfg.estimators();
    let trials = cfg.trials();
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let grid = cfg.noise_grid()?;
    let mut records = Vec::new();
    let mut dump = cfg.dump_trials.unwrap_or(false).then(|| {
        String::from("snr_db,estimator,power_index,trial,estimate\n")
    });

    for (gi, &(snr_db, sigma2)) in grid.iter().enumerate() {
        let spec = cfg.spec_at(sigma2)?;
        let truths = spec.profile.powers().to_vec();
        let seeds = trial_seeds(cfg.seed(), NMSE_TAG, gi, trials);
        let outcomes = run_trials(&spec, &methods, &seeds);

        for (mi, &method) in methods.iter().enumerate() {
            let mut sums = vec![0.0f64; truths.len()];
            let mut included = 0usize;
            let mut excluded = 0usize;
            for (trial, outcome) in outcomes.iter().enumerate() {
                match &outcome[mi].1 {
                    Ok(estimates) => {
                        included += 1;
                        for (k, (&t, &e)) in truths.iter().zip(estimates).enumerate() {
                            let err = (t - e) / t;
                            sums[k] += err * err;
                            if let Some(d) = dump.as_mut() {
                                d.push_str(&format!(
                                    "{},{},{},{},{}\n",
                                    fmt(snr_db),
                                    method.name(),
                                    k,
                                    trial,
                                    fmt(e)
                                ));
                            }
                        }
                    }
                    Err(_) => excluded += 1,
                }
            }
            for (k, &t) in truths.iter().enumerate() {
                records.push(NmseRecord {
                    snr_db,
                    method,
                    power_index: k,
                    truth: t,
                    nmse: if included > 0 { sums[k] / included as f64 } else { f64::NAN },
                    trials: included,
                    excluded,
                });
            }
        }
        eprintln!("nmse: snr {snr_db} dB done ({trials} trials)");
    }

    let mut csv = String::from("snr_db,estimator,power_index,truth,nmse,trials,excluded\n");
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(r.snr_db),
            r.method.name(),
            r.power_index,
            fmt(r.truth),
            fmt(r.nmse),
            r.trials,
            r.excluded
        ));
    }
    Ok(NmseRun { records, csv, trial_dump: dump.take() })
}

/// Estimator distribution output.
#[derive(Debug, Clone)]
pub struct CdfRun {
    /// Per `(method, power_index)`: sorted per-trial estimates.
    pub sorted: Vec<(Method, usize, Vec<f64>)>,
    /// CSV with columns `estimator,power_index,rank,estimate`.
    pub csv: String,
}

/// Sorted per-trial estimate dump (empirical distribution functions).
pub fn run_estimator_cdf(cfg: &ExperimentConfig) -> Result<CdfRun> {
    let methods = cfg.estimators();
    let trials = cfg.trials();
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let (_, sigma2) = cfg.noise_grid()?[0];
    let spec = cfg.spec_at(sigma2)?;
    let num_powers = spec.profile.num_powers();
    let seeds = trial_seeds(cfg.seed(), CDF_TAG, 0, trials);
    let outcomes = run_trials(&spec, &methods, &seeds);

    let mut sorted = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        for k in 0..num_powers {
            let mut values: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o[mi].1.as_ref().ok().map(|est| est[k]))
                .collect();
            values.sort_by(f64::total_cmp);
            sorted.push((method, k, values));
        }
    }

    let mut csv = String::from("estimator,power_index,rank,estimate\n");
    for (method, k, values) in &sorted {
        for (rank, v) in values.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", method.name(), k, rank, fmt(*v)));
        }
    }
    Ok(CdfRun { sorted, csv })
}

/// Joint-inference rate-of-correct-inference output.
#[derive(Debug, Clone)]
pub struct RciRun {
    /// `(snr_db, rci, trials, failures)` rows.
    pub rows: Vec<(f64, f64, usize, usize)>,
    pub csv: String,
}

/// Rate of correct inference of the multiplicity tuple over seeded trials.
pub fn run_rci(cfg: &ExperimentConfig) -> Result<RciRun> {
    let trials = cfg.trials();
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let grid = cfg.noise_grid()?;
    let k_max = cfg.k_max.unwrap_or(3);
    let mut rows = Vec::with_capacity(grid.len());

    for (gi, &(snr_db, sigma2)) in grid.iter().enumerate() {
        let spec = cfg.spec_at(sigma2)?;
        // Evaluation protocol: the noise variance is known a priori to the
        // joint-inference stage; only the source structure is inferred.
        let constraints = Constraints {
            even_sizes: cfg.even_sizes.unwrap_or(false),
            gap_threshold: cfg.tau,
            known_noise: Some(spec.noise),
        };
        let truth: Vec<usize> = spec.profile.multiplicities().to_vec();
        let n = spec.profile.total_antennas();
        let seeds = trial_seeds(cfg.seed(), RCI_TAG, gi, trials);
        let outcomes: Vec<std::result::Result<bool, String>> = seeds
            .par_iter()
            .map(|&seed| {
                let trial_spec = spec.with_seed(seed);
                let sample = draw(&trial_spec)
                    .and_then(|d| EigenSample::new(d.eigenvalues, trial_spec.shape.samples()))
                    .map_err(|e| e.to_string())?;
                let (best, _) =
                    infer_joint(&sample, n, k_max, &constraints).map_err(|e| e.to_string())?;
                Ok(best.multiplicities == truth)
            })
            .collect();
        let failures = outcomes.iter().filter(|o| o.is_err()).count();
        let correct = outcomes.iter().filter(|o| matches!(o, Ok(true))).count();
        rows.push((snr_db, correct as f64 / trials as f64, trials, failures));
        eprintln!("rci: snr {snr_db} dB done ({trials} trials, {failures} failures)");
    }

    let mut csv = String::from("snr_db,rci,trials,failures\n");
    for &(snr, rci, t, f) in &rows {
        csv.push_str(&format!("{},{},{},{}\n", fmt(snr), fmt(rci), t, f));
    }
    Ok(RciRun { rows, csv })
}

/// Single-draw estimate output.
#[derive(Debug, Clone)]
pub struct EstimateRun {
    /// `(method, estimates, sigma2_hat)` per estimator.
    pub results: Vec<(Method, Vec<f64>, Option<f64>)>,
    /// CSV with columns `estimator,power_index,truth,estimate,sigma2_hat`.
    pub csv: String,
}

/// Run every configured estimator on one seeded draw.
pub fn run_estimate(cfg: &ExperimentConfig) -> Result<EstimateRun> {
    let (_, sigma2) = cfg.noise_grid()?[0];
    let spec = cfg.spec_at(sigma2)?;
    let d = draw(&spec)?;
    let sample = EigenSample::new(d.eigenvalues, spec.shape.samples())?;
    let mults = spec.profile.multiplicities();
    let mut results = Vec::new();
    for method in cfg.estimators() {
        let set = match method {
            Method::Stieltjes => estimate_stieltjes(&sample, mults)?,
            Method::Classical => estimate_classical(&sample, mults)?,
            Method::Moment => estimate_moment(&sample, mults, &spec.noise, &spec.shape)?,
        };
        results.push((method, set.estimates, set.sigma2_hat));
    }
    let mut csv = String::from("estimator,power_index,truth,estimate,sigma2_hat\n");
    for (method, estimates, s2) in &results {
        for (k, &e) in estimates.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                method.name(),
                k,
                fmt(spec.profile.powers()[k]),
                fmt(e),
                s2.map(fmt).unwrap_or_default()
            ));
        }
    }
    Ok(EstimateRun { results, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nmse_cfg() -> ExperimentConfig {
        ExperimentConfig::parse_str(
            "scenario = a\nn_total = 6\nsnr_db = 10,20\ntrials = 8\nseed = 3\n\
             estimators = stieltjes,classical\ndump_trials = true\n",
        )
        .unwrap()
    }

    #[test]
    fn nmse_is_deterministic_and_recomputable() {
        let cfg = nmse_cfg();
        let a = run_nmse(&cfg).unwrap();
        let b = run_nmse(&cfg).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.trial_dump, b.trial_dump);

        // Recompute every summary from the dump.
        let dump = a.trial_dump.as_ref().unwrap();
        for r in &a.records {
            let mut sum = 0.0;
            let mut count = 0usize;
            for line in dump.lines().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                let snr: f64 = cols[0].parse().unwrap();
                let k: usize = cols[2].parse().unwrap();
                if snr == r.snr_db && cols[1] == r.method.name() && k == r.power_index {
                    let e: f64 = cols[4].parse().unwrap();
                    let err = (r.truth - e) / r.truth;
                    sum += err * err;
                    count += 1;
                }
            }
            assert_eq!(count, r.trials);
            assert!(((sum / count as f64) - r.nmse).abs() <= 1e-12 * (1.0 + r.nmse));
            assert_eq!(r.excluded, 0);
        }
    }

    #[test]
    fn cdf_run_shapes() {
        let cfg = ExperimentConfig::parse_str(
            "scenario = b\nsnr_db = 20\ntrials = 5\nseed = 9\nestimators = stieltjes\n",
        )
        .unwrap();
        let run = run_estimator_cdf(&cfg).unwrap();
        assert_eq!(run.sorted.len(), 3);
        for (_, _, values) in &run.sorted {
            assert_eq!(values.len(), 5);
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
        }
        // Single-trial degenerate CDF.
        let cfg1 = ExperimentConfig::parse_str(
            "scenario = b\nsnr_db = 20\ntrials = 1\nseed = 9\nestimators = classical\n",
        )
        .unwrap();
        let run1 = run_estimator_cdf(&cfg1).unwrap();
        assert!(run1.sorted.iter().all(|(_, _, v)| v.len() == 1));
        // Determinism across runs.
        assert_eq!(run_estimator_cdf(&cfg).unwrap().csv, run.csv);
    }

    #[test]
    fn density_run_scenario_a() {
        let cfg = ExperimentConfig::parse_str(
            "scenario = a\nn_total = 6\nsigma2 = 0.1\ngrid_points = 900\noverlay = true\nseed = 5\n",
        )
        .unwrap();
        let run = run_density(&cfg).unwrap();
        assert_eq!(run.curve.support_intervals.len(), 4);
        let eigs = run.empirical.as_ref().unwrap();
        assert_eq!(eigs.len(), 60);
        assert!(run.csv.starts_with("x,density\n"));
    }

    #[test]
    fn support_run_reports_verdicts() {
        let cfg = ExperimentConfig::parse_str(
            "scenario = a\nn_total = 6\nsigma2 = 0.1\n",
        )
        .unwrap();
        let run = run_support(&cfg).unwrap();
        assert!(run.report.separable.iter().all(|&s| s));
        assert_eq!(run.csv.lines().count(), 4);
    }

    #[test]
    fn separability_run_modes() {
        let cfg = ExperimentConfig::parse_str(
            "sweep = c0-vs-ratio\nsweep_values = 0.2,0.5\ncap = 1e6\n",
        )
        .unwrap();
        let run = run_separability(&cfg).unwrap();
        assert_eq!(run.points.len(), 2);
        assert!(run.points[0].1 < run.points[1].1);

        let cfg = ExperimentConfig::parse_str(
            "scenario = a\nn_total = 6\nsweep = c-vs-sigma2\nsweep_values = 0.1,1.0\nc0 = 10\n",
        )
        .unwrap();
        let run = run_separability(&cfg).unwrap();
        assert!(run.points[0].1 < run.points[1].1);
    }

    #[test]
    fn estimate_run_single_draw() {
        let cfg = ExperimentConfig::parse_str(
            "scenario = a\nn_total = 6\nsnr_db = 20\nseed = 11\n",
        )
        .unwrap();
        let run = run_estimate(&cfg).unwrap();
        assert_eq!(run.results.len(), 3);
        for (_, estimates, _) in &run.results {
            assert_eq!(estimates.len(), 3);
        }
        // Classical reports its noise estimate.
        let classical = run.results.iter().find(|(m, _, _)| *m == Method::Classical).unwrap();
        assert!(classical.2.is_some());
    }
}
