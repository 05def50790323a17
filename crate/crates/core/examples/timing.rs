//! Scratch probe: hypothesis scores at moderate SNR (not part of tests).

use eigenpower::inference::{score_hypothesis, Constraints};
use eigenpower::model::{draw, scenario_a};
use eigenpower::{infer_joint, EigenSample, NoiseLevel, SystemShape};

fn main() {
    let mut spec = scenario_a(6, 15.0).unwrap();
    spec.seed = 11;
    let d = draw(&spec).unwrap();
    let sample = EigenSample::new(d.eigenvalues.clone(), 600).unwrap();
    println!("sigma2 true = {}", spec.noise.sigma2());
    println!("lowest eigs: {:?}", &sample.lambdas()[..6]);
    println!("top eigs: {:?}", &sample.lambdas()[54..]);

    let noise_est = {
        let l = sample.lambdas();
        l[..54].iter().sum::<f64>() / 54.0
    };
    println!("sigma2_hat = {noise_est}");
    let shape = SystemShape::new(60, 600, 6).unwrap();
    let noise = NoiseLevel::new(noise_est).unwrap();

    let (best, ranked) = infer_joint(&sample, 6, 3, &Constraints::default()).unwrap();
    println!("winner: {:?}", best.multiplicities);
    for h in ranked.iter().take(6) {
        println!(
            "  {:?} score {:.6e} est {:?} fail {:?}",
            h.multiplicities, h.score, h.estimates, h.failure
        );
    }
    let truth = score_hypothesis(&[2, 2, 2], &sample, &shape, &noise).unwrap();
    println!("true hypothesis score {:.6e} est {:?}", truth.score, truth.estimates);

    // Compare empirical and model transforms at a few grid points for the
    // true multiplicities with the true powers.
    use eigenpower::{solve_m_f, PowerProfile};
    use num_complex::Complex64;
    let profile = PowerProfile::new(&truth.estimates, &[2, 2, 2]).unwrap();
    for &x in &[-1.0, -0.5, -0.1] {
        let emp: f64 =
            sample.lambdas().iter().map(|l| 1.0 / (l - x)).sum::<f64>() / 60.0;
        let mdl = solve_m_f(Complex64::new(x, 1e-9), &profile, &shape, &noise).unwrap();
        println!("x={x}: emp {emp:.6} model {:.6}", mdl.m_f);
    }
}
