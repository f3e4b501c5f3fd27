//! Recovers (a, b) from a noisy radius trajectory.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use sphere_flow::inverse::{fit_linear, fit_nonlinear, identifiability_report};
use sphere_flow::{evolve_trajectory, FlowParams, RadiusTrajectory};

fn main() {
    let truth = FlowParams::new(1.0, 10.0).unwrap();
    let times: Vec<f64> = (0..200).map(|k| 5.0 * f64::from(k) / 199.0).collect();
    let clean = evolve_trajectory(truth, 9.0, &times).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut samples = clean.samples().to_vec();
    for s in samples.iter_mut().skip(1) {
        s.1 += noise.sample(&mut rng);
    }
    let noisy = RadiusTrajectory::new(samples).unwrap();

    let seed = fit_linear(&noisy).unwrap();
    let fit = fit_nonlinear(&noisy, seed.params).unwrap();
    println!("truth      a={:.6} b={:.6}", truth.a(), truth.b());
    println!(
        "linear     a={:.6} b={:.6} residual {:.3e}",
        seed.params.a(),
        seed.params.b(),
        seed.residual
    );
    println!(
        "nonlinear  a={:.6} b={:.6} residual {:.3e} condition {:.3e} warning {}",
        fit.params.a(),
        fit.params.b(),
        fit.residual,
        fit.condition,
        fit.dominant_term_warning
    );
    let report = identifiability_report(fit.params, 9.0, 5.0).unwrap();
    println!(
        "sensitivity ratio advection/curvature {:.3}",
        report.ratio()
    );
}
