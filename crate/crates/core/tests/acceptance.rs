//! One PASS/FAIL line per acceptance criterion.
//!
//! Failures are reported without failing the run; set `ACCEPTANCE_STRICT=1`
//! to exit non-zero when any criterion fails.

use std::f64::consts::E;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use sphere_flow::cli::{run_to, RunConfig};
use sphere_flow::inverse::{fit_linear, fit_nonlinear, jacobian, FitError, JACOBIAN_STEP};
use sphere_flow::levelset::{evolve_detailed, GridSpec, DEFAULT_SAFETY};
use sphere_flow::{
    evolve_trajectory, lambert_w, radius_at, reference_integrate, reference_sample, vanishing_time,
    FlowParams, LambertBranch, RadiusTrajectory, VanishingTime,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn p(a: f64, b: f64) -> FlowParams {
    FlowParams::new(a, b).unwrap()
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let (l, h) = (lo.log10(), hi.log10());
    (0..count).map(move |k| match k {
        0 => lo,
        k if k == count - 1 => hi,
        k => 10f64
            .powf(l + (h - l) * k as f64 / (count - 1) as f64)
            .clamp(lo, hi),
    })
}

fn lambert_fidelity() -> Outcome {
    let start = Instant::now();
    let mut worst_residual = 0.0f64;
    let mut check = |branch, z: f64| {
        let w = lambert_w(branch, z).unwrap();
        worst_residual = worst_residual.max((w * w.exp() - z).abs() / z.abs().max(1.0));
    };
    let count = 100_000;
    for z in log_spaced(1e-300, 1e300, count / 2) {
        check(LambertBranch::Principal, z);
    }
    for z in log_spaced(1e-300, 1.0 / E, count / 2) {
        check(LambertBranch::Principal, -z);
    }
    for z in log_spaced(1e-300, 1.0 / E, count) {
        check(LambertBranch::Secondary, -z);
    }
    let mut worst_trip = 0.0f64;
    for k in 0..count {
        let s = k as f64 / (count - 1) as f64;
        for (branch, w) in [
            (LambertBranch::Principal, -1.0 + 31.0 * s),
            (LambertBranch::Secondary, -1.0 - 29.0 * s),
        ] {
            let back = lambert_w(branch, w * w.exp()).unwrap();
            if w != 0.0 {
                worst_trip = worst_trip.max((back - w).abs() / w.abs());
            } else {
                worst_trip = worst_trip.max(back.abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_residual <= 1e-12 && worst_trip <= 1e-10 && elapsed < Duration::from_secs(1),
        format!("residual {worst_residual:.2e}, round trip {worst_trip:.2e}, {elapsed:.2?}"),
    )
}

fn window_end(params: FlowParams, r0: f64, cap: f64) -> f64 {
    match vanishing_time(params, r0).unwrap() {
        VanishingTime::Finite(tv) => cap.min(0.99 * tv),
        VanishingTime::Never => cap,
    }
}

fn closed_form_vs_rk4() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (r0, a, b) in [(11.0, 1.0, 10.0), (9.0, 1.0, 10.0), (10.0, -1.0, 10.0)] {
        let params = p(a, b);
        let end = window_end(params, r0, 20.0);
        let times: Vec<f64> = (0..=2000).map(|k| end * k as f64 / 2000.0).collect();
        let oracle = reference_sample(params, r0, &times, 1e-10).unwrap();
        for &(t, r_ref) in oracle.samples() {
            worst = worst.max((radius_at(params, r0, t).unwrap() - r_ref).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(1),
        format!("max deviation {worst:.2e}, {elapsed:.2?}"),
    )
}

fn special_limits() -> Outcome {
    let mut curvature_ulps = 0.0f64;
    let mut advection_ulps = 0.0f64;
    for &(b, r0) in &[(1.0, 10.0), (0.5, 1.0), (10.0, 9.0), (3.0, 0.2)] {
        let tv = r0 * r0 / (2.0 * b);
        for k in 0..1000 {
            let t = tv * k as f64 / 1000.0;
            let exact = (r0 * r0 - 2.0 * b * t).sqrt();
            let r = radius_at(p(0.0, b), r0, t).unwrap();
            curvature_ulps = curvature_ulps.max((r - exact).abs() / (f64::EPSILON * exact));
        }
    }
    for &(a, r0) in &[(-1.0, 10.0), (2.0, 1.0), (-0.3, 0.7)] {
        for k in 0..1000 {
            let t = 5.0 * k as f64 / 1000.0;
            let exact = r0 + a * t;
            if exact <= 0.0 {
                continue;
            }
            let r = radius_at(p(a, 0.0), r0, t).unwrap();
            advection_ulps = advection_ulps.max((r - exact).abs() / (f64::EPSILON * exact));
        }
    }
    // one-sided gap away from the collapse, two-sided mean up to it
    let mut gap = 0.0f64;
    let mut mean_gap = 0.0f64;
    for &(b, r0) in &[(1.0, 10.0), (10.0, 9.0), (0.5, 1.0)] {
        let tv = r0 * r0 / (2.0 * b);
        for k in 0..=400 {
            let t = 0.98 * tv * k as f64 / 400.0;
            let base = radius_at(p(0.0, b), r0, t).unwrap();
            let up = radius_at(p(1e-6, b), r0, t).unwrap();
            let down = radius_at(p(-1e-6, b), r0, t).unwrap();
            if t <= 0.8 * tv {
                gap = gap.max((up - base).abs()).max((down - base).abs());
            }
            mean_gap = mean_gap.max((0.5 * (up + down) - base).abs());
        }
    }
    outcome(
        curvature_ulps <= 2.0 && advection_ulps <= 1.0 && gap <= 1e-4 && mean_gap <= 1e-4,
        format!(
            "a=0 {curvature_ulps:.1} ulp, b=0 {advection_ulps:.1} ulp, \
             |a|=1e-6 gap {gap:.2e} (to 0.8 T_v), mean {mean_gap:.2e}"
        ),
    )
}

fn vanishing_times() -> Outcome {
    let mcf = vanishing_time(p(0.0, 1.0), 10.0).unwrap();
    let adv = vanishing_time(p(-1.0, 0.0), 10.0).unwrap();
    let mixed = vanishing_time(p(1.0, 10.0), 9.0).unwrap().finite().unwrap();
    let crossing = reference_integrate(p(1.0, 10.0), 9.0, 2.0 * mixed, 1e-10)
        .unwrap()
        .vanished_at
        .unwrap();
    let never = [10.0, 10.5, 11.0, 100.0]
        .iter()
        .all(|&r0| vanishing_time(p(1.0, 10.0), r0).unwrap() == VanishingTime::Never);
    outcome(
        mcf == VanishingTime::Finite(50.0)
            && adv == VanishingTime::Finite(10.0)
            && (mixed - crossing).abs() <= 1e-6
            && never,
        format!("{mcf:?}, {adv:?}, mixed {mixed:.12} vs RK4 {crossing:.12}, r0>=10 never: {never}"),
    )
}

fn meta_stability() -> Outcome {
    let times: Vec<f64> = (0..=10_000).map(|k| k as f64 * 0.01).collect();
    let traj = evolve_trajectory(p(1.0, 10.0), 10.0, &times).unwrap();
    let drift = traj.radii().map(|r| (r - 10.0).abs()).fold(0.0, f64::max);
    outcome(drift <= 1e-12, format!("max drift {drift:.2e}"))
}

struct Refinement {
    n: usize,
    h: f64,
    error: f64,
}

fn refinement(params: FlowParams, t_end: f64, sizes: &[usize]) -> Vec<Refinement> {
    sizes
        .iter()
        .map(|&n| {
            let spec = GridSpec::new(n, 2.0).unwrap();
            let run =
                evolve_detailed(spec, [0.0; 3], 1.0, params, t_end, t_end, DEFAULT_SAFETY).unwrap();
            let exact = radius_at(params, 1.0, t_end).unwrap();
            Refinement {
                n,
                h: spec.spacing(),
                error: (run.trajectory.last().1 - exact).abs(),
            }
        })
        .collect()
}

fn describe(rows: &[Refinement]) -> String {
    let mut s = String::new();
    for (k, r) in rows.iter().enumerate() {
        s += &format!("n={} err {:.2e} ({:.2}h)", r.n, r.error, r.error / r.h);
        if k > 0 {
            s += &format!(" order {:.2}", order(&rows[k - 1], r));
        }
        if k + 1 < rows.len() {
            s += "; ";
        }
    }
    s
}

fn order(coarse: &Refinement, fine: &Refinement) -> f64 {
    (coarse.error / fine.error).ln() / (coarse.h / fine.h).ln()
}

fn levelset_convergence() -> Outcome {
    let start = Instant::now();
    let sizes = [32, 64, 128];
    let mcf = refinement(p(0.0, 0.5), 0.6, &sizes);
    let adv = refinement(p(-1.0, 0.0), 0.5, &sizes);
    let within = |rows: &[Refinement]| rows.iter().all(|r| r.error <= 2.0 * r.h);
    let decreasing = |rows: &[Refinement]| rows.windows(2).all(|w| w[1].error < w[0].error);
    let ordered = mcf.windows(2).all(|w| order(&w[0], &w[1]) >= 0.9);
    outcome(
        within(&mcf) && decreasing(&mcf) && ordered && within(&adv) && decreasing(&adv),
        format!(
            "MCF [{}]; advection [{}]; {:.1?}",
            describe(&mcf),
            describe(&adv),
            start.elapsed()
        ),
    )
}

fn levelset_meta_stable() -> Outcome {
    let spec = GridSpec::new(64, 2.0).unwrap();
    let h = spec.spacing();
    let run = evolve_detailed(
        spec,
        [0.0; 3],
        1.0,
        p(10.0, 10.0),
        0.5,
        0.05,
        DEFAULT_SAFETY,
    )
    .unwrap();
    let (t_worst, drift) = run
        .trajectory
        .samples()
        .iter()
        .map(|&(t, r)| (t, (r - 1.0).abs()))
        .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let vanished = match run.vanished_at {
        Some(t) => format!(", vanished at t={t:.3}"),
        None => String::new(),
    };
    outcome(
        drift <= 2.0 * h,
        format!(
            "max |r-1| {drift:.3e} at t={t_worst:.2} vs 2h {:.3e}{vanished}",
            2.0 * h
        ),
    )
}

fn rel(x: f64, truth: f64) -> f64 {
    (x - truth).abs() / truth.abs()
}

fn param_error(fit: FlowParams, truth: FlowParams) -> f64 {
    rel(fit.a(), truth.a()).max(rel(fit.b(), truth.b()))
}

fn inverse_recovery() -> Outcome {
    let truth = p(1.0, 10.0);
    let times: Vec<f64> = (0..200).map(|k| 5.0 * k as f64 / 199.0).collect();
    let clean = evolve_trajectory(truth, 9.0, &times).unwrap();
    let lin = fit_linear(&clean).unwrap();
    let nonlin = fit_nonlinear(&clean, lin.params).unwrap();
    let lin_err = param_error(lin.params, truth);
    let nonlin_err = param_error(nonlin.params, truth);

    let noise = Normal::new(0.0, 1e-3).unwrap();
    let mut errors: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut samples = clean.samples().to_vec();
            for s in samples.iter_mut().skip(1) {
                s.1 += noise.sample(&mut rng);
            }
            let traj = RadiusTrajectory::new(samples).unwrap();
            let seed_fit = fit_linear(&traj).unwrap();
            param_error(fit_nonlinear(&traj, seed_fit.params).unwrap().params, truth)
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    let median = 0.5 * (errors[9] + errors[10]);

    let flat = RadiusTrajectory::new((0..200).map(|k| (k as f64 * 0.025, 9.0)).collect()).unwrap();
    let flagged = match fit_linear(&flat) {
        Err(FitError::DegenerateData(fit)) => fit.dominant_term_warning,
        Ok(fit) => fit.dominant_term_warning,
        Err(_) => false,
    } && match fit_nonlinear(&flat, truth) {
        Ok(fit) => fit.dominant_term_warning,
        Err(FitError::NoConvergence(fit)) => fit.dominant_term_warning,
        Err(FitError::DegenerateData(_)) => true,
        Err(_) => false,
    };
    outcome(
        nonlin_err <= 1e-6 && lin_err <= 1e-2 && median <= 5e-2 && flagged,
        format!(
            "nonlinear {nonlin_err:.2e}, linear {lin_err:.2e}, noisy median {median:.2e}, \
             constant flagged: {flagged}"
        ),
    )
}

fn cli_csv(args: &[&str]) -> Vec<(f64, f64)> {
    let config = RunConfig::from_args(["sphere-flow"].iter().chain(args)).unwrap();
    let mut out = Vec::new();
    run_to(&config, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn first_zero(rows: &[(f64, f64)]) -> Option<f64> {
    rows.iter().find(|r| r.1 == 0.0).map(|r| r.0)
}

fn figure_reproduction() -> Outcome {
    let analytic = |r0: &str, a: &str, b: &str, t: &str| {
        cli_csv(&[
            "--cmd", "analytic", "--r0", r0, "--a", a, "--b", b, "--t-end", t,
        ])
    };
    let fig1 = first_zero(&analytic("10", "-1", "0", "12"));
    let fig2 = first_zero(&analytic("10", "0", "1", "60"));
    let grow = analytic("11", "1", "10", "20");
    let shrink = analytic("9", "1", "10", "20");
    let fast = analytic("10", "-1", "10", "20");
    let tv = vanishing_time(p(1.0, 10.0), 9.0).unwrap().finite().unwrap();
    let tv_fast = vanishing_time(p(-1.0, 10.0), 10.0)
        .unwrap()
        .finite()
        .unwrap();
    let fig5 = first_zero(&grow).is_none()
        && first_zero(&shrink) == Some(tv)
        && first_zero(&fast) == Some(tv_fast);
    let phase = cli_csv(&["--cmd", "phase", "--a", "1", "--b", "10"]);
    let at_fixed = phase.iter().find(|r| r.0 == 10.0).map(|r| r.1);
    let all_finite = [&grow, &shrink, &fast, &phase]
        .iter()
        .all(|rows| rows.iter().all(|r| r.0.is_finite() && r.1.is_finite()));
    outcome(
        fig1 == Some(10.0) && fig2 == Some(50.0) && fig5 && at_fixed == Some(0.0) && all_finite,
        format!(
            "Fig.1 zero at {fig1:?}, Fig.2 at {fig2:?}, Fig.5 triplet {fig5} \
             (vanish {tv:.6}, {tv_fast:.6}), phase at r=10 {at_fixed:?}"
        ),
    )
}

fn gradient_check() -> Outcome {
    let params = p(1.0, 10.0);
    let times: Vec<f64> = (0..60).map(|k| 5.0 * k as f64 / 59.0).collect();
    let full = jacobian(params, 10.5, &times, JACOBIAN_STEP).unwrap();
    let half = jacobian(params, 10.5, &times, 0.5 * JACOBIAN_STEP).unwrap();
    let mut worst = 0.0f64;
    for (x, y) in full.iter().zip(&half).skip(1) {
        for c in 0..2 {
            worst = worst.max((x[c] - y[c]).abs() / y[c].abs());
        }
    }
    outcome(worst <= 1e-4, format!("max relative gap {worst:.2e}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Lambert W fidelity", lambert_fidelity),
        ("closed form vs RK4", closed_form_vs_rk4),
        ("special-case limits", special_limits),
        ("vanishing times", vanishing_times),
        ("meta-stability", meta_stability),
        ("level-set convergence", levelset_convergence),
        ("level-set meta-stable drift", levelset_meta_stable),
        ("inverse recovery", inverse_recovery),
        ("figure reproduction", figure_reproduction),
        ("gradient check", gradient_check),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let Outcome { pass, detail } = check();
        println!(
            "{} {:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1
        );
        failed += usize::from(!pass);
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
