//! Closed-form radius against the RK4 reference for a shrinking sphere.

use sphere_flow::{radius_at, reference_sample, FlowParams};

fn main() {
    let params = FlowParams::new(1.0, 10.0).unwrap();
    let r0 = 9.0;
    let times: Vec<f64> = (0..=14).map(f64::from).collect();
    let oracle = reference_sample(params, r0, &times, 1e-10).unwrap();
    println!(
        "{:>4} {:>20} {:>20} {:>10}",
        "t", "closed form", "rk4", "gap"
    );
    for &(t, r_ref) in oracle.samples() {
        let r = radius_at(params, r0, t).unwrap();
        println!("{t:4} {r:20.14} {r_ref:20.14} {:10.2e}", (r - r_ref).abs());
    }
}
