//! Final-radius error of the level-set solver under grid refinement.

use sphere_flow::levelset::{evolve, GridSpec};
use sphere_flow::{radius_at, FlowParams};

fn main() {
    for (label, a, b, t_end) in [("curvature", 0.0, 0.5, 0.6), ("advection", -1.0, 0.0, 0.5)] {
        let params = FlowParams::new(a, b).unwrap();
        let exact = radius_at(params, 1.0, t_end).unwrap();
        let mut previous: Option<(f64, f64)> = None;
        println!("{label}: exact final radius {exact:.6}");
        for n in [16, 32, 64] {
            let spec = GridSpec::new(n, 2.0).unwrap();
            let r = evolve(spec, [0.0; 3], 1.0, params, t_end, t_end)
                .unwrap()
                .last()
                .1;
            let (h, err) = (spec.spacing(), (r - exact).abs());
            let order = previous.map(|(h0, e0)| (e0 / err).ln() / (h0 / h).ln());
            match order {
                Some(p) => println!("  n={n:3} h={h:.4} error={err:.3e} order={p:.2}"),
                None => println!("  n={n:3} h={h:.4} error={err:.3e}"),
            }
            previous = Some((h, err));
        }
    }
}
