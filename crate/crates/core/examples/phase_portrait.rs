//! Sign of dr/dt on either side of the meta-stable radius.

use sphere_flow::{prescribed_curvature, FlowParams};

fn main() {
    let params = FlowParams::new(1.0, 10.0).unwrap();
    let fixed = 1.0 / prescribed_curvature(params).unwrap();
    println!("fixed radius {fixed}");
    for r in [1.0, 5.0, 9.0, 9.9, 10.0, 10.1, 11.0, 20.0, 100.0] {
        let rate = params.rate(r);
        let arrow = if rate > 0.0 {
            "grows"
        } else if rate < 0.0 {
            "shrinks"
        } else {
            "stays"
        };
        println!("r={r:6}  dr/dt={rate:+.6}  {arrow}");
    }
}
