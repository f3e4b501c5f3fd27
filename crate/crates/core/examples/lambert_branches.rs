//! Both real branches of W on either side of the branch point.

use sphere_flow::{lambert_w, LambertBranch};

fn main() {
    println!("{:>14} {:>22} {:>22}", "z", "W0(z)", "W-1(z)");
    for z in [
        -0.3678,
        -0.3,
        -0.1,
        -1e-3,
        -1e-12,
        0.0,
        1.0,
        std::f64::consts::E,
        1e3,
        1e300,
    ] {
        let w0 = lambert_w(LambertBranch::Principal, z).unwrap();
        let wm1 = match lambert_w(LambertBranch::Secondary, z) {
            Ok(w) => format!("{w:22.15e}"),
            Err(_) => format!("{:>22}", "-"),
        };
        println!("{z:14.6e} {w0:22.15e} {wm1}");
    }
}
