//! Vanishing time and regime around the fixed point r = b/a.

use sphere_flow::{classify_regime, vanishing_time, FlowParams, VanishingTime};

fn main() {
    let cases = [
        (0.0, 1.0, 10.0),
        (-1.0, 0.0, 10.0),
        (1.0, 10.0, 9.0),
        (1.0, 10.0, 9.99),
        (1.0, 10.0, 10.0),
        (-1.0, 10.0, 10.0),
    ];
    for (a, b, r0) in cases {
        let params = FlowParams::new(a, b).unwrap();
        let regime = classify_regime(params, r0).unwrap();
        let tv = match vanishing_time(params, r0).unwrap() {
            VanishingTime::Finite(t) => format!("{t:.10}"),
            VanishingTime::Never => "never".into(),
        };
        println!("a={a:5} b={b:5} r0={r0:6}  {regime:?}  vanishes: {tv}");
    }
}
