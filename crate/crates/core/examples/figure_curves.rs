//! Writes the radius curves of the three flow families as CSV files.

use std::fs::File;

use sphere_flow::{evolve_trajectory, FlowParams};

type Family = (&'static str, &'static [(f64, f64, f64)], f64);

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let families: [Family; 3] = [
        (
            "advection",
            &[(-1.0, 0.0, 10.0), (-0.5, 0.0, 10.0), (1.0, 0.0, 10.0)],
            20.0,
        ),
        (
            "curvature",
            &[(0.0, 1.0, 10.0), (0.0, 2.0, 10.0), (0.0, 0.5, 10.0)],
            100.0,
        ),
        (
            "mixed",
            &[(1.0, 10.0, 11.0), (1.0, 10.0, 9.0), (-1.0, 10.0, 10.0)],
            15.0,
        ),
    ];
    for (name, cases, t_end) in families {
        for (k, &(a, b, r0)) in cases.iter().enumerate() {
            let times: Vec<f64> = (0..=500).map(|i| t_end * f64::from(i) / 500.0).collect();
            let traj = evolve_trajectory(FlowParams::new(a, b)?, r0, &times)?;
            let path = format!("{dir}/{name}_{k}.csv");
            traj.write_csv(File::create(&path)?)?;
            println!("{path}: a={a} b={b} r0={r0}, final r={}", traj.last().1);
        }
    }
    Ok(())
}
