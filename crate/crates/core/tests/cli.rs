//! The `sphere-flow` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use sphere_flow::trajectory::fmt_f64;
use sphere_flow::{evolve_trajectory, FlowParams, RadiusTrajectory};

fn sphere_flow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphere-flow"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = sphere_flow(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Rows of a CSV with the given header, parsed as numbers.
fn table(text: &str, header: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    lines
        .map(|l| {
            l.split(',')
                .map(|x| {
                    let v: f64 = x.parse().unwrap();
                    assert!(v.is_finite(), "{l}");
                    v
                })
                .collect()
        })
        .collect()
}

fn first_zero(rows: &[Vec<f64>]) -> Option<f64> {
    rows.iter().find(|r| r[1] == 0.0).map(|r| r[0])
}

#[test]
fn linear_shrink_curve() {
    let rows = table(
        &stdout(&[
            "--cmd", "analytic", "--r0", "10", "--a", "-1", "--b", "0", "--t-end", "12",
        ]),
        "t,r",
    );
    assert_eq!(first_zero(&rows), Some(10.0));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
}

#[test]
fn curvature_shrink_curve() {
    let rows = table(
        &stdout(&[
            "--cmd", "analytic", "--r0", "10", "--a", "0", "--b", "1", "--t-end", "50",
        ]),
        "t,r",
    );
    assert_eq!(first_zero(&rows), Some(50.0));
    let (t, r) = (rows[180][0], rows[180][1]);
    assert!(
        (t - 18.0).abs() < 1e-12 && (r - 8.0).abs() < 1e-12,
        "{t} {r}"
    );
}

#[test]
fn mixed_flow_triplet() {
    let grow = table(
        &stdout(&["--cmd", "analytic", "--r0", "11", "--t-end", "15"]),
        "t,r",
    );
    assert!(grow.windows(2).all(|w| w[1][1] > w[0][1]));
    let shrink = table(
        &stdout(&["--cmd", "analytic", "--r0", "9", "--t-end", "15"]),
        "t,r",
    );
    let tv = first_zero(&shrink).unwrap();
    assert!((tv - (10.0 * 10f64.ln() - 9.0)).abs() < 1e-12, "{tv}");
    let fast = table(
        &stdout(&[
            "--cmd", "analytic", "--r0", "10", "--a", "-1", "--t-end", "15",
        ]),
        "t,r",
    );
    assert!(first_zero(&fast).unwrap() < tv);
}

#[test]
fn vanish_command() {
    assert_eq!(
        stdout(&["--cmd", "vanish", "--r0", "10", "--a", "-1", "--b", "0"]).trim(),
        format!("vanishing_time,{}", fmt_f64(10.0))
    );
    assert_eq!(
        stdout(&["--cmd", "vanish", "--r0", "10", "--a", "1"]).trim(),
        "vanishing_time,inf"
    );
}

#[test]
fn phase_portrait_zero() {
    let rows = table(
        &stdout(&["--cmd", "phase", "--a", "1", "--b", "10"]),
        "r,dr_dt",
    );
    let at_fixed = rows.iter().find(|r| r[0] == 10.0).unwrap();
    assert_eq!(at_fixed[1], 0.0);
    for r in &rows {
        assert!(r[1].signum() * (r[0] - 10.0).signum() >= 0.0);
    }
}

#[test]
fn invert_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("traj.csv");
    let output = dir.path().join("fit.csv");
    let times: Vec<f64> = (0..200).map(|k| 12.0 * k as f64 / 199.0).collect();
    let traj = evolve_trajectory(FlowParams::new(1.0, 10.0).unwrap(), 9.0, &times).unwrap();
    traj.write_csv(std::fs::File::create(&input).unwrap())
        .unwrap();
    let out = sphere_flow(&[
        "--cmd",
        "invert",
        "--in",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&output).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,b,residual,condition,warning"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (a, b): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
    assert!((a - 1.0).abs() < 1e-6 && (b - 10.0).abs() < 1e-5, "{a} {b}");
    assert_eq!(row[4], "false");
}

#[test]
fn invert_flags_constant_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    let flat = RadiusTrajectory::new((0..10).map(|k| (k as f64, 10.0)).collect()).unwrap();
    flat.write_csv(std::fs::File::create(&input).unwrap())
        .unwrap();
    let out = sphere_flow(&["--cmd", "invert", "--in", input.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",true"), "{text}");
    assert!(!String::from_utf8(out.stderr).unwrap().is_empty());
}

#[test]
fn levelset_command_and_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("field.bin");
    let text = stdout(&[
        "--cmd",
        "levelset",
        "--r0",
        "1",
        "--a",
        "-1",
        "--b",
        "0",
        "--t-end",
        "0.3",
        "--dt-sample",
        "0.1",
        "--n",
        "24",
        "--snapshot",
        snap.to_str().unwrap(),
    ]);
    let rows = table(&text, "t,r_numeric,r_analytic,abs_error");
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[3], (r[1] - r[2]).abs());
        assert!(r[3] <= 2.0 * 4.0 / 24.0);
    }
    let field =
        sphere_flow::levelset::LevelSetField::read_snapshot(std::fs::File::open(&snap).unwrap())
            .unwrap();
    assert_eq!(field.spec().n(), 24);
    assert_eq!(field.spec().extent(), 2.0);
}

#[test]
fn convergence_command() {
    let text = stdout(&[
        "--cmd",
        "convergence",
        "--r0",
        "1",
        "--a",
        "-1",
        "--b",
        "0",
        "--t-end",
        "0.25",
        "--n",
        "64",
        "--extent",
        "2",
    ]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,h,error,observed_order"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        ["16", "32", "64"]
    );
    assert_eq!(rows[0][3], "");
    let order: f64 = rows[2][3].parse().unwrap();
    assert!(order.is_finite());
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = sphere_flow(&[
            "--cmd",
            "levelset",
            "--r0",
            "1",
            "--a",
            "0",
            "--b",
            "0.5",
            "--t-end",
            "0.1",
            "--n",
            "20",
            "--extent",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(&path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
    assert_eq!(
        stdout(&["--cmd", "analytic"]),
        stdout(&["--cmd", "analytic"])
    );
}

#[test]
fn exit_codes() {
    for args in [
        &["--cmd", "analytic", "--b", "-1"][..],
        &["--cmd", "analytic", "--r0", "nan"],
        &["--cmd", "invert"],
        &["--cmd", "unknown"],
        &[],
    ] {
        let out = sphere_flow(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(!String::from_utf8_lossy(&out.stderr).contains("panicked"));
    }
    let missing = Path::new("/nonexistent/traj.csv");
    let out = sphere_flow(&["--cmd", "invert", "--in", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    // growth that runs into the boundary band of a fixed domain
    let out = sphere_flow(&[
        "--cmd", "levelset", "--r0", "1", "--a", "1", "--b", "0", "--t-end", "2", "--n", "16",
        "--extent", "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("boundary"));
    assert_eq!(sphere_flow(&["--help"]).status.code(), Some(0));
}
