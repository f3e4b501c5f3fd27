//! Radius-versus-time samples shared by the solvers and the inverse fit.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("trajectory is empty")]
    Empty,
    #[error("first sample must be at t = 0, found t = {0}")]
    NonZeroStart(f64),
    #[error("times must be strictly increasing (sample {index}: {prev} then {next})")]
    NotIncreasing { index: usize, prev: f64, next: f64 },
    #[error("sample {index} has invalid radius {r}")]
    BadRadius { index: usize, r: f64 },
    #[error("sample {index} has non-finite time")]
    BadTime { index: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv header must be `t,r`, found `{0}`")]
    Header(String),
}

/// Ordered `(t, r)` samples of a sphere radius.
///
/// Times start at zero and increase strictly; radii are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusTrajectory {
    samples: Vec<(f64, f64)>,
}

impl RadiusTrajectory {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, TrajectoryError> {
        let first = samples.first().ok_or(TrajectoryError::Empty)?;
        if first.0 != 0.0 {
            return Err(TrajectoryError::NonZeroStart(first.0));
        }
        for (index, &(t, r)) in samples.iter().enumerate() {
            if !t.is_finite() {
                return Err(TrajectoryError::BadTime { index });
            }
            if !(r.is_finite() && r >= 0.0) {
                return Err(TrajectoryError::BadRadius { index, r });
            }
        }
        for (index, pair) in samples.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(TrajectoryError::NotIncreasing {
                    index: index + 1,
                    prev: pair[0].0,
                    next: pair[1].0,
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn radii(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn initial_radius(&self) -> f64 {
        self.samples[0].1
    }

    pub fn last(&self) -> (f64, f64) {
        *self.samples.last().expect("trajectory is never empty")
    }

    /// Reads a `t,r` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TrajectoryError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "r" {
            return Err(TrajectoryError::Header(
                headers.iter().collect::<Vec<_>>().join(","),
            ));
        }
        let mut samples = Vec::new();
        for record in rdr.deserialize() {
            let (t, r): (f64, f64) = record?;
            samples.push((t, r));
        }
        Self::new(samples)
    }

    /// Writes a `t,r` CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TrajectoryError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t", "r"])?;
        for &(t, r) in &self.samples {
            wtr.write_record([fmt_f64(t), fmt_f64(r)])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
