//! Level-set solver for `φ_t + (a - bκ)|∇φ| = 0` on a cell-centred cube grid.
//!
//! The surface is the zero set of `φ`, with `φ < 0` inside, so `∇φ/|∇φ|` is
//! the outward normal. Time stepping is forward Euler. The advective term
//! `a|∇φ|` uses first-order Godunov upwinding on the sign of `a`, and the
//! curvature term `bκ|∇φ|` uses central differences.
//!
//! Curvature convention: [`mean_curvature`] returns half the divergence of the
//! unit normal. On a sphere that is `1/r`, not the `2/r` sum of principal
//! curvatures, so `b` here means the same thing as in [`crate::analytic`].
//!
//! Boundary cells copy their nearest interior neighbour (homogeneous Neumann).
//! No reinitialisation is performed.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{FlowError, FlowParams};
use crate::trajectory::{fmt_f64, RadiusTrajectory, TrajectoryError};

/// Gradient magnitude below which the curvature is undefined.
pub const GRADIENT_FLOOR: f64 = 1e-8;

/// Half-width of the smoothed Heaviside used by [`extract_radius`], in cells.
pub const HEAVISIDE_WIDTH: f64 = 1.5;

/// CFL safety factor used by [`evolve`].
pub const DEFAULT_SAFETY: f64 = 0.9;

/// Cells closer than this to the boundary must stay outside the surface.
const BOUNDARY_BAND: usize = 2;

#[derive(Debug, Error)]
pub enum LevelSetError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("gradient vanishes at cell {0:?}")]
    DegenerateGradient([usize; 3]),
    #[error("time step {dt:e} exceeds the stable limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("zero level set is empty")]
    EmptySurface,
    #[error("surface reached the boundary band at t = {t}")]
    DomainEscape { t: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// `n³` cells covering `[-extent, extent]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    extent: f64,
}

impl GridSpec {
    pub fn new(n: usize, extent: f64) -> Result<Self, LevelSetError> {
        if n < 8 {
            return Err(LevelSetError::Domain(format!(
                "need at least 8 cells per axis, got {n}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(LevelSetError::Domain(format!(
                "extent must be positive, got {extent}"
            )));
        }
        Ok(Self { n, extent })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Centre of cell `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.spacing()
    }

    pub fn point(&self, [i, j, k]: [usize; 3]) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Flat index; `k` varies fastest.
    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * self.n + j) * self.n + k
    }
}

/// Samples of `φ` at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    spec: GridSpec,
    values: Vec<f64>,
    center: [f64; 3],
}

impl LevelSetField {
    pub fn new(spec: GridSpec, center: [f64; 3], values: Vec<f64>) -> Result<Self, LevelSetError> {
        if values.len() != spec.len() {
            return Err(LevelSetError::Domain(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LevelSetError::Domain(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self {
            spec,
            values,
            center,
        })
    }

    /// Builds a field by evaluating `f` at every cell centre.
    pub fn from_fn(
        spec: GridSpec,
        center: [f64; 3],
        f: impl Fn([f64; 3]) -> f64 + Sync,
    ) -> Result<Self, LevelSetError> {
        let n = spec.n;
        let mut values = vec![0.0; spec.len()];
        values
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(i, slab)| {
                for j in 0..n {
                    for k in 0..n {
                        slab[j * n + k] = f(spec.point([i, j, k]));
                    }
                }
            });
        Self::new(spec, center, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: [usize; 3]) -> f64 {
        self.values[self.spec.index(idx)]
    }

    /// Trilinear interpolation of `φ` at an arbitrary point inside the cell-centre hull.
    pub fn sample(&self, p: [f64; 3]) -> f64 {
        let h = self.spec.spacing();
        let n = self.spec.n;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            let s = ((p[d] + self.spec.extent) / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            base[d] = i;
            frac[d] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = base;
            for d in 0..3 {
                if corner >> d & 1 == 1 {
                    idx[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            acc += w * self.value(idx);
        }
        acc
    }

    fn any_inside(&self) -> bool {
        self.values.iter().any(|&v| v <= 0.0)
    }

    /// True if a cell within the boundary band is inside the surface.
    fn touches_boundary(&self) -> bool {
        let n = self.spec.n;
        let band = |i: usize| i < BOUNDARY_BAND || i >= n - BOUNDARY_BAND;
        (0..n).any(|i| {
            let slab = &self.values[i * n * n..(i + 1) * n * n];
            if band(i) {
                return slab.iter().any(|&v| v <= 0.0);
            }
            (0..n).any(|j| {
                let row = &slab[j * n..(j + 1) * n];
                if band(j) {
                    row.iter().any(|&v| v <= 0.0)
                } else {
                    row[..BOUNDARY_BAND]
                        .iter()
                        .chain(&row[n - BOUNDARY_BAND..])
                        .any(|&v| v <= 0.0)
                }
            })
        })
    }

    /// Writes the binary snapshot: `n` as u64, then `extent` and the three
    /// centre coordinates, then all values with `k` fastest; little-endian throughout.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.spec.n as u64).to_le_bytes())?;
        w.write_all(&self.spec.extent.to_le_bytes())?;
        for c in self.center {
            w.write_all(&c.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, LevelSetError> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| LevelSetError::Snapshot("cell count does not fit in usize".into()))?;
        let mut read_f64 = |r: &mut R| -> io::Result<f64> {
            r.read_exact(&mut word)?;
            Ok(f64::from_le_bytes(word))
        };
        let extent = read_f64(&mut r)?;
        let center = [read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?];
        let spec = GridSpec::new(n, extent)?;
        let mut bytes = vec![0u8; spec.len() * 8];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(LevelSetError::Snapshot(
                "trailing bytes after field values".into(),
            ));
        }
        Self::new(spec, center, values)
    }

    /// Writes the plane `k = const` as CSV with columns `i,j,x,y,phi`.
    pub fn write_slice_csv<W: Write>(&self, k: usize, w: W) -> Result<(), LevelSetError> {
        let n = self.spec.n;
        if k >= n {
            return Err(LevelSetError::Domain(format!(
                "slice index {k} out of range 0..{n}"
            )));
        }
        let mut wtr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| LevelSetError::Io(e.into());
        wtr.write_record(["i", "j", "x", "y", "phi"])
            .map_err(io_err)?;
        for i in 0..n {
            for j in 0..n {
                wtr.write_record([
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(self.spec.coord(i)),
                    fmt_f64(self.spec.coord(j)),
                    fmt_f64(self.value([i, j, k])),
                ])
                .map_err(io_err)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Exact signed distance `|x - center| - r0` to a sphere.
pub fn init_sphere_sdf(
    spec: GridSpec,
    center: [f64; 3],
    r0: f64,
) -> Result<LevelSetField, LevelSetError> {
    let h = spec.spacing();
    if !(r0.is_finite() && r0 >= 4.0 * h) {
        return Err(LevelSetError::Domain(format!(
            "radius {r0} is under-resolved; need at least 4 cells (4h = {})",
            4.0 * h
        )));
    }
    let reach = center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + r0;
    if reach >= spec.extent - BOUNDARY_BAND as f64 * h {
        return Err(LevelSetError::Domain(format!(
            "sphere reaches {reach}, beyond the interior of [-{e}, {e}]",
            e = spec.extent
        )));
    }
    LevelSetField::from_fn(spec, center, |p| {
        let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - r0
    })
}

/// Central-difference derivatives at one cell.
struct Stencil {
    gx: f64,
    gy: f64,
    gz: f64,
    xx: f64,
    yy: f64,
    zz: f64,
    xy: f64,
    xz: f64,
    yz: f64,
}

impl Stencil {
    #[inline(always)]
    fn at(v: &[f64], c: usize, si: usize, sj: usize, inv_h: f64) -> Self {
        let phi = v[c];
        let (xm, xp) = (v[c - si], v[c + si]);
        let (ym, yp) = (v[c - sj], v[c + sj]);
        let (zm, zp) = (v[c - 1], v[c + 1]);
        let half = 0.5 * inv_h;
        let inv_h2 = inv_h * inv_h;
        let quarter = 0.25 * inv_h2;
        Self {
            gx: (xp - xm) * half,
            gy: (yp - ym) * half,
            gz: (zp - zm) * half,
            xx: (xp - 2.0 * phi + xm) * inv_h2,
            yy: (yp - 2.0 * phi + ym) * inv_h2,
            zz: (zp - 2.0 * phi + zm) * inv_h2,
            xy: (v[c + si + sj] - v[c + si - sj] - v[c - si + sj] + v[c - si - sj]) * quarter,
            xz: (v[c + si + 1] - v[c + si - 1] - v[c - si + 1] + v[c - si - 1]) * quarter,
            yz: (v[c + sj + 1] - v[c + sj - 1] - v[c - sj + 1] + v[c - sj - 1]) * quarter,
        }
    }

    fn grad_sq(&self) -> f64 {
        self.gx * self.gx + self.gy * self.gy + self.gz * self.gz
    }

    /// `div(∇φ/|∇φ|)·|∇φ|³`.
    fn divergence_numerator(&self) -> f64 {
        let (x2, y2, z2) = (self.gx * self.gx, self.gy * self.gy, self.gz * self.gz);
        self.xx * (y2 + z2) + self.yy * (x2 + z2) + self.zz * (x2 + y2)
            - 2.0
                * (self.gx * self.gy * self.xy
                    + self.gx * self.gz * self.xz
                    + self.gy * self.gz * self.yz)
    }
}

/// Mean curvature `κ = ½·div(∇φ/|∇φ|)` at an interior cell.
///
/// Cells within two layers of the boundary are rejected: those neighbours are
/// Neumann copies and bias the stencil.
pub fn mean_curvature(field: &LevelSetField, idx: [usize; 3]) -> Result<f64, LevelSetError> {
    let n = field.spec.n;
    if idx.iter().any(|&i| i < 2 || i + 2 >= n) {
        return Err(LevelSetError::Domain(format!(
            "cell {idx:?} is too close to the boundary"
        )));
    }
    let inv_h = 1.0 / field.spec.spacing();
    let s = Stencil::at(&field.values, field.spec.index(idx), n * n, n, inv_h);
    let g2 = s.grad_sq();
    if g2.sqrt() < GRADIENT_FLOOR {
        return Err(LevelSetError::DegenerateGradient(idx));
    }
    Ok(0.5 * s.divergence_numerator() / (g2 * g2.sqrt()))
}

/// Largest stable explicit step scaled by `safety`: `safety / (|a|/h + 6·2b/h²)`.
///
/// Returns `f64::INFINITY` when `a = b = 0` (nothing moves).
///
/// # Panics
///
/// If `safety` is outside `(0, 1]`.
pub fn cfl_dt(field: &LevelSetField, params: FlowParams, safety: f64) -> f64 {
    assert!(
        safety > 0.0 && safety <= 1.0,
        "CFL safety must lie in (0, 1], got {safety}"
    );
    let h = field.spec.spacing();
    let b_eff = 2.0 * params.b();
    let rate = params.a().abs() / h + 6.0 * b_eff / (h * h);
    if rate == 0.0 {
        f64::INFINITY
    } else {
        safety / rate
    }
}

/// One forward-Euler step of `φ_t = -a|∇φ|_upwind + bκ|∇φ|`.
pub fn step(
    field: &LevelSetField,
    params: FlowParams,
    dt: f64,
) -> Result<LevelSetField, LevelSetError> {
    let mut next = vec![0.0; field.values.len()];
    step_into(field, params, dt, &mut next)?;
    Ok(LevelSetField {
        spec: field.spec,
        values: next,
        center: field.center,
    })
}

/// [`step`] writing into a caller-owned buffer of `n³` values.
fn step_into(
    field: &LevelSetField,
    params: FlowParams,
    dt: f64,
    next: &mut [f64],
) -> Result<(), LevelSetError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LevelSetError::Domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let limit = cfl_dt(field, params, 1.0);
    if dt > limit * (1.0 + 1e-12) {
        return Err(LevelSetError::CflViolation { dt, limit });
    }
    if params.a() == 0.0 && params.b() == 0.0 {
        next.copy_from_slice(&field.values);
        return Ok(());
    }

    let n = field.spec.n;
    let si = n * n;
    let kernel = Kernel {
        n,
        inv_h: 1.0 / field.spec.spacing(),
        a: params.a(),
        b: params.b(),
        dt,
    };
    let src = &field.values;
    next.par_chunks_mut(si)
        .enumerate()
        .filter(|(i, _)| *i >= 1 && *i + 1 < n)
        .for_each(|(i, slab)| kernel.slab(src, i, slab));
    copy_face(next, si, n);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(LevelSetError::Domain(
            "update produced a non-finite value".into(),
        ));
    }
    Ok(())
}

/// Copies slab 1 onto slab 0 and slab n-2 onto slab n-1 for blocks of `len`.
fn copy_face(v: &mut [f64], len: usize, n: usize) {
    let (head, tail) = v.split_at_mut(len);
    head.copy_from_slice(&tail[..len]);
    let (body, last) = v.split_at_mut((n - 1) * len);
    last.copy_from_slice(&body[(n - 2) * len..]);
}

struct Kernel {
    n: usize,
    inv_h: f64,
    a: f64,
    b: f64,
    dt: f64,
}

/// Godunov `|∇φ|` from backward and forward differences on the three axes,
/// for a front moving outward (`outward = true`) or inward.
#[inline(always)]
fn godunov(d: [(f64, f64); 3], outward: bool) -> f64 {
    let (out, inward) = godunov_sq(d);
    if outward { out } else { inward }.sqrt()
}

/// Squared Godunov gradients for outward and inward motion.
#[inline(always)]
fn godunov_sq(d: [(f64, f64); 3]) -> (f64, f64) {
    let (mut out, mut inward) = (0.0, 0.0);
    for (dm, dp) in d {
        out += dm.max(0.0).powi(2) + dp.min(0.0).powi(2);
        inward += dm.min(0.0).powi(2) + dp.max(0.0).powi(2);
    }
    (out, inward)
}

/// The nine rows around row `(i, j)` used by the stencil, shifted so that
/// index `k` of a `*0`, `*1`, `*2` slice is cell `k`, `k + 1`, `k + 2`.
struct Rows<'a> {
    c0: &'a [f64],
    c1: &'a [f64],
    c2: &'a [f64],
    xm0: &'a [f64],
    xm1: &'a [f64],
    xm2: &'a [f64],
    xp0: &'a [f64],
    xp1: &'a [f64],
    xp2: &'a [f64],
    ym0: &'a [f64],
    ym1: &'a [f64],
    ym2: &'a [f64],
    yp0: &'a [f64],
    yp1: &'a [f64],
    yp2: &'a [f64],
    mm: &'a [f64],
    mp: &'a [f64],
    pm: &'a [f64],
    pp: &'a [f64],
}

impl<'a> Rows<'a> {
    fn new(src: &'a [f64], n: usize, i: usize, j: usize) -> Self {
        let len = n - 2;
        let row = |ii: usize, jj: usize| &src[(ii * n + jj) * n..(ii * n + jj + 1) * n];
        let shift = |r: &'a [f64], o: usize| -> &'a [f64] { &r[o..o + len] };
        let (c, xm, xp, ym, yp) = (
            row(i, j),
            row(i - 1, j),
            row(i + 1, j),
            row(i, j - 1),
            row(i, j + 1),
        );
        Self {
            c0: shift(c, 0),
            c1: shift(c, 1),
            c2: shift(c, 2),
            xm0: shift(xm, 0),
            xm1: shift(xm, 1),
            xm2: shift(xm, 2),
            xp0: shift(xp, 0),
            xp1: shift(xp, 1),
            xp2: shift(xp, 2),
            ym0: shift(ym, 0),
            ym1: shift(ym, 1),
            ym2: shift(ym, 2),
            yp0: shift(yp, 0),
            yp1: shift(yp, 1),
            yp2: shift(yp, 2),
            mm: shift(row(i - 1, j - 1), 1),
            mp: shift(row(i - 1, j + 1), 1),
            pm: shift(row(i + 1, j - 1), 1),
            pp: shift(row(i + 1, j + 1), 1),
        }
    }

    #[inline(always)]
    fn one_sided(&self, k: usize, inv_h: f64) -> [(f64, f64); 3] {
        let phi = self.c1[k];
        [
            ((phi - self.xm1[k]) * inv_h, (self.xp1[k] - phi) * inv_h),
            ((phi - self.ym1[k]) * inv_h, (self.yp1[k] - phi) * inv_h),
            ((phi - self.c0[k]) * inv_h, (self.c2[k] - phi) * inv_h),
        ]
    }

    /// Clamped curvature and central gradient magnitude at cell `k + 1`.
    #[inline(always)]
    fn curvature(&self, k: usize, inv_h: f64) -> (f64, f64) {
        let half = 0.5 * inv_h;
        let inv_h2 = inv_h * inv_h;
        let quarter = 0.25 * inv_h2;
        let phi = self.c1[k];
        let s = Stencil {
            gx: (self.xp1[k] - self.xm1[k]) * half,
            gy: (self.yp1[k] - self.ym1[k]) * half,
            gz: (self.c2[k] - self.c0[k]) * half,
            xx: (self.xp1[k] - 2.0 * phi + self.xm1[k]) * inv_h2,
            yy: (self.yp1[k] - 2.0 * phi + self.ym1[k]) * inv_h2,
            zz: (self.c2[k] - 2.0 * phi + self.c0[k]) * inv_h2,
            xy: (self.pp[k] - self.pm[k] - self.mp[k] + self.mm[k]) * quarter,
            xz: (self.xp2[k] - self.xp0[k] - self.xm2[k] + self.xm0[k]) * quarter,
            yz: (self.yp2[k] - self.yp0[k] - self.ym2[k] + self.ym0[k]) * quarter,
        };
        let g2 = s.grad_sq();
        let g = g2.sqrt();
        let raw = (0.5 * s.divergence_numerator() / (g2 * g))
            .max(-inv_h)
            .min(inv_h);
        (if g < GRADIENT_FLOOR { 0.0 } else { raw }, g)
    }
}

impl Kernel {
    /// Updates the interior of slab `i` and fills its Neumann edges.
    fn slab(&self, src: &[f64], i: usize, slab: &mut [f64]) {
        let n = self.n;
        let len = n - 2;
        let (a, b, dt, inv_h) = (self.a, self.b, self.dt, self.inv_h);
        for j in 1..n - 1 {
            let rows = Rows::new(src, n, i, j);
            let out_row = &mut slab[j * n..(j + 1) * n];
            let out = &mut out_row[1..1 + len];
            // -φ_t = F|∇φ| with F = a - bκ
            if b == 0.0 {
                let outward = a > 0.0;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = rows.c1[k] - dt * a * godunov(rows.one_sided(k, inv_h), outward);
                }
            } else if a == 0.0 {
                for (k, o) in out.iter_mut().enumerate() {
                    let (kappa, g) = rows.curvature(k, inv_h);
                    *o = rows.c1[k] + dt * b * kappa * g;
                }
            } else {
                for (k, o) in out.iter_mut().enumerate() {
                    let (kappa, _) = rows.curvature(k, inv_h);
                    let speed = a - b * kappa;
                    let (outward, inward) = godunov_sq(rows.one_sided(k, inv_h));
                    let g = if speed > 0.0 { outward } else { inward }.sqrt();
                    *o = rows.c1[k] - dt * speed * g;
                }
            }
            out_row[0] = out_row[1];
            out_row[n - 1] = out_row[n - 2];
        }
        copy_face(slab, n, n);
    }
}

/// Smoothed Heaviside of half-width `eps`.
fn heaviside(x: f64, eps: f64) -> f64 {
    if x <= -eps {
        0.0
    } else if x >= eps {
        1.0
    } else {
        0.5 * (1.0 + x / eps + (PI * x / eps).sin() / PI)
    }
}

/// Radius of the sphere with the same enclosed volume as `{φ < 0}`.
///
/// The Heaviside is applied to the distance estimate `φ/|∇φ|` rather than to
/// `φ` itself. On a signed distance function the two agree; once the flow has
/// steepened or flattened the field, only the former keeps the smoothing
/// band `HEAVISIDE_WIDTH` cells wide.
pub fn extract_radius(field: &LevelSetField) -> Result<f64, LevelSetError> {
    if !field.any_inside() {
        return Err(LevelSetError::EmptySurface);
    }
    let h = field.spec.spacing();
    let eps = HEAVISIDE_WIDTH * h;
    let n = field.spec.n;
    let v = &field.values;
    let cells: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let phi = v[(i * n + j) * n + k];
                    let d = if phi.abs() >= 2.0 * eps {
                        // far from the band only the sign matters
                        phi
                    } else {
                        let at = |i: usize, j: usize, k: usize| v[(i * n + j) * n + k];
                        let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * h);
                        let (il, ih) = (i.saturating_sub(1), (i + 1).min(n - 1));
                        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(n - 1));
                        let (kl, kh) = (k.saturating_sub(1), (k + 1).min(n - 1));
                        let gx = diff(at(il, j, k), at(ih, j, k), ih - il);
                        let gy = diff(at(i, jl, k), at(i, jh, k), jh - jl);
                        let gz = diff(at(i, j, kl), at(i, j, kh), kh - kl);
                        let g = (gx * gx + gy * gy + gz * gz).sqrt();
                        if g < GRADIENT_FLOOR {
                            phi
                        } else {
                            phi / g
                        }
                    };
                    acc += heaviside(-d, eps);
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        // summed in slab order so the result does not depend on scheduling
        .sum();
    let volume = cells * h * h * h;
    Ok((3.0 * volume / (4.0 * PI)).cbrt())
}

/// Result of a level-set run.
#[derive(Debug, Clone)]
pub struct Evolution {
    /// Measured radius at `t = 0`, every `sample_every`, and `t_end`; ends
    /// with `(t, 0)` if the surface vanished.
    pub trajectory: RadiusTrajectory,
    pub field: LevelSetField,
    pub vanished_at: Option<f64>,
    pub steps: usize,
}

/// Evolves a sphere and records its measured radius.
pub fn evolve(
    spec: GridSpec,
    center: [f64; 3],
    r0: f64,
    params: FlowParams,
    t_end: f64,
    sample_every: f64,
) -> Result<RadiusTrajectory, LevelSetError> {
    evolve_detailed(
        spec,
        center,
        r0,
        params,
        t_end,
        sample_every,
        DEFAULT_SAFETY,
    )
    .map(|e| e.trajectory)
}

/// [`evolve`] with an explicit CFL safety factor, returning the final field.
pub fn evolve_detailed(
    spec: GridSpec,
    center: [f64; 3],
    r0: f64,
    params: FlowParams,
    t_end: f64,
    sample_every: f64,
    safety: f64,
) -> Result<Evolution, LevelSetError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(LevelSetError::Domain(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    if !(sample_every.is_finite() && sample_every > 0.0) {
        return Err(LevelSetError::Domain(format!(
            "sample interval must be positive, got {sample_every}"
        )));
    }
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(LevelSetError::Domain(format!(
            "CFL safety must lie in (0, 1], got {safety}"
        )));
    }
    let mut field = init_sphere_sdf(spec, center, r0)?;

    let mut times: Vec<f64> = (1..)
        .map(|k| k as f64 * sample_every)
        .take_while(|&t| t < t_end * (1.0 - 1e-12))
        .collect();
    if t_end > 0.0 {
        times.push(t_end);
    }

    let dt_max = cfl_dt(&field, params, safety);
    let mut scratch = vec![0.0; field.values.len()];
    let mut samples = vec![(0.0, extract_radius(&field)?)];
    let mut t = 0.0;
    let mut steps = 0;
    let mut vanished_at = None;

    'outer: for &target in &times {
        let span = target - t;
        let substeps = if dt_max.is_finite() {
            (span / dt_max).ceil().max(1.0) as usize
        } else {
            1
        };
        let dt = span / substeps as f64;
        let start = t;
        for s in 1..=substeps {
            step_into(&field, params, dt, &mut scratch)?;
            std::mem::swap(&mut field.values, &mut scratch);
            steps += 1;
            let now = if s == substeps {
                target
            } else {
                start + s as f64 * dt
            };
            if !field.any_inside() {
                vanished_at = Some(now);
                samples.push((now, 0.0));
                break 'outer;
            }
            if field.touches_boundary() {
                return Err(LevelSetError::DomainEscape { t: now });
            }
        }
        t = target;
        samples.push((t, extract_radius(&field)?));
    }

    Ok(Evolution {
        trajectory: RadiusTrajectory::new(samples)?,
        field,
        vanished_at,
        steps,
    })
}
