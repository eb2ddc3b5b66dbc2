//! Exponential and logarithm of matrices over the algebra.
//!
//! The logarithm is the holomorphic functional calculus with a fixed branch
//! cut: one cut for all samples, so the pointwise logs glue into an element
//! of the algebra. A ray from 0 is used when one clears the spectrum;
//! otherwise a polyline through the free raster cells.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::algebra::MatrixOverAlgebra;
use crate::dense::{expm, logm_with, LogmError, Mat};
use crate::error::{Error, Result};
use crate::spectra::{spectrum, zero_in_unbounded_component, Raster, Spectrum};

/// Candidate ray angles `kπ/360`, covering `(-π, π]`.
const ANGLE_STEPS: i32 = 720;
/// Eigenvalues this close to the cut are rejected rather than logged.
const CUT_TOL: f64 = 1e-8;
const UNIPOTENT_TOL: f64 = 1e-8;

/// Pointwise matrix exponential.
pub fn mat_exp(b: &MatrixOverAlgebra) -> Result<MatrixOverAlgebra> {
    b.try_map(|s, m| {
        let e = expm(m);
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Numerical { index: s, message: "matrix exponential overflowed".into() })
        }
    })
}

/// Wraps an angle into `(-π, π]`.
pub(crate) fn wrap_angle(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

fn ray_distance(p: C64, theta: f64) -> f64 {
    let q = p * C64::from_polar(1.0, -theta);
    if q.re <= 0.0 {
        p.norm()
    } else {
        q.im.abs()
    }
}

/// Scans the candidate angles for rays keeping distance ≥ ρ from the
/// spectrum, scoring each by its angular clearance; ties go to the smallest
/// `|θ|`, then to the positive angle.
pub fn choose_branch_angle(s: &Spectrum) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for k in (-(ANGLE_STEPS / 2) + 1)..=(ANGLE_STEPS / 2) {
        let theta = k as f64 * PI / (ANGLE_STEPS / 2) as f64;
        if s.values().any(|p| ray_distance(p, theta) < s.resolution) {
            continue;
        }
        let score = s.values().map(|p| wrap_angle(p.arg() - theta).abs()).fold(f64::INFINITY, f64::min);
        let better = match best {
            None => true,
            Some((bt, bs)) => {
                if score > bs + 1e-12 {
                    true
                } else if score < bs - 1e-12 {
                    false
                } else {
                    theta.abs() < bt.abs() - 1e-12 || ((theta.abs() - bt.abs()).abs() <= 1e-12 && theta > bt)
                }
            }
        };
        if better {
            best = Some((theta, score));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::NoRayFound)
}

/// A continuous argument on the plane minus a polyline cut from 0 to the
/// raster border.
#[derive(Clone, Debug)]
pub struct ArgField {
    raster: Raster,
    cut: Vec<bool>,
    arg: Vec<f64>,
}

impl ArgField {
    /// Cuts along the breadth-first escape path of 0 and propagates the
    /// argument over the remaining cells.
    pub fn new(s: &Spectrum) -> Result<Self> {
        let raster = Raster::new(s);
        let path = raster.escape_path().ok_or(Error::NotInSigmaN)?;
        let mut cut = vec![false; raster.len()];
        for &k in &path {
            cut[k] = true;
        }
        let mut arg = vec![f64::NAN; raster.len()];
        let start = (0..raster.len()).find(|&k| !cut[k]).ok_or(Error::NoRayFound)?;
        arg[start] = raster.center(start).arg();
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for nb in raster.neighbours(k) {
                if !cut[nb] && arg[nb].is_nan() {
                    arg[nb] = arg[k] + wrap_angle(raster.center(nb).arg() - arg[k]);
                    queue.push_back(nb);
                }
            }
        }
        Ok(ArgField { raster, cut, arg })
    }

    pub fn arg(&self, z: C64) -> Option<f64> {
        let k = self.raster.cell_of(z)?;
        if self.cut[k] || self.arg[k].is_nan() {
            return None;
        }
        Some(self.arg[k] + wrap_angle(z.arg() - self.arg[k]))
    }
}

/// The branch of the logarithm used for a whole matrix.
#[derive(Clone, Debug)]
pub enum Branch {
    /// Cut along the ray at this angle; arguments in `(θ − 2π, θ]`.
    Ray(f64),
    Field(Box<ArgField>),
}

impl Branch {
    pub fn log(&self, z: C64) -> Option<C64> {
        if z.norm() == 0.0 {
            return None;
        }
        let arg = match self {
            Branch::Ray(theta) => {
                if ray_distance(z, *theta) <= CUT_TOL * z.norm().max(1.0) {
                    return None;
                }
                theta - (theta - z.arg()).rem_euclid(2.0 * PI)
            }
            Branch::Field(f) => f.arg(z)?,
        };
        Some(C64::new(z.norm().ln(), arg))
    }
}

/// Ray branch if one exists, otherwise the polyline cut. Requires 0 in the
/// unbounded component of the complement.
pub fn choose_branch(s: &Spectrum) -> Result<Branch> {
    if !zero_in_unbounded_component(s)? {
        return Err(Error::NotInSigmaN);
    }
    match choose_branch_angle(s) {
        Ok(theta) => Ok(Branch::Ray(theta)),
        Err(Error::NoRayFound) => {
            log::debug!("no clear ray; falling back to a polyline cut");
            Ok(Branch::Field(Box::new(ArgField::new(s)?)))
        }
        Err(e) => Err(e),
    }
}

/// Logarithm of one dense matrix in the given branch.
pub fn log_dense(m: &Mat, branch: &Branch) -> std::result::Result<Mat, LogmError> {
    logm_with(m, |z| branch.log(z))
}

pub(crate) fn logm_error(index: usize, e: LogmError) -> Error {
    match e {
        LogmError::Branch(_) => Error::BranchViolation { index },
        LogmError::Schur(k) => Error::Numerical { index, message: format!("Schur iteration stalled at eigenvalue {k}") },
        LogmError::Breakdown => Error::Numerical { index, message: "square-root recurrence broke down".into() },
        LogmError::NoConvergence => Error::Numerical { index, message: "inverse scaling and squaring did not converge".into() },
    }
}

/// Pointwise logarithm with one branch for all samples.
pub fn mat_log_with(a: &MatrixOverAlgebra, branch: &Branch) -> Result<MatrixOverAlgebra> {
    a.try_map(|s, m| log_dense(m, branch).map_err(|e| logm_error(s, e)))
}

/// Pointwise logarithm with the cut along the ray at angle `theta`.
pub fn mat_log_branch(a: &MatrixOverAlgebra, theta: f64) -> Result<MatrixOverAlgebra> {
    mat_log_with(a, &Branch::Ray(theta))
}

/// Logarithm of a matrix whose spectrum leaves 0 in the unbounded component.
pub fn direct_log(a: &MatrixOverAlgebra) -> Result<MatrixOverAlgebra> {
    let s = spectrum(a)?;
    let branch = choose_branch(&s)?;
    mat_log_with(a, &branch)
}

/// `max |(A − I)^n|` over entries.
pub fn unipotent_deviation(m: &Mat) -> f64 {
    m.shift(C64::new(-1.0, 0.0)).powi(m.dim()).max_abs()
}

/// Finite log series `Σ (−1)^{i+1}/i · N^i` for `N = A − I` nilpotent.
pub fn log_unipotent_dense(m: &Mat) -> Mat {
    let n = m.dim();
    let nil = m.shift(C64::new(-1.0, 0.0));
    let mut power = nil.clone();
    let mut acc = Mat::zeros(n);
    for i in 1..n {
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        acc = &acc + &power.scale(C64::new(sign / i as f64, 0.0));
        power = &power * &nil;
    }
    acc
}

/// Logarithm of a unipotent matrix by the terminating series.
pub fn log_unipotent(a: &MatrixOverAlgebra) -> Result<MatrixOverAlgebra> {
    let deviation = a.samples().iter().map(unipotent_deviation).fold(0.0, f64::max);
    if !(deviation <= UNIPOTENT_TOL) {
        return Err(Error::NotUnipotent { deviation });
    }
    Ok(a.map(log_unipotent_dense))
}
