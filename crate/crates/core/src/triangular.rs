//! Two exponentials for triangular matrices with diagonal product one.
//!
//! The diagonal part `D` is a commutator `C⁻¹R⁻¹CR` with `R` the cyclic
//! shift, and `R` has a constant logarithm. What is left after peeling off
//! `D` is unipotent, and conjugating by `diag(1, t, …, t^{n−1})` shrinks it
//! towards `I`, so that `R·A(t)` has its spectrum near the roots of unity and
//! hence a logarithm.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::algebra::{AlgebraElement, MatrixOverAlgebra, Space, INVERT_TOL};
use crate::certify::{verify_factorization, ClaimKind, FactorizationCertificate};
use crate::dense::{Mat, ONE, ZERO};
use crate::error::{Error, Result};
use crate::matfunc::{choose_branch, mat_log_with, wrap_angle};
use crate::spectra::{in_eps_neighborhood, spectrum, EpsNeighborhood};

const DIAG_PRODUCT_TOL: f64 = 1e-10;
/// Looser product tolerance accepted by the full pipeline.
pub const PIPELINE_PRODUCT_TOL: f64 = 1e-9;
const UNIPOTENT_TOL: f64 = 1e-8;
const TRIANGULAR_TOL: f64 = 1e-12;
/// Reconstruction tolerance recorded in triangular certificates.
pub const TRIANGULAR_CERT_TOL: f64 = 1e-7;
const MAX_HALVINGS: i32 = 60;

/// The `n`-cycle `e_i ↦ e_{i+1}` (indices mod `n`).
pub fn cyclic_shift_dense(n: usize) -> Result<Mat> {
    if n < 2 {
        return Err(Error::Config(format!("cyclic shift needs n >= 2, got {n}")));
    }
    Ok(Mat::from_fn(n, |i, j| if i == (j + 1) % n { ONE } else { ZERO }))
}

pub fn cyclic_shift(space: &Space, n: usize) -> Result<MatrixOverAlgebra> {
    Ok(MatrixOverAlgebra::constant(space, &cyclic_shift_dense(n)?))
}

/// Logarithm of the cycle from its Fourier eigenbasis: eigenvector
/// `(ω^{−kj})_j` has eigenvalue `ω^k`, whose log angle is taken in `(−π, π]`.
pub fn log_cyclic_dense(n: usize) -> Result<Mat> {
    if n < 2 {
        return Err(Error::Config(format!("cyclic shift needs n >= 2, got {n}")));
    }
    let step = 2.0 * PI / n as f64;
    let phases: Vec<f64> = (0..n).map(|k| wrap_angle(step * k as f64)).collect();
    Ok(Mat::from_fn(n, |j, l| {
        let d = j as f64 - l as f64;
        let s: C64 = phases.iter().enumerate().map(|(k, &phi)| C64::from_polar(phi, -step * k as f64 * d)).sum();
        C64::new(0.0, 1.0) * s / n as f64
    }))
}

pub fn log_cyclic(space: &Space, n: usize) -> Result<MatrixOverAlgebra> {
    Ok(MatrixOverAlgebra::constant(space, &log_cyclic_dense(n)?))
}

/// `diag(1, t, …, t^{n−1})`.
pub fn scale_matrix(t: C64, n: usize) -> Result<Mat> {
    if t == ZERO {
        return Err(Error::Config("scale parameter t must be nonzero".into()));
    }
    Ok(Mat::diag(&scale_diag(t, n)))
}

fn scale_diag(t: C64, n: usize) -> Vec<C64> {
    (0..n).map(|i| t.powu(i as u32)).collect()
}

/// Data of the commutator identity `D = C⁻¹R⁻¹CR`.
#[derive(Clone, Debug)]
pub struct CommutatorData {
    /// `diag(1, d₁, d₁d₂, …)`.
    pub c: MatrixOverAlgebra,
    pub c_inv: MatrixOverAlgebra,
    pub rn: Mat,
    pub rn_log: Mat,
    /// `−C⁻¹·log R·C`, so that `exp(b1)·exp(b2) = D`.
    pub b1: MatrixOverAlgebra,
    /// `log R`.
    pub b2: MatrixOverAlgebra,
}

fn max_product_deviation(diag: &[AlgebraElement]) -> f64 {
    let m = diag[0].space().len();
    (0..m)
        .map(|s| (diag.iter().map(|d| d.value(s)).product::<C64>() - ONE).norm())
        .fold(0.0, f64::max)
}

fn commutator_data(diag: &[AlgebraElement], tol: f64) -> Result<CommutatorData> {
    let n = diag.len();
    let space = diag[0].space().clone();
    for d in diag {
        d.invert(INVERT_TOL)?;
    }
    let deviation = max_product_deviation(diag);
    if !(deviation <= tol) {
        return Err(Error::ProductNotOne { deviation });
    }
    let mut c_entries = vec![AlgebraElement::one(&space)];
    for i in 1..n {
        let next = c_entries[i - 1].mul(&diag[i - 1])?;
        c_entries.push(next);
    }
    let c = MatrixOverAlgebra::diag(&c_entries)?;
    let c_inv = c.map(|m| Mat::diag(&m.diagonal().iter().map(|v| v.inv()).collect::<Vec<_>>()));
    let rn = cyclic_shift_dense(n)?;
    let rn_log = log_cyclic_dense(n)?;
    let b1 = c.zip_map(&c_inv, |c, ci| -&(&(ci * &rn_log) * c))?;
    let b2 = MatrixOverAlgebra::constant(&space, &rn_log);
    Ok(CommutatorData { c, c_inv, rn, rn_log, b1, b2 })
}

/// Writes a diagonal with product one as `C⁻¹R⁻¹CR`.
pub fn commutator_factor_diagonal(d: &MatrixOverAlgebra) -> Result<CommutatorData> {
    if d.samples().iter().any(|m| m.max_abs_off_diagonal() > 0.0) {
        return Err(Error::NotDiagonal);
    }
    commutator_data(&d.diagonal(), DIAG_PRODUCT_TOL)
}

/// `A(t) = R⁻¹C⁻¹RC · D(t)⁻¹AD(t)`: the unipotent remainder after the
/// diagonal part, with its off-diagonal scaled towards zero.
pub fn residual_unipotent(a: &MatrixOverAlgebra, t: C64, cd: &CommutatorData) -> Result<MatrixOverAlgebra> {
    let n = a.dim();
    let dt = scale_diag(t, n);
    let dt_inv: Vec<C64> = dt.iter().map(|v| v.inv()).collect();
    let r_inv = cd.rn.transpose();
    let rn = &cd.rn;
    let out = a.try_map(|s, m| {
        let c = cd.c.at(s);
        let ci = cd.c_inv.at(s);
        let left = &(&(&r_inv * ci) * rn) * c;
        Ok(&left * &m.diag_similarity(&dt_inv))
    })?;
    let deviation = out
        .samples()
        .iter()
        .map(|m| {
            let diag = m.diagonal().iter().map(|v| (v - ONE).norm()).fold(0.0, f64::max);
            diag.max(m.max_abs_below_diagonal())
        })
        .fold(0.0, f64::max);
    if !(deviation <= UNIPOTENT_TOL) {
        return Err(Error::NonUnipotentResult { deviation });
    }
    Ok(out)
}

/// First `t = 2^{-k}` (k = 0..60) with `σ(R·A(t)) ⊂ N_ε`.
pub fn choose_t(a: &MatrixOverAlgebra, eps: f64, cd: &CommutatorData) -> Result<f64> {
    let n = a.dim();
    check_epsilon(eps, n)?;
    let nbhd = EpsNeighborhood { n, eps };
    for k in 0..=MAX_HALVINGS {
        let t = 2f64.powi(-k);
        let at = residual_unipotent(a, C64::new(t, 0.0), cd)?;
        let rat = at.map(|m| &cd.rn * m);
        if in_eps_neighborhood(&spectrum(&rat)?, nbhd) {
            return Ok(t);
        }
    }
    Err(Error::ScheduleExhausted { schedule: "t" })
}

fn check_epsilon(eps: f64, n: usize) -> Result<()> {
    let bound = (PI / n as f64).sin();
    if !(eps > 0.0 && eps < bound) {
        return Err(Error::InvalidEpsilon { epsilon: eps, bound });
    }
    Ok(())
}

/// Output of the triangular pipeline.
#[derive(Clone, Debug)]
pub struct TriangularFactorization {
    pub b1: MatrixOverAlgebra,
    pub b2: MatrixOverAlgebra,
    pub t: f64,
    pub certificate: FactorizationCertificate,
}

fn is_upper(a: &MatrixOverAlgebra) -> bool {
    a.max_abs_below_diagonal() <= TRIANGULAR_TOL * a.max_abs().max(1.0)
}

fn is_lower(a: &MatrixOverAlgebra) -> bool {
    a.max_abs_above_diagonal() <= TRIANGULAR_TOL * a.max_abs().max(1.0)
}

/// Reversal permutation; conjugating by it swaps upper and lower triangular.
fn reversal(n: usize) -> Mat {
    Mat::from_fn(n, |i, j| if i + j == n - 1 { ONE } else { ZERO })
}

/// Factors (b1, b2) without building a certificate.
pub(crate) fn two_exp_triangular_factors(a: &MatrixOverAlgebra, eps: f64) -> Result<(MatrixOverAlgebra, MatrixOverAlgebra, f64)> {
    let n = a.dim();
    if n == 1 {
        let dev = max_product_deviation(&a.diagonal());
        if !(dev <= PIPELINE_PRODUCT_TOL) {
            return Err(Error::ProductNotOne { deviation: dev });
        }
        let z = MatrixOverAlgebra::zeros(a.space(), 1);
        return Ok((z.clone(), z, 1.0));
    }
    if !is_upper(a) {
        if is_lower(a) {
            let j = reversal(n);
            let (b1, b2, t) = two_exp_triangular_factors(&a.conjugate_const(&j, &j), eps)?;
            return Ok((b1.conjugate_const(&j, &j), b2.conjugate_const(&j, &j), t));
        }
        return Err(Error::NotTriangular);
    }
    check_epsilon(eps, n)?;
    let cd = commutator_data(&a.diagonal(), PIPELINE_PRODUCT_TOL)?;
    let t = choose_t(a, eps, &cd)?;
    let at = residual_unipotent(a, C64::new(t, 0.0), &cd)?;
    let rat = at.map(|m| &cd.rn * m);
    let branch = choose_branch(&spectrum(&rat)?)?;
    let log_rat = mat_log_with(&rat, &branch)?;
    let dt = scale_diag(C64::new(t, 0.0), n);
    let b1 = cd.b1.map(|m| m.diag_similarity(&dt));
    let b2 = log_rat.map(|m| m.diag_similarity(&dt));
    Ok((b1, b2, t))
}

/// `A = exp(B1)·exp(B2)` with `σ(exp B1) = Sₙ` and `σ(exp B2) ⊂ N_ε`, for
/// triangular `A` whose diagonal entries multiply to one.
pub fn two_exp_triangular(a: &MatrixOverAlgebra, eps: f64) -> Result<TriangularFactorization> {
    let n = a.dim();
    let (b1, b2, t) = two_exp_triangular_factors(a, eps)?;
    let claims = if n >= 2 {
        vec![(0, ClaimKind::EqualsSn { n }), (1, ClaimKind::WithinNeps { n, eps })]
    } else {
        vec![]
    };
    let certificate = verify_factorization(a, &[b1.clone(), b2.clone()], &claims, TRIANGULAR_CERT_TOL)?;
    Ok(TriangularFactorization { b1, b2, t, certificate })
}
