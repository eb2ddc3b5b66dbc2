//! Certificates for factorizations, and the negative suite around the
//! matrix `T = [[g, 1], [0, 1]]`, `g = e^{2πix}` on the interval, which has
//! no logarithm but is a product of two exponentials.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{make_backend, AlgebraElement, Backend, MatrixOverAlgebra, Space, INVERT_TOL};
use crate::dense::{Mat, ZERO};
use crate::error::{Error, Result};
use crate::general::{factorize_two_exp, ReductionTrace};
use crate::literal::MatrixLiteral;
use crate::matfunc::{direct_log, mat_exp};
use crate::spectra::{spectrum, zero_in_unbounded_component};

pub const SCHEMA: &str = "expfact-cert-1";
/// Hausdorff tolerance for "spectrum equals the roots of unity".
pub const SN_TOL: f64 = 1e-8;
/// Holomorphy residual accepted for disk-grid factors.
pub const HOLOMORPHY_TOL: f64 = 1e-6;
const OBSTRUCTION_TOL: f64 = 1e-12;
const MIN_T_SAMPLES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimKind {
    /// `σ(exp B)` is the set of `n`-th roots of unity.
    EqualsSn { n: usize },
    /// `σ(exp B)` lies in the closed ε-neighbourhood of the roots.
    WithinNeps { n: usize, eps: f64 },
    /// `exp B` has 0 in the unbounded component of its spectrum's complement.
    InSigmaN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralClaim {
    pub factor: usize,
    pub claim: ClaimKind,
    pub verified: bool,
    /// Threshold minus measured value; nonnegative when verified.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationCertificate {
    pub schema: String,
    pub backend: Backend,
    pub n: usize,
    pub input: MatrixLiteral,
    pub factors: Vec<MatrixLiteral>,
    pub factor_count: usize,
    pub norms: Vec<f64>,
    pub residual: f64,
    pub claims: Vec<SpectralClaim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_continuity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holomorphy: Option<f64>,
    pub tol: f64,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ReductionTrace>,
}

impl FactorizationCertificate {
    pub fn space(&self) -> Result<Space> {
        make_backend(self.backend)
    }

    pub fn input_matrix(&self, space: &Space) -> Result<MatrixOverAlgebra> {
        self.input.to_matrix(space)
    }

    pub fn factor_matrices(&self, space: &Space) -> Result<Vec<MatrixOverAlgebra>> {
        self.factors.iter().map(|f| f.to_matrix(space)).collect()
    }

    /// Recomputes every number from the stored input and factors.
    pub fn recheck(&self) -> Result<FactorizationCertificate> {
        let space = self.space()?;
        let a = self.input_matrix(&space)?;
        let factors = self.factor_matrices(&space)?;
        let claims: Vec<(usize, ClaimKind)> = self.claims.iter().map(|c| (c.factor, c.claim)).collect();
        let mut cert = verify_factorization(&a, &factors, &claims, self.tol)?;
        cert.trace = self.trace.clone();
        Ok(cert)
    }
}

fn check_claim(e: &MatrixOverAlgebra, claim: ClaimKind) -> Result<(bool, f64)> {
    let s = spectrum(e)?;
    Ok(match claim {
        ClaimKind::EqualsSn { n } => {
            let h = s.hausdorff_to_roots(n);
            (h <= SN_TOL, SN_TOL - h)
        }
        ClaimKind::WithinNeps { n, eps } => {
            let worst = s.values().map(|v| crate::spectra::distance_to_roots(v, n)).fold(0.0, f64::max);
            (worst <= eps, eps - worst)
        }
        ClaimKind::InSigmaN => {
            let margin = s.min_abs() - s.resolution;
            (matches!(zero_in_unbounded_component(&s), Ok(true)), margin)
        }
    })
}

/// Recomputes `Π exp(B_i)`, its distance to `A`, the spectral claims, and
/// the continuity or holomorphy residuals the backend calls for.
pub fn verify_factorization(
    a: &MatrixOverAlgebra,
    factors: &[MatrixOverAlgebra],
    claims: &[(usize, ClaimKind)],
    tol: f64,
) -> Result<FactorizationCertificate> {
    for (i, f) in factors.iter().enumerate() {
        if f.dim() != a.dim() || f.space().backend() != a.space().backend() {
            return Err(Error::Structural(format!("factor {i} does not match the input's shape or backend")));
        }
    }
    if let Some(&(i, _)) = claims.iter().find(|(i, _)| *i >= factors.len()) {
        return Err(Error::Structural(format!("claim refers to missing factor {i}")));
    }
    let exps = factors.iter().map(mat_exp).collect::<Result<Vec<_>>>()?;
    let mut product = MatrixOverAlgebra::identity(a.space(), a.dim());
    for e in &exps {
        product = product.mul(e)?;
    }
    let residual = product.max_diff(a)?;
    let mut checked = Vec::with_capacity(claims.len());
    for &(factor, claim) in claims {
        let (verified, margin) = check_claim(&exps[factor], claim)?;
        checked.push(SpectralClaim { factor, claim, verified, margin });
    }
    let space = a.space();
    let (continuity, input_continuity) = if space.is_path() {
        let mut worst = 0.0f64;
        for f in factors {
            worst = worst.max(continuity_report(f)?);
        }
        (Some(worst), Some(continuity_report(a)?))
    } else {
        (None, None)
    };
    let holomorphy = if space.boundary_count().is_some() {
        let mut worst = 0.0f64;
        for f in factors {
            worst = worst.max(f.holomorphy_residual()?);
        }
        Some(worst)
    } else {
        None
    };
    let verified = residual <= tol
        && checked.iter().all(|c| c.verified)
        && holomorphy.is_none_or(|h| h <= HOLOMORPHY_TOL);
    Ok(FactorizationCertificate {
        schema: SCHEMA.into(),
        backend: space.backend(),
        n: a.dim(),
        input: MatrixLiteral::from_matrix(a),
        factors: factors.iter().map(MatrixLiteral::from_matrix).collect(),
        factor_count: factors.len(),
        norms: factors.iter().map(MatrixOverAlgebra::max_norm).collect(),
        residual,
        claims: checked,
        continuity,
        input_continuity,
        holomorphy,
        tol,
        verified,
        trace: None,
    })
}

/// Max entry jump between adjacent path samples (the circle wraps around).
pub fn continuity_report(m: &MatrixOverAlgebra) -> Result<f64> {
    let space = m.space();
    if !space.is_path() {
        return Err(Error::UnsupportedBackend(format!(
            "continuity report needs a path backend, got {}",
            space.backend().name()
        )));
    }
    Ok(space
        .edges()
        .iter()
        .map(|&(s, t)| {
            let (a, b) = (m.at(s), m.at(t));
            a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max))
}

fn t_space_check(space: &Space) -> Result<()> {
    match space.backend() {
        Backend::IntervalPath { samples } if samples >= MIN_T_SAMPLES => Ok(()),
        Backend::IntervalPath { samples } => Err(Error::TooFewSamples { required: MIN_T_SAMPLES, actual: samples }),
        other => Err(Error::UnsupportedBackend(format!("T needs interval_path, got {}", other.name()))),
    }
}

/// `g = e^{2πix}` on the interval.
pub fn circle_function(space: &Space) -> AlgebraElement {
    AlgebraElement::from_fn(space, |x| C64::new(0.0, 2.0 * PI * x.re).exp())
}

/// `T = [[g, 1], [0, 1]]`.
pub fn build_t_counterexample(space: &Space) -> Result<MatrixOverAlgebra> {
    t_space_check(space)?;
    let g = circle_function(space);
    MatrixOverAlgebra::from_entries(2, &[g, AlgebraElement::one(space), AlgebraElement::zero(space), AlgebraElement::one(space)])
}

/// `diag(M·I_{n−2}, T)` with `M = 1 + max|g|`.
pub fn build_tn(space: &Space, n: usize) -> Result<MatrixOverAlgebra> {
    if n < 3 {
        return Err(Error::Config(format!("T_n needs n >= 3, got {n}")));
    }
    let t = build_t_counterexample(space)?;
    let m = 1.0 + t.entry(0, 0).max_abs();
    Ok(t.map(|s| {
        Mat::from_fn(n, |i, j| {
            if i < n - 2 || j < n - 2 {
                if i == j {
                    C64::new(m, 0.0)
                } else {
                    ZERO
                }
            } else {
                s[(i - (n - 2), j - (n - 2))]
            }
        })
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionCase {
    /// Signs in `f₁ = ±e^{f/2}`, `f₄ = ±1`.
    pub f1_sign: i8,
    pub f4_sign: i8,
    /// Where `f₁ + f₄` is evaluated.
    pub x: f64,
    pub sum_magnitude: f64,
    pub contradiction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub cases: Vec<ObstructionCase>,
    pub no_continuous_sqrt: bool,
}

/// Replays the case analysis showing `T` has no continuous square root of
/// the required shape: the diagonal of a root must be `f₁ = ±e^{f/2}`,
/// `f₄ = ±1`, and in each of the four sign choices `f₁ + f₄` vanishes at an
/// end of the interval, while `(f₁ + f₄)·f₂ = 1` forbids that.
pub fn verify_t_obstruction(t: &MatrixOverAlgebra) -> Result<ObstructionReport> {
    t_space_check(t.space())?;
    let f = t.entry(0, 0).log_exp1(INVERT_TOL)?;
    let last = f.values().len() - 1;
    let half_exp = |i: usize| (f.value(i) * 0.5).exp();
    let mut cases = Vec::with_capacity(4);
    for (s1, s4, idx) in [(1i8, -1i8, 0usize), (-1, 1, 0), (1, 1, last), (-1, -1, last)] {
        let sum = half_exp(idx) * s1 as f64 + C64::new(s4 as f64, 0.0);
        let x = t.space().coords()[idx].re;
        let mag = sum.norm();
        cases.push(ObstructionCase { f1_sign: s1, f4_sign: s4, x, sum_magnitude: mag, contradiction: mag <= OBSTRUCTION_TOL });
    }
    let no_continuous_sqrt = cases.iter().all(|c| c.contradiction);
    Ok(ObstructionReport { cases, no_continuous_sqrt })
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteRow {
    pub instance: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TSuiteReport {
    pub samples: usize,
    pub rows: Vec<SuiteRow>,
    pub passed: bool,
}

/// Two-exponential reconstruction bound on the `T` instances.
pub const T_RESIDUAL_TOL: f64 = 1e-7;

/// Runs the negative and positive checks on `T` and `T₃`.
pub fn run_t_suite(samples: usize, eps: f64) -> Result<TSuiteReport> {
    let space = make_backend(Backend::IntervalPath { samples })?;
    let t = build_t_counterexample(&space)?;
    let t3 = build_tn(&space, 3)?;
    let mut rows = Vec::new();
    for (name, m) in [("T", &t), ("T3", &t3)] {
        let (passed, detail) = match direct_log(m) {
            Err(Error::NotInSigmaN) => (true, "NotInSigmaN".to_string()),
            Err(e) => (false, format!("unexpected error: {e}")),
            Ok(_) => (false, "a logarithm was produced".to_string()),
        };
        rows.push(SuiteRow { instance: name.into(), check: "direct_log".into(), passed, detail });

        if name == "T" {
            let report = verify_t_obstruction(m)?;
            let hits = report.cases.iter().filter(|c| c.contradiction).count();
            let worst = report.cases.iter().map(|c| c.sum_magnitude).fold(0.0, f64::max);
            rows.push(SuiteRow {
                instance: name.into(),
                check: "obstruction".into(),
                passed: report.no_continuous_sqrt,
                detail: format!("{hits}/4 cases, max |f1+f4| = {worst:.1e}"),
            });
        }

        match factorize_two_exp(m, eps) {
            Ok(f) => {
                let cert = &f.certificate;
                rows.push(SuiteRow {
                    instance: name.into(),
                    check: "two_exp".into(),
                    passed: cert.residual <= T_RESIDUAL_TOL,
                    detail: format!("residual {:.2e}", cert.residual),
                });
                let jump = cert.continuity.unwrap_or(f64::NAN);
                let input_jump = cert.input_continuity.unwrap_or(f64::NAN);
                rows.push(SuiteRow {
                    instance: name.into(),
                    check: "continuity".into(),
                    passed: jump <= 10.0 * input_jump,
                    detail: format!("factor jump {jump:.3e} vs input {input_jump:.3e}"),
                });
            }
            Err(e) => rows.push(SuiteRow {
                instance: name.into(),
                check: "two_exp".into(),
                passed: false,
                detail: format!("failed: {}", e.root()),
            }),
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(TSuiteReport { samples, rows, passed })
}

impl TSuiteReport {
    pub fn table(&self) -> String {
        let mut out = format!("T counterexample suite on interval_path({})\n", self.samples);
        out.push_str(&format!("{:<8} {:<12} {:<6} {}\n", "matrix", "check", "result", "detail"));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:<12} {:<6} {}\n",
                r.instance,
                r.check,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(m: usize) -> Space {
        make_backend(Backend::IntervalPath { samples: m }).unwrap()
    }

    #[test]
    fn identity_with_zero_factor() {
        let sp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        let id = MatrixOverAlgebra::identity(&sp, 2);
        let cert = verify_factorization(&id, &[MatrixOverAlgebra::zeros(&sp, 2)], &[(0, ClaimKind::InSigmaN)], 1e-12).unwrap();
        assert_eq!(cert.residual, 0.0);
        assert!(cert.verified);
        assert_eq!(cert.factor_count, 1);
    }

    #[test]
    fn corrupted_factor_fails() {
        let sp = make_backend(Backend::FinitePoints { count: 1 }).unwrap();
        let b = MatrixOverAlgebra::constant(&sp, &Mat::from_real_rows(&[&[0.1, 0.4], &[0.0, -0.2]]));
        let a = mat_exp(&b).unwrap();
        let good = verify_factorization(&a, std::slice::from_ref(&b), &[], 1e-9).unwrap();
        assert!(good.verified);
        let mut bad = b.clone();
        let mut e = bad.entry(0, 1);
        e = e.map(|v| v + 0.1);
        bad.set_entry(0, 1, &e);
        let cert = verify_factorization(&a, &[bad], &[], 1e-9).unwrap();
        assert!(cert.residual > 1e-3);
        assert!(!cert.verified);
    }

    #[test]
    fn t_endpoints_and_spectrum() {
        let sp = interval(257);
        let t = build_t_counterexample(&sp).unwrap();
        let jordan = Mat::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!((t.at(0) - &jordan).max_abs() < 1e-15);
        assert!((t.at(256) - &jordan).max_abs() < 1e-12);
        assert!(matches!(direct_log(&t), Err(Error::NotInSigmaN)));
        assert!(matches!(build_t_counterexample(&interval(16)), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn tn_block_structure() {
        let sp = interval(129);
        let t3 = build_tn(&sp, 3).unwrap();
        assert_eq!(t3.at(5)[(0, 0)], C64::new(2.0, 0.0));
        assert_eq!(t3.at(5)[(0, 1)], ZERO);
        let t = build_t_counterexample(&sp).unwrap();
        let shifted = t.map(|m| m.shift(C64::new(-2.0, 0.0)));
        // smallest singular value of a 2x2 is |det| / largest singular value
        let smin = shifted
            .samples()
            .iter()
            .map(|m| m.det().norm() / m.norm_fro())
            .fold(f64::INFINITY, f64::min);
        assert!(smin > 0.2, "{smin}");
        assert!(matches!(direct_log(&t3), Err(Error::NotInSigmaN)));
    }

    #[test]
    fn obstruction_cases() {
        let t = build_t_counterexample(&interval(257)).unwrap();
        let report = verify_t_obstruction(&t).unwrap();
        assert_eq!(report.cases.len(), 4);
        assert!(report.no_continuous_sqrt);
        assert_eq!(report.cases[0].x, 0.0);
        assert_eq!(report.cases[2].x, 1.0);
        assert!(report.cases.iter().all(|c| c.sum_magnitude <= 1e-12));
    }

    #[test]
    fn continuity_examples() {
        let sp = interval(257);
        assert_eq!(continuity_report(&MatrixOverAlgebra::identity(&sp, 2)).unwrap(), 0.0);
        let g = circle_function(&sp);
        let gm = MatrixOverAlgebra::diag(std::slice::from_ref(&g)).unwrap();
        let jump = continuity_report(&gm).unwrap();
        assert!(jump <= 0.025 && (jump - 2.0 * PI / 256.0).abs() < 1e-4);
        // principal log of g jumps by 2π where g crosses the negative axis
        let principal = MatrixOverAlgebra::diag(&[g.map(|v| v.ln())]).unwrap();
        assert!((continuity_report(&principal).unwrap() - 2.0 * PI).abs() < 0.1);
        let fp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        assert!(continuity_report(&MatrixOverAlgebra::identity(&fp, 1)).is_err());
    }
}
