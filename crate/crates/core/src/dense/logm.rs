use num_complex::Complex64 as C64;

use super::{balance, schur, Mat, ZERO};

/// ‖T − I‖₁ below which the degree-8 Padé approximant to log(I + X) is
/// accurate to unit roundoff.
const PADE_THRESHOLD: f64 = 0.25;
const PADE_DEGREE: usize = 8;
const MAX_SQRTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogmError {
    /// Schur iteration failed to converge at this eigenvalue index.
    Schur(usize),
    /// The scalar branch rejected an eigenvalue (it lies on the cut).
    Branch(C64),
    /// Square-root recurrence broke down (eigenvalue roots sum to zero).
    Breakdown,
    /// Repeated square roots did not bring the matrix near the identity.
    NoConvergence,
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d.is_finite() {
            dp = d;
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Upper-triangular square root with prescribed diagonal `roots`
/// (each `roots[i]² = t[i][i]`), column by column.
pub fn sqrt_upper_triangular(t: &Mat, roots: &[C64]) -> Option<Mat> {
    let n = t.dim();
    let mut r = Mat::zeros(n);
    for j in 0..n {
        r[(j, j)] = roots[j];
        for i in (0..j).rev() {
            let mut s = t[(i, j)];
            for k in i + 1..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let den = r[(i, i)] + r[(j, j)];
            if den.norm() == 0.0 {
                if s.norm() == 0.0 {
                    continue;
                }
                return None;
            }
            r[(i, j)] = s / den;
        }
    }
    r.is_finite().then_some(r)
}

/// Logarithm of an upper-triangular `t` whose diagonal logarithms are
/// `logs` (the branch is fixed by the caller). Inverse scaling and squaring:
/// take square roots until `T` is near `I`, apply the partial-fraction Padé
/// form of `log(I + X)`, scale back, and restore the exact diagonal.
pub fn log_upper_triangular(t: &Mat, logs: &[C64]) -> Result<Mat, LogmError> {
    let n = t.dim();
    let id = Mat::identity(n);
    let mut cur = t.clone();
    let mut k = 0;
    while (&cur - &id).norm_one() > PADE_THRESHOLD {
        if k == MAX_SQRTS {
            return Err(LogmError::NoConvergence);
        }
        k += 1;
        let scale = 2f64.powi(-(k as i32));
        let roots: Vec<C64> = logs.iter().map(|l| (l * scale).exp()).collect();
        cur = sqrt_upper_triangular(&cur, &roots).ok_or(LogmError::Breakdown)?;
    }
    let x = &cur - &id;
    let (nodes, weights) = gauss_legendre(PADE_DEGREE);
    let mut l = Mat::zeros(n);
    for (&xj, &wj) in nodes.iter().zip(&weights) {
        let den = &id + &x.scale(C64::new(xj, 0.0));
        let term = den.lu().solve_mat(&x).ok_or(LogmError::Breakdown)?;
        l = &l + &term.scale(C64::new(wj, 0.0));
    }
    let mut l = l.scale(C64::new(2f64.powi(k as i32), 0.0));
    for (i, &li) in logs.iter().enumerate() {
        l[(i, i)] = li;
    }
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = ZERO;
        }
    }
    Ok(l)
}

/// Matrix logarithm with the scalar branch supplied by `scalar_log`
/// (returning `None` for eigenvalues the branch cannot take).
pub fn logm_with(a: &Mat, scalar_log: impl Fn(C64) -> Option<C64>) -> Result<Mat, LogmError> {
    let b = balance(a);
    let use_balanced = !b.is_trivial() && b.matrix.norm_one() < a.norm_one();
    let work = if use_balanced { &b.matrix } else { a };
    let s = schur(work).map_err(LogmError::Schur)?;
    let logs = s
        .t
        .diagonal()
        .into_iter()
        .map(|ev| scalar_log(ev).ok_or(LogmError::Branch(ev)))
        .collect::<Result<Vec<_>, _>>()?;
    let lt = log_upper_triangular(&s.t, &logs)?;
    let l = &(&s.q * &lt) * &s.q.adjoint();
    Ok(if use_balanced { b.restore(&l) } else { l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{expm, ONE};

    fn principal(z: C64) -> Option<C64> {
        (z != ZERO).then(|| z.ln())
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // exact up to degree 15
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((integral - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let t = Mat::from_real_rows(&[&[4.0, 1.0, 2.0], &[0.0, 9.0, -3.0], &[0.0, 0.0, 1.0]]);
        let roots = [C64::new(2.0, 0.0), C64::new(3.0, 0.0), ONE];
        let r = sqrt_upper_triangular(&t, &roots).unwrap();
        assert!((&(&r * &r) - &t).max_abs() < 1e-14);
    }

    #[test]
    fn log_roundtrip_nonnormal() {
        let a = Mat::from_fn(4, |i, j| {
            if i == j {
                C64::new(1.0 + i as f64, 0.5)
            } else {
                C64::new(((i * 5 + j * 3) % 7) as f64 * 0.3, 0.1 * j as f64)
            }
        });
        let l = logm_with(&a, principal).unwrap();
        assert!((&expm(&l) - &a).max_abs() < 1e-12 * a.max_abs());
    }

    #[test]
    fn jordan_block_log() {
        let a = Mat::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let l = logm_with(&a, principal).unwrap();
        let expected = Mat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((&l - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn rejected_branch_surfaces() {
        let a = Mat::diag(&[C64::new(-1.0, 0.0)]);
        let err = logm_with(&a, |z| (z.re > 0.0).then(|| z.ln())).unwrap_err();
        assert_eq!(err, LogmError::Branch(C64::new(-1.0, 0.0)));
    }
}
