use num_complex::Complex64 as C64;

use super::{balance, Mat, ONE, ZERO};

/// Iterations allowed per eigenvalue before giving up.
const MAX_ITER_PER_EIGENVALUE: usize = 60;

/// `A = Q·T·Q*` with `Q` unitary and `T` upper triangular.
#[derive(Clone, Debug)]
pub struct Schur {
    pub q: Mat,
    pub t: Mat,
}

/// Complex Schur decomposition: Householder reduction to Hessenberg form,
/// then single-shift QR with Wilkinson shifts and Givens rotations.
///
/// On failure returns the index of the eigenvalue that did not converge.
pub fn schur(a: &Mat) -> Result<Schur, usize> {
    let n = a.dim();
    let mut h = a.clone();
    let mut q = Mat::identity(n);
    if n == 0 {
        return Ok(Schur { q, t: h });
    }
    hessenberg(&mut h, &mut q);

    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_ITER_PER_EIGENVALUE {
            return Err(hi);
        }

        let mu = if iter.is_multiple_of(10) {
            // exceptional shift to break symmetric stalls (cyclic permutations etc.)
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.5 * h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for i in l..=hi {
            h[(i, i)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = ZERO;
            rotations.push((c, s));
        }
        for (k, &(c, s)) in (l..hi).zip(&rotations) {
            for i in 0..=(k + 1).min(hi) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = q[(i, k)];
                let y = q[(i, k + 1)];
                q[(i, k)] = x * c + y * s.conj();
                q[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in l..=hi {
            h[(i, i)] += mu;
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t: h })
}

/// Eigenvalues (with multiplicity) of a balanced copy of `a`.
pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>, usize> {
    let b = balance(a);
    Ok(schur(&b.matrix)?.t.diagonal())
}

fn hessenberg(h: &mut Mat, q: &mut Mat) {
    let n = h.dim();
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * norm;
        let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        let m = v.len();
        for j in 0..n {
            let s: C64 = (0..m).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum::<C64>() * beta;
            for i in 0..m {
                h[(k + 1 + i, j)] -= v[i] * s;
            }
        }
        for target in [&mut *h, &mut *q] {
            for i in 0..n {
                let s: C64 = (0..m).map(|j| target[(i, k + 1 + j)] * v[j]).sum::<C64>() * beta;
                for j in 0..m {
                    target[(i, k + 1 + j)] -= s * v[j].conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Eigenvalue of `[[a, b], [c, d]]` nearest `d`.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let m1 = mid + disc;
    let m2 = mid - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Rotation `[[c, s], [-s̄, c]]` (c real) mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (C64, C64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (ONE, ZERO);
    }
    if ax == 0.0 {
        return (ZERO, ONE);
    }
    let norm = ax.hypot(ay);
    let c = ax / norm;
    let s = (x / ax) * y.conj() / norm;
    (C64::new(c, 0.0), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn check_decomposition(a: &Mat) -> Schur {
        let s = schur(a).expect("converges");
        let back = &(&s.q * &s.t) * &s.q.adjoint();
        assert!((&back - a).max_abs() < 1e-12 * a.max_abs().max(1.0), "reconstruction");
        let unit = &s.q.adjoint() * &s.q;
        assert!((&unit - &Mat::identity(a.dim())).max_abs() < 1e-13, "unitarity");
        assert_eq!(s.t.max_abs_below_diagonal(), 0.0);
        s
    }

    #[test]
    fn cyclic_permutation_converges() {
        for n in 2..=7 {
            let r = Mat::from_fn(n, |i, j| if i == (j + 1) % n { ONE } else { ZERO });
            let s = check_decomposition(&r);
            for ev in s.t.diagonal() {
                assert!((ev.norm() - 1.0).abs() < 1e-12);
                let k = (ev.arg() * n as f64 / (2.0 * PI)).round();
                assert!((ev.arg() - 2.0 * PI * k / n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn general_complex_matrix() {
        let a = Mat::from_fn(5, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64));
        check_decomposition(&a);
    }

    #[test]
    fn jordan_block_is_already_triangular() {
        let a = Mat::from_real_rows(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]);
        let s = check_decomposition(&a);
        for ev in s.t.diagonal() {
            assert!((ev - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_eigenvalues_exact() {
        let d = [C64::new(3.0, 1.0), C64::new(-2.0, 0.0), C64::new(0.5, -0.5)];
        let ev = eigenvalues(&Mat::diag(&d)).unwrap();
        assert_eq!(ev, d.to_vec());
    }
}
