use num_complex::Complex64 as C64;

use super::{balance, Mat};

// Padé degrees and the 1-norm thresholds below which each meets unit-roundoff
// backward error in double precision (Higham 2005).
const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120., 60., 12., 1.];
const B5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const B7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
const B9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const B13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant. The input is balanced first when that shrinks its norm,
/// which keeps badly row/column-scaled arguments accurate entrywise.
///
/// May return non-finite entries on overflow; callers check.
pub fn expm(a: &Mat) -> Mat {
    let b = balance(a);
    if !b.is_trivial() && b.matrix.norm_one() < a.norm_one() {
        b.restore(&expm_pade(&b.matrix))
    } else {
        expm_pade(a)
    }
}

fn expm_pade(a: &Mat) -> Mat {
    let n = a.dim();
    let norm = a.norm_one();
    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            return pade_low(a, m);
        }
    }
    let theta13 = THETA[4].1;
    let s = if norm > theta13 { (norm / theta13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scaled = a.scale(C64::new(2f64.powi(-s), 0.0));
    let mut r = pade13(&scaled, n);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &Mat, m: usize) -> Mat {
    let b: &[f64] = match m {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let n = a.dim();
    let a2 = a * a;
    // even powers A^0, A^2, A^4, ...
    let mut evens = vec![Mat::identity(n), a2.clone()];
    while evens.len() <= m / 2 {
        let next = &evens[evens.len() - 1] * &a2;
        evens.push(next);
    }
    let mut u_inner = Mat::zeros(n);
    let mut v = Mat::zeros(n);
    for (k, p) in evens.iter().enumerate() {
        if 2 * k < m {
            u_inner = &u_inner + &p.scale(C64::new(b[2 * k + 1], 0.0));
        }
        v = &v + &p.scale(C64::new(b[2 * k], 0.0));
    }
    let u = a * &u_inner;
    solve_pade(&u, &v)
}

fn pade13(a: &Mat, n: usize) -> Mat {
    let b = |k: usize| C64::new(B13[k], 0.0);
    let id = Mat::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: usize, c4: usize, c2: usize, c0: usize| {
        let mut m = &(&a6.scale(b(c6)) + &a4.scale(b(c4))) + &a2.scale(b(c2));
        m = &m + &id.scale(b(c0));
        m
    };
    let u_hi = &(&a6.scale(b(13)) + &a4.scale(b(11))) + &a2.scale(b(9));
    let u = a * &(&(&a6 * &u_hi) + &lin(7, 5, 3, 1));
    let v_hi = &(&a6.scale(b(12)) + &a4.scale(b(10))) + &a2.scale(b(8));
    let v = &(&a6 * &v_hi) + &lin(6, 4, 2, 0);
    solve_pade(&u, &v)
}

/// `(V − U)⁻¹ (V + U)`.
fn solve_pade(u: &Mat, v: &Mat) -> Mat {
    let q = v - u;
    let p = v + u;
    match q.lu().solve_mat(&p) {
        Some(r) => r,
        None => Mat::from_fn(u.dim(), |_, _| C64::new(f64::NAN, f64::NAN)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::ZERO;

    #[test]
    fn nilpotent_series_terminates() {
        let b = Mat::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let e = expm(&b);
        let expected = Mat::from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert!((&e - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm(&Mat::zeros(3)), Mat::identity(3));
    }

    #[test]
    fn diagonal_matches_scalar_exp_across_degrees() {
        for scale in [1e-3, 0.1, 0.5, 1.5, 4.0, 30.0] {
            let d = [C64::new(scale, 0.3 * scale), C64::new(-scale, 0.0), ZERO];
            let e = expm(&Mat::diag(&d));
            for (i, v) in d.iter().enumerate() {
                let rel = (e[(i, i)] - v.exp()).norm() / v.exp().norm();
                assert!(rel < 1e-13, "scale {scale}: rel err {rel}");
            }
            assert!(e.max_abs_off_diagonal() == 0.0);
        }
    }

    #[test]
    fn rotation_generator() {
        let t = 2.0;
        let b = Mat::from_real_rows(&[&[0.0, -t], &[t, 0.0]]);
        let e = expm(&b);
        assert!((e[(0, 0)] - C64::new(t.cos(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 0)] - C64::new(t.sin(), 0.0)).norm() < 1e-14);
    }
}
