use num_complex::Complex64 as C64;

use super::Mat;

const RADIX: f64 = 2.0;
const MAX_SWEEPS: usize = 100;

/// A diagonally similar copy `D⁻¹·A·D` with `D = diag(scale)` (powers of two).
#[derive(Clone, Debug)]
pub struct Balanced {
    pub matrix: Mat,
    pub scale: Vec<f64>,
}

impl Balanced {
    /// Maps `f(D⁻¹AD)` back to `f(A) = D·f(D⁻¹AD)·D⁻¹`.
    pub fn restore(&self, m: &Mat) -> Mat {
        let d: Vec<C64> = self.scale.iter().map(|&s| C64::new(s, 0.0)).collect();
        m.diag_similarity(&d)
    }

    pub fn is_trivial(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0)
    }
}

/// Parlett–Reinsch balancing without permutations. Scaling by powers of the
/// radix keeps the similarity exact in floating point.
pub fn balance(a: &Mat) -> Balanced {
    let n = a.dim();
    let mut m = a.clone();
    let mut scale = vec![1.0; n];
    let sqrdx = RADIX * RADIX;
    for _ in 0..MAX_SWEEPS {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 || !c.is_finite() || !r.is_finite() {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= g;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
                scale[i] *= f;
            }
        }
        if done {
            break;
        }
    }
    Balanced { matrix: m, scale }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undoes_diagonal_scaling() {
        let base = Mat::from_fn(3, |i, j| C64::new(1.0 + (i * 3 + j) as f64 * 0.1, 0.2));
        let d: Vec<C64> = [1.0, 1e6, 1e-6].iter().map(|&x| C64::new(x, 0.0)).collect();
        let skewed = base.diag_similarity(&d);
        let b = balance(&skewed);
        assert!(b.matrix.max_abs() < 10.0, "balanced norm {}", b.matrix.max_abs());
        let back = b.restore(&b.matrix);
        assert!((&back - &skewed).max_abs() <= 1e-12 * skewed.max_abs());
    }

    #[test]
    fn diagonal_matrix_untouched() {
        let a = Mat::diag(&[C64::new(2.0, 0.0), C64::new(-1.0, 3.0)]);
        let b = balance(&a);
        assert!(b.is_trivial());
        assert_eq!(b.matrix, a);
    }
}
