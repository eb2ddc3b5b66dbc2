//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use expfact::algebra::{make_backend, AlgebraElement, Backend, MatrixOverAlgebra, Space};
use expfact::dense::{Mat, ONE, ZERO};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn space(b: Backend) -> Space {
    make_backend(b).unwrap()
}

pub fn disk128() -> Space {
    space(Backend::DiskGrid { boundary_count: 128, radial_rings: 4, degree_cap: 8 })
}

/// Uniform point in the disk of radius `r`.
pub fn in_disk(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    C64::from_polar(r * rng.gen::<f64>().sqrt(), 2.0 * std::f64::consts::PI * rng.gen::<f64>())
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    // Box–Muller, complex standard normal
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let v: f64 = rng.gen();
    C64::from_polar((-u.ln()).sqrt(), 2.0 * std::f64::consts::PI * v)
}

/// Random polynomial of degree ≤ `deg` in the coordinate (values per point
/// on finite sets), coefficients in the disk of radius `r`.
pub fn random_element(sp: &Space, rng: &mut ChaCha8Rng, deg: usize, r: f64) -> AlgebraElement {
    match sp.backend() {
        Backend::FinitePoints { count } => {
            AlgebraElement::from_values(sp, (0..count).map(|_| in_disk(rng, r)).collect()).unwrap()
        }
        _ => AlgebraElement::from_poly(sp, (0..=deg).map(|_| in_disk(rng, r)).collect()),
    }
}

pub fn random_matrix(sp: &Space, rng: &mut ChaCha8Rng, n: usize, deg: usize, r: f64) -> MatrixOverAlgebra {
    let entries: Vec<_> = (0..n * n).map(|_| random_element(sp, rng, deg, r)).collect();
    MatrixOverAlgebra::from_entries(n, &entries).unwrap()
}

/// Upper triangular, polynomial entries, diagonal `exp(p_i)` with Σ p_i = 0.
pub fn random_upper_prod_one(sp: &Space, rng: &mut ChaCha8Rng, n: usize, deg: usize) -> MatrixOverAlgebra {
    let mut exps: Vec<AlgebraElement> = (0..n - 1).map(|_| random_element(sp, rng, deg, 0.3)).collect();
    let sum = exps.iter().skip(1).fold(exps[0].clone(), |a, b| a.add(b).unwrap());
    exps.push(sum.scale(c(-1.0, 0.0)));
    let mut m = MatrixOverAlgebra::zeros(sp, n);
    for i in 0..n {
        m.set_entry(i, i, &exps[i].exp());
        for j in i + 1..n {
            m.set_entry(i, j, &random_element(sp, rng, deg, 1.0));
        }
    }
    m
}

/// Diagonal with product one: `exp(p_i)`, Σ p_i = 0.
pub fn random_diag_prod_one(sp: &Space, rng: &mut ChaCha8Rng, n: usize) -> MatrixOverAlgebra {
    let mut exps: Vec<AlgebraElement> = (0..n - 1).map(|_| random_element(sp, rng, 2, 0.5)).collect();
    let sum = exps.iter().skip(1).fold(exps[0].clone(), |a, b| a.add(b).unwrap());
    exps.push(sum.scale(c(-1.0, 0.0)));
    MatrixOverAlgebra::diag(&exps.iter().map(|e| e.exp()).collect::<Vec<_>>()).unwrap()
}

// ---- independent dense oracles ----

/// exp by Taylor series with scaling and squaring, no Padé.
pub fn taylor_exp(a: &Mat) -> Mat {
    let norm = a.norm_one();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.scale(c(2f64.powi(-s), 0.0));
    let n = a.dim();
    let mut term = Mat::identity(n);
    let mut sum = Mat::identity(n);
    for k in 1..40 {
        term = (&term * &scaled).scale(c(1.0 / k as f64, 0.0));
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Column-cycle permutation built from scratch: column j has its one in row j+1.
pub fn cycle(n: usize) -> Mat {
    Mat::from_fn(n, |i, j| if i == (j + 1) % n { ONE } else { ZERO })
}

/// Random unitary by Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let mut cols: Vec<Vec<C64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| gaussian(rng)).collect();
        for q in &cols {
            let dot: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Mat::from_fn(n, |i, j| cols[j][i])
}

pub fn product(ms: &[MatrixOverAlgebra]) -> MatrixOverAlgebra {
    ms[1..].iter().fold(ms[0].clone(), |acc, m| acc.mul(m).unwrap())
}

pub fn exp_product(factors: &[MatrixOverAlgebra]) -> MatrixOverAlgebra {
    let exps: Vec<_> = factors.iter().map(|b| b.map(taylor_exp)).collect();
    product(&exps)
}

/// Distance from `z` to the nearest n-th root of unity, by enumeration.
pub fn root_distance(z: C64, n: usize) -> f64 {
    (0..n)
        .map(|k| (z - C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Holomorphy oracle: mean-value property at the center (value = boundary
/// average) for each entry, plus the Cauchy formula at every interior node
/// evaluated by direct summation of the trapezoid rule.
pub fn cauchy_defect(m: &MatrixOverAlgebra) -> f64 {
    let sp = m.space();
    let Backend::DiskGrid { boundary_count: nb, .. } = sp.backend() else { panic!("disk only") };
    let z = sp.coords();
    let n = m.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let f: Vec<C64> = (0..sp.len()).map(|s| m.at(s)[(i, j)]).collect();
            for p in nb..sp.len() {
                let w = z[p];
                // ∮ f/(ζ−w) dζ/(2πi) ≈ (1/N) Σ f ζ/(ζ−w), corrected by (1 − w^N)
                let sum: C64 = (0..nb).map(|k| f[k] * z[k] / (z[k] - w)).sum::<C64>() / nb as f64;
                let val = sum * (C64::new(1.0, 0.0) - w.powi(nb as i32));
                worst = worst.max((val - f[p]).norm());
            }
        }
    }
    worst
}
