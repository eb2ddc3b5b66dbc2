//! Two exponentials for any matrix with determinant in Exp₁.
//!
//! Non-triangular input is conjugated (pivot swap, then a unipotent column
//! reduction) until the top-left entry has a logarithm; the first row is
//! cleared, the lower block recursed on, and the two resulting block
//! factors are made block-diagonal by a λ-shifted decoupling. Triangular
//! input goes to [`crate::triangular`]. Also here: regrouping of
//! unitriangular products and single logarithms over finite point sets.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, Backend, MatrixOverAlgebra, Space, INVERT_TOL, ZERO_TOL};
use crate::certify::{verify_factorization, FactorizationCertificate};
use crate::dense::{eigenvalues, Mat, ONE, ZERO};
use crate::error::{Error, Result};
use crate::literal::MatrixLiteral;
use crate::matfunc::{choose_branch_angle, log_dense, logm_error, mat_exp, Branch};
use crate::spectra::{spectrum, winding_number, Spectrum, Winding};
use std::f64::consts::PI;
use crate::triangular::two_exp_triangular_factors;

/// Reconstruction tolerance recorded in general-route certificates.
pub const GENERAL_CERT_TOL: f64 = 1e-6;
/// Reconstruction tolerance for single-exponential certificates.
pub const SINGLE_EXP_TOL: f64 = 1e-9;
/// "Nonzero" for pivots and lower entries: max sample magnitude above this.
pub const NONZERO_TOL: f64 = 1e-8;
const REPLAY_TOL: f64 = 1e-9;
const MAX_CONDITION: f64 = 1e12;
const MAX_DOUBLINGS: i32 = 60;
const RANDOM_CANDIDATES: usize = 200;
/// Accepted shifts must clear zero by this fraction of the entries' scale.
const CLEARANCE_FRACTION: f64 = 0.1;
const UNITRIANGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    PivotSwap,
    ColumnReduce,
    ClearRow,
    BlockSplit,
    Recurse,
    Triangular,
    ScalarLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub detail: String,
}

/// What the reduction did at one recursion level, and the conjugators that
/// take the level's input to `reduced`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub dim: usize,
    pub steps: Vec<TraceStep>,
    /// Applied in order: `M ↦ X M X⁻¹`.
    pub conjugators: Vec<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<ReductionTrace>>,
}

impl ReductionTrace {
    fn step(&mut self, kind: StepKind, detail: impl Into<String>) {
        self.steps.push(TraceStep { kind, detail: detail.into() });
    }

    fn conjugators(&self, space: &Space) -> Result<Vec<(MatrixOverAlgebra, MatrixOverAlgebra)>> {
        self.conjugators
            .iter()
            .map(|c| {
                let x = c.to_matrix(space)?;
                let xi = x.inverse(INVERT_TOL)?;
                Ok((x, xi))
            })
            .collect()
    }

    /// Re-applies the conjugators to `a` (and recursively to the lower
    /// blocks) and returns the largest deviation from the stored reductions.
    pub fn replay(&self, a: &MatrixOverAlgebra) -> Result<f64> {
        let Some(reduced) = &self.reduced else { return Ok(0.0) };
        let space = a.space();
        let mut m = a.clone();
        for (x, xi) in self.conjugators(space)? {
            m = x.mul(&m)?.mul(&xi)?;
        }
        let reduced = reduced.to_matrix(space)?;
        let mut dev = m.max_diff(&reduced)?;
        if let Some(inner) = &self.inner {
            dev = dev.max(inner.replay(&clear_first_row(&reduced)?.g)?);
        }
        Ok(dev)
    }

    /// Whether [`replay`](Self::replay) stays within tolerance.
    pub fn replays(&self, a: &MatrixOverAlgebra) -> Result<bool> {
        Ok(self.replay(a)? <= REPLAY_TOL)
    }

    /// Carries a factor of the reduced matrix back to this level's input.
    pub fn transport(&self, b: &MatrixOverAlgebra) -> Result<MatrixOverAlgebra> {
        let mut out = b.clone();
        for (x, xi) in self.conjugators(b.space())?.into_iter().rev() {
            out = xi.mul(&out)?.mul(&x)?;
        }
        Ok(out)
    }
}

/// Constants in search order: the 0.25-spaced grid on [−5, 5]², then the
/// same grid doubled up to four times (new points only, |c| ≤ 80); each
/// block sorted by modulus, then by argument in [0, 2π).
pub fn constant_grid() -> Vec<C64> {
    let key = |c: &C64| (c.norm(), c.arg().rem_euclid(2.0 * std::f64::consts::PI));
    let mut out = Vec::new();
    for level in 0..5 {
        let scale = 0.25 * f64::from(1 << level);
        let mut block: Vec<C64> = Vec::new();
        for i in -20i32..=20 {
            for j in -20i32..=20 {
                if level > 0 && i.abs() <= 10 && j.abs() <= 10 {
                    continue;
                }
                let c = C64::new(f64::from(i) * scale, f64::from(j) * scale);
                if c.norm() <= 80.0 {
                    block.push(c);
                }
            }
        }
        block.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        out.extend(block);
    }
    out
}

fn unit_disk(rng: &mut ChaCha8Rng) -> C64 {
    let r: f64 = rng.gen::<f64>().sqrt();
    C64::from_polar(r, 2.0 * std::f64::consts::PI * rng.gen::<f64>())
}

/// A random polynomial of degree ≤ 2 in the space's coordinate, with
/// coefficients in the unit disk; Laurent (degrees −2..2) on the circle.
fn random_shift(space: &Space, rng: &mut ChaCha8Rng) -> AlgebraElement {
    match space.backend() {
        Backend::CirclePath { .. } => {
            let c: Vec<C64> = (0..5).map(|_| unit_disk(rng)).collect();
            AlgebraElement::from_fn(space, |z| (0..5).map(|k| c[k] * z.powi(k as i32 - 2)).sum())
        }
        Backend::FinitePoints { count } => {
            let c: Vec<C64> = (0..3).map(|_| unit_disk(rng)).collect();
            let h = 1.0 / (count.max(2) - 1) as f64;
            AlgebraElement::from_fn(space, |z| {
                let x = z * h;
                c[0] + c[1] * x + c[2] * x * x
            })
        }
        _ => AlgebraElement::from_poly(space, (0..3).map(|_| unit_disk(rng)).collect()),
    }
}

fn common_zero(entries: &[&AlgebraElement], tol: f64) -> Option<usize> {
    let len = entries.first()?.values().len();
    (0..len).find(|&i| entries.iter().all(|e| e.value(i).norm() <= tol))
}

/// `b` with `a1 + b·a2` in Exp₁, found by verified search: constants on
/// [`constant_grid`], then seeded random low-degree polynomials.
pub fn shift_search(a1: &AlgebraElement, a2: &AlgebraElement, seed: u64) -> Result<AlgebraElement> {
    let tol = ZERO_TOL;
    if let Some(index) = common_zero(&[a1, a2], tol) {
        return Err(Error::CommonZero { index });
    }
    let space = a1.space();
    let need = tol.max(CLEARANCE_FRACTION * (a1.max_abs() + a2.max_abs()));
    let (v1, v2) = (a1.values(), a2.values());
    let mut best = 0.0f64;
    let mut fallback: Option<AlgebraElement> = None;
    let mut consider = |b: AlgebraElement, clearance: f64| -> Option<AlgebraElement> {
        if clearance <= tol || (clearance <= best && clearance < need) {
            return None;
        }
        let shifted = a1.add(&b.mul(a2).ok()?).ok()?;
        if !shifted.is_exp1(tol) {
            return None;
        }
        if clearance >= need {
            return Some(b);
        }
        best = clearance;
        fallback = Some(b);
        None
    };
    let grid = constant_grid();
    let clearances: Vec<f64> = grid
        .par_iter()
        .map(|&c| v1.iter().zip(v2).map(|(x, y)| (x + c * y).norm()).fold(f64::INFINITY, f64::min))
        .collect();
    for (&c, &clearance) in grid.iter().zip(&clearances) {
        if let Some(b) = consider(AlgebraElement::constant(space, c), clearance) {
            return Ok(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_CANDIDATES {
        let b = random_shift(space, &mut rng);
        let clearance =
            v1.iter().zip(v2).zip(b.values()).map(|((x, y), c)| (x + c * y).norm()).fold(f64::INFINITY, f64::min);
        if let Some(b) = consider(b, clearance) {
            return Ok(b);
        }
    }
    if let Some(b) = fallback {
        return Ok(b);
    }
    if let Some(b) = constructive_shift(a1, a2) {
        let shifted = a1.add(&b.mul(a2)?)?;
        if shifted.is_exp1(tol) {
            return Ok(b);
        }
    }
    Err(Error::SearchExhausted { best_clearance: best })
}

/// Last resort when no low-degree shift works: build `b` so that
/// `a1 + b·a2 = e^h` outright.
///
/// Off the disk `h` is a continuous log of `a1` where `a2` is small and is
/// interpolated across the rest, with `b = (e^h − a1)/a2` only where `a2` is
/// large. On the disk `h` is a polynomial matching `log a1` at the zeros of
/// `a2` (found from its boundary Taylor coefficients), so the quotient stays
/// holomorphic.
fn constructive_shift(a1: &AlgebraElement, a2: &AlgebraElement) -> Option<AlgebraElement> {
    let space = a1.space();
    let (v1, v2) = (a1.values(), a2.values());
    let values = match space.backend() {
        Backend::DiskGrid { boundary_count, .. } => disk_shift(space.coords(), v1, v2, boundary_count)?,
        _ => {
            let kappa = v1.iter().zip(v2).map(|(x, y)| x.norm().max(y.norm())).fold(f64::INFINITY, f64::min);
            let small: Vec<bool> = v2.iter().map(|y| y.norm() < 0.5 * kappa).collect();
            let h = match space.path_order() {
                Some((order, closed)) => path_log(v1, &small, &order, closed)?,
                None => v1.iter().zip(&small).map(|(x, &s)| if s { x.ln() } else { ZERO }).collect(),
            };
            (0..v1.len()).map(|i| if small[i] { ZERO } else { (h[i].exp() - v1[i]) / v2[i] }).collect()
        }
    };
    AlgebraElement::from_values(space, values).ok()
}

/// Continuous `h` along the path with `e^h = a` on the marked samples and
/// linear interpolation in between.
fn path_log(a: &[C64], marked: &[bool], order: &[usize], closed: bool) -> Option<Vec<C64>> {
    let m = order.len();
    if (0..m).all(|k| marked[order[k]]) {
        return None;
    }
    // start at the head of a marked run so no run straddles the walk's ends
    let start = (0..m).find(|&k| marked[order[k]] && (k == 0 && !closed || !marked[order[(k + m - 1) % m]]));
    let Some(start) = start else { return Some(vec![ZERO; a.len()]) };
    let mut h: Vec<Option<C64>> = vec![None; a.len()];
    // walk once around (or along) the path from the first marked sample
    let span = if closed { m } else { m - start };
    let mut prev: Option<C64> = None;
    for t in 0..span {
        let i = order[(start + t) % m];
        if marked[i] {
            let p = a[i].ln();
            let v = match prev {
                Some(q) => p + C64::new(0.0, 2.0 * PI * ((q.im - p.im) / (2.0 * PI)).round()),
                None => p,
            };
            h[i] = Some(v);
            prev = Some(v);
        } else {
            prev = None;
        }
    }
    // fill unmarked runs
    let mut k = 0;
    while k < m {
        if h[order[k]].is_some() {
            k += 1;
            continue;
        }
        let run_start = k;
        while k < m && h[order[k]].is_none() {
            k += 1;
        }
        let before = if run_start > 0 { h[order[run_start - 1]] } else if closed { h[order[m - 1]] } else { None };
        let after = if k < m { h[order[k]] } else if closed { h[order[0]] } else { None };
        let (lo, hi) = match (before, after) {
            (Some(x), Some(y)) => (x, y),
            (Some(x), None) => (x, x),
            (None, Some(y)) => (y, y),
            (None, None) => return None,
        };
        let len = (k - run_start + 1) as f64;
        for (j, kk) in (run_start..k).enumerate() {
            let t = (j + 1) as f64 / len;
            h[order[kk]] = Some(lo + (hi - lo) * t);
        }
    }
    h.into_iter().collect()
}

const ZERO_SEARCH_RADIUS: f64 = 1.0;

fn disk_shift(coords: &[C64], v1: &[C64], v2: &[C64], nb: usize) -> Option<Vec<C64>> {
    let c2 = taylor(&coords[..nb], &v2[..nb]);
    let c1 = taylor(&coords[..nb], &v1[..nb]);
    let nodes = poly_roots(&c2, ZERO_SEARCH_RADIUS)?;
    let inside = nodes.iter().filter(|w| w.norm() < 1.0).count() as i64;
    match winding_number(&v2[..nb], true) {
        Ok(Winding::Closed { turns, .. }) if turns == inside => {}
        _ => return None,
    }
    for (i, a) in nodes.iter().enumerate() {
        if nodes[..i].iter().any(|b| (a - b).norm() < 1e-4) {
            return None;
        }
    }
    let targets: Vec<C64> = nodes
        .iter()
        .map(|&w| {
            let f = horner(&c1, w);
            (f.norm() > 1e-10 * v1.iter().map(|x| x.norm()).fold(0.0, f64::max)).then(|| f.ln())
        })
        .collect::<Option<_>>()?;
    let dd = divided_differences(&nodes, &targets);
    // h and h′ by Horner on the Newton form
    let newton = |z: C64| {
        let (mut h, mut dh) = (*dd.last().unwrap_or(&ZERO), ZERO);
        for k in (0..dd.len().saturating_sub(1)).rev() {
            dh = dh * (z - nodes[k]) + h;
            h = h * (z - nodes[k]) + dd[k];
        }
        (h, dh)
    };
    let scale = v2.iter().map(|y| y.norm()).fold(0.0, f64::max);
    let (d1, d2) = (derivative(&c1), derivative(&c2));
    coords
        .iter()
        .zip(v1.iter().zip(v2))
        .map(|(&z, (&x, &y))| {
            let (h, dh) = newton(z);
            if y.norm() > 1e-10 * scale {
                return Some((h.exp() - x) / y);
            }
            // sample on a zero of a2: take the limit of the quotient
            let slope = horner(&d2, z);
            (slope.norm() > 1e-10 * scale).then(|| (dh * h.exp() - horner(&d1, z)) / slope)
        })
        .collect()
}

fn derivative(c: &[C64]) -> Vec<C64> {
    c.iter().enumerate().skip(1).map(|(k, &x)| x * k as f64).collect()
}

/// Taylor coefficients from boundary samples on the roots of unity, cut at
/// the Nyquist degree and trimmed of trailing noise.
fn taylor(zeta: &[C64], f: &[C64]) -> Vec<C64> {
    let nb = f.len();
    let mut c: Vec<C64> = (0..=nb / 2)
        .map(|k| zeta.iter().zip(f).map(|(z, v)| v * z.powu(k as u32).conj()).sum::<C64>() / nb as f64)
        .collect();
    let top = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    while c.len() > 1 && c.last().unwrap().norm() <= 1e-13 * top {
        c.pop();
    }
    c
}

fn horner(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(ZERO, |acc, &x| acc * z + x)
}

/// Roots of `Σ c_k z^k` inside the given radius: companion eigenvalues,
/// polished by Newton.
fn poly_roots(c: &[C64], radius: f64) -> Option<Vec<C64>> {
    let d = c.len() - 1;
    if d == 0 {
        return Some(Vec::new());
    }
    let lead = c[d];
    let comp = Mat::from_fn(d, |i, j| {
        if i == 0 {
            -c[d - 1 - j] / lead
        } else if i == j + 1 {
            ONE
        } else {
            ZERO
        }
    });
    let dc = derivative(c);
    let roots = eigenvalues(&comp).ok()?;
    Some(
        roots
            .into_iter()
            .filter(|w| w.norm() < radius + 0.05)
            .map(|mut w| {
                for _ in 0..8 {
                    let step = horner(c, w) / horner(&dc, w);
                    if !step.is_finite() {
                        break;
                    }
                    w -= step;
                }
                w
            })
            .filter(|w| w.norm() < radius)
            .collect(),
    )
}

fn divided_differences(x: &[C64], y: &[C64]) -> Vec<C64> {
    let mut d = y.to_vec();
    for j in 1..x.len() {
        for i in (j..x.len()).rev() {
            d[i] = (d[i] - d[i - 1]) / (x[i] - x[i - j]);
        }
    }
    d
}

fn prefix_clearance(col: &[AlgebraElement], b: &[AlgebraElement]) -> f64 {
    let last = col.last().unwrap().values();
    (0..last.len())
        .map(|x| {
            col[..col.len() - 1]
                .iter()
                .zip(b)
                .map(|(a, bi)| (a.value(x) + bi.value(x) * last[x]).norm())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `b₁..b_{n−1}` such that `(a_i + b_i·a_n)_{i<n}` has no common zero.
pub fn stable_rank_reduce(col: &[AlgebraElement], seed: u64) -> Result<Vec<AlgebraElement>> {
    let n = col.len();
    if n < 3 {
        return Err(Error::Structural(format!("stable rank reduction needs n ≥ 3, got {n}")));
    }
    let tol = ZERO_TOL;
    let refs: Vec<&AlgebraElement> = col.iter().collect();
    if let Some(index) = common_zero(&refs, tol) {
        return Err(Error::NotLeftInvertible { index });
    }
    let space = col[0].space();
    let scale = col.iter().map(AlgebraElement::max_abs).fold(0.0, f64::max);
    let need = tol.max(CLEARANCE_FRACTION * scale);
    let zero = AlgebraElement::zero(space);
    let mut best = (0.0f64, None::<Vec<AlgebraElement>>);
    let mut consider = |b: Vec<AlgebraElement>| -> Option<Vec<AlgebraElement>> {
        let clearance = prefix_clearance(col, &b);
        if clearance >= need {
            return Some(b);
        }
        if clearance > tol && clearance > best.0 {
            best = (clearance, Some(b));
        }
        None
    };
    if let Some(b) = consider(vec![zero.clone(); n - 1]) {
        return Ok(b);
    }
    for c in constant_grid().into_iter().skip(1) {
        for i in 0..n - 1 {
            let mut b = vec![zero.clone(); n - 1];
            b[i] = AlgebraElement::constant(space, c);
            if let Some(b) = consider(b) {
                return Ok(b);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_CANDIDATES {
        let b = (0..n - 1).map(|_| random_shift(space, &mut rng)).collect();
        if let Some(b) = consider(b) {
            return Ok(b);
        }
    }
    best.1.ok_or(Error::SearchExhausted { best_clearance: best.0 })
}

/// Identity with `b[i]` in row `i` of the last column.
fn last_column_shift(space: &Space, b: &[AlgebraElement]) -> Result<MatrixOverAlgebra> {
    let n = b.len() + 1;
    let mut c = MatrixOverAlgebra::identity(space, n);
    for (i, bi) in b.iter().enumerate() {
        c.set_entry(i, n - 1, bi);
    }
    Ok(c)
}

/// `diag(m, 1)`.
fn embed(m: &MatrixOverAlgebra) -> MatrixOverAlgebra {
    let n = m.dim() + 1;
    m.map(|s| Mat::from_fn(n, |i, j| if i < n - 1 && j < n - 1 { s[(i, j)] } else if i == j { ONE } else { ZERO }))
}

fn apply(c: &MatrixOverAlgebra, col: &[AlgebraElement]) -> Vec<AlgebraElement> {
    let space = c.space();
    let n = col.len();
    (0..n)
        .map(|i| {
            let values = (0..space.len()).map(|s| (0..n).map(|j| c.at(s)[(i, j)] * col[j].value(s)).sum()).collect();
            AlgebraElement::from_values(space, values).expect("same space")
        })
        .collect()
}

/// Unipotent upper-triangular `C` with `(C·col)₁` in Exp₁.
///
/// Follows the induction (stable-rank shift, then the shorter column); if
/// the searches there come up empty, falls back to shifting the first entry
/// by a multiple of a single lower entry.
pub fn column_reduce(col: &[AlgebraElement], seed: u64) -> Result<MatrixOverAlgebra> {
    let n = col.len();
    if n < 2 {
        return Err(Error::Structural("column reduction needs n ≥ 2".into()));
    }
    if col[1..].iter().all(|a| a.max_abs() <= NONZERO_TOL) {
        return Err(Error::AllLowerEntriesZero);
    }
    match column_reduce_inductive(col, seed) {
        Err(Error::SearchExhausted { best_clearance }) if n > 2 => {
            log::info!("inductive column reduction exhausted ({best_clearance:e}); trying single-entry shifts");
            let space = col[0].space();
            for i in (1..n).rev() {
                if col[i].max_abs() <= NONZERO_TOL {
                    continue;
                }
                if let Ok(b) = shift_search(&col[0], &col[i], seed) {
                    let mut c = MatrixOverAlgebra::identity(space, n);
                    c.set_entry(0, i, &b);
                    return Ok(c);
                }
            }
            Err(Error::SearchExhausted { best_clearance })
        }
        other => other,
    }
}

fn column_reduce_inductive(col: &[AlgebraElement], seed: u64) -> Result<MatrixOverAlgebra> {
    let n = col.len();
    let space = col[0].space();
    if n == 2 {
        let b = shift_search(&col[0], &col[1], seed)?;
        return last_column_shift(space, &[b]);
    }
    let c1 = if col[n - 1].max_abs() <= NONZERO_TOL {
        MatrixOverAlgebra::identity(space, n)
    } else {
        last_column_shift(space, &stable_rank_reduce(col, seed)?)?
    };
    let shifted = apply(&c1, col);
    if shifted[1..n - 1].iter().all(|a| a.max_abs() <= NONZERO_TOL) {
        if shifted[0].is_exp1(ZERO_TOL) {
            return Ok(c1);
        }
        // only the last entry is left to shift by
        let b = shift_search(&shifted[0], &shifted[n - 1], seed)?;
        let mut c2 = MatrixOverAlgebra::identity(space, n);
        c2.set_entry(0, n - 1, &b);
        return c2.mul(&c1);
    }
    let c2 = column_reduce_inductive(&shifted[..n - 1], seed)?;
    embed(&c2).mul(&c1)
}

/// Brings a nonzero entry below the diagonal into the first column by
/// conjugating with a transposition; `S = I` when one is already there.
pub fn pivot_swap(a: &MatrixOverAlgebra) -> Result<(Mat, MatrixOverAlgebra)> {
    let n = a.dim();
    for j in 0..n {
        for i in j + 1..n {
            if a.entry(i, j).max_abs() > NONZERO_TOL {
                let mut s = Mat::identity(n);
                if j != 0 {
                    s[(0, 0)] = ZERO;
                    s[(j, j)] = ZERO;
                    s[(0, j)] = ONE;
                    s[(j, 0)] = ONE;
                }
                let swapped = a.conjugate_const(&s, &s);
                return Ok((s, swapped));
            }
        }
    }
    Err(Error::NoLowerEntry)
}

/// Blocks of `A₂ = [[ã₁₁, 0], [H, G]]·[[1, K], [0, I]]`.
#[derive(Clone, Debug)]
pub struct BlockData {
    pub a11: AlgebraElement,
    pub h: Vec<AlgebraElement>,
    pub k: Vec<AlgebraElement>,
    pub g: MatrixOverAlgebra,
}

impl BlockData {
    /// Multiplies the two block factors back together.
    pub fn product(&self) -> MatrixOverAlgebra {
        let m = self.g.dim();
        let n = m + 1;
        let samples = (0..self.g.space().len())
            .map(|s| {
                let (a, g) = (self.a11.value(s), self.g.at(s));
                Mat::from_fn(n, |i, j| match (i, j) {
                    (0, 0) => a,
                    (0, j) => a * self.k[j - 1].value(s),
                    (i, 0) => self.h[i - 1].value(s),
                    (i, j) => self.h[i - 1].value(s) * self.k[j - 1].value(s) + g[(i - 1, j - 1)],
                })
            })
            .collect();
        MatrixOverAlgebra::from_samples(self.g.space(), n, samples).expect("consistent blocks")
    }
}

pub fn clear_first_row(a2: &MatrixOverAlgebra) -> Result<BlockData> {
    let n = a2.dim();
    if n < 2 {
        return Err(Error::Structural("clearing the first row needs n ≥ 2".into()));
    }
    let a11 = a2.entry(0, 0);
    if !a11.is_exp1(ZERO_TOL) {
        return Err(Error::TopLeftNotExp1);
    }
    let inv = a11.invert(INVERT_TOL)?;
    let k: Vec<_> = (1..n).map(|j| a2.entry(0, j).mul(&inv)).collect::<Result<_>>()?;
    let h: Vec<_> = (1..n).map(|i| a2.entry(i, 0)).collect();
    let mut g = a2.block(1, n - 1);
    for (s, gs) in g.samples_mut().iter_mut().enumerate() {
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                gs[(i, j)] -= h[i].value(s) * k[j].value(s);
            }
        }
    }
    Ok(BlockData { a11, h, k, g })
}

fn scalar_matrix(a: &AlgebraElement) -> MatrixOverAlgebra {
    MatrixOverAlgebra::from_entries(1, std::slice::from_ref(a)).expect("1x1")
}

/// First `λ = 2^k·λ₀` separating `σ(λG₁)` from `σ(ã₁₁)` and `σ(G₂/λ)` from 1.
pub fn choose_lambda(a11: &AlgebraElement, g1: &MatrixOverAlgebra, g2: &MatrixOverAlgebra) -> Result<f64> {
    let sa = spectrum(&scalar_matrix(a11))?;
    let s1 = spectrum(g1)?;
    let s2 = spectrum(g2)?;
    let min1 = s1.min_abs();
    if !(min1 > 0.0) {
        return Err(Error::NotInvertible { index: 0, magnitude: min1 });
    }
    let rho1 = sa.resolution.max(s1.resolution);
    let rho2 = s2.resolution;
    let lambda0 = ((1.0 + sa.max_abs()) / min1).max(1.0);
    let one = Spectrum::from_samples(&[vec![ONE]]);
    for k in 0..=MAX_DOUBLINGS {
        let lambda = lambda0 * 2f64.powi(k);
        if s1.scaled(lambda).distance_to(&sa) > rho1 && s2.scaled(1.0 / lambda).distance_to(&one) > rho2 {
            return Ok(lambda);
        }
    }
    Err(Error::ScheduleExhausted { schedule: "lambda" })
}

/// Logs of the λ-split block factors of `A₂`, conjugated to block-diagonal
/// form: `P = [[ã₁₁, 0], [H, λG₁]]` by `[[1, 0], [X, I]]` and
/// `Q = [[1, K], [0, G₂/λ]]` by `[[1, Y], [0, I]]`.
#[allow(clippy::too_many_arguments)]
pub fn block_decouple(
    lambda: f64,
    a11: &AlgebraElement,
    log_a11: &AlgebraElement,
    h: &[AlgebraElement],
    l1: &MatrixOverAlgebra,
    k: &[AlgebraElement],
    l2: &MatrixOverAlgebra,
) -> Result<(MatrixOverAlgebra, MatrixOverAlgebra)> {
    let m = l1.dim();
    let n = m + 1;
    let space = l1.space();
    let g1 = mat_exp(l1)?;
    let g2 = mat_exp(l2)?;
    let ln = C64::new(lambda.ln(), 0.0);
    let lam = C64::new(lambda, 0.0);
    let pairs: Vec<(Mat, Mat)> = (0..space.len())
        .into_par_iter()
        .map(|s| -> Result<(Mat, Mat)> {
            let a = a11.value(s);
            let hs: Vec<C64> = h.iter().map(|e| e.value(s)).collect();
            let ks: Vec<C64> = k.iter().map(|e| e.value(s)).collect();
            let m1 = g1.at(s).scale(lam).shift(-a);
            let m2 = g2.at(s).scale(1.0 / lam).scale(-ONE).shift(ONE);
            let condition = m1.condition_inf().max(m2.condition_inf());
            if !(condition <= MAX_CONDITION) {
                return Err(Error::SolveFailure { index: s, condition });
            }
            let fail = || Error::SolveFailure { index: s, condition: f64::INFINITY };
            let x = m1.solve_vec(&hs).ok_or_else(fail)?;
            let y = m2.transpose().solve_vec(&ks).ok_or_else(fail)?;
            let (ls1, ls2) = (l1.at(s).shift(ln), l2.at(s).shift(-ln));
            let la = log_a11.value(s);
            // L⁻¹·diag(log ã₁₁, L₁ + ln λ)·L with L = [[1, 0], [X, I]]
            let b1 = Mat::from_fn(n, |i, j| match (i, j) {
                (0, 0) => la,
                (0, _) => ZERO,
                (i, 0) => (0..m).map(|q| ls1[(i - 1, q)] * x[q]).sum::<C64>() - x[i - 1] * la,
                (i, j) => ls1[(i - 1, j - 1)],
            });
            // U⁻¹·diag(0, L₂ − ln λ)·U with U = [[1, Y], [0, I]]
            let b2 = Mat::from_fn(n, |i, j| match (i, j) {
                (0, 0) => ZERO,
                (0, j) => -(0..m).map(|q| y[q] * ls2[(q, j - 1)]).sum::<C64>(),
                (_, 0) => ZERO,
                (i, j) => ls2[(i - 1, j - 1)],
            });
            Ok((b1, b2))
        })
        .collect::<Result<_>>()?;
    let (b1, b2): (Vec<Mat>, Vec<Mat>) = pairs.into_iter().unzip();
    Ok((MatrixOverAlgebra::from_samples(space, n, b1)?, MatrixOverAlgebra::from_samples(space, n, b2)?))
}

/// Options for [`factorize_two_exp_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorOptions {
    /// ε for triangular sub-problems.
    pub eps: f64,
    /// Seed for the random stage of the shift searches.
    pub seed: u64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { eps: 0.25, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct TwoExpFactorization {
    pub b1: MatrixOverAlgebra,
    pub b2: MatrixOverAlgebra,
    pub trace: ReductionTrace,
    pub certificate: FactorizationCertificate,
}

/// Triangular route for upper-triangular `a`: divide by `e^δ`, `δ = log(det)/n`,
/// and put `δ·I` back into the second factor.
fn triangular_route(
    a: &MatrixOverAlgebra,
    eps: f64,
    trace: &mut ReductionTrace,
) -> Result<(MatrixOverAlgebra, MatrixOverAlgebra)> {
    let n = a.dim();
    let delta = a.det().log_exp1(INVERT_TOL)?.scale(C64::new(1.0 / n as f64, 0.0));
    let mut normalized = a.clone();
    for (s, m) in normalized.samples_mut().iter_mut().enumerate() {
        let f = (-delta.value(s)).exp();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i > j { ZERO } else { m[(i, j)] * f };
            }
        }
    }
    let (b1, b2, t) = two_exp_triangular_factors(&normalized, eps)?;
    trace.step(StepKind::Triangular, format!("n = {n}, t = {t}"));
    let mut b2 = b2;
    for (s, m) in b2.samples_mut().iter_mut().enumerate() {
        *m = m.shift(delta.value(s));
    }
    Ok((b1, b2))
}

fn factor_rec(
    a: &MatrixOverAlgebra,
    opts: &FactorOptions,
    trace: &mut ReductionTrace,
) -> Result<(MatrixOverAlgebra, MatrixOverAlgebra)> {
    let n = a.dim();
    let space = a.space();
    trace.dim = n;
    if n == 1 {
        trace.step(StepKind::ScalarLog, "");
        let l = a.entry(0, 0).log_exp1(INVERT_TOL)?;
        return Ok((scalar_matrix(&l), MatrixOverAlgebra::zeros(space, 1)));
    }
    let (s, swapped) = match pivot_swap(a) {
        Ok(p) => p,
        Err(Error::NoLowerEntry) => return triangular_route(a, opts.eps, trace),
        Err(e) => return Err(e),
    };
    if s != Mat::identity(n) {
        let j = (1..n).find(|&j| s[(j, 0)] == ONE).unwrap_or(0);
        trace.step(StepKind::PivotSwap, format!("columns 1 and {}", j + 1));
    }
    trace.conjugators.push(MatrixLiteral::constant(&s));
    let col: Vec<AlgebraElement> = (0..n).map(|i| swapped.entry(i, 0)).collect();
    let c = column_reduce(&col, opts.seed)?;
    trace.step(StepKind::ColumnReduce, format!("max |C - I| = {:.3e}", c.sub(&MatrixOverAlgebra::identity(space, n))?.max_abs()));
    let a2 = c.mul(&swapped)?.mul(&c.inverse(INVERT_TOL)?)?;
    trace.conjugators.push(MatrixLiteral::from_matrix(&c));
    trace.reduced = Some(MatrixLiteral::from_matrix(&a2));
    let blocks = clear_first_row(&a2)?;
    trace.step(StepKind::ClearRow, "");
    let mut inner = ReductionTrace::default();
    let sub = factor_rec(&blocks.g, opts, &mut inner);
    trace.inner = Some(Box::new(inner));
    let (l1, l2) = sub?;
    trace.step(StepKind::Recurse, format!("size {}", n - 1));
    let lambda = choose_lambda(&blocks.a11, &mat_exp(&l1)?, &mat_exp(&l2)?)?;
    let log_a11 = blocks.a11.log_exp1(INVERT_TOL)?;
    let (b1, b2) = block_decouple(lambda, &blocks.a11, &log_a11, &blocks.h, &l1, &blocks.k, &l2)?;
    trace.step(StepKind::BlockSplit, format!("lambda = {lambda}"));
    Ok((trace.transport(&b1)?, trace.transport(&b2)?))
}

/// [`factorize_two_exp_with`] at the default seed.
pub fn factorize_two_exp(a: &MatrixOverAlgebra, eps: f64) -> Result<TwoExpFactorization> {
    factorize_two_exp_with(a, FactorOptions { eps, ..FactorOptions::default() })
}

/// `A = exp(B1)·exp(B2)` for `A` with determinant in Exp₁. Failures after
/// the precondition check carry the partial reduction trace.
pub fn factorize_two_exp_with(a: &MatrixOverAlgebra, opts: FactorOptions) -> Result<TwoExpFactorization> {
    if !a.det().is_exp1(ZERO_TOL) {
        return Err(Error::DetNotExp1);
    }
    let mut trace = ReductionTrace::default();
    let (b1, b2) = match factor_rec(a, &opts, &mut trace) {
        Ok(f) => f,
        Err(e) => return Err(Error::Pipeline { source: Box::new(e), trace: Box::new(trace) }),
    };
    let mut certificate = verify_factorization(a, &[b1.clone(), b2.clone()], &[], GENERAL_CERT_TOL)?;
    certificate.trace = Some(trace.clone());
    Ok(TwoExpFactorization { b1, b2, trace, certificate })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    Upper,
    Lower,
    Both,
}

fn unitriangular_kind(m: &MatrixOverAlgebra) -> Option<Tri> {
    let diag = m.samples().iter().flat_map(|s| s.diagonal()).map(|d| (d - ONE).norm()).fold(0.0, f64::max);
    if diag > UNITRIANGULAR_TOL {
        return None;
    }
    match (m.max_abs_below_diagonal() <= UNITRIANGULAR_TOL, m.max_abs_above_diagonal() <= UNITRIANGULAR_TOL) {
        (true, true) => Some(Tri::Both),
        (true, false) => Some(Tri::Upper),
        (false, true) => Some(Tri::Lower),
        (false, false) => None,
    }
}

/// Rewrites `A₁A₂⋯A_t` (alternating unitriangular) as `⌊t/2⌋ + 1` unipotent
/// factors `C_i A_{2i} C_i⁻¹`, then `C_{⌊(t+1)/2⌋}`, with `C_i = A₁A₃⋯A_{2i−1}`.
pub fn regroup_unitriangular(factors: &[MatrixOverAlgebra]) -> Result<Vec<MatrixOverAlgebra>> {
    if factors.len() < 2 {
        return Err(Error::Structural(format!("regrouping needs at least two factors, got {}", factors.len())));
    }
    let mut prev: Option<Tri> = None;
    for (index, f) in factors.iter().enumerate() {
        if f.dim() != factors[0].dim() || f.space().backend() != factors[0].space().backend() {
            return Err(Error::Structural(format!("factor {index} does not match the first factor")));
        }
        let kind = unitriangular_kind(f).ok_or(Error::NotUnitriangular { index })?;
        if kind != Tri::Both {
            if prev == Some(kind) {
                return Err(Error::NotAlternating);
            }
            prev = Some(kind);
        } else {
            // identity fits either slot; flip the expectation
            prev = prev.map(|p| if p == Tri::Upper { Tri::Lower } else { Tri::Upper });
        }
    }
    let mut out = Vec::with_capacity(factors.len() / 2 + 1);
    let mut c = factors[0].clone();
    for pair in factors[1..].chunks(2) {
        let even = &pair[0];
        out.push(c.mul(even)?.mul(&c.inverse(INVERT_TOL)?)?);
        if let Some(odd) = pair.get(1) {
            c = c.mul(odd)?;
        }
    }
    out.push(c);
    Ok(out)
}

/// One logarithm per point of a finite space, each with its own branch ray.
pub fn single_exp_finite(a: &MatrixOverAlgebra) -> Result<MatrixOverAlgebra> {
    if !matches!(a.space().backend(), Backend::FinitePoints { .. }) {
        return Err(Error::NotFinitePoints);
    }
    a.try_map(|s, m| {
        let ev = eigenvalues(m).map_err(|k| Error::Numerical { index: s, message: format!("eigenvalue {k} did not converge") })?;
        let min = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(min > 1e-12 * m.max_abs().max(1.0)) {
            return Err(Error::NotInvertibleAtPoint { index: s });
        }
        let spec = Spectrum::from_samples(&[ev]).with_resolution(1e-3 * min);
        let theta = choose_branch_angle(&spec)?;
        log_dense(m, &Branch::Ray(theta)).map_err(|e| logm_error(s, e))
    })
}

/// [`single_exp_finite`] plus a one-factor certificate.
pub fn single_exp_certificate(a: &MatrixOverAlgebra) -> Result<(MatrixOverAlgebra, FactorizationCertificate)> {
    let b = single_exp_finite(a)?;
    let cert = verify_factorization(a, std::slice::from_ref(&b), &[], SINGLE_EXP_TOL)?;
    Ok((b, cert))
}
