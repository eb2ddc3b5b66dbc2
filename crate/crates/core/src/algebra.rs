//! Function algebras on sampled maximal ideal spaces.
//!
//! An element is a vector of complex values, one per sample point; matrices
//! over the algebra are stored sample-major (one dense matrix per sample) so
//! that every pointwise operation is a map over `Mat`s.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{Mat, ONE, ZERO};
use crate::error::{Error, Result};
use crate::spectra::{winding_number, Winding, MAX_PHASE_STEP};

/// Default invertibility threshold.
pub const INVERT_TOL: f64 = 1e-10;
/// Default zero-locus threshold.
pub const ZERO_TOL: f64 = 1e-8;

/// Backend descriptor, as found in spec files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    FinitePoints { count: usize },
    IntervalPath { samples: usize },
    DiskGrid { boundary_count: usize, radial_rings: usize, degree_cap: usize },
    CirclePath { samples: usize },
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::FinitePoints { .. } => "finite_points",
            Backend::IntervalPath { .. } => "interval_path",
            Backend::DiskGrid { .. } => "disk_grid",
            Backend::CirclePath { .. } => "circle_path",
        }
    }
}

/// A discretized maximal ideal space.
#[derive(Debug)]
pub struct SampleSpace {
    backend: Backend,
    coords: Vec<C64>,
    /// Closed loops (sample index cycles) used for winding checks.
    loops: Vec<Vec<usize>>,
    /// Neighbour pairs used for continuity and resolution estimates.
    edges: Vec<(usize, usize)>,
}

pub type Space = Arc<SampleSpace>;

/// Builds the sample layout for a backend descriptor.
pub fn make_backend(backend: Backend) -> Result<Space> {
    let (coords, loops, edges) = match backend {
        Backend::FinitePoints { count } => {
            if count == 0 {
                return Err(Error::Config("finite_points needs count >= 1".into()));
            }
            ((0..count).map(|j| C64::new(j as f64, 0.0)).collect(), vec![], vec![])
        }
        Backend::IntervalPath { samples } => {
            if samples < 2 {
                return Err(Error::Config("interval_path needs at least 2 samples".into()));
            }
            let coords = (0..samples).map(|j| C64::new(j as f64 / (samples - 1) as f64, 0.0)).collect();
            (coords, vec![], (1..samples).map(|j| (j - 1, j)).collect())
        }
        Backend::CirclePath { samples } => {
            if samples < 3 {
                return Err(Error::Config("circle_path needs at least 3 samples".into()));
            }
            let coords = (0..samples).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / samples as f64)).collect();
            let cycle: Vec<usize> = (0..samples).collect();
            let edges = cycle_edges(&cycle);
            (coords, vec![cycle], edges)
        }
        Backend::DiskGrid { boundary_count, radial_rings, degree_cap: _ } => {
            if boundary_count < 8 {
                return Err(Error::Config("disk_grid needs boundary_count >= 8".into()));
            }
            if radial_rings == 0 {
                return Err(Error::Config("disk_grid needs radial_rings >= 1".into()));
            }
            disk_layout(boundary_count, radial_rings)
        }
    };
    Ok(Arc::new(SampleSpace { backend, coords, loops, edges }))
}

fn cycle_edges(cycle: &[usize]) -> Vec<(usize, usize)> {
    (0..cycle.len()).map(|k| (cycle[k], cycle[(k + 1) % cycle.len()])).collect()
}

/// Boundary circle first, then the center, then interior rings of radius
/// `k / rings` with half as many points as the boundary.
fn disk_layout(boundary: usize, rings: usize) -> (Vec<C64>, Vec<Vec<usize>>, Vec<(usize, usize)>) {
    let mut coords: Vec<C64> =
        (0..boundary).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / boundary as f64)).collect();
    let outer: Vec<usize> = (0..boundary).collect();
    let mut loops = vec![outer.clone()];
    let mut edges = cycle_edges(&outer);
    let center = coords.len();
    coords.push(ZERO);
    let per_ring = boundary / 2;
    let mut prev: Option<Vec<usize>> = None;
    for k in 1..rings {
        let r = k as f64 / rings as f64;
        let start = coords.len();
        coords.extend((0..per_ring).map(|j| C64::from_polar(r, 2.0 * PI * j as f64 / per_ring as f64)));
        let ring: Vec<usize> = (start..start + per_ring).collect();
        edges.extend(cycle_edges(&ring));
        match &prev {
            None => edges.extend(ring.iter().map(|&i| (center, i))),
            Some(p) => edges.extend(p.iter().zip(&ring).map(|(&a, &b)| (a, b))),
        }
        loops.push(ring.clone());
        prev = Some(ring);
    }
    // radial links to the boundary (every other boundary point shares an angle)
    match &prev {
        None => edges.extend(outer.iter().map(|&i| (center, i))),
        Some(p) => edges.extend(p.iter().enumerate().map(|(j, &a)| (a, 2 * j))),
    }
    (coords, loops, edges)
}

impl SampleSpace {
    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Sample coordinates: point index for finite sets, `x ∈ [0,1]` for the
    /// interval, `z` for the disk and circle.
    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn is_contractible(&self) -> bool {
        !matches!(self.backend, Backend::CirclePath { .. })
    }

    /// Ordered path backends (interval and circle).
    pub fn is_path(&self) -> bool {
        matches!(self.backend, Backend::IntervalPath { .. } | Backend::CirclePath { .. })
    }

    /// Sample indices in path order, with whether the path closes up.
    pub fn path_order(&self) -> Option<(Vec<usize>, bool)> {
        match self.backend {
            Backend::IntervalPath { .. } => Some(((0..self.len()).collect(), false)),
            Backend::CirclePath { .. } => Some(((0..self.len()).collect(), true)),
            _ => None,
        }
    }

    /// Number of boundary samples for the disk grid.
    pub fn boundary_count(&self) -> Option<usize> {
        match self.backend {
            Backend::DiskGrid { boundary_count, .. } => Some(boundary_count),
            _ => None,
        }
    }

    pub fn degree_cap(&self) -> Option<usize> {
        match self.backend {
            Backend::DiskGrid { degree_cap, .. } => Some(degree_cap),
            _ => None,
        }
    }

    /// Index of the disk center sample.
    pub fn center_index(&self) -> Option<usize> {
        self.boundary_count()
    }

    fn same(a: &Space, b: &Space) -> bool {
        Arc::ptr_eq(a, b) || (a.backend == b.backend)
    }

    /// Boundary trapezoid approximation of the Cauchy integral of boundary
    /// values `f` at interior point `z`.
    ///
    /// The plain N-point rule returns `p(z) / (1 − z^N)` for polynomials of
    /// degree below N; the `(1 − z^N)` factor removes that aliasing so the
    /// rule is exact on them.
    fn cauchy(&self, f: &[C64], z: C64) -> C64 {
        let nb = self.boundary_count().expect("disk grid");
        let mut acc = ZERO;
        for (zeta, v) in self.coords[..nb].iter().zip(&f[..nb]) {
            acc += v * zeta / (zeta - z);
        }
        acc * (ONE - z.powu(nb as u32)) / nb as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithKind {
    Add,
    Sub,
    Mul,
}

/// One algebra element: values on the samples, optionally the polynomial
/// they came from (disk grid only).
#[derive(Clone, Debug)]
pub struct AlgebraElement {
    space: Space,
    values: Vec<C64>,
    poly: Option<Vec<C64>>,
}

impl AlgebraElement {
    pub fn from_values(space: &Space, values: Vec<C64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Structural(format!(
                "element has {} values but the space has {} samples",
                values.len(),
                space.len()
            )));
        }
        Ok(AlgebraElement { space: space.clone(), values, poly: None })
    }

    pub fn from_fn(space: &Space, f: impl Fn(C64) -> C64) -> Self {
        let values = space.coords.iter().map(|&z| f(z)).collect();
        AlgebraElement { space: space.clone(), values, poly: None }
    }

    pub fn constant(space: &Space, c: C64) -> Self {
        let poly = space.degree_cap().map(|_| vec![c]);
        AlgebraElement { space: space.clone(), values: vec![c; space.len()], poly }
    }

    pub fn zero(space: &Space) -> Self {
        Self::constant(space, ZERO)
    }

    pub fn one(space: &Space) -> Self {
        Self::constant(space, ONE)
    }

    /// The coordinate function.
    pub fn coordinate(space: &Space) -> Self {
        Self::from_poly(space, vec![ZERO, ONE])
    }

    /// Evaluates `Σ c_k z^k` at the sample coordinates. The coefficients are
    /// kept on the disk grid when the degree fits the cap.
    pub fn from_poly(space: &Space, coeffs: Vec<C64>) -> Self {
        let values = space.coords.iter().map(|&z| horner(&coeffs, z)).collect();
        let poly = match space.degree_cap() {
            Some(cap) if coeffs.len() <= cap + 1 => Some(coeffs),
            Some(cap) => {
                log::info!("polynomial of degree {} exceeds degree cap {cap}; keeping samples only", coeffs.len() - 1);
                None
            }
            None => None,
        };
        AlgebraElement { space: space.clone(), values, poly }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn poly(&self) -> Option<&[C64]> {
        self.poly.as_deref()
    }

    pub fn value(&self, i: usize) -> C64 {
        self.values[i]
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_space(&self, other: &Self) -> Result<()> {
        if SampleSpace::same(&self.space, &other.space) {
            Ok(())
        } else {
            Err(Error::Structural("elements live on different sample spaces".into()))
        }
    }

    /// Pointwise add / sub / mul.
    pub fn arith(&self, kind: ArithKind, other: &Self) -> Result<Self> {
        self.check_space(other)?;
        let op = |a: C64, b: C64| match kind {
            ArithKind::Add => a + b,
            ArithKind::Sub => a - b,
            ArithKind::Mul => a * b,
        };
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        let poly = match (&self.poly, &other.poly, self.space.degree_cap()) {
            (Some(p), Some(q), Some(cap)) => poly_arith(kind, p, q, cap),
            _ => None,
        };
        Ok(AlgebraElement { space: self.space.clone(), values, poly })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.arith(ArithKind::Add, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.arith(ArithKind::Sub, other)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.arith(ArithKind::Mul, other)
    }

    pub fn scale(&self, c: C64) -> Self {
        AlgebraElement {
            space: self.space.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            poly: self.poly.as_ref().map(|p| p.iter().map(|v| v * c).collect()),
        }
    }

    /// Applies `f` pointwise; the polynomial payload is dropped.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        AlgebraElement { space: self.space.clone(), values: self.values.iter().map(|&v| f(v)).collect(), poly: None }
    }

    pub fn exp(&self) -> Self {
        self.map(|v| v.exp())
    }

    /// Pointwise reciprocal.
    pub fn invert(&self, tol: f64) -> Result<Self> {
        if let Some((index, v)) = self.values.iter().enumerate().find(|(_, v)| !(v.norm() > tol)) {
            return Err(Error::NotInvertible { index, magnitude: v.norm() });
        }
        Ok(self.map(|v| v.inv()))
    }

    /// Sample indices where `|a| <= tol`.
    pub fn zero_locus(&self, tol: f64) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| v.norm() <= tol).map(|(i, _)| i).collect()
    }

    /// Membership in the identity component of the invertibles: bounded away
    /// from zero and, on spaces with loops, zero winding around each loop.
    /// For the disk grid the boundary winding is the argument-principle count
    /// of zeros inside, so it must vanish too.
    pub fn is_exp1(&self, tol: f64) -> bool {
        if !(self.min_abs() > tol) {
            return false;
        }
        self.space.loops.iter().all(|cycle| {
            let vals: Vec<C64> = cycle.iter().map(|&i| self.values[i]).collect();
            matches!(winding_number(&vals, true), Ok(Winding::Closed { turns: 0, .. }))
        })
    }

    /// Max over interior disk samples of the gap between the value and the
    /// boundary Cauchy integral.
    pub fn holomorphy_residual(&self) -> Result<f64> {
        let nb = self.space.boundary_count().ok_or_else(|| {
            Error::UnsupportedBackend(format!("holomorphy residual needs disk_grid, got {}", self.space.backend.name()))
        })?;
        Ok(holomorphy_residual_values(&self.space, &self.values, nb))
    }

    /// A continuous logarithm, when one exists on the sampled space.
    ///
    /// Paths are unwrapped from the principal value at the first sample; the
    /// disk grid unwraps its boundary, reconstructs interior values from the
    /// boundary by the Cauchy integral and snaps each interior principal log
    /// to the nearest branch.
    pub fn log_exp1(&self, tol: f64) -> Result<Self> {
        let _ = self.invert(tol)?;
        let space = &self.space;
        let v = &self.values;
        let values = match space.backend {
            Backend::FinitePoints { .. } => v.iter().map(|z| z.ln()).collect(),
            Backend::IntervalPath { .. } => unwrap_log(v)?,
            Backend::CirclePath { .. } => {
                check_loop_winding(v, &space.loops[0])?;
                unwrap_log(v)?
            }
            Backend::DiskGrid { boundary_count: nb, .. } => {
                for cycle in &space.loops {
                    check_loop_winding(v, cycle)?;
                }
                let boundary = unwrap_log(&v[..nb])?;
                let mut out = boundary.clone();
                out.extend((nb..v.len()).map(|i| {
                    let guess = space.cauchy(&boundary, space.coords[i]);
                    let p = v[i].ln();
                    let k = ((guess.im - p.im) / (2.0 * PI)).round();
                    p + C64::new(0.0, 2.0 * PI * k)
                }));
                out
            }
        };
        Ok(AlgebraElement { space: space.clone(), values, poly: None })
    }
}

pub(crate) fn holomorphy_residual_values(space: &SampleSpace, values: &[C64], nb: usize) -> f64 {
    (nb..values.len()).map(|i| (values[i] - space.cauchy(values, space.coords[i])).norm()).fold(0.0, f64::max)
}

fn check_loop_winding(v: &[C64], cycle: &[usize]) -> Result<()> {
    let vals: Vec<C64> = cycle.iter().map(|&i| v[i]).collect();
    match winding_number(&vals, true)? {
        Winding::Closed { turns: 0, .. } => Ok(()),
        Winding::Closed { turns, .. } => Err(Error::NonzeroWinding { turns }),
        Winding::Open(_) => unreachable!("closed winding requested"),
    }
}

/// Principal log at the first sample, then continued by principal logs of
/// successive ratios.
fn unwrap_log(v: &[C64]) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(v.len());
    let mut cur = v[0].ln();
    out.push(cur);
    for j in 1..v.len() {
        let step = (v[j] / v[j - 1]).ln();
        if step.im.abs() >= MAX_PHASE_STEP {
            return Err(Error::Undersampled { index: j - 1, increment: step.im.abs() });
        }
        cur += step;
        out.push(cur);
    }
    Ok(out)
}

fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

fn poly_arith(kind: ArithKind, p: &[C64], q: &[C64], cap: usize) -> Option<Vec<C64>> {
    let out = match kind {
        ArithKind::Add | ArithKind::Sub => {
            let sign = if kind == ArithKind::Add { 1.0 } else { -1.0 };
            (0..p.len().max(q.len()))
                .map(|k| p.get(k).copied().unwrap_or(ZERO) + sign * q.get(k).copied().unwrap_or(ZERO))
                .collect::<Vec<_>>()
        }
        ArithKind::Mul => {
            let mut r = vec![ZERO; p.len() + q.len() - 1];
            for (i, a) in p.iter().enumerate() {
                for (j, b) in q.iter().enumerate() {
                    r[i + j] += a * b;
                }
            }
            r
        }
    };
    if out.len() > cap + 1 {
        log::info!("product degree {} exceeds degree cap {cap}; dropping polynomial payload", out.len() - 1);
        return None;
    }
    Some(out)
}

/// An `n×n` matrix over the algebra, stored as one dense matrix per sample.
#[derive(Clone, Debug)]
pub struct MatrixOverAlgebra {
    n: usize,
    space: Space,
    samples: Vec<Mat>,
}

impl MatrixOverAlgebra {
    pub fn from_samples(space: &Space, n: usize, samples: Vec<Mat>) -> Result<Self> {
        if samples.len() != space.len() || samples.iter().any(|m| m.dim() != n) {
            return Err(Error::Structural(format!("expected {} samples of size {n}x{n}", space.len())));
        }
        Ok(MatrixOverAlgebra { n, space: space.clone(), samples })
    }

    /// Row-major entries.
    pub fn from_entries(n: usize, entries: &[AlgebraElement]) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::Structural(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        let space = entries[0].space.clone();
        for e in entries {
            entries[0].check_space(e)?;
        }
        let samples = (0..space.len()).map(|s| Mat::from_fn(n, |i, j| entries[i * n + j].values[s])).collect();
        Ok(MatrixOverAlgebra { n, space, samples })
    }

    pub fn constant(space: &Space, m: &Mat) -> Self {
        MatrixOverAlgebra { n: m.dim(), space: space.clone(), samples: vec![m.clone(); space.len()] }
    }

    pub fn identity(space: &Space, n: usize) -> Self {
        Self::constant(space, &Mat::identity(n))
    }

    pub fn zeros(space: &Space, n: usize) -> Self {
        Self::constant(space, &Mat::zeros(n))
    }

    pub fn diag(d: &[AlgebraElement]) -> Result<Self> {
        let n = d.len();
        let space = d[0].space.clone();
        let zero = AlgebraElement::zero(&space);
        let entries: Vec<AlgebraElement> =
            (0..n * n).map(|k| if k / n == k % n { d[k / n].clone() } else { zero.clone() }).collect();
        Self::from_entries(n, &entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn samples(&self) -> &[Mat] {
        &self.samples
    }

    pub fn at(&self, s: usize) -> &Mat {
        &self.samples[s]
    }

    pub fn samples_mut(&mut self) -> &mut [Mat] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Mat> {
        self.samples
    }

    pub fn entry(&self, i: usize, j: usize) -> AlgebraElement {
        AlgebraElement { space: self.space.clone(), values: self.samples.iter().map(|m| m[(i, j)]).collect(), poly: None }
    }

    pub fn set_entry(&mut self, i: usize, j: usize, e: &AlgebraElement) {
        for (m, v) in self.samples.iter_mut().zip(&e.values) {
            m[(i, j)] = *v;
        }
    }

    pub fn diagonal(&self) -> Vec<AlgebraElement> {
        (0..self.n).map(|i| self.entry(i, i)).collect()
    }

    /// Pointwise map (parallel over samples; order preserved).
    pub fn map(&self, f: impl Fn(&Mat) -> Mat + Sync + Send) -> Self {
        let samples: Vec<Mat> = self.samples.par_iter().map(f).collect();
        let n = samples.first().map_or(self.n, Mat::dim);
        MatrixOverAlgebra { n, space: self.space.clone(), samples }
    }

    /// Fallible pointwise map; the first failing sample (in index order) wins.
    pub fn try_map(&self, f: impl Fn(usize, &Mat) -> Result<Mat> + Sync + Send) -> Result<Self> {
        let samples: Vec<Mat> =
            self.samples.par_iter().enumerate().map(|(s, m)| f(s, m)).collect::<Vec<_>>().into_iter().collect::<Result<_>>()?;
        let n = samples.first().map_or(self.n, Mat::dim);
        Ok(MatrixOverAlgebra { n, space: self.space.clone(), samples })
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(&Mat, &Mat) -> Mat + Sync + Send) -> Result<Self> {
        self.check(other)?;
        let samples: Vec<Mat> = self.samples.par_iter().zip(&other.samples).map(|(a, b)| f(a, b)).collect();
        let n = samples.first().map_or(self.n, Mat::dim);
        Ok(MatrixOverAlgebra { n, space: self.space.clone(), samples })
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Structural(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        if !SampleSpace::same(&self.space, &other.space) {
            return Err(Error::Structural("matrices live on different sample spaces".into()));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Multiplies by a constant matrix on the left and its inverse on the right.
    pub fn conjugate_const(&self, p: &Mat, p_inv: &Mat) -> Self {
        self.map(|m| &(p * m) * p_inv)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|m| m.scale(c))
    }

    pub fn transpose(&self) -> Self {
        self.map(Mat::transpose)
    }

    pub fn det(&self) -> AlgebraElement {
        AlgebraElement { space: self.space.clone(), values: self.samples.iter().map(Mat::det).collect(), poly: None }
    }

    pub fn trace(&self) -> AlgebraElement {
        AlgebraElement { space: self.space.clone(), values: self.samples.iter().map(Mat::trace).collect(), poly: None }
    }

    /// Pointwise inverse; fails at the first sample whose determinant is at
    /// most `tol` in modulus.
    pub fn inverse(&self, tol: f64) -> Result<Self> {
        self.try_map(|s, m| {
            let d = m.det();
            if !(d.norm() > tol) {
                return Err(Error::NotInvertible { index: s, magnitude: d.norm() });
            }
            m.inverse().filter(Mat::is_finite).ok_or(Error::NotInvertible { index: s, magnitude: d.norm() })
        })
    }

    /// Max over samples of the ∞-operator-norm of the difference.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        self.check(other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm_inf()).fold(0.0, f64::max))
    }

    /// Max over samples of the ∞-operator-norm.
    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(Mat::norm_inf).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(Mat::max_abs).fold(0.0, f64::max)
    }

    pub fn max_abs_below_diagonal(&self) -> f64 {
        self.samples.iter().map(Mat::max_abs_below_diagonal).fold(0.0, f64::max)
    }

    pub fn max_abs_above_diagonal(&self) -> f64 {
        self.samples.iter().map(Mat::max_abs_above_diagonal).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(Mat::is_finite)
    }

    /// Max holomorphy residual over all entries (disk grid only).
    pub fn holomorphy_residual(&self) -> Result<f64> {
        let nb = self.space.boundary_count().ok_or_else(|| {
            Error::UnsupportedBackend(format!("holomorphy residual needs disk_grid, got {}", self.space.backend.name()))
        })?;
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let e = self.entry(i, j);
                worst = worst.max(holomorphy_residual_values(&self.space, &e.values, nb));
            }
        }
        Ok(worst)
    }

    /// Extracts the `[start, start+size)²` block at every sample.
    pub fn block(&self, start: usize, size: usize) -> Self {
        self.map(|m| m.block(start, size))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disk(nb: usize, rings: usize) -> Space {
        make_backend(Backend::DiskGrid { boundary_count: nb, radial_rings: rings, degree_cap: 8 }).unwrap()
    }

    #[test]
    fn layouts() {
        let one = make_backend(Backend::FinitePoints { count: 1 }).unwrap();
        assert_eq!(one.len(), 1);
        let iv = make_backend(Backend::IntervalPath { samples: 3 }).unwrap();
        assert_eq!(iv.coords(), &[c(0.0, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        let d = disk(8, 1);
        assert_eq!(d.len(), 9);
        for j in 0..8 {
            let expected = C64::from_polar(1.0, 2.0 * PI * j as f64 / 8.0);
            assert!((d.coords()[j] - expected).norm() < 1e-15);
        }
        assert_eq!(d.coords()[8], ZERO);
        assert!(make_backend(Backend::DiskGrid { boundary_count: 4, radial_rings: 1, degree_cap: 2 }).is_err());
        assert!(make_backend(Backend::FinitePoints { count: 0 }).is_err());
    }

    #[test]
    fn pointwise_arithmetic() {
        let fp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        let a = AlgebraElement::from_values(&fp, vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let b = AlgebraElement::from_values(&fp, vec![c(3.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert_eq!(a.mul(&b).unwrap().values(), &[c(3.0, 0.0), c(8.0, 0.0)]);
        assert_eq!(a.add(&AlgebraElement::zero(&fp)).unwrap().values(), a.values());

        let d = disk(16, 2);
        let z = AlgebraElement::coordinate(&d);
        let z2 = z.mul(&z).unwrap();
        for (v, p) in z2.values().iter().zip(d.coords()) {
            assert!((v - p * p).norm() < 1e-15);
        }
        assert_eq!(z2.poly().unwrap().len(), 3);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = AlgebraElement::one(&make_backend(Backend::FinitePoints { count: 2 }).unwrap());
        let b = AlgebraElement::one(&make_backend(Backend::FinitePoints { count: 3 }).unwrap());
        assert!(matches!(a.add(&b), Err(Error::Structural(_))));
    }

    #[test]
    fn inversion() {
        let fp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        let a = AlgebraElement::from_values(&fp, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(a.invert(INVERT_TOL).unwrap().values(), a.values());
        assert_eq!(AlgebraElement::constant(&fp, c(2.0, 0.0)).invert(INVERT_TOL).unwrap().value(0), c(0.5, 0.0));
        let z = AlgebraElement::from_values(&fp, vec![c(0.0, 0.0), ONE]).unwrap();
        assert!(matches!(z.invert(INVERT_TOL), Err(Error::NotInvertible { index: 0, .. })));

        let d = disk(64, 4);
        let a = AlgebraElement::from_poly(&d, vec![c(2.0, 0.0), ONE]);
        let inv = a.invert(INVERT_TOL).unwrap();
        assert!(inv.holomorphy_residual().unwrap() <= 10.0 * a.holomorphy_residual().unwrap() + 1e-8);
        for (v, z) in inv.values().iter().zip(d.coords()) {
            assert!((v - 1.0 / (z + 2.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_loci() {
        let d = disk(16, 2);
        assert!(AlgebraElement::one(&d).zero_locus(ZERO_TOL).is_empty());
        assert_eq!(AlgebraElement::coordinate(&d).zero_locus(ZERO_TOL), vec![d.center_index().unwrap()]);
        let fp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        let a = AlgebraElement::from_values(&fp, vec![ZERO, ONE]).unwrap();
        assert_eq!(a.zero_locus(ZERO_TOL), vec![0]);
    }

    #[test]
    fn exp1_membership() {
        let circle = make_backend(Backend::CirclePath { samples: 64 }).unwrap();
        let g = |s: &Space| AlgebraElement::from_fn(s, |z| C64::new(0.0, 2.0 * PI * z.re).exp());
        assert!(AlgebraElement::constant(&circle, c(5.0, 0.0)).is_exp1(INVERT_TOL));
        // on the circle the coordinate is e^{2πix} itself
        assert!(!AlgebraElement::coordinate(&circle).is_exp1(INVERT_TOL));
        let interval = make_backend(Backend::IntervalPath { samples: 64 }).unwrap();
        assert!(g(&interval).is_exp1(INVERT_TOL));
        // z + 2 has no zero in the disk, z + 0.5 does
        let d = disk(64, 3);
        assert!(AlgebraElement::from_poly(&d, vec![c(2.0, 0.0), ONE]).is_exp1(INVERT_TOL));
        assert!(!AlgebraElement::from_poly(&d, vec![c(0.5, 0.05), ONE]).is_exp1(INVERT_TOL));
    }

    #[test]
    fn holomorphy_checks() {
        let d = disk(64, 4);
        let z3 = AlgebraElement::from_poly(&d, vec![ZERO, ZERO, ZERO, ONE]);
        assert!(z3.holomorphy_residual().unwrap() <= 1e-10);
        assert!(AlgebraElement::one(&d).holomorphy_residual().unwrap() <= 1e-14);
        // the Cauchy integral of conj(z) = 1/z on the circle vanishes inside
        let conj = AlgebraElement::from_fn(&d, |z| z.conj());
        let r = conj.holomorphy_residual().unwrap();
        assert!(r > 0.1 && (r - 0.75).abs() < 1e-6, "residual {r}");
        let fp = make_backend(Backend::FinitePoints { count: 2 }).unwrap();
        assert!(matches!(AlgebraElement::one(&fp).holomorphy_residual(), Err(Error::UnsupportedBackend(_))));
    }

    #[test]
    fn continuous_logs() {
        let interval = make_backend(Backend::IntervalPath { samples: 65 }).unwrap();
        let f = AlgebraElement::from_fn(&interval, |x| C64::new(0.3 * x.re, 2.0 * PI * x.re));
        let l = f.exp().log_exp1(INVERT_TOL).unwrap();
        for (a, b) in l.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let d = disk(64, 4);
        let p = AlgebraElement::from_poly(&d, vec![c(0.2, 3.0), c(1.5, -2.0), c(0.0, 1.0)]);
        let l = p.exp().log_exp1(INVERT_TOL).unwrap();
        for (a, b) in l.values().iter().zip(p.values()) {
            assert!((a - b).norm() < 1e-10);
        }
        let circle = make_backend(Backend::CirclePath { samples: 32 }).unwrap();
        assert!(matches!(
            AlgebraElement::coordinate(&circle).log_exp1(INVERT_TOL),
            Err(Error::NonzeroWinding { turns: 1 })
        ));
    }

    #[test]
    fn matrix_ops() {
        let d = disk(16, 2);
        let z = AlgebraElement::coordinate(&d);
        let two = AlgebraElement::constant(&d, c(2.0, 0.0));
        let m = MatrixOverAlgebra::from_entries(2, &[two.clone(), z.clone(), AlgebraElement::zero(&d), two.clone()])
            .unwrap();
        let inv = m.inverse(INVERT_TOL).unwrap();
        let id = MatrixOverAlgebra::identity(&d, 2);
        assert!(m.mul(&inv).unwrap().max_diff(&id).unwrap() < 1e-15);
        assert!((m.det().value(3) - c(4.0, 0.0)).norm() < 1e-15);
        assert!(m.holomorphy_residual().unwrap() < 1e-12);
    }
}
