//! Spectra of matrices over the algebra and the planar topology questions
//! asked of them: is 0 in the unbounded component of the complement, do the
//! eigenvalues stay near the roots of unity, how often does a path wind.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::MatrixOverAlgebra;
use crate::dense::eigenvalues;
use crate::error::{Error, Result};

/// Largest accepted phase change between adjacent path samples.
pub const MAX_PHASE_STEP: f64 = 0.75 * PI;
/// Eigenvalues at one sample closer than this are merged with multiplicity.
const MERGE_TOL: f64 = 1e-12;
/// Lower bound on the covering radius.
pub const MIN_RESOLUTION: f64 = 1e-3;
/// Raster cells per half-axis never exceed this.
const MAX_HALF_CELLS: f64 = 2048.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub value: C64,
    pub sample: usize,
    pub multiplicity: usize,
}

/// Eigenvalues with sample provenance plus the covering radius used for all
/// topological decisions.
#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
    pub resolution: f64,
}

/// Closed ε-neighbourhood of the `n`-th roots of unity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsNeighborhood {
    pub n: usize,
    pub eps: f64,
}

impl EpsNeighborhood {
    pub fn distance(&self, z: C64) -> f64 {
        distance_to_roots(z, self.n)
    }

    pub fn contains(&self, z: C64) -> bool {
        self.distance(z) <= self.eps
    }
}

/// Distance from `z` to the nearest `n`-th root of unity.
pub fn distance_to_roots(z: C64, n: usize) -> f64 {
    let step = 2.0 * PI / n as f64;
    let k = (z.arg() / step).round();
    (z - C64::from_polar(1.0, k * step)).norm()
}

pub fn roots_of_unity(n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect()
}

impl Spectrum {
    /// Builds a spectrum from per-sample eigenvalue lists (merging repeats);
    /// the resolution is left at its floor.
    pub fn from_samples(per_sample: &[Vec<C64>]) -> Self {
        let mut points = Vec::new();
        for (s, evs) in per_sample.iter().enumerate() {
            let start = points.len();
            for &ev in evs {
                match points[start..].iter_mut().find(|p: &&mut SpectrumPoint| (p.value - ev).norm() <= MERGE_TOL) {
                    Some(p) => p.multiplicity += 1,
                    None => points.push(SpectrumPoint { value: ev, sample: s, multiplicity: 1 }),
                }
            }
        }
        Spectrum { points, resolution: MIN_RESOLUTION }
    }

    pub fn with_resolution(mut self, rho: f64) -> Self {
        self.resolution = rho;
        self
    }

    pub fn values(&self) -> impl Iterator<Item = C64> + '_ {
        self.points.iter().map(|p| p.value)
    }

    pub fn min_abs(&self) -> f64 {
        self.values().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest distance between a point of `self` and one of `other`.
    pub fn distance_to(&self, other: &Spectrum) -> f64 {
        let mut best = f64::INFINITY;
        for a in self.values() {
            for b in other.values() {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    pub fn distance_to_point(&self, z: C64) -> f64 {
        self.values().map(|v| (v - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Hausdorff distance to the `n`-th roots of unity.
    pub fn hausdorff_to_roots(&self, n: usize) -> f64 {
        let forward = self.values().map(|v| distance_to_roots(v, n)).fold(0.0, f64::max);
        let backward = roots_of_unity(n).into_iter().map(|r| self.distance_to_point(r)).fold(0.0, f64::max);
        forward.max(backward)
    }

    pub fn scaled(&self, c: f64) -> Spectrum {
        Spectrum {
            points: self.points.iter().map(|p| SpectrumPoint { value: p.value * c, ..*p }).collect(),
            resolution: self.resolution * c.abs(),
        }
    }
}

/// Pointwise eigenvalues at every sample, with the default resolution
/// `max(2·max neighbour gap, 1e-3)` taken over the space's adjacency edges.
pub fn spectrum(a: &MatrixOverAlgebra) -> Result<Spectrum> {
    let per_sample: Vec<Vec<C64>> = a
        .samples()
        .par_iter()
        .enumerate()
        .map(|(s, m)| {
            eigenvalues(m).map_err(|k| Error::Numerical { index: s, message: format!("eigenvalue {k} did not converge") })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut gap = 0.0f64;
    for &(s, t) in a.space().edges() {
        for &u in &per_sample[s] {
            let d = per_sample[t].iter().map(|&v| (u - v).norm()).fold(f64::INFINITY, f64::min);
            gap = gap.max(d);
        }
    }
    let rho = (2.0 * gap).max(MIN_RESOLUTION);
    Ok(Spectrum::from_samples(&per_sample).with_resolution(rho))
}

/// True iff every spectrum point lies in the closed ε-neighbourhood.
pub fn in_eps_neighborhood(s: &Spectrum, nbhd: EpsNeighborhood) -> bool {
    s.values().all(|v| nbhd.contains(v))
}

/// Result of a winding computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Winding {
    /// Closed path: integer turn count and the distance of the raw sum from it.
    Closed { turns: i64, residual: f64 },
    /// Open path: total phase change in turns.
    Open(f64),
}

/// Sum of principal phase increments over `2π`.
pub fn winding_number(values: &[C64], closed: bool) -> Result<Winding> {
    if let Some(index) = values.iter().position(|v| v.norm() == 0.0 || !v.norm().is_finite()) {
        return Err(Error::ZeroOnPath { index });
    }
    let m = values.len();
    let steps = if closed { m } else { m.saturating_sub(1) };
    let mut total = 0.0;
    for j in 0..steps {
        let inc = (values[(j + 1) % m] / values[j]).arg();
        if inc.abs() >= MAX_PHASE_STEP {
            return Err(Error::Undersampled { index: j, increment: inc.abs() });
        }
        total += inc;
    }
    let turns = total / (2.0 * PI);
    Ok(if closed {
        let k = turns.round();
        Winding::Closed { turns: k as i64, residual: (turns - k).abs() }
    } else {
        Winding::Open(turns)
    })
}

/// A square raster of the plane, centred so that 0 is a cell center, with
/// every cell meeting a closed ρ-disk around a spectrum point blocked.
#[derive(Clone, Debug)]
pub struct Raster {
    pub h: f64,
    /// Cells run from `-half` to `half` along each axis.
    pub half: i64,
    blocked: Vec<bool>,
}

impl Raster {
    pub fn new(s: &Spectrum) -> Raster {
        let rho = s.resolution;
        let extent = s.max_abs() + 2.0 * rho;
        let h = (rho / 2.0).max(extent / MAX_HALF_CELLS);
        let half = (extent / h).ceil() as i64 + 2;
        let side = (2 * half + 1) as usize;
        let mut r = Raster { h, half, blocked: vec![false; side * side] };
        let reach = (rho / h).ceil() as i64 + 1;
        for p in s.values() {
            let ci = (p.re / h).round() as i64;
            let cj = (p.im / h).round() as i64;
            for i in (ci - reach).max(-half)..=(ci + reach).min(half) {
                for j in (cj - reach).max(-half)..=(cj + reach).min(half) {
                    // distance from p to the cell square
                    let dx = ((p.re - i as f64 * h).abs() - h / 2.0).max(0.0);
                    let dy = ((p.im - j as f64 * h).abs() - h / 2.0).max(0.0);
                    if dx.hypot(dy) <= rho {
                        let k = r.index(i, j);
                        r.blocked[k] = true;
                    }
                }
            }
        }
        r
    }

    fn side(&self) -> i64 {
        2 * self.half + 1
    }

    pub fn index(&self, i: i64, j: i64) -> usize {
        ((i + self.half) * self.side() + (j + self.half)) as usize
    }

    pub fn cell(&self, k: usize) -> (i64, i64) {
        let side = self.side() as usize;
        ((k / side) as i64 - self.half, (k % side) as i64 - self.half)
    }

    pub fn center(&self, k: usize) -> C64 {
        let (i, j) = self.cell(k);
        C64::new(i as f64 * self.h, j as f64 * self.h)
    }

    pub fn is_blocked(&self, k: usize) -> bool {
        self.blocked[k]
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn cell_of(&self, z: C64) -> Option<usize> {
        let i = (z.re / self.h).round() as i64;
        let j = (z.im / self.h).round() as i64;
        (i.abs() <= self.half && j.abs() <= self.half).then(|| self.index(i, j))
    }

    pub fn origin(&self) -> usize {
        self.index(0, 0)
    }

    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.cell(k);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .into_iter()
            .filter(|&(a, b)| a.abs() <= self.half && b.abs() <= self.half)
            .map(|(a, b)| self.index(a, b))
    }

    pub fn on_border(&self, k: usize) -> bool {
        let (i, j) = self.cell(k);
        i.abs() == self.half || j.abs() == self.half
    }

    /// Breadth-first search over free cells from every free border cell;
    /// returns the predecessor of each reached cell (`usize::MAX` for roots).
    pub fn flood_from_border(&self) -> Vec<Option<usize>> {
        let mut pred = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for k in 0..self.len() {
            if self.on_border(k) && !self.blocked[k] {
                pred[k] = Some(usize::MAX);
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            for nb in self.neighbours(k) {
                if pred[nb].is_none() && !self.blocked[nb] {
                    pred[nb] = Some(k);
                    queue.push_back(nb);
                }
            }
        }
        pred
    }

    /// Cells from the origin out to the border through free cells, if any.
    pub fn escape_path(&self) -> Option<Vec<usize>> {
        let pred = self.flood_from_border();
        let mut k = self.origin();
        pred[k]?;
        let mut path = vec![k];
        while let Some(p) = pred[k] {
            if p == usize::MAX {
                break;
            }
            path.push(p);
            k = p;
        }
        Some(path)
    }
}

fn check_clear_of_origin(s: &Spectrum) -> Result<()> {
    let d = s.min_abs();
    if d <= s.resolution {
        return Err(Error::Ambiguous { distance: d, resolution: s.resolution });
    }
    Ok(())
}

/// Whether 0 lies in the unbounded component of the complement of the
/// ρ-disk cover of the spectrum.
pub fn zero_in_unbounded_component(s: &Spectrum) -> Result<bool> {
    check_clear_of_origin(s)?;
    let raster = Raster::new(s);
    if raster.is_blocked(raster.origin()) {
        return Err(Error::Ambiguous { distance: s.min_abs(), resolution: s.resolution });
    }
    Ok(raster.flood_from_border()[raster.origin()].is_some())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[C64], rho: f64) -> Spectrum {
        Spectrum::from_samples(&[v.to_vec()]).with_resolution(rho)
    }

    fn circle(m: usize, r: f64) -> Vec<C64> {
        (0..m).map(|j| C64::from_polar(r, 2.0 * PI * j as f64 / m as f64)).collect()
    }

    #[test]
    fn winding_examples() {
        assert_eq!(winding_number(&vec![C64::new(1.0, 0.0); 16], true).unwrap(), Winding::Closed { turns: 0, residual: 0.0 });
        let g = circle(64, 1.0);
        match winding_number(&g, true).unwrap() {
            Winding::Closed { turns, residual } => {
                assert_eq!(turns, 1);
                assert!(residual < 1e-12);
            }
            w => panic!("{w:?}"),
        }
        // open path x = j/63 covering [0, 1]
        let open: Vec<C64> = (0..64).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / 63.0)).collect();
        match winding_number(&open, false).unwrap() {
            Winding::Open(t) => assert!((t - 1.0).abs() < 1e-12),
            w => panic!("{w:?}"),
        }
        assert!(matches!(winding_number(&circle(2, 1.0), true), Err(Error::Undersampled { .. })));
        assert!(matches!(
            winding_number(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], false),
            Err(Error::ZeroOnPath { index: 1 })
        ));
    }

    #[test]
    fn unbounded_component_examples() {
        assert!(zero_in_unbounded_component(&pts(&[C64::new(2.0, 0.0)], 0.1)).unwrap());
        assert!(!zero_in_unbounded_component(&pts(&circle(64, 1.0), 0.2)).unwrap());
        assert!(zero_in_unbounded_component(&pts(&circle(4, 1.0), 0.1)).unwrap());
        assert!(matches!(
            zero_in_unbounded_component(&pts(&[C64::new(0.05, 0.0)], 0.1)),
            Err(Error::Ambiguous { .. })
        ));
    }

    #[test]
    fn eps_neighbourhood_examples() {
        let s4 = pts(&roots_of_unity(4), 0.1);
        assert!(in_eps_neighborhood(&s4, EpsNeighborhood { n: 4, eps: 0.01 }));
        assert!(in_eps_neighborhood(&pts(&[C64::new(1.05, 0.0)], 0.1), EpsNeighborhood { n: 2, eps: 0.1 }));
        assert!(!in_eps_neighborhood(&pts(&[C64::new(0.0, 0.0)], 0.1), EpsNeighborhood { n: 2, eps: 0.9 }));
    }

    #[test]
    fn merged_multiplicity() {
        let s = Spectrum::from_samples(&[vec![C64::new(1.0, 0.0); 3]]);
        assert_eq!(s.points.len(), 1);
        assert_eq!(s.points[0].multiplicity, 3);
    }

    #[test]
    fn escape_path_reaches_border() {
        let s = pts(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], 0.1);
        let raster = Raster::new(&s);
        let path = raster.escape_path().unwrap();
        assert_eq!(path[0], raster.origin());
        assert!(raster.on_border(*path.last().unwrap()));
        assert!(path.iter().all(|&k| !raster.is_blocked(k)));
    }
}
