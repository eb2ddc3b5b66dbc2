//! JSON literals for elements, matrices and spec files.
//!
//! Complex numbers are `[re, im]` pairs; matrices are row-major lists of
//! element literals, each either polynomial coefficients or raw samples.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{make_backend, AlgebraElement, Backend, MatrixOverAlgebra, Space};
use crate::dense::Mat;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementLiteral {
    Poly { poly: Vec<C64> },
    Samples { samples: Vec<C64> },
}

impl ElementLiteral {
    pub fn to_element(&self, space: &Space) -> Result<AlgebraElement> {
        match self {
            ElementLiteral::Poly { poly } => Ok(AlgebraElement::from_poly(space, poly.clone())),
            ElementLiteral::Samples { samples } => AlgebraElement::from_values(space, samples.clone()),
        }
    }

    pub fn from_element(e: &AlgebraElement) -> Self {
        match e.poly() {
            Some(p) => ElementLiteral::Poly { poly: p.to_vec() },
            None => ElementLiteral::Samples { samples: e.values().to_vec() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixLiteral {
    pub n: usize,
    pub entries: Vec<ElementLiteral>,
}

impl MatrixLiteral {
    /// Sample form of every entry.
    pub fn from_matrix(m: &MatrixOverAlgebra) -> Self {
        let n = m.dim();
        let entries = (0..n * n)
            .map(|k| ElementLiteral::Samples { samples: m.samples().iter().map(|s| s[(k / n, k % n)]).collect() })
            .collect();
        MatrixLiteral { n, entries }
    }

    /// Constant matrix as degree-0 polynomial entries.
    pub fn constant(m: &Mat) -> Self {
        let n = m.dim();
        let entries = m.as_slice().iter().map(|&c| ElementLiteral::Poly { poly: vec![c] }).collect();
        MatrixLiteral { n, entries }
    }

    pub fn to_matrix(&self, space: &Space) -> Result<MatrixOverAlgebra> {
        if self.entries.len() != self.n * self.n {
            return Err(Error::Structural(format!(
                "matrix of size {} needs {} entries, got {}",
                self.n,
                self.n * self.n,
                self.entries.len()
            )));
        }
        let elems = self.entries.iter().map(|e| e.to_element(space)).collect::<Result<Vec<_>>>()?;
        MatrixOverAlgebra::from_entries(self.n, &elems)
    }
}

/// A spec file: backend, size, entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub backend: Backend,
    pub n: usize,
    pub entries: Vec<ElementLiteral>,
    /// Divide by an n-th root of det before the triangular path.
    #[serde(default)]
    pub normalize_det: bool,
}

impl MatrixSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<(Space, MatrixOverAlgebra)> {
        let space = make_backend(self.backend)?;
        let m = MatrixLiteral { n: self.n, entries: self.entries.clone() }.to_matrix(&space)?;
        Ok((space, m))
    }

    pub fn from_matrix(m: &MatrixOverAlgebra) -> Self {
        let lit = MatrixLiteral::from_matrix(m);
        MatrixSpec { backend: m.space().backend(), n: lit.n, entries: lit.entries, normalize_det: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_with_both_literal_kinds() {
        let text = r#"{
            "backend": {"kind": "finite_points", "count": 2},
            "n": 2,
            "entries": [
                {"poly": [[1.0, 0.0]]},
                {"samples": [[0.0, 1.0], [2.0, 0.0]]},
                {"poly": [[0.0, 0.0]]},
                {"samples": [[1.0, 0.0], [1.0, 0.0]]}
            ]
        }"#;
        let spec = MatrixSpec::from_json(text).unwrap();
        assert!(!spec.normalize_det);
        let (_, m) = spec.build().unwrap();
        assert_eq!(m.at(1)[(0, 1)], C64::new(2.0, 0.0));
        assert_eq!(m.at(0)[(0, 1)], C64::new(0.0, 1.0));
    }

    #[test]
    fn roundtrip_through_json() {
        let space = make_backend(Backend::DiskGrid { boundary_count: 8, radial_rings: 2, degree_cap: 3 }).unwrap();
        let z = AlgebraElement::coordinate(&space);
        let m = MatrixOverAlgebra::diag(&[z.clone(), z.exp()]).unwrap();
        let spec = MatrixSpec::from_matrix(&m);
        let text = serde_json::to_string(&spec).unwrap();
        let (_, back) = MatrixSpec::from_json(&text).unwrap().build().unwrap();
        assert_eq!(back.max_diff(&m).unwrap(), 0.0);
    }

    #[test]
    fn wrong_sample_count_rejected() {
        let space = make_backend(Backend::FinitePoints { count: 3 }).unwrap();
        let lit = ElementLiteral::Samples { samples: vec![C64::new(1.0, 0.0)] };
        assert!(matches!(lit.to_element(&space), Err(Error::Structural(_))));
    }
}
