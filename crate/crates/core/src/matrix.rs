//! Sparse matrices over a coefficient ring, stored as triplets in a BTreeMap
//! so iteration order (and therefore every downstream certificate) is
//! deterministic.

use std::collections::BTreeMap;
use std::fmt;

use num::traits::Zero;

use crate::error::EngineError;
use crate::ring::{scalar_to_string, Ring, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), Scalar>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize, ring: &Ring) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, ring.one());
        }
        m
    }

    pub fn from_rows(ring: &Ring, data: &[&[i64]]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let mut m = Matrix::zero(rows, cols);
        for (i, row) in data.iter().enumerate() {
            assert_eq!(row.len(), cols);
            for (j, v) in row.iter().enumerate() {
                if *v != 0 {
                    m.set(i, j, ring.from_i64(*v));
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.entries
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(Scalar::zero)
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        assert!(i < self.rows && j < self.cols, "index out of range");
        if v.is_zero() {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), v);
        }
    }

    pub fn add_to(&mut self, ring: &Ring, i: usize, j: usize, v: &Scalar) {
        let cur = self.get(i, j);
        self.set(i, j, ring.add(&cur, v));
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Scalar)> {
        self.entries.iter()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zero(self.cols, self.rows);
        for (&(i, j), v) in &self.entries {
            t.set(j, i, v.clone());
        }
        t
    }

    pub fn scale(&self, ring: &Ring, c: &Scalar) -> Matrix {
        let mut out = Matrix::zero(self.rows, self.cols);
        for (&(i, j), v) in &self.entries {
            out.set(i, j, ring.mul(v, c));
        }
        out
    }

    pub fn add(&self, ring: &Ring, other: &Matrix) -> Result<Matrix, EngineError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(EngineError::Dimension(format!(
                "add {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for (&(i, j), v) in &other.entries {
            out.add_to(ring, i, j, v);
        }
        Ok(out)
    }

    pub fn sub(&self, ring: &Ring, other: &Matrix) -> Result<Matrix, EngineError> {
        self.add(ring, &other.scale(ring, &ring.from_i64(-1)))
    }

    pub fn mul(&self, ring: &Ring, other: &Matrix) -> Result<Matrix, EngineError> {
        if self.cols != other.rows {
            return Err(EngineError::Dimension(format!(
                "mul {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zero(self.rows, other.cols);
        for (&(i, k), a) in &self.entries {
            for (&(_, j), b) in other.entries.range((k, 0)..=(k, usize::MAX)) {
                out.add_to(ring, i, j, &ring.mul(a, b));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, ring: &Ring, v: &[Scalar]) -> Result<Vec<Scalar>, EngineError> {
        if self.cols != v.len() {
            return Err(EngineError::Dimension(format!(
                "mul_vec {}x{} with len {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![ring.zero(); self.rows];
        for (&(i, j), a) in &self.entries {
            if !v[j].is_zero() {
                out[i] = ring.add(&out[i], &ring.mul(a, &v[j]));
            }
        }
        Ok(out)
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        let mut out = vec![Scalar::zero(); self.rows];
        for (&(i, j2), v) in &self.entries {
            if j2 == j {
                out[i] = v.clone();
            }
        }
        out
    }

    pub fn set_column(&mut self, j: usize, v: &[Scalar]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, v[i].clone());
        }
    }

    pub fn from_columns(rows: usize, cols: Vec<Vec<Scalar>>) -> Matrix {
        let mut m = Matrix::zero(rows, cols.len());
        for (j, c) in cols.into_iter().enumerate() {
            m.set_column(j, &c);
        }
        m
    }

    /// Horizontal concatenation [self | other].
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, EngineError> {
        if self.rows != other.rows {
            return Err(EngineError::Dimension("hstack row mismatch".into()));
        }
        let mut out = Matrix::zero(self.rows, self.cols + other.cols);
        for (&(i, j), v) in &self.entries {
            out.set(i, j, v.clone());
        }
        for (&(i, j), v) in &other.entries {
            out.set(i, self.cols + j, v.clone());
        }
        Ok(out)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| scalar_to_string(&self.get(i, j)))
                .collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_product() {
        let r = Ring::integers();
        let a = Matrix::from_rows(&r, &[&[1, 2], &[3, 4]]);
        let b = Matrix::from_rows(&r, &[&[0, 1], &[1, 0]]);
        let ab = a.mul(&r, &b).unwrap();
        assert_eq!(ab, Matrix::from_rows(&r, &[&[2, 1], &[4, 3]]));
    }
}
