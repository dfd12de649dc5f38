//! Row-major point storage shared by every module.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("points must have dimension at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "buffer of length {} is not a whole number of rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "points must have dimension at least 1");
        Self { dim, data: Vec::new() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("cannot infer dimension from zero rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    /// One-dimensional points from scalars.
    pub fn from_scalars(values: &[f64]) -> Self {
        Self { dim: 1, data: values.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    /// Rows `start..end` as a new set.
    pub fn slice_rows(&self, start: usize, end: usize) -> Points {
        Points {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Points {
        let mut out = Points::empty(self.dim);
        out.data.reserve(indices.len() * self.dim);
        for &i in indices {
            out.push(self.row(i));
        }
        out
    }

    pub fn concat(&self, other: &Points) -> Result<Points> {
        if self.dim != other.dim {
            return Err(Error::invalid(format!(
                "cannot concatenate points of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Points { dim: self.dim, data })
    }

    /// Rows sorted lexicographically under `f64::total_cmp`.
    ///
    /// Learners train on the canonical order, which makes every fit a
    /// function of the row multiset only.
    pub fn canonical(&self) -> Points {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| lex_cmp(self.row(a), self.row(b)));
        self.select(&idx)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.len(), self.dim), &self.data).expect("shape is consistent")
    }

    pub fn to_array(&self) -> Array2<f64> {
        self.view().to_owned()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        // normalise signed zero so equal points sort together
        let (x, y) = (if *x == 0.0 { 0.0 } else { *x }, if *y == 0.0 { 0.0 } else { *y });
        match x.total_cmp(&y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        assert!(Points::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(Points::new(2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn canonical_order_is_lexicographic() {
        let p = Points::from_rows(&[vec![2.0, 0.0], vec![1.0, 5.0], vec![1.0, -1.0]]).unwrap();
        let c = p.canonical();
        assert_eq!(c.row(0), &[1.0, -1.0]);
        assert_eq!(c.row(1), &[1.0, 5.0]);
        assert_eq!(c.row(2), &[2.0, 0.0]);
    }

    #[test]
    fn slicing_and_concat() {
        let p = Points::from_scalars(&[1.0, 2.0, 3.0, 4.0]);
        let a = p.slice_rows(0, 1);
        let b = p.slice_rows(1, 4);
        assert_eq!(a.concat(&b).unwrap(), p);
        assert_eq!(p.select(&[3, 0]).as_slice(), &[4.0, 1.0]);
    }
}
