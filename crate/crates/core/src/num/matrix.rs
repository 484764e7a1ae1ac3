//! Small dense matrices.
//!
//! Determinant and adjugate use cofactor expansion so that the identity
//! `adj(M)·M = det(M)·I` holds exactly over any exact ring (rationals,
//! integers) and to roundoff over floats. Intended for n ≤ 4.

use std::fmt;

use num_traits::{Float, Num};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for r in 0..self.rows {
            list.entry(&&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        list.finish()
    }
}

impl<T: Clone> Matrix<T> {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension {
                what: "matrix shape",
                expected: 1,
                found: 0,
            });
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "matrix entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                what: "matrix row length",
                expected: cols,
                found: bad.len(),
            });
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Copy of `self` with row `skip_r` and column `skip_c` removed.
    fn minor(&self, skip_r: usize, skip_c: usize) -> Self {
        let mut data = Vec::with_capacity((self.rows - 1) * (self.cols - 1));
        for r in (0..self.rows).filter(|&r| r != skip_r) {
            for c in (0..self.cols).filter(|&c| c != skip_c) {
                data.push(self.get(r, c).clone());
            }
        }
        Self {
            rows: self.rows - 1,
            cols: self.cols - 1,
            data,
        }
    }
}

impl<T: Clone + Num> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::Dimension {
                what: "matrix-vector product",
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    pub fn mul_mat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                what: "matrix product",
                expected: self.cols,
                found: other.rows,
            });
        }
        Ok(Self::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).fold(T::zero(), |acc, k| {
                acc + self.get(r, k).clone() * other.get(k, c).clone()
            })
        }))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                what: "matrix difference",
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    pub fn trace(&self) -> Result<T> {
        self.require_square()?;
        Ok((0..self.rows).fold(T::zero(), |acc, i| acc + self.get(i, i).clone()))
    }

    /// Determinant by cofactor expansion along the first row.
    pub fn det(&self) -> Result<T> {
        self.require_square()?;
        Ok(self.det_unchecked())
    }

    fn det_unchecked(&self) -> T {
        match self.rows {
            1 => self.data[0].clone(),
            2 => {
                self.data[0].clone() * self.data[3].clone()
                    - self.data[1].clone() * self.data[2].clone()
            }
            n => {
                let mut acc = T::zero();
                for c in 0..n {
                    let a = self.get(0, c).clone();
                    if a.is_zero() {
                        continue;
                    }
                    let term = a * self.minor(0, c).det_unchecked();
                    acc = if c % 2 == 0 { acc + term } else { acc - term };
                }
                acc
            }
        }
    }

    /// Classical adjoint: `adj(M)[i][j] = (-1)^(i+j) det(minor(M, j, i))`.
    pub fn adjugate(&self) -> Result<Self> {
        self.require_square()?;
        let n = self.rows;
        if n == 1 {
            return Ok(Self::identity(1));
        }
        Ok(Self::from_fn(n, n, |i, j| {
            let cofactor = self.minor(j, i).det_unchecked();
            if (i + j) % 2 == 0 {
                cofactor
            } else {
                T::zero() - cofactor
            }
        }))
    }
}

impl<T: Float> Matrix<T> {
    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn dot<T: Clone + Num>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn det_examples() {
        assert_eq!(Matrix::<f64>::identity(2).det().unwrap(), 1.0);
        assert_eq!(m(&[&[2.0, 1.0], &[1.0, 1.0]]).det().unwrap(), 1.0);
        // Fundamental matrix of the ω=3 oscillator at t = π/6.
        assert!((m(&[&[0.0, 1.0 / 3.0], &[-3.0, 0.0]]).det().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            m(&[&[2.0, 0.0, 1.0], &[1.0, 3.0, 2.0], &[1.0, 1.0, 2.0]])
                .det()
                .unwrap(),
            6.0
        );
    }

    #[test]
    fn adjugate_examples() {
        for n in 1..=4 {
            let id = Matrix::<f64>::identity(n);
            assert_eq!(id.adjugate().unwrap(), id);
        }
        assert_eq!(
            m(&[&[1.0, 2.0], &[3.0, 4.0]]).adjugate().unwrap(),
            m(&[&[4.0, -2.0], &[-3.0, 1.0]])
        );
    }

    #[test]
    fn non_square_rejected() {
        let r = Matrix::from_row_major(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            r.det(),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
        assert!(matches!(r.adjugate(), Err(Error::NotSquare { .. })));
        assert!(r.trace().is_err());
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::<f64>::identity(2).mul_vec(&[1.0]).is_err());
    }

    #[test]
    fn adjugate_identity_exact_over_rationals() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        let a = Matrix::from_rows(&[
            vec![r(1, 2), r(-3, 7), r(2, 1), r(0, 1)],
            vec![r(5, 3), r(1, 1), r(-1, 4), r(2, 9)],
            vec![r(0, 1), r(7, 5), r(3, 2), r(-1, 1)],
            vec![r(4, 1), r(-2, 3), r(1, 6), r(1, 8)],
        ])
        .unwrap();
        let det = a.det().unwrap();
        let lhs = a.adjugate().unwrap().mul_mat(&a).unwrap();
        assert_eq!(lhs, Matrix::identity(4).scale(det));
        let rhs = a.mul_mat(&a.adjugate().unwrap()).unwrap();
        assert_eq!(rhs, Matrix::identity(4).scale(det));
    }

    #[test]
    fn random_3x3_adjugate_identity() {
        // Fixed pseudo-random entries from a small LCG.
        let mut s = 0x2545_f491_4f6c_dd1d_u64;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..50 {
            let a = Matrix::from_fn(3, 3, |_, _| next());
            let det = a.det().unwrap();
            let lhs = a.adjugate().unwrap().mul_mat(&a).unwrap();
            let diff = lhs.sub(&Matrix::identity(3).scale(det)).unwrap().max_abs();
            assert!(diff <= 1e-12 * a.max_abs().powi(3).max(1.0), "diff {diff}");
        }
    }

    proptest! {
        #[test]
        fn adjugate_identity_holds(n in 1usize..=4, entries in prop::collection::vec(-10.0f64..10.0, 16)) {
            let a = Matrix::from_fn(n, n, |r, c| entries[r * 4 + c]);
            let det = a.det().unwrap();
            let lhs = a.adjugate().unwrap().mul_mat(&a).unwrap();
            let diff = lhs.sub(&Matrix::identity(n).scale(det)).unwrap().max_abs();
            prop_assert!(diff <= 1e-10 * a.max_abs().powi(3).max(1.0));
        }

        #[test]
        fn det_of_transpose(entries in prop::collection::vec(-5i64..5, 9)) {
            let a = Matrix::from_fn(3, 3, |r, c| Rational64::from_integer(entries[r * 3 + c]));
            prop_assert_eq!(a.det().unwrap(), a.transpose().det().unwrap());
        }
    }
}
