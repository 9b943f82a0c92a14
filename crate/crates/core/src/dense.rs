//! Minimal dense matrix support for the reference oracle. Clarity over
//! speed: the oracle targets circuits of a couple thousand nodes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![T::zero(); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = T::zero();
            for (a, b) in row.iter().zip(x) {
                acc += *a * *b;
            }
            y[i] = acc;
        }
        y
    }

    /// `a + s * b`, elementwise.
    pub fn add_scaled(&self, s: T, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (b.rows, b.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&b.data) {
            *x += s * *y;
        }
        out
    }

    pub fn scaled(&self, s: T) -> Matrix<T> {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn quad_form(&self, x: &[T]) -> T {
        let y = self.matvec(x);
        x.iter().zip(&y).map(|(a, b)| *a * *b).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Cholesky factorization `A = L L^T` with a pivot floor. Returns the
    /// squared pivots alongside the factor; fails on the first pivot at
    /// or below `pivot_floor`.
    pub fn cholesky(&self, pivot_floor: T) -> Result<Cholesky<T>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        let mut pivots = Vec::with_capacity(n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                let ljk = l.get(j, k);
                d -= ljk * ljk;
            }
            pivots.push(d);
            if !(d > pivot_floor) {
                return Err(Error::NotPositiveDefinite { row: j });
            }
            let dj = d.sqrt();
            l.set(j, j, dj);
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / dj);
            }
        }
        Ok(Cholesky { l, pivots })
    }
}

pub struct Cholesky<T> {
    pub l: Matrix<T>,
    /// Squared diagonal pivots, in elimination order.
    pub pivots: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let t = self.l.get(i, k) * y[k];
                y[i] -= t;
            }
            y[i] /= self.l.get(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let t = self.l.get(k, i) * y[k];
                y[i] -= t;
            }
            y[i] /= self.l.get(i, i);
        }
        y
    }
}

/// Coordinate-format text dump, `%%MatrixMarket`-compatible, 1-based.
pub fn write_matrix_market<T: Scalar, W: Write>(m: &Matrix<T>, sink: &mut W) -> Result<()> {
    writeln!(sink, "%%MatrixMarket matrix coordinate real general")?;
    let nnz = (0..m.rows)
        .flat_map(|i| (0..m.cols).map(move |j| (i, j)))
        .filter(|&(i, j)| m.get(i, j) != T::zero())
        .count();
    writeln!(sink, "{} {} {}", m.rows, m.cols, nnz)?;
    for i in 0..m.rows {
        for j in 0..m.cols {
            let v = m.get(i, j);
            if v != T::zero() {
                writeln!(sink, "{} {} {}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}
