//! Dense Gaussian elimination over a [`Scalar`] field.
//!
//! Exact scalars pivot on the first nonzero entry; floating scalars use
//! partial pivoting and treat pivots below a relative threshold as zero.

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl<C: Scalar> Matrix<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![C::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<C>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mul_vec(&self, v: &[C]) -> Vec<C> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = C::zero();
                for (j, vj) in v.iter().enumerate() {
                    let a = &self[(i, j)];
                    if !a.is_zero() && !vj.is_zero() {
                        acc.add_assign_ref(&a.mul_ref(vj));
                    }
                }
                acc
            })
            .collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let t = a.mul_ref(b);
                        out[(i, j)].add_assign_ref(&t);
                    }
                }
            }
        }
        out
    }

    /// Reduces `[self | rhs]`; returns `None` when `self` is singular.
    fn eliminate(&self, rhs: &Self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "square system expected");
        assert_eq!(rhs.rows, self.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = self.data.iter().map(|c| c.abs_f64()).fold(0.0, f64::max).max(1e-300);
        for col in 0..n {
            let pivot = if C::EXACT {
                (col..n).find(|&r| !a[(r, col)].is_zero())?
            } else {
                let r = (col..n).max_by(|&x, &y| a[(x, col)].abs_f64().total_cmp(&a[(y, col)].abs_f64()))?;
                if a[(r, col)].abs_f64() <= 1e-12 * scale {
                    return None;
                }
                r
            };
            if pivot != col {
                a.swap_rows(pivot, col);
                b.swap_rows(pivot, col);
            }
            let inv = C::one().div_ref(&a[(col, col)]);
            for j in col..n {
                a[(col, j)] = a[(col, j)].mul_ref(&inv);
            }
            for j in 0..m {
                b[(col, j)] = b[(col, j)].mul_ref(&inv);
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in col..n {
                    if !a[(col, j)].is_zero() {
                        let t = f.mul_ref(&a[(col, j)]);
                        a[(r, j)] = a[(r, j)].sub_ref(&t);
                    }
                }
                for j in 0..m {
                    if !b[(col, j)].is_zero() {
                        let t = f.mul_ref(&b[(col, j)]);
                        b[(r, j)] = b[(r, j)].sub_ref(&t);
                    }
                }
            }
        }
        Some(b)
    }

    pub fn solve(&self, rhs: &[C]) -> Option<Vec<C>> {
        let b = Matrix::from_rows(rhs.len(), 1, rhs.to_vec());
        self.eliminate(&b).map(|x| x.data)
    }

    pub fn inverse(&self) -> Option<Self> {
        self.eliminate(&Self::identity(self.rows))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<C> std::ops::Index<(usize, usize)> for Matrix<C> {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.cols + j]
    }
}

impl<C> std::ops::IndexMut<(usize, usize)> for Matrix<C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{CRational, Complex64};

    #[test]
    fn exact_inverse() {
        let q = |n| CRational::from_i64(n);
        let m = Matrix::from_rows(2, 2, vec![q(2), q(1), q(1), q(1)]);
        let inv = m.inverse().unwrap();
        assert_eq!(m.mul(&inv), Matrix::identity(2));
        let sing = Matrix::from_rows(2, 2, vec![q(1), q(2), q(2), q(4)]);
        assert!(sing.inverse().is_none());
    }

    #[test]
    fn float_solve() {
        let c = |v: f64| Complex64::new(v, 0.0);
        let m = Matrix::from_rows(2, 2, vec![c(1e-3), c(1.0), c(1.0), c(1.0)]);
        let x = m.solve(&[c(1.0), c(2.0)]).unwrap();
        let back = m.mul_vec(&x);
        assert!((back[0] - c(1.0)).norm() < 1e-14 && (back[1] - c(2.0)).norm() < 1e-14);
    }
}
