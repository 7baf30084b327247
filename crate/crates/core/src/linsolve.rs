//! Tridiagonal direct solve for the time steps, and a small dense
//! Gaussian-elimination oracle used by the verification checks.

use crate::error::{Error, Result};
use crate::grid::StateVector;
use crate::operators::Tridiagonal;
use crate::scalar::Real;

/// Largest dimension the dense oracle accepts.
pub const DENSE_MAX: usize = 64;

/// Relative pivot threshold of the Thomas sweep.
pub const PIVOT_GUARD: f64 = 1e-14;

/// Solves `t x = rhs` by the Thomas algorithm (no pivoting).
///
/// Fails with [`Error::SingularPivot`] when a forward-elimination pivot drops
/// below `PIVOT_GUARD * max_i |t_ii|`.
pub fn thomas_solve<T: Real>(t: &Tridiagonal<T>, rhs: &StateVector<T>) -> Result<StateVector<T>> {
    if t.tag() != rhs.tag() {
        return Err(Error::GridMismatch { expected: t.tag().n_interior(), found: rhs.tag().n_interior() });
    }
    let x = thomas_slice(t, rhs.values())?;
    Ok(StateVector::from_raw(rhs.tag(), x))
}

pub(crate) fn thomas_slice<T: Real>(t: &Tridiagonal<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = t.n();
    debug_assert_eq!(rhs.len(), n);
    let guard = T::lit(PIVOT_GUARD) * t.max_abs_main();
    let mut cp = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];

    let mut pivot = t.main[0];
    check_pivot(pivot, guard, 0)?;
    if n > 1 {
        cp[0] = t.sup[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        let a = t.sub[i - 1];
        pivot = t.main[i] - a * cp[i - 1];
        check_pivot(pivot, guard, i)?;
        if i + 1 < n {
            cp[i] = t.sup[i] / pivot;
        }
        x[i] = (rhs[i] - a * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] = x[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}

#[inline]
fn check_pivot<T: Real>(pivot: T, guard: T, row: usize) -> Result<()> {
    // `!(a >= b)` also catches NaN pivots
    if !(pivot.abs() >= guard) || guard == T::zero() {
        return Err(Error::SingularPivot { row: row + 1, pivot: pivot.to_f64_lossy() });
    }
    Ok(())
}

/// Row-major square matrix for verification oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > DENSE_MAX {
            return Err(Error::DenseTooLarge { n, max: DENSE_MAX });
        }
        Ok(Self { n, data: vec![T::zero(); n * n] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        Ok(m)
    }

    pub fn from_tridiagonal(t: &Tridiagonal<T>) -> Result<Self> {
        let n = t.n();
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                m[(i, j)] = t.get(i, j);
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self { n, data: vec![T::zero(); n * n] };
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum()).collect()
    }

    /// `max_i sum_j |a_ij|`.
    pub fn norm_inf(&self) -> T {
        (0..self.n).map(|i| self.row(i).iter().map(|a| a.abs()).sum::<T>()).fold(T::zero(), T::max)
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self[(i, j)];
            }
        }
        out
    }

    /// LU factorization with partial pivoting, stored in place.
    fn factor(&self) -> Result<(Vec<T>, Vec<usize>)> {
        let n = self.n;
        let mut lu = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()));
        let tiny = T::epsilon() * scale * T::from_index(n.max(1));
        for k in 0..n {
            let p = (k..n).max_by(|&a, &b| lu[a * n + k].abs().partial_cmp(&lu[b * n + k].abs()).unwrap()).unwrap();
            if !(lu[p * n + k].abs() > tiny) {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                for j in k + 1..n {
                    lu[i * n + j] = lu[i * n + j] - l * lu[k * n + j];
                }
            }
        }
        Ok((lu, perm))
    }

    fn substitute(lu: &[T], perm: &[usize], n: usize, rhs: &[T]) -> Vec<T> {
        let mut y: Vec<T> = perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] = y[i] - lu[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] = y[i] - lu[i * n + j] * y[j];
            }
            y[i] = y[i] / lu[i * n + i];
        }
        y
    }

    /// Solves `self x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        assert_eq!(rhs.len(), self.n);
        let (lu, perm) = self.factor()?;
        Ok(Self::substitute(&lu, &perm, self.n, rhs))
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let (lu, perm) = self.factor()?;
        let mut inv = Self { n, data: vec![T::zero(); n * n] };
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = Self::substitute(&lu, &perm, n, &e);
            for (i, v) in col.into_iter().enumerate() {
                inv.data[i * n + j] = v;
            }
        }
        Ok(inv)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Explicit inverse of a tridiagonal operator (N <= 64).
pub fn dense_invert<T: Real>(t: &Tridiagonal<T>) -> Result<DenseMatrix<T>> {
    DenseMatrix::from_tridiagonal(t)?.inverse()
}
