//! Dense kernels acting through the measure: `(K f)(x) = Σ_y K(x,y) f(y) w_y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `n × n` kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T + Sync) -> Self {
        let mut data = vec![T::zero(); n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
        Self { n, data }
    }

    /// Kernel of the identity operator: `δ_xy / w_y`.
    pub fn identity(weights: &[T]) -> Self {
        let n = weights.len();
        let mut k = Self::zeros(n);
        for (i, &w) in weights.iter().enumerate() {
            k.data[i * n + i] = T::one() / w;
        }
        k
    }

    /// Kernel of the global average `f ↦ μ(X)^{-1} ∫ f dμ`.
    pub fn mean_projection(weights: &[T]) -> Self {
        let n = weights.len();
        let total = fixed_sum(weights.iter().copied());
        Self {
            n,
            data: vec![T::one() / total; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.n, other.n, "kernel size mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.n, other.n, "kernel size mismatch");
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Kernel of the composition `self ∘ other` under the measure.
    ///
    /// Each output entry accumulates over `z` in index order, so the result is
    /// independent of the thread count.
    pub fn compose(&self, other: &Self, weights: &[T]) -> Self {
        let n = self.n;
        assert_eq!(n, other.n, "kernel size mismatch");
        assert_eq!(n, weights.len(), "weight length mismatch");
        let mut out = vec![T::zero(); n * n];
        out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, orow)| {
            let arow = self.row(i);
            for z in 0..n {
                let a = arow[z] * weights[z];
                if a == T::zero() {
                    continue;
                }
                let brow = other.row(z);
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o = *o + a * b;
                }
            }
        });
        Self { n, data: out }
    }

    pub fn apply(&self, f: &[T], weights: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(f.len(), n);
        (0..n)
            .into_par_iter()
            .map(|i| fixed_sum(self.row(i).iter().zip(f).zip(weights).map(|((&k, &v), &w)| k * v * w)))
            .collect()
    }

    /// `∫ K(x,y) dμ(y)` for each `x`.
    pub fn row_integrals(&self, weights: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| fixed_sum(self.row(i).iter().zip(weights).map(|(&k, &w)| k * w)))
            .collect()
    }

    /// `∫ K(x,y) dμ(x)` for each `y`.
    pub fn col_integrals(&self, weights: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let w = weights[i];
            for (o, &k) in out.iter_mut().zip(self.row(i)) {
                *o = *o + k * w;
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n, "kernel size mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Kernel<U> {
        Kernel {
            n: self.n,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Left-to-right summation; the fixed order keeps results reproducible.
pub fn fixed_sum<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |a, b| a + b)
}

pub fn max_abs_vec<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_acts_as_identity() {
        let w = [0.5f64, 2.0, 1.5];
        let id = Kernel::identity(&w);
        let f = [1.0, -3.0, 0.25];
        assert_eq!(id.apply(&f, &w), f.to_vec());
    }

    #[test]
    fn compose_matches_sequential_application() {
        let w = [0.5f64, 2.0, 1.5];
        let a = Kernel::from_fn(3, |i, j| (i * 3 + j) as f64 - 2.0);
        let b = Kernel::from_fn(3, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64));
        let f = [1.0, -1.0, 2.0];
        let lhs = a.compose(&b, &w).apply(&f, &w);
        let rhs = a.apply(&b.apply(&f, &w), &w);
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_projection_has_unit_row_integrals() {
        let w = [0.5f64, 2.0, 1.5];
        let p = Kernel::mean_projection(&w);
        for s in p.row_integrals(&w) {
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Kernel::<f64>::from_vec(2, vec![0.0; 3]).is_err());
    }
}
