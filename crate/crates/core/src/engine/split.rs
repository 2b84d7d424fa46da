use super::split_tol;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{Mode, OperatorFamily};
use crate::kernel::Kernel;
use crate::scalar::Scalar;

/// Every product `Q_j Q_k` of a family, computed once and reused across
/// window sizes.
#[derive(Clone, Debug)]
pub struct ProductTable<T> {
    first: i32,
    len: usize,
    prods: Vec<Kernel<T>>,
}

impl<T: Scalar> ProductTable<T> {
    pub fn new(family: &OperatorFamily<T>, weights: &[T]) -> Self {
        let len = family.len();
        let prods = (0..len * len)
            .into_par_iter()
            .map(|i| family.levels[i / len].q.compose(&family.levels[i % len].q, weights))
            .collect();
        Self {
            first: family.first_index(),
            len,
            prods,
        }
    }

    /// `Q_j Q_k`, or `None` if either index lies outside the family.
    pub fn get(&self, j: i32, k: i32) -> Option<&Kernel<T>> {
        let (a, b) = (j - self.first, k - self.first);
        if a < 0 || b < 0 || a as usize >= self.len || b as usize >= self.len {
            return None;
        }
        Some(&self.prods[a as usize * self.len + b as usize])
    }
}

#[derive(Clone, Debug)]
pub struct IdentitySplit<T> {
    pub n_window: u32,
    pub mode: Mode,
    /// `T_N = Σ_k Q_k^N Q_k`.
    pub t: Kernel<T>,
    /// `R_N = Σ_k Σ_{|l| > N} Q_{k+l} Q_k`.
    pub r: Kernel<T>,
    /// `(k, l)` of every product assigned to `R_N`.
    pub ledger: Vec<(i32, i32)>,
    /// `max |T_N + R_N - I_mode|`.
    pub identity_violation: f64,
}

impl<T: Scalar> IdentitySplit<T> {
    pub fn identity_target(&self, weights: &[T]) -> Kernel<T> {
        crate::family::identity_for(self.mode, weights)
    }
}

pub fn split_identity<T: Scalar>(family: &OperatorFamily<T>, weights: &[T], n_window: u32) -> Result<IdentitySplit<T>> {
    let table = ProductTable::new(family, weights);
    split_identity_with(family, &table, weights, n_window)
}

/// Assemble `T_N` and `R_N` separately from the product ledger and check
/// that they add up to the mode identity.
pub fn split_identity_with<T: Scalar>(
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    weights: &[T],
    n_window: u32,
) -> Result<IdentitySplit<T>> {
    let (id_violation, _) = family.invariant_violations(weights);
    if id_violation > split_tol::<T>() {
        return Err(Error::IdentityViolation {
            what: "family sum against the mode identity".into(),
            max_abs: id_violation,
        });
    }
    let n = family.n();
    let nw = n_window as i32;
    let mut t = Kernel::zeros(n);
    let mut r = Kernel::zeros(n);
    let mut ledger = Vec::new();
    for k in family.indices() {
        for j in family.indices() {
            let l = j - k;
            let p = table.get(j, k).expect("indices in range");
            if l.abs() <= nw {
                t.add_assign(p);
            } else {
                r.add_assign(p);
                ledger.push((k, l));
            }
        }
    }
    let target = crate::family::identity_for(family.mode, weights);
    let identity_violation = t.add(&r).max_abs_diff(&target).as_f64();
    if identity_violation > split_tol::<T>() {
        return Err(Error::IdentityViolation {
            what: "T_N + R_N against the mode identity".into(),
            max_abs: identity_violation,
        });
    }
    Ok(IdentitySplit {
        n_window,
        mode: family.mode,
        t,
        r,
        ledger,
        identity_violation,
    })
}
