use serde::{Deserialize, Serialize};

use super::discrete::{discrete_split_with, DiscreteSplit, Side, Variant};
use super::inhomogeneous::{inhomogeneous_split, InhomogeneousSplit};
use super::norm::operator_norm_l2;
use super::split::{split_identity_with, IdentitySplit, ProductTable};
use crate::dyadic::{DyadicSystem, Sampler};
use crate::error::{Error, Result};
use crate::family::OperatorFamily;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

/// Target bound on the remainder norm for automatic choices.
pub const AUTO_RHO: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoChoice {
    pub n_window: u32,
    pub j0: Option<u32>,
    pub rho: f64,
    /// `(N, j0, ‖remainder‖₂)` for every configuration tried, in order.
    pub scanned: Vec<(u32, Option<u32>, f64)>,
}

/// Smallest `N ≤ n_max` with `‖R_N‖₂ ≤ 1/2`.
pub fn choose_n<T: Scalar>(
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    weights: &[T],
    n_max: u32,
) -> Result<(AutoChoice, IdentitySplit<T>)> {
    let mut scanned = Vec::new();
    for nw in 0..=n_max {
        let split = split_identity_with(family, table, weights, nw)?;
        let rho = operator_norm_l2(&split.r, weights).value;
        scanned.push((nw, None, rho));
        if rho <= AUTO_RHO {
            return Ok((
                AutoChoice {
                    n_window: nw,
                    j0: None,
                    rho,
                    scanned,
                },
                split,
            ));
        }
    }
    Err(Error::Divergent {
        rho: scanned.last().map_or(f64::INFINITY, |s| s.2),
    })
}

fn scan<T: Scalar, X>(
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    weights: &[T],
    n_max: u32,
    j0_max: u32,
    mut at: impl FnMut(&IdentitySplit<T>, u32) -> Result<(f64, X)>,
) -> Result<(AutoChoice, IdentitySplit<T>, X)> {
    let mut scanned = Vec::new();
    let mut last = f64::INFINITY;
    for nw in 0..=n_max {
        let split = split_identity_with(family, table, weights, nw)?;
        let rho_r = operator_norm_l2(&split.r, weights).value;
        scanned.push((nw, None, rho_r));
        if rho_r > AUTO_RHO {
            continue;
        }
        for j0 in 0..=j0_max {
            let (rho, x) = at(&split, j0)?;
            scanned.push((nw, Some(j0), rho));
            last = rho;
            if rho <= AUTO_RHO {
                return Ok((
                    AutoChoice {
                        n_window: nw,
                        j0: Some(j0),
                        rho,
                        scanned,
                    },
                    split,
                    x,
                ));
            }
        }
    }
    Err(Error::Divergent { rho: last })
}

/// Smallest `N`, then smallest `j0`, with `‖G_N + R_N‖₂ ≤ 1/2` for one
/// discretization.
#[allow(clippy::too_many_arguments)]
pub fn choose_discrete<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    variant: Variant,
    side: Side,
    sampler: Sampler,
    n_max: u32,
    j0_max: u32,
    strict: bool,
) -> Result<(AutoChoice, IdentitySplit<T>, DiscreteSplit<T>)> {
    let w = space.weights();
    scan(family, table, w, n_max, j0_max, |split, j0| {
        let ds = discrete_split_with(space, sys, family, split, j0, sampler, variant, side, strict)?;
        Ok((operator_norm_l2(&ds.remainder(), w).value, ds))
    })
}

#[allow(clippy::too_many_arguments)]
pub fn choose_inhomogeneous<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    sampler: Sampler,
    n_max: u32,
    j0_max: u32,
    strict: bool,
) -> Result<(AutoChoice, IdentitySplit<T>, InhomogeneousSplit<T>)> {
    let w = space.weights();
    scan(family, table, w, n_max, j0_max, |split, j0| {
        let is = inhomogeneous_split(space, sys, family, split, j0, sampler, strict)?;
        let rem = is.r.add(&is.r1).add(&is.r2);
        Ok((operator_norm_l2(&rem, w).value, is))
    })
}
