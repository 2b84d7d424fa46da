use serde::{Deserialize, Serialize};

use super::continuous::{continuous_formula, ContinuousVariant};
use super::discrete::{discrete_crf_with, factors, level_plan, outer_sum, ARule, BRule, DiscreteSplit, Side, Variant};
use super::probes::ProbeSet;
use super::split::IdentitySplit;
use super::split_tol;
use super::FormulaReport;
use crate::dyadic::{DyadicSystem, Sampler};
use crate::error::{Error, Result};
use crate::family::{Mode, OperatorFamily};
use crate::kernel::Kernel;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

/// `𝒮_N + ℜ_N + ℛ¹_N + ℛ²_N = I`.
#[derive(Clone, Debug)]
pub struct InhomogeneousSplit<T> {
    pub n_window: u32,
    pub j0: u32,
    pub sampler: Sampler,
    pub s: Kernel<T>,
    /// Continuous remainder `ℜ_N`.
    pub r: Kernel<T>,
    /// Cube-average remainder over indices `≤ N`.
    pub r1: Kernel<T>,
    /// Point-sample remainder over indices `> N`.
    pub r2: Kernel<T>,
    pub identity_violation: f64,
    inner: DiscreteSplit<T>,
}

/// Riemann sum with cube averages of `Q_k` for `k ≤ N` and point samples
/// beyond, integrated against `Q_k^N` over each subcube.
pub fn inhomogeneous_split<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    j0: u32,
    sampler: Sampler,
    strict: bool,
) -> Result<InhomogeneousSplit<T>> {
    if family.mode != Mode::Inhomogeneous {
        return Err(Error::InvalidParameter(
            "inhomogeneous formula needs an inhomogeneous family".into(),
        ));
    }
    let w = space.weights();
    let n = family.n();
    let nw = split.n_window;
    let mut s = Kernel::zeros(n);
    let mut r1 = Kernel::zeros(n);
    let mut r2 = Kernel::zeros(n);
    let mut g_levels = Vec::new();
    let mut plans = Vec::new();
    for lv in &family.levels {
        let low = (lv.index - family.first_index()) as u32 <= nw;
        let rules = if low {
            (ARule::Integral, BRule::Average)
        } else {
            (ARule::Integral, BRule::Sample)
        };
        let plan = level_plan(space, sys, lv.index, lv.scale, j0, sampler, strict, rules)?;
        let (a, b) = factors(family, lv.index, nw, Side::Primal);
        outer_sum(
            &plan.a_matrix(&a, w),
            &plan.b_matrix(&b, w),
            n,
            plan.cells.len(),
            &mut s,
        );
        let gk = plan.remainder(&a, &b, w);
        g_levels.push((lv.index, gk.max_abs().as_f64()));
        if low {
            r1.add_assign(&gk);
        } else {
            r2.add_assign(&gk);
        }
        plans.push(plan);
    }
    let id = Kernel::identity(w);
    let identity_violation = s.add(&split.r).add(&r1).add(&r2).max_abs_diff(&id).as_f64();
    if identity_violation > split_tol::<T>() {
        return Err(Error::IdentityViolation {
            what: "four-part discrete split against the identity".into(),
            max_abs: identity_violation,
        });
    }
    let inner = DiscreteSplit {
        n_window: nw,
        j0,
        sampler,
        variant: Variant::Zero,
        side: Side::Primal,
        mode: Mode::Inhomogeneous,
        s: s.clone(),
        g: r1.add(&r2),
        r: split.r.clone(),
        g_levels,
        identity_violation,
        plans,
    };
    Ok(InhomogeneousSplit {
        n_window: nw,
        j0,
        sampler,
        s,
        r: split.r.clone(),
        r1,
        r2,
        identity_violation,
        inner,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InhomogeneousRun {
    pub continuous: FormulaReport,
    pub discrete: Option<FormulaReport>,
    /// `max |𝒮 + ℜ + ℛ¹ + ℛ² - I|`.
    pub four_part_violation: Option<f64>,
}

pub fn inhomogeneous_crf_with<T: Scalar>(
    space: &FinitePointSpace<T>,
    family: &OperatorFamily<T>,
    isplit: &InhomogeneousSplit<T>,
    tol: f64,
    probes: &ProbeSet<T>,
) -> Result<FormulaReport> {
    let (_, mut rep) = discrete_crf_with(space, family, &isplit.inner, tol, probes)?;
    rep.variant = "inhomogeneous_discrete".into();
    Ok(rep)
}

/// Continuous formula, and the discrete one when `discrete` carries
/// `(j0, sampler)`.
#[allow(clippy::too_many_arguments)]
pub fn inhomogeneous_crf<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    tol: f64,
    discrete: Option<(u32, Sampler)>,
    probes: &ProbeSet<T>,
    strict: bool,
) -> Result<InhomogeneousRun> {
    if family.mode != Mode::Inhomogeneous {
        return Err(Error::InvalidParameter(
            "inhomogeneous formula needs an inhomogeneous family".into(),
        ));
    }
    let (_, mut continuous) = continuous_formula(space, family, split, tol, ContinuousVariant::Left, probes)?;
    continuous.variant = "inhomogeneous_continuous".into();
    let (discrete, four) = match discrete {
        Some((j0, sampler)) => {
            let is = inhomogeneous_split(space, sys, family, split, j0, sampler, strict)?;
            (
                Some(inhomogeneous_crf_with(space, family, &is, tol, probes)?),
                Some(is.identity_violation),
            )
        }
        None => (None, None),
    };
    Ok(InhomogeneousRun {
        continuous,
        discrete,
        four_part_violation: four,
    })
}
