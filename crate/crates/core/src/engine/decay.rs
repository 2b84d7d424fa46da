use serde::{Deserialize, Serialize};

use super::discrete::{discrete_split_with, Side, Variant};
use super::norm::operator_norm_l2;
use super::split::{split_identity_with, ProductTable};
use crate::dyadic::{DyadicSystem, Sampler};
use crate::error::{Error, Result};
use crate::family::{build_haar_family, Mode, OperatorFamily};
use crate::report::linear_fit;
use crate::sampling::AuditBudget;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;
use crate::testspace::{
    default_test_probes, operator_test_space_ratio, verify_cz_kernel, CZKernelParams, TestSpaceParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayQuantity {
    /// `‖R_N‖₂` against `N`.
    #[serde(rename = "RN_l2")]
    RnL2,
    /// Test-space ratio of `R_N` against `N`.
    #[serde(rename = "RN_testspace_ratio")]
    RnTestspaceRatio,
    /// `‖G_N‖₂` against `j0` at fixed `N`.
    #[serde(rename = "GN_l2")]
    GnL2,
    /// Largest fitted Calderón–Zygmund constant of `R_N` against `N`.
    #[serde(rename = "CZ_CT_of_RN")]
    CzCtOfRn,
}

impl DecayQuantity {
    pub fn name(self) -> &'static str {
        match self {
            DecayQuantity::RnL2 => "RN_l2",
            DecayQuantity::RnTestspaceRatio => "RN_testspace_ratio",
            DecayQuantity::GnL2 => "GN_l2",
            DecayQuantity::CzCtOfRn => "CZ_CT_of_RN",
        }
    }

    pub fn parameter(self) -> &'static str {
        match self {
            DecayQuantity::GnL2 => "j0",
            _ => "N",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayStudyParams {
    pub quantity: DecayQuantity,
    pub sweep: Vec<u32>,
    /// Window for the `j0` sweep.
    pub n_window: u32,
    pub variant: Variant,
    pub side: Side,
    pub sampler: Sampler,
    /// Test-space exponents for the ratio study.
    pub beta: f64,
    pub gamma: f64,
    pub probe_count: usize,
    pub seed: u64,
    pub cz: CZKernelParams,
}

impl DecayStudyParams {
    pub fn new(quantity: DecayQuantity, sweep: Vec<u32>) -> Self {
        Self {
            quantity,
            sweep,
            n_window: 1,
            variant: Variant::Zero,
            side: Side::Primal,
            sampler: Sampler::Center,
            beta: 0.4,
            gamma: 0.4,
            probe_count: 8,
            seed: 0,
            cz: CZKernelParams::default(),
        }
    }
}

/// Values at or below this are rounding noise of an identically zero operator.
pub const ROUNDING_ZERO: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub quantity: String,
    pub parameter: String,
    pub values: Vec<(u32, f64)>,
    /// `exp(slope)` of the least-squares line through `(p, ln q)`.
    pub ratio: Option<f64>,
    /// `exp(intercept)`, so the fitted curve is `scale · ratio^p`.
    pub scale: Option<f64>,
    pub residual: Option<f64>,
    /// Strictly decreasing over the sweep.
    pub monotone: bool,
    pub flags: Vec<String>,
}

impl DecayTable {
    fn from_values(q: DecayQuantity, values: Vec<(u32, f64)>) -> Self {
        let mut flags = Vec::new();
        let monotone = values.windows(2).all(|w| w[1].1 < w[0].1);
        let (ratio, scale, residual) = if values.iter().all(|v| v.1 <= ROUNDING_ZERO) {
            flags.push(format!(
                "all values are zero up to rounding (<= {ROUNDING_ZERO:e}); rate fit skipped"
            ));
            (None, None, None)
        } else if values.iter().any(|v| !(v.1 > 0.0)) {
            flags.push("nonpositive values; rate fit skipped".to_string());
            (None, None, None)
        } else {
            let xs: Vec<f64> = values.iter().map(|v| v.0 as f64).collect();
            let ys: Vec<f64> = values.iter().map(|v| v.1.ln()).collect();
            match linear_fit(&xs, &ys) {
                Some((slope, icpt, r)) => (Some(slope.exp()), Some(icpt.exp()), Some(r)),
                None => {
                    flags.push("fewer than two sweep values; rate fit skipped".to_string());
                    (None, None, None)
                }
            }
        };
        Self {
            quantity: q.name().into(),
            parameter: q.parameter().into(),
            values,
            ratio,
            scale,
            residual,
            monotone,
            flags,
        }
    }
}

pub fn decay_study<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    table: &ProductTable<T>,
    params: &DecayStudyParams,
) -> Result<DecayTable> {
    if params.sweep.is_empty() {
        return Err(Error::InvalidParameter("empty sweep".into()));
    }
    let w = space.weights();
    let values = match params.quantity {
        DecayQuantity::RnL2 => params
            .sweep
            .iter()
            .map(|&nw| {
                Ok((
                    nw,
                    operator_norm_l2(&split_identity_with(family, table, w, nw)?.r, w).value,
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        DecayQuantity::GnL2 => {
            let split = split_identity_with(family, table, w, params.n_window)?;
            params
                .sweep
                .iter()
                .map(|&j0| {
                    let ds = discrete_split_with(
                        space,
                        sys,
                        family,
                        &split,
                        j0,
                        params.sampler,
                        params.variant,
                        params.side,
                        false,
                    )?;
                    Ok((j0, operator_norm_l2(&ds.g, w).value))
                })
                .collect::<Result<Vec<_>>>()?
        }
        DecayQuantity::CzCtOfRn => params
            .sweep
            .iter()
            .map(|&nw| {
                let r = split_identity_with(family, table, w, nw)?.r;
                Ok((
                    nw,
                    verify_cz_kernel(space, &r, &params.cz, &AuditBudget::with_seed(params.seed))?.c_t(),
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        DecayQuantity::RnTestspaceRatio => {
            let tp = TestSpaceParams {
                x1: space.canonical_order()[space.n() / 2],
                r: (space.diameter() / T::lit(4.0)).max(space.epsilon0()).as_f64(),
                beta: params.beta,
                gamma: params.gamma,
                cancellation_required: family.mode == Mode::Homogeneous,
            };
            let mut probes = default_test_probes(space, &tp, params.seed, params.probe_count)?;
            let haar = build_haar_family(space, sys, family.mode);
            if let Some(lv) = haar.levels.get(haar.len() / 2) {
                probes.extend((0..space.n()).map(|y| (0..space.n()).map(|x| lv.q.get(x, y)).collect()));
            }
            params
                .sweep
                .iter()
                .map(|&nw| {
                    let r = split_identity_with(family, table, w, nw)?.r;
                    Ok((nw, operator_test_space_ratio(space, &r, &tp, &probes)?.ratio))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(DecayTable::from_values(params.quantity, values))
}
