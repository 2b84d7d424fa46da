use serde::{Deserialize, Serialize};

use super::neumann::neumann_invert;
use super::norm::operator_norm_l2;
use super::probes::{reconstruction_errors, ProbeSet};
use super::split::IdentitySplit;
use super::{DualFamily, FormulaReport};
use crate::error::{Error, Result};
use crate::family::{Mode, OperatorFamily};
use crate::kernel::Kernel;
use crate::report::{Condition, EstimateReport, RatioFit};
use crate::sampling::{par_fits, TupleList};
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousVariant {
    /// `f = Σ Q̃_k Q_k f` with `Q̃_k = T_N^{-1} Q_k^N`.
    Left,
    /// `f = Σ Q_k Q̄_k f` with `Q̄_k = Q_k^N T_N^{-1}`.
    Right,
}

pub fn homogeneous_crf<T: Scalar>(
    space: &FinitePointSpace<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    tol: f64,
    variant: ContinuousVariant,
    probes: &ProbeSet<T>,
) -> Result<(DualFamily<T>, FormulaReport)> {
    if family.mode != Mode::Homogeneous {
        return Err(Error::InvalidParameter(
            "homogeneous formula needs a homogeneous family".into(),
        ));
    }
    continuous_formula(space, family, split, tol, variant, probes)
}

pub(crate) fn continuous_formula<T: Scalar>(
    space: &FinitePointSpace<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    tol: f64,
    variant: ContinuousVariant,
    probes: &ProbeSet<T>,
) -> Result<(DualFamily<T>, FormulaReport)> {
    let w = space.weights();
    let id = family.identity_target(w);
    let inv = neumann_invert(&split.r, &split.t, &id, w, tol)?;
    let nw = split.n_window;
    let duals: Vec<(i32, Kernel<T>)> = family
        .indices()
        .map(|k| {
            let qn = family.windowed(k, nw);
            let d = match variant {
                ContinuousVariant::Left => inv.inverse.compose(&qn, w),
                ContinuousVariant::Right => qn.compose(&inv.inverse, w),
            };
            (k, d)
        })
        .collect();
    let mut synthesis = Kernel::zeros(family.n());
    for (k, d) in &duals {
        let q = family.q(*k).expect("level present");
        let term = match variant {
            ContinuousVariant::Left => d.compose(q, w),
            ContinuousVariant::Right => q.compose(d, w),
        };
        synthesis.add_assign(&term);
    }
    let mut recon = reconstruction_errors(space, probes, |f| {
        let mut g = vec![T::zero(); f.len()];
        for (k, d) in &duals {
            let q = family.q(*k).expect("level present");
            let h = match variant {
                ContinuousVariant::Left => d.apply(&q.apply(f, w), w),
                ContinuousVariant::Right => q.apply(&d.apply(f, w), w),
            };
            g.iter_mut().zip(h).for_each(|(a, b)| *a = *a + b);
        }
        g
    });
    let synthesis_norm = operator_norm_l2(&synthesis, w).value;
    let floor = 1e3 * T::epsilon().as_f64() * family.len() as f64 * synthesis_norm.max(1.0);
    recon.check_bound(inv.certificate.tail_bound, synthesis_norm, floor);

    let levels: Vec<(i32, i32, &Kernel<T>)> = duals
        .iter()
        .map(|(k, d)| (*k, family.level(*k).expect("level").scale, d))
        .collect();
    let first_var = variant == ContinuousVariant::Left;
    let audit = audit_duals(space, family, nw, &levels, first_var);
    let name = match variant {
        ContinuousVariant::Left => "continuous_left",
        ContinuousVariant::Right => "continuous_right",
    };
    let report = FormulaReport {
        variant: name.into(),
        n_window: nw,
        j0: None,
        sampler: None,
        certificate: inv.certificate.clone(),
        synthesis_norm,
        reconstruction: recon,
        audits: vec![audit],
    };
    Ok((
        DualFamily {
            variant: name.into(),
            levels: duals,
            synthesis,
            certificate: inv.certificate,
        },
        report,
    ))
}

/// Exact integral audit of dual kernels plus fitted size and regularity in
/// the variable that carries the inverse.
///
/// Homogeneous duals have vanishing row and column integrals. Inhomogeneous
/// duals integrate to 1 for indices `≤ N` and to 0 beyond.
pub(crate) fn audit_duals<T: Scalar>(
    space: &FinitePointSpace<T>,
    family: &OperatorFamily<T>,
    n_window: u32,
    levels: &[(i32, i32, &Kernel<T>)],
    first_variable: bool,
) -> EstimateReport {
    let w = space.weights();
    let n = space.n();
    let mut rep = EstimateReport::new("dual kernels");
    let mut viol = 0.0f64;
    for (k, _, d) in levels {
        let target = match family.mode {
            Mode::Inhomogeneous if (*k - family.first_index()) as u32 <= n_window => T::one(),
            _ => T::zero(),
        };
        for v in d.row_integrals(w).into_iter().chain(d.col_integrals(w)) {
            viol = viol.max((v - target).abs().as_f64());
        }
    }
    let anchor = match family.mode {
        Mode::Homogeneous => "row and column integrals of every dual kernel vanish",
        Mode::Inhomogeneous => "dual integrals equal 1 for indices up to N and 0 beyond",
    };
    rep.push(Condition::exact("integrals", anchor, viol, T::IDENTITY_TOL));

    let delta = T::lit(family.delta);
    let two_a0 = T::lit(2.0) * space.a0();
    let eta = 0.5;
    let pairs = TupleList::<2>::exhaustive(n);
    let fits = par_fits(pairs.len(), 2, |i, f: &mut [RatioFit]| {
        let [x, y] = pairs.get(i);
        for (li, (_, scale, d)) in levels.iter().enumerate() {
            let s = delta.powi(*scale);
            let dist = space.d(x, y);
            let rel = s + dist;
            let get = |a: usize, b: usize| if first_variable { d.get(a, b) } else { d.get(b, a) };
            let lsize = -(space.volume(x, s) + space.v(x, y)).as_f64().ln() + (s / rel).as_f64().ln();
            f[0].observe(get(x, y).abs().as_f64(), lsize, &[li, x, y]);
            for xp in 0..n {
                let dx = space.d(x, xp);
                if xp == x || dx > rel / two_a0 {
                    continue;
                }
                let lhs = (get(x, y) - get(xp, y)).abs().as_f64();
                f[1].observe(lhs, eta * (dx / rel).as_f64().ln() + lsize, &[li, x, y, xp]);
            }
        }
    });
    let census = pairs.census(pairs.len() * levels.len(), fits[0].admissible);
    rep.push(Condition::fitted(
        "size",
        "|D_k(x,y)| <= C (V_s(x)+V(x,y))^-1 s/(s+d)",
        &fits[0],
        census.clone(),
    ));
    rep.push(Condition::fitted(
        "regularity",
        "differences in the inverted variable within (2A0)^-1 (s+d), modulus 1/2",
        &fits[1],
        census,
    ));
    rep
}
