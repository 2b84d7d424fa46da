//! Riemann-sum discretizations of the identity split over subcubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::continuous::audit_duals;
use super::neumann::neumann_invert;
use super::norm::operator_norm_l2;
use super::probes::{reconstruction_errors, ProbeSet};
use super::split::{split_identity, IdentitySplit};
use super::split_tol;
use super::{DualFamily, FormulaReport};
use crate::dyadic::{DyadicSystem, Sampler};
use crate::error::{Error, Result};
use crate::family::{Mode, OperatorFamily};
use crate::kernel::{fixed_sum, Kernel};
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

/// Which factor is sampled and which is integrated over each subcube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `∫_C A(x,·) dμ · B(y_C, y)`.
    Zero,
    /// `A(x, y_C) · ∫_C B(·, y) dμ`.
    One,
    /// `μ(C) A(x, y_C) B(y_C, y)`.
    Two,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Zero, Variant::One, Variant::Two];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Zero => "0",
            Variant::One => "1",
            Variant::Two => "2",
        }
    }

    fn rules(self) -> (ARule, BRule) {
        match self {
            Variant::Zero => (ARule::Integral, BRule::Sample),
            Variant::One => (ARule::Sample, BRule::Integral),
            Variant::Two => (ARule::MeasureSample, BRule::Sample),
        }
    }
}

/// Primal: inner factor `Q_k`, outer `Q_k^N`, inverse applied to the outer
/// factor. Dual: the roles swap and the inverse is applied on the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ARule {
    Integral,
    Sample,
    MeasureSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BRule {
    Sample,
    Integral,
    Average,
}

#[derive(Clone, Debug)]
pub(crate) struct Cell<T> {
    pub members: Vec<usize>,
    pub sample: usize,
    pub measure: T,
}

#[derive(Clone, Debug)]
pub(crate) struct LevelPlan<T> {
    pub index: i32,
    pub a_rule: ARule,
    pub b_rule: BRule,
    pub cells: Vec<Cell<T>>,
    /// Cell of each point.
    pub owner: Vec<usize>,
}

impl<T: Scalar> LevelPlan<T> {
    /// `n × m` matrix, row-major, of the outer factor per cell.
    pub fn a_matrix(&self, a: &Kernel<T>, w: &[T]) -> Vec<T> {
        let n = a.n();
        let m = self.cells.len();
        let mut out = vec![T::zero(); n * m];
        out.par_chunks_mut(m.max(1)).enumerate().for_each(|(x, row)| {
            for (c, cell) in self.cells.iter().enumerate() {
                row[c] = match self.a_rule {
                    ARule::Integral => fixed_sum(cell.members.iter().map(|&z| a.get(x, z) * w[z])),
                    ARule::Sample => a.get(x, cell.sample),
                    ARule::MeasureSample => cell.measure * a.get(x, cell.sample),
                };
            }
        });
        out
    }

    /// `m × n` matrix, row-major, of the inner factor per cell.
    pub fn b_matrix(&self, b: &Kernel<T>, w: &[T]) -> Vec<T> {
        let n = b.n();
        let m = self.cells.len();
        let mut out = vec![T::zero(); m * n];
        out.par_chunks_mut(n.max(1)).enumerate().for_each(|(c, row)| {
            let cell = &self.cells[c];
            match self.b_rule {
                BRule::Sample => row.copy_from_slice(b.row(cell.sample)),
                BRule::Integral | BRule::Average => {
                    for &z in &cell.members {
                        for (o, &v) in row.iter_mut().zip(b.row(z)) {
                            *o = *o + w[z] * v;
                        }
                    }
                    if self.b_rule == BRule::Average {
                        row.iter_mut().for_each(|o| *o = *o / cell.measure);
                    }
                }
            }
        });
        out
    }

    /// `Ã(x,z)` with `Σ_z Ã(x,z) w_z B̃(z,y) = Σ_C a_C(x) b_C(y)`.
    fn replicate_a(&self, a: &Kernel<T>) -> Kernel<T> {
        match self.a_rule {
            ARule::Integral => a.clone(),
            ARule::Sample | ARule::MeasureSample => {
                Kernel::from_fn(a.n(), |x, z| a.get(x, self.cells[self.owner[z]].sample))
            }
        }
    }

    fn replicate_b(&self, b: &Kernel<T>, w: &[T]) -> Kernel<T> {
        match self.b_rule {
            BRule::Integral => b.clone(),
            BRule::Sample => Kernel::from_fn(b.n(), |z, y| b.get(self.cells[self.owner[z]].sample, y)),
            BRule::Average => {
                let bm = self.b_matrix(b, w);
                let n = b.n();
                Kernel::from_fn(n, |z, y| bm[self.owner[z] * n + y])
            }
        }
    }

    /// Sampling remainder `A∘(B - B̃) + (A - Ã)∘B̃`.
    pub fn remainder(&self, a: &Kernel<T>, b: &Kernel<T>, w: &[T]) -> Kernel<T> {
        let at = self.replicate_a(a);
        let bt = self.replicate_b(b, w);
        let mut g = a.compose(&b.sub(&bt), w);
        if self.a_rule != ARule::Integral {
            g.add_assign(&a.sub(&at).compose(&bt, w));
        }
        g
    }
}

/// `Σ_C a_C(x) b_C(y)`, accumulated over cells in order.
pub(crate) fn outer_sum<T: Scalar>(a: &[T], b: &[T], n: usize, m: usize, into: &mut Kernel<T>) {
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut row = vec![T::zero(); n];
            for c in 0..m {
                let av = a[x * m + c];
                if av == T::zero() {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&b[c * n..(c + 1) * n]) {
                    *o = *o + av * bv;
                }
            }
            row
        })
        .collect();
    for (x, row) in rows.into_iter().enumerate() {
        for (y, v) in row.into_iter().enumerate() {
            into.set(x, y, into.get(x, y) + v);
        }
    }
}

pub(crate) fn level_plan<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    index: i32,
    scale: i32,
    j0: u32,
    sampler: Sampler,
    strict: bool,
    rules: (ARule, BRule),
) -> Result<LevelPlan<T>> {
    let refinement = sys.refine_subcubes(space, scale, j0, sampler, strict)?;
    let w = space.weights();
    let mut owner = vec![usize::MAX; space.n()];
    let cells: Vec<Cell<T>> = refinement
        .subcubes()
        .enumerate()
        .map(|(c, s)| {
            for &x in &s.members {
                owner[x] = c;
            }
            Cell {
                members: s.members.clone(),
                sample: s.sample,
                measure: fixed_sum(s.members.iter().map(|&x| w[x])),
            }
        })
        .collect();
    if owner.iter().any(|&o| o == usize::MAX) {
        return Err(Error::InvalidParameter("refinement does not cover the space".into()));
    }
    Ok(LevelPlan {
        index,
        a_rule: rules.0,
        b_rule: rules.1,
        cells,
        owner,
    })
}

/// `(outer, inner)` factors of level `k`.
pub(crate) fn factors<T: Scalar>(
    family: &OperatorFamily<T>,
    k: i32,
    n_window: u32,
    side: Side,
) -> (Kernel<T>, Kernel<T>) {
    let q = family.q(k).expect("level present").clone();
    let qn = family.windowed(k, n_window);
    match side {
        Side::Primal => (qn, q),
        Side::Dual => (q, qn),
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteSplit<T> {
    pub n_window: u32,
    pub j0: u32,
    pub sampler: Sampler,
    pub variant: Variant,
    pub side: Side,
    pub mode: Mode,
    /// Riemann sum `S_N`.
    pub s: Kernel<T>,
    /// Sampling remainder `G_N`.
    pub g: Kernel<T>,
    pub r: Kernel<T>,
    /// `(k, max |G_{k,N}|)` per level.
    pub g_levels: Vec<(i32, f64)>,
    /// `max |S_N + G_N + R_N - I_mode|`.
    pub identity_violation: f64,
    pub(crate) plans: Vec<LevelPlan<T>>,
}

impl<T: Scalar> DiscreteSplit<T> {
    /// `ℛ_N = G_N + R_N`.
    pub fn remainder(&self) -> Kernel<T> {
        self.g.add(&self.r)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn discrete_split<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    n_window: u32,
    j0: u32,
    sampler: Sampler,
    variant: Variant,
    side: Side,
) -> Result<DiscreteSplit<T>> {
    let split = split_identity(family, space.weights(), n_window)?;
    discrete_split_with(space, sys, family, &split, j0, sampler, variant, side, false)
}

#[allow(clippy::too_many_arguments)]
pub fn discrete_split_with<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    j0: u32,
    sampler: Sampler,
    variant: Variant,
    side: Side,
    strict: bool,
) -> Result<DiscreteSplit<T>> {
    let w = space.weights();
    let n = family.n();
    if space.n() != n {
        return Err(Error::DimensionMismatch {
            expected: space.n(),
            found: n,
        });
    }
    let nw = split.n_window;
    let mut s = Kernel::zeros(n);
    let mut g = Kernel::zeros(n);
    let mut g_levels = Vec::new();
    let mut plans = Vec::new();
    for lv in &family.levels {
        let plan = level_plan(space, sys, lv.index, lv.scale, j0, sampler, strict, variant.rules())?;
        let (a, b) = factors(family, lv.index, nw, side);
        let am = plan.a_matrix(&a, w);
        let bm = plan.b_matrix(&b, w);
        outer_sum(&am, &bm, n, plan.cells.len(), &mut s);
        let gk = plan.remainder(&a, &b, w);
        g_levels.push((lv.index, gk.max_abs().as_f64()));
        g.add_assign(&gk);
        plans.push(plan);
    }
    let target = family.identity_target(w);
    let identity_violation = s.add(&g).add(&split.r).max_abs_diff(&target).as_f64();
    if identity_violation > split_tol::<T>() {
        return Err(Error::IdentityViolation {
            what: "S_N + G_N + R_N against the mode identity".into(),
            max_abs: identity_violation,
        });
    }
    Ok(DiscreteSplit {
        n_window: nw,
        j0,
        sampler,
        variant,
        side,
        mode: family.mode,
        s,
        g,
        r: split.r.clone(),
        g_levels,
        identity_violation,
        plans,
    })
}

pub(crate) fn sampler_label(s: Sampler) -> String {
    match s {
        Sampler::Center => "center".into(),
        Sampler::Random { seed } => format!("random({seed})"),
        Sampler::WorstCase => "worst_case".into(),
    }
}

/// Invert `S_N = I_mode - ℛ_N` and reconstruct the probes through the
/// discretized formula.
pub fn discrete_crf_with<T: Scalar>(
    space: &FinitePointSpace<T>,
    family: &OperatorFamily<T>,
    ds: &DiscreteSplit<T>,
    tol: f64,
    probes: &ProbeSet<T>,
) -> Result<(DualFamily<T>, FormulaReport)> {
    let w = space.weights();
    let n = family.n();
    let id = family.identity_target(w);
    let inv = neumann_invert(&ds.remainder(), &ds.s, &id, w, tol)?;
    let side = ds.side;
    // per level: modified factor matrices
    struct Lv<T> {
        a: Vec<T>,
        b: Vec<T>,
        m: usize,
    }
    let mut duals = Vec::new();
    let mut lvs = Vec::new();
    let mut synthesis = Kernel::zeros(n);
    for plan in &ds.plans {
        let (a, b) = factors(family, plan.index, ds.n_window, side);
        let (a, b, dual) = match side {
            Side::Primal => {
                let d = inv.inverse.compose(&a, w);
                (d.clone(), b, d)
            }
            Side::Dual => {
                let d = b.compose(&inv.inverse, w);
                (a, d.clone(), d)
            }
        };
        let am = plan.a_matrix(&a, w);
        let bm = plan.b_matrix(&b, w);
        let m = plan.cells.len();
        outer_sum(&am, &bm, n, m, &mut synthesis);
        duals.push((plan.index, dual));
        lvs.push(Lv { a: am, b: bm, m });
    }
    let mut recon = reconstruction_errors(space, probes, |f| {
        let mut g = vec![T::zero(); n];
        for lv in &lvs {
            let coef: Vec<T> = (0..lv.m)
                .map(|c| {
                    fixed_sum(
                        lv.b[c * n..(c + 1) * n]
                            .iter()
                            .zip(f)
                            .zip(w)
                            .map(|((&b, &v), &wy)| b * v * wy),
                    )
                })
                .collect();
            for (x, gx) in g.iter_mut().enumerate() {
                *gx = *gx + fixed_sum(lv.a[x * lv.m..(x + 1) * lv.m].iter().zip(&coef).map(|(&a, &c)| a * c));
            }
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
    let audits = vec![audit_duals(space, family, ds.n_window, &levels, side == Side::Primal)];
    let name = format!(
        "discrete_{}_{}",
        ds.variant.label(),
        match side {
            Side::Primal => "primal",
            Side::Dual => "dual",
        }
    );
    let report = FormulaReport {
        variant: name.clone(),
        n_window: ds.n_window,
        j0: Some(ds.j0),
        sampler: Some(sampler_label(ds.sampler)),
        certificate: inv.certificate.clone(),
        synthesis_norm,
        reconstruction: recon,
        audits,
    };
    Ok((
        DualFamily {
            variant: name,
            levels: duals,
            synthesis,
            certificate: inv.certificate,
        },
        report,
    ))
}

/// One discretized formula run across the three samplers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRun {
    pub variant: Variant,
    pub side: Side,
    pub n_window: u32,
    pub j0: u32,
    pub runs: Vec<FormulaReport>,
    /// `max |S_N + G_N + R_N - I_mode|` over the samplers.
    pub identity_violation: f64,
    /// `‖G_N‖₂` per sampler.
    pub g_norms: Vec<f64>,
    /// Worst relative L² error over samplers and probes.
    pub max_l2: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn discrete_crf<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    family: &OperatorFamily<T>,
    split: &IdentitySplit<T>,
    j0: u32,
    tol: f64,
    variant: Variant,
    side: Side,
    probes: &ProbeSet<T>,
    seed: u64,
    strict: bool,
) -> Result<DiscreteRun> {
    let mut runs = Vec::new();
    let mut viol = 0.0f64;
    let mut g_norms = Vec::new();
    for sampler in [Sampler::Center, Sampler::Random { seed }, Sampler::WorstCase] {
        let ds = discrete_split_with(space, sys, family, split, j0, sampler, variant, side, strict)?;
        viol = viol.max(ds.identity_violation);
        g_norms.push(operator_norm_l2(&ds.g, space.weights()).value);
        runs.push(discrete_crf_with(space, family, &ds, tol, probes)?.1);
    }
    let max_l2 = runs.iter().map(|r| r.reconstruction.max_l2()).fold(0.0, f64::max);
    Ok(DiscreteRun {
        variant,
        side,
        n_window: split.n_window,
        j0,
        runs,
        identity_violation: viol,
        g_norms,
        max_l2,
    })
}
