//! Level-indexed kernel families `Q_k` built from averaging operators `P_k`.

mod audit;

pub use audit::{
    compose_and_audit, composition_decay, verify_ati, verify_exp_ati, AtiAuditParams, CompositionAudit,
    CompositionDecay, ExpAtiAuditParams,
};

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::kernel::{fixed_sum, Kernel};
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `Σ Q_k = I - Π`, every `Q_k` cancels.
    Homogeneous,
    /// `Σ Q_k = I`, `Q_0` has unit integrals and the rest cancel.
    Inhomogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Haar,
    Smoothed,
    Loaded,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub nu: Option<f64>,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedParams {
    pub nu: f64,
    pub a: f64,
    /// Decay order used by the size audits of the averaging operators.
    pub gamma: f64,
}

impl Default for SmoothedParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            a: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyLevel<T> {
    /// Position in the family; contiguous.
    pub index: i32,
    /// Scale exponent: the kernel lives at scale `δ^scale`.
    pub scale: i32,
    pub q: Kernel<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorFamily<T> {
    pub mode: Mode,
    pub provenance: Provenance,
    pub delta: f64,
    pub params: FamilyParams,
    pub levels: Vec<FamilyLevel<T>>,
    /// `(k, P_k)` for constructed families.
    pub averages: Vec<(i32, Kernel<T>)>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> OperatorFamily<T> {
    pub fn n(&self) -> usize {
        self.levels.first().map_or(0, |l| l.q.n())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn first_index(&self) -> i32 {
        self.levels.first().map_or(0, |l| l.index)
    }

    pub fn last_index(&self) -> i32 {
        self.levels.last().map_or(-1, |l| l.index)
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i32> {
        self.first_index()..=self.last_index()
    }

    /// `Q_k`, or `None` outside the family (where it is zero).
    pub fn q(&self, index: i32) -> Option<&Kernel<T>> {
        let i = index - self.first_index();
        if i < 0 {
            return None;
        }
        self.levels.get(i as usize).map(|l| &l.q)
    }

    pub fn level(&self, index: i32) -> Option<&FamilyLevel<T>> {
        let i = index - self.first_index();
        if i < 0 {
            return None;
        }
        self.levels.get(i as usize)
    }

    /// `I` or `I - Π` depending on the mode.
    pub fn identity_target(&self, weights: &[T]) -> Kernel<T> {
        identity_for(self.mode, weights)
    }

    pub fn sum(&self) -> Kernel<T> {
        let mut s = Kernel::zeros(self.n());
        for l in &self.levels {
            s.add_assign(&l.q);
        }
        s
    }

    /// `Q_k^N = Σ_{|l| ≤ N} Q_{k+l}`, with `Q` zero outside the family.
    pub fn windowed(&self, index: i32, n_window: u32) -> Kernel<T> {
        let w = n_window as i32;
        let mut s = Kernel::zeros(self.n());
        for j in (index - w).max(self.first_index())..=(index + w).min(self.last_index()) {
            s.add_assign(self.q(j).expect("index in range"));
        }
        s
    }

    /// Max violation of the mode identity and of the cancellation or
    /// normalization integrals.
    pub fn invariant_violations(&self, weights: &[T]) -> (f64, f64) {
        let id = self.sum().max_abs_diff(&self.identity_target(weights)).as_f64();
        let mut sums = 0.0f64;
        for l in &self.levels {
            let target = match self.mode {
                Mode::Inhomogeneous if l.index == self.first_index() => T::one(),
                _ => T::zero(),
            };
            for v in l.q.row_integrals(weights).into_iter().chain(l.q.col_integrals(weights)) {
                sums = sums.max((v - target).abs().as_f64());
            }
        }
        (id, sums)
    }

    /// Assemble a family from raw kernels; used by the loader.
    pub fn from_levels(
        mode: Mode,
        provenance: Provenance,
        delta: f64,
        params: FamilyParams,
        levels: Vec<FamilyLevel<T>>,
        averages: Vec<(i32, Kernel<T>)>,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::MissingData("family has no levels".into()));
        }
        let n = levels[0].q.n();
        for (i, l) in levels.iter().enumerate() {
            if l.q.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.q.n(),
                });
            }
            if l.index != levels[0].index + i as i32 {
                return Err(Error::Format("level indices must be contiguous".into()));
            }
        }
        Ok(Self {
            mode,
            provenance,
            delta,
            params,
            levels,
            averages,
            warnings: Vec::new(),
        })
    }
}

pub fn identity_for<T: Scalar>(mode: Mode, weights: &[T]) -> Kernel<T> {
    match mode {
        Mode::Inhomogeneous => Kernel::identity(weights),
        Mode::Homogeneous => Kernel::identity(weights).sub(&Kernel::mean_projection(weights)),
    }
}

/// Conditional expectations onto functions constant on level-`k` cubes.
pub fn build_haar_family<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    mode: Mode,
) -> OperatorFamily<T> {
    let averages = (sys.k_min()..=sys.k_max())
        .map(|k| (k, haar_average(space, sys, k)))
        .collect();
    from_averages(
        space,
        sys,
        averages,
        mode,
        Provenance::Haar,
        FamilyParams::default(),
        Vec::new(),
    )
}

pub fn haar_average<T: Scalar>(space: &FinitePointSpace<T>, sys: &DyadicSystem<T>, k: i32) -> Kernel<T> {
    let n = space.n();
    let assign = sys.assignment(k);
    Kernel::from_fn(n, |x, y| {
        if assign[x] == assign[y] {
            T::one() / sys.cube_measure(k, assign[x])
        } else {
            T::zero()
        }
    })
}

/// Averages with kernel `exp(-ν [d/δ^k]^a)`, symmetrically rescaled to unit
/// integrals.
pub fn build_smoothed_family<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    params: SmoothedParams,
    mode: Mode,
) -> Result<OperatorFamily<T>> {
    if !(params.nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nu must be positive, got {}",
            params.nu
        )));
    }
    if !(params.a > 0.0 && params.a <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "a must lie in (0,1], got {}",
            params.a
        )));
    }
    let mut warnings = Vec::new();
    let averages = (sys.k_min()..=sys.k_max())
        .map(|k| match smoothed_average(space, sys.scale(k), params) {
            Some(p) => (k, p),
            None => {
                warnings.push(format!("level {k}: normalization failed, using the identity"));
                (k, Kernel::identity(space.weights()))
            }
        })
        .collect();
    let fp = FamilyParams {
        nu: Some(params.nu),
        a: Some(params.a),
        gamma: Some(params.gamma),
        eta: None,
    };
    Ok(from_averages(
        space,
        sys,
        averages,
        mode,
        Provenance::Smoothed,
        fp,
        warnings,
    ))
}

const SINKHORN_TOL: f64 = 1e-15;
const SINKHORN_MAX_ITER: usize = 10_000;

/// Symmetric scaling `P = diag(s) H diag(s)` with `Σ_y P(x,y) w_y = 1`.
///
/// Iterates `s ← sqrt(s / (H W s))`, whose fixed point is the unique positive
/// scaling; returns `None` when it does not settle.
pub fn smoothed_average<T: Scalar>(space: &FinitePointSpace<T>, scale: T, params: SmoothedParams) -> Option<Kernel<T>> {
    let n = space.n();
    let w = space.weights();
    let nu = T::lit(params.nu);
    let a = T::lit(params.a);
    let h = Kernel::from_fn(n, |x, y| (-(nu * (space.d(x, y) / scale).powf(a))).exp());
    let mut s: Vec<T> = w.iter().map(|&wx| T::one() / wx.sqrt()).collect();
    let tol = T::lit(SINKHORN_TOL.max(T::epsilon().as_f64() * 8.0));
    let mut settled = false;
    for _ in 0..SINKHORN_MAX_ITER {
        let g: Vec<T> = (0..n)
            .map(|x| fixed_sum(h.row(x).iter().enumerate().map(|(y, &hv)| hv * w[y] * s[y])))
            .collect();
        let err = (0..n).fold(T::zero(), |m, x| m.max((s[x] * g[x] - T::one()).abs()));
        if !err.is_finite() {
            return None;
        }
        if err <= tol {
            settled = true;
            break;
        }
        for x in 0..n {
            s[x] = (s[x] / g[x]).sqrt();
        }
    }
    if !settled {
        return None;
    }
    let mut p = Kernel::zeros(n);
    for x in 0..n {
        for y in x..n {
            let v = s[x] * h.get(x, y) * s[y];
            p.set(x, y, v);
            p.set(y, x, v);
        }
    }
    Some(p)
}

/// Successive differences of averaging operators.
///
/// Homogeneous: `P_{k_min} - Π`, then `P_{k+1} - P_k`, then `I - P_{k_max}`,
/// indexed by the coarser scale. Inhomogeneous: `Q_0 = P_{k_min}`, then the
/// differences, then `I - P_{k_max}`, indexed from 0. Boundary terms that
/// vanish identically are dropped.
pub fn from_averages<T: Scalar>(
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    averages: Vec<(i32, Kernel<T>)>,
    mode: Mode,
    provenance: Provenance,
    params: FamilyParams,
    warnings: Vec<String>,
) -> OperatorFamily<T> {
    let w = space.weights();
    let id = Kernel::identity(w);
    let k_min = sys.k_min();
    let k_max = sys.k_max();
    let p = |k: i32| &averages[(k - k_min) as usize].1;
    // (scale, kernel) in order
    let mut raw: Vec<(i32, Kernel<T>)> = Vec::new();
    match mode {
        Mode::Homogeneous => raw.push((k_min - 1, p(k_min).sub(&Kernel::mean_projection(w)))),
        Mode::Inhomogeneous => raw.push((k_min, p(k_min).clone())),
    }
    for k in k_min..k_max {
        raw.push((k, p(k + 1).sub(p(k))));
    }
    raw.push((k_max, id.sub(p(k_max))));

    let is_zero = |q: &Kernel<T>| q.data().iter().all(|&v| v == T::zero());
    let mut lo = 0usize;
    let mut hi = raw.len();
    if mode == Mode::Homogeneous {
        while lo + 1 < hi && is_zero(&raw[lo].1) {
            lo += 1;
        }
    }
    while hi > lo + 1 && is_zero(&raw[hi - 1].1) {
        hi -= 1;
    }
    let base = match mode {
        Mode::Homogeneous => raw[lo].0,
        Mode::Inhomogeneous => 0,
    };
    let levels = raw
        .drain(lo..hi)
        .enumerate()
        .map(|(i, (scale, q))| FamilyLevel {
            index: base + i as i32,
            scale,
            q,
        })
        .collect();
    OperatorFamily {
        mode,
        provenance,
        delta: sys.delta().as_f64(),
        params,
        levels,
        averages,
        warnings,
    }
}
