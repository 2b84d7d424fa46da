use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicSystem;
use crate::family::{build_haar_family, Mode};
use crate::sampling::rng;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;
use crate::testspace::make_bump;

/// Exponents at which relative reconstruction errors are reported.
pub const P_VALUES: [f64; 3] = [1.5, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Coarse, middle and fine bumps at a central point.
    pub bumps: bool,
    /// Number of Haar levels whose kernels `Q_k(·, y)` are used, for every `y`.
    pub haar_levels: usize,
    /// Seeded uniform random functions on `[-1, 1]`.
    pub random: usize,
    pub seed: u64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            bumps: true,
            haar_levels: 2,
            random: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Probe<T> {
    pub name: String,
    pub f: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSet<T> {
    pub mode: Mode,
    pub probes: Vec<Probe<T>>,
}

impl<T: Scalar> ProbeSet<T> {
    /// Random probes are made mean-zero in homogeneous mode; the constant
    /// function is added in inhomogeneous mode.
    pub fn build(space: &FinitePointSpace<T>, sys: &DyadicSystem<T>, mode: Mode, params: &ProbeParams) -> Self {
        let n = space.n();
        let mut probes = Vec::new();
        if params.bumps && n > 1 {
            let x = space.canonical_order()[n / 2];
            let diam = space.diameter();
            let fine = (space.min_positive_distance() * T::lit(2.0)).min(diam);
            for (name, r) in [
                ("bump_coarse", diam / T::lit(2.0)),
                ("bump_mid", diam / T::lit(8.0)),
                ("bump_fine", fine),
            ] {
                let f = make_bump(space, x, r.max(space.epsilon0())).expect("positive radius").0;
                probes.push(Probe { name: name.into(), f });
            }
        }
        if params.haar_levels > 0 {
            let haar = build_haar_family(space, sys, mode);
            let len = haar.len();
            let mut picks: Vec<usize> = (1..=params.haar_levels)
                .map(|i| (i * len / (params.haar_levels + 1)).min(len.saturating_sub(1)))
                .collect();
            picks.dedup();
            for pos in picks {
                let lv = &haar.levels[pos];
                for y in 0..n {
                    probes.push(Probe {
                        name: format!("haar_{}_{}", lv.index, y),
                        f: (0..n).map(|x| lv.q.get(x, y)).collect(),
                    });
                }
            }
        }
        let mut g = rng(params.seed, 0xD1);
        for i in 0..params.random {
            let mut f: Vec<T> = (0..n).map(|_| T::lit(g.gen::<f64>() * 2.0 - 1.0)).collect();
            if mode == Mode::Homogeneous {
                let m = space.mean(&f);
                f.iter_mut().for_each(|v| *v = *v - m);
            }
            probes.push(Probe {
                name: format!("random_{i}"),
                f,
            });
        }
        if mode == Mode::Inhomogeneous {
            probes.push(Probe {
                name: "constant".into(),
                f: vec![T::one(); n],
            });
        }
        Self { mode, probes }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeError {
    pub name: String,
    /// Relative errors at [`P_VALUES`]; absolute when the target vanishes.
    pub relative: [f64; 3],
    pub abs_l2: f64,
    pub target_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub probes: Vec<ProbeError>,
    /// Worst relative error at each of [`P_VALUES`].
    pub max_relative: [f64; 3],
    /// `abs_l2 ≤ (tail · ‖synthesis‖ + floor) · target_l2` on every probe.
    pub bound_holds: Option<bool>,
}

impl ReconstructionReport {
    pub fn max_l2(&self) -> f64 {
        self.max_relative[1]
    }

    pub fn check_bound(&mut self, tail: f64, synthesis_norm: f64, floor: f64) {
        let c = tail * synthesis_norm.max(1.0) + floor;
        self.bound_holds = Some(self.probes.iter().all(|p| p.abs_l2 <= c * p.target_l2 + floor));
    }
}

/// Errors of `recon(f)` against `f` (inhomogeneous) or against the
/// mean-zero part of `f` (homogeneous).
pub fn reconstruction_errors<T: Scalar>(
    space: &FinitePointSpace<T>,
    probes: &ProbeSet<T>,
    recon: impl Fn(&[T]) -> Vec<T> + Sync,
) -> ReconstructionReport {
    use rayon::prelude::*;
    let rows: Vec<ProbeError> = probes
        .probes
        .par_iter()
        .map(|p| {
            let target: Vec<T> = match probes.mode {
                Mode::Inhomogeneous => p.f.clone(),
                Mode::Homogeneous => {
                    let m = space.mean(&p.f);
                    p.f.iter().map(|&v| v - m).collect()
                }
            };
            let g = recon(&p.f);
            let err: Vec<T> = target.iter().zip(&g).map(|(&a, &b)| a - b).collect();
            let mut relative = [0.0; 3];
            for (slot, &pv) in relative.iter_mut().zip(&P_VALUES) {
                let e = space.lp_norm(&err, T::lit(pv)).as_f64();
                let d = space.lp_norm(&target, T::lit(pv)).as_f64();
                *slot = if d > 0.0 { e / d } else { e };
            }
            ProbeError {
                name: p.name.clone(),
                relative,
                abs_l2: space.lp_norm(&err, T::lit(2.0)).as_f64(),
                target_l2: space.lp_norm(&target, T::lit(2.0)).as_f64(),
            }
        })
        .collect();
    let mut max_relative = [0.0f64; 3];
    for r in &rows {
        for i in 0..3 {
            max_relative[i] = max_relative[i].max(r.relative[i]);
        }
    }
    ReconstructionReport {
        probes: rows,
        max_relative,
        bound_holds: None,
    }
}
