//! Nested nets, the dyadic cube tree, new-center sets and subcube refinements.
//!
//! Levels are indexed by the scale exponent `k` (scale `δ^k`). The built range
//! `[k_min, k_max]` is padded by two virtual levels: `k_min - 1`, a single cube
//! holding everything, and `k_max + 1`, where every point is its own cube.
//! Queries outside the padded range are clamped to it.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::fixed_sum;
use crate::report::Census;
use crate::sampling::rng;
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub delta: f64,
    /// `None` derives the range from the diameter and minimal distance.
    pub k_range: Option<(i32, i32)>,
    pub c0: f64,
    #[serde(rename = "C0")]
    pub big_c0: f64,
    pub strict: bool,
}

impl Default for NetParams {
    fn default() -> Self {
        Self {
            delta: 0.5,
            k_range: None,
            c0: 1.0,
            big_c0: 1.0,
            strict: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetHierarchy<T> {
    pub delta: T,
    pub k_min: i32,
    pub k_max: i32,
    pub c0: T,
    pub big_c0: T,
    /// `centers[k - k_min]`: ordered center indices; each list starts with the
    /// previous level's list.
    pub centers: Vec<Vec<usize>>,
    /// `min d(z_α, z_β) / δ^k` over levels and distinct centers.
    pub separation_fit: f64,
    /// `max_x min_α d(x, z_α) / δ^k` over levels.
    pub covering_fit: f64,
    pub separation_ok: bool,
    pub covering_ok: bool,
}

impl<T: Scalar> NetHierarchy<T> {
    pub fn scale(&self, k: i32) -> T {
        self.delta.powi(k)
    }

    pub fn centers_at(&self, k: i32) -> &[usize] {
        &self.centers[(k.clamp(self.k_min, self.k_max) - self.k_min) as usize]
    }
}

/// Largest `k` with `δ^k ≥ diam` and largest `k` with `δ^k ≥ min_dist / 2`.
pub fn auto_k_range<T: Scalar>(space: &FinitePointSpace<T>, delta: T) -> (i32, i32) {
    if space.n() == 1 {
        return (0, 0);
    }
    let diam = space.diameter();
    let mut k_min = 0i32;
    while delta.powi(k_min) < diam {
        k_min -= 1;
    }
    while delta.powi(k_min + 1) >= diam {
        k_min += 1;
    }
    let floor = space.min_positive_distance() / T::lit(2.0);
    let mut k_max = k_min;
    while delta.powi(k_max + 1) >= floor {
        k_max += 1;
    }
    (k_min, k_max)
}

/// Greedy farthest-point nets, coarse to fine, each level seeded with the
/// previous one. A point becomes a center when its distance to the current
/// centers exceeds `c0 δ^k`; ties go to the smallest canonical rank.
pub fn build_nets<T: Scalar>(space: &FinitePointSpace<T>, params: &NetParams) -> Result<NetHierarchy<T>> {
    let delta = T::lit(params.delta);
    let c0 = T::lit(params.c0);
    let big_c0 = T::lit(params.big_c0);
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0,1), got {}",
            params.delta
        )));
    }
    if !(params.c0 > 0.0 && params.big_c0 > 0.0) {
        return Err(Error::InvalidParameter("net constants must be positive".into()));
    }
    if params.strict {
        let a0 = space.a0().as_f64();
        let lhs = 12.0 * a0.powi(3) * params.big_c0 * params.delta;
        if lhs > params.c0 {
            return Err(Error::StrictGeometry(format!(
                "12 A0^3 C0 delta = {lhs} exceeds c0 = {}",
                params.c0
            )));
        }
    }
    let (k_min, k_max) = match params.k_range {
        Some((a, b)) if a <= b => (a, b),
        Some((a, b)) => return Err(Error::InvalidParameter(format!("empty level range [{a}, {b}]"))),
        None => auto_k_range(space, delta),
    };
    let n = space.n();
    let mut centers: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut mind = vec![T::infinity(); n];
    for k in k_min..=k_max {
        let r = c0 * delta.powi(k);
        loop {
            let pick = if current.is_empty() {
                Some(space.canonical_order()[0])
            } else {
                let mut best: Option<usize> = None;
                for x in 0..n {
                    best = match best {
                        None => Some(x),
                        Some(b) => match mind[x].partial_cmp(&mind[b]).unwrap_or(Ordering::Equal) {
                            Ordering::Greater => Some(x),
                            Ordering::Equal if space.rank(x) < space.rank(b) => Some(x),
                            _ => Some(b),
                        },
                    };
                }
                best.filter(|&b| mind[b] > r)
            };
            match pick {
                Some(p) => {
                    current.push(p);
                    for x in 0..n {
                        mind[x] = mind[x].min(space.d(x, p));
                    }
                }
                None => break,
            }
        }
        centers.push(current.clone());
    }

    let mut sep = f64::INFINITY;
    let mut cov = 0.0f64;
    for (li, cs) in centers.iter().enumerate() {
        let s = delta.powi(k_min + li as i32);
        for (i, &a) in cs.iter().enumerate() {
            for &b in &cs[..i] {
                sep = sep.min((space.d(a, b) / s).as_f64());
            }
        }
        for x in 0..n {
            let m = cs.iter().map(|&c| space.d(x, c)).fold(T::infinity(), T::min);
            cov = cov.max((m / s).as_f64());
        }
    }
    Ok(NetHierarchy {
        delta,
        k_min,
        k_max,
        c0,
        big_c0,
        centers,
        separation_fit: sep,
        covering_fit: cov,
        separation_ok: sep >= params.c0 * (1.0 - 1e-12),
        covering_ok: cov <= params.big_c0 * (1.0 + 1e-12),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    pub partition_ok: bool,
    pub partition_max_error: f64,
    pub nesting_ok: bool,
    pub sandwich_ok: bool,
    /// `min over cubes of (distance from center to the complement) / δ^k`.
    pub inner_radius_fit: f64,
    /// `max over cubes of (distance from center to a member) / δ^k`.
    pub outer_radius_fit: f64,
    /// `(k, α)` of the worst sandwich violation, if any.
    pub sandwich_witness: Option<(i32, usize)>,
    pub separation_fit: f64,
    pub covering_fit: f64,
}

#[derive(Clone, Debug)]
pub struct DyadicSystem<T> {
    net: NetHierarchy<T>,
    inner_const: T,
    outer_const: T,
    /// Padded levels `k_min - 1 ..= k_max + 1`.
    levels: Vec<Level<T>>,
    /// `new_centers[k - (k_min - 1)]` for `k ∈ [k_min - 1, k_max]`.
    new_centers: Vec<Vec<usize>>,
    /// `dist_new[k - (k_min - 1)][x] = d(x, 𝒴^k)`.
    dist_new: Vec<Vec<T>>,
    report: DyadicReport,
}

#[derive(Clone, Debug)]
struct Level<T> {
    centers: Vec<usize>,
    assign: Vec<usize>,
    /// Cube index at the next coarser level; empty at the top.
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
    measures: Vec<T>,
}

/// Cube tree over the nets: each center's parent is its nearest center one
/// level up (itself when already present), and a point's cube at level `k` is
/// its level-`k` ancestor.
pub fn build_dyadic<T: Scalar>(
    space: &FinitePointSpace<T>,
    net: NetHierarchy<T>,
    strict: bool,
) -> Result<DyadicSystem<T>> {
    let n = space.n();
    let a0 = space.a0();
    let inner_const = net.c0 / (T::lit(3.0) * a0 * a0);
    let outer_const = T::lit(2.0) * a0 * net.big_c0;

    let mut center_lists: Vec<Vec<usize>> = Vec::with_capacity(net.centers.len() + 2);
    center_lists.push(vec![net.centers[0][0]]);
    center_lists.extend(net.centers.iter().cloned());
    let mut finest = net.centers.last().cloned().unwrap_or_default();
    let mut seen = vec![false; n];
    for &c in &finest {
        seen[c] = true;
    }
    for &x in space.canonical_order() {
        if !seen[x] {
            finest.push(x);
        }
    }
    center_lists.push(finest);

    // parent links between consecutive padded levels
    let mut parents: Vec<Vec<usize>> = vec![Vec::new()];
    for li in 1..center_lists.len() {
        let up = &center_lists[li - 1];
        let pos: std::collections::HashMap<usize, usize> = up.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let links = center_lists[li]
            .iter()
            .map(|&c| {
                if let Some(&i) = pos.get(&c) {
                    return i;
                }
                let mut best = 0usize;
                for (i, &u) in up.iter().enumerate().skip(1) {
                    let b = up[best];
                    match space.d(c, u).partial_cmp(&space.d(c, b)).unwrap_or(Ordering::Equal) {
                        Ordering::Less => best = i,
                        Ordering::Equal if space.rank(u) < space.rank(b) => best = i,
                        _ => {}
                    }
                }
                best
            })
            .collect();
        parents.push(links);
    }

    // finest level: point x is center number finest_pos[x]
    let last = center_lists.len() - 1;
    let mut assign_finest = vec![0usize; n];
    for (i, &c) in center_lists[last].iter().enumerate() {
        assign_finest[c] = i;
    }
    let mut assigns = vec![Vec::new(); center_lists.len()];
    assigns[last] = assign_finest;
    for li in (0..last).rev() {
        let below = &assigns[li + 1];
        assigns[li] = below.iter().map(|&b| parents[li + 1][b]).collect();
    }

    let levels: Vec<Level<T>> = center_lists
        .into_iter()
        .zip(assigns)
        .zip(parents)
        .map(|((centers, assign), parent)| {
            let mut members = vec![Vec::new(); centers.len()];
            for &x in space.canonical_order() {
                members[assign[x]].push(x);
            }
            for m in members.iter_mut() {
                m.sort_unstable();
            }
            let measures = members
                .iter()
                .map(|m| fixed_sum(m.iter().map(|&x| space.weight(x))))
                .collect();
            Level {
                centers,
                assign,
                parent,
                members,
                measures,
            }
        })
        .collect();

    let lo = net.k_min - 1;
    let mut new_centers = Vec::new();
    for li in 0..levels.len() - 1 {
        let coarse: std::collections::HashSet<usize> = levels[li].centers.iter().copied().collect();
        new_centers.push(
            levels[li + 1]
                .centers
                .iter()
                .copied()
                .filter(|c| !coarse.contains(c))
                .collect::<Vec<_>>(),
        );
    }
    let dist_new = new_centers
        .iter()
        .map(|ys| {
            (0..n)
                .map(|x| ys.iter().map(|&y| space.d(x, y)).fold(T::infinity(), T::min))
                .collect()
        })
        .collect();

    let mut sys = DyadicSystem {
        inner_const,
        outer_const,
        levels,
        new_centers,
        dist_new,
        report: DyadicReport {
            partition_ok: false,
            partition_max_error: 0.0,
            nesting_ok: false,
            sandwich_ok: false,
            inner_radius_fit: 0.0,
            outer_radius_fit: 0.0,
            sandwich_witness: None,
            separation_fit: net.separation_fit,
            covering_fit: net.covering_fit,
        },
        net,
    };
    debug_assert_eq!(sys.levels.len() as i32, sys.net.k_max - lo + 2);
    sys.report = sys.verify(space);
    if strict && !sys.report.sandwich_ok {
        let (k, a) = sys.report.sandwich_witness.unwrap_or((0, 0));
        return Err(Error::StrictGeometry(format!(
            "ball sandwich fails for cube ({k}, {a})"
        )));
    }
    Ok(sys)
}

impl<T: Scalar> DyadicSystem<T> {
    pub fn net(&self) -> &NetHierarchy<T> {
        &self.net
    }

    pub fn delta(&self) -> T {
        self.net.delta
    }

    pub fn k_min(&self) -> i32 {
        self.net.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.net.k_max
    }

    pub fn scale(&self, k: i32) -> T {
        self.net.delta.powi(k)
    }

    /// `c♮ = c0 / (3 A0²)`.
    pub fn inner_constant(&self) -> T {
        self.inner_const
    }

    /// `C♮ = 2 A0 C0`.
    pub fn outer_constant(&self) -> T {
        self.outer_const
    }

    pub fn report(&self) -> &DyadicReport {
        &self.report
    }

    fn level(&self, k: i32) -> &Level<T> {
        let lo = self.net.k_min - 1;
        let hi = self.net.k_max + 1;
        &self.levels[(k.clamp(lo, hi) - lo) as usize]
    }

    /// Whether `k` lies beyond the padded range and was clamped.
    pub fn is_clamped(&self, k: i32) -> bool {
        k < self.net.k_min - 1 || k > self.net.k_max + 1
    }

    pub fn centers_at(&self, k: i32) -> &[usize] {
        &self.level(k).centers
    }

    pub fn cube_count(&self, k: i32) -> usize {
        self.level(k).centers.len()
    }

    pub fn cube_of(&self, k: i32, x: usize) -> usize {
        self.level(k).assign[x]
    }

    pub fn assignment(&self, k: i32) -> &[usize] {
        &self.level(k).assign
    }

    pub fn cube(&self, k: i32, alpha: usize) -> &[usize] {
        &self.level(k).members[alpha]
    }

    pub fn cubes(&self, k: i32) -> &[Vec<usize>] {
        &self.level(k).members
    }

    pub fn cube_measure(&self, k: i32, alpha: usize) -> T {
        self.level(k).measures[alpha]
    }

    pub fn center(&self, k: i32, alpha: usize) -> usize {
        self.level(k).centers[alpha]
    }

    /// Ancestor at level `k` of cube `alpha` at level `l ≥ k`.
    pub fn ancestor(&self, l: i32, alpha: usize, k: i32) -> usize {
        let x = self.center(l, alpha);
        self.cube_of(k, x)
    }

    /// `𝒴^k = 𝒜_{k+1} ∖ 𝒜_k`.
    pub fn new_centers(&self, k: i32) -> &[usize] {
        let lo = self.net.k_min - 1;
        if k < lo || k > self.net.k_max {
            return &[];
        }
        &self.new_centers[(k - lo) as usize]
    }

    /// `d(x, 𝒴^k)`, or `+∞` when `𝒴^k` is empty.
    pub fn dist_to_new_centers(&self, x: usize, k: i32) -> T {
        let lo = self.net.k_min - 1;
        if k < lo || k > self.net.k_max {
            return T::infinity();
        }
        self.dist_new[(k - lo) as usize][x]
    }

    /// Levels at which `𝒴^k` can be nonempty.
    pub fn new_center_levels(&self) -> std::ops::RangeInclusive<i32> {
        self.net.k_min - 1..=self.net.k_max
    }

    /// Padded level range.
    pub fn padded_levels(&self) -> std::ops::RangeInclusive<i32> {
        self.net.k_min - 1..=self.net.k_max + 1
    }

    fn verify(&self, space: &FinitePointSpace<T>) -> DyadicReport {
        let n = space.n();
        let total = space.total_measure().as_f64();
        let mut partition_ok = true;
        let mut partition_err = 0.0f64;
        let mut nesting_ok = true;
        let mut inner_fit = f64::INFINITY;
        let mut outer_fit = 0.0f64;
        let mut sandwich_ok = true;
        let mut witness = None;
        let inner_c = self.inner_const.as_f64();
        let outer_c = self.outer_const.as_f64();
        for k in self.padded_levels() {
            let lv = self.level(k);
            let mut count = vec![0usize; n];
            for m in &lv.members {
                for &x in m {
                    count[x] += 1;
                }
            }
            if count.iter().any(|&c| c != 1) || lv.members.iter().any(|m| m.is_empty()) {
                partition_ok = false;
            }
            let s: f64 = lv.measures.iter().map(|v| v.as_f64()).sum();
            partition_err = partition_err.max((s - total).abs() / total);
            if k > self.net.k_min - 1 {
                for x in 0..n {
                    if lv.parent[lv.assign[x]] != self.level(k - 1).assign[x] {
                        nesting_ok = false;
                    }
                }
            }
            let scale = self.scale(k).as_f64();
            for (alpha, m) in lv.members.iter().enumerate() {
                let z = lv.centers[alpha];
                let outer = m.iter().map(|&x| space.d(z, x).as_f64()).fold(0.0, f64::max);
                let inner = (0..n)
                    .filter(|&x| lv.assign[x] != alpha)
                    .map(|x| space.d(z, x).as_f64())
                    .fold(f64::INFINITY, f64::min);
                inner_fit = inner_fit.min(inner / scale);
                outer_fit = outer_fit.max(outer / scale);
                let ok = inner >= inner_c * scale && outer < outer_c * scale && lv.assign[z] == alpha;
                if !ok && sandwich_ok {
                    sandwich_ok = false;
                    witness = Some((k, alpha));
                }
            }
        }
        DyadicReport {
            partition_ok: partition_ok && partition_err <= 1e-12,
            partition_max_error: partition_err,
            nesting_ok,
            sandwich_ok,
            inner_radius_fit: inner_fit,
            outer_radius_fit: outer_fit,
            sandwich_witness: witness,
            separation_fit: self.net.separation_fit,
            covering_fit: self.net.covering_fit,
        }
    }

    /// Fitted constants of the two exponential-sum bounds that replace
    /// reverse doubling.
    pub fn verify_expsum(
        &self,
        space: &FinitePointSpace<T>,
        a: T,
        c: T,
        budget: &crate::sampling::AuditBudget,
    ) -> ExpSumReport {
        let n = space.n();
        let levels: Vec<i32> = self.new_center_levels().collect();
        let term = |x: usize, k: i32| -> T {
            let s = self.scale(k);
            let dy = self.dist_to_new_centers(x, k);
            if dy.is_infinite() {
                return T::zero();
            }
            (-(c * (dy / s).powf(a))).exp() / space.volume(x, s)
        };
        let xr: Vec<(usize, T)> = {
            let all: Vec<(usize, T)> = (0..n)
                .flat_map(|x| space.radii_at(x).into_iter().map(move |r| (x, r)))
                .collect();
            if n <= budget.exhaustive_n || all.len() <= budget.samples {
                all
            } else {
                let mut r = rng(budget.seed, 0xE1);
                (0..budget.samples).map(|_| all[r.gen_range(0..all.len())]).collect()
            }
        };
        let c1: Vec<(f64, usize, usize)> = xr
            .par_iter()
            .enumerate()
            .map(|(i, &(x, r))| {
                let s1 = fixed_sum(levels.iter().filter(|&&k| self.scale(k) >= r).map(|&k| term(x, k)));
                ((s1 * space.volume(x, r)).as_f64(), x, i)
            })
            .collect();
        let pairs: Vec<(usize, usize)> = if n <= budget.exhaustive_n || n * n <= budget.samples {
            (0..n)
                .flat_map(|x| (0..n).map(move |y| (x, y)))
                .filter(|(x, y)| x != y)
                .collect()
        } else {
            let mut r = rng(budget.seed, 0xE2);
            (0..budget.samples)
                .map(|_| (r.gen_range(0..n), r.gen_range(0..n)))
                .filter(|(x, y)| x != y)
                .collect()
        };
        let c2: Vec<(f64, usize, usize)> = pairs
            .par_iter()
            .map(|&(x, y)| {
                let d = space.d(x, y);
                let s2 = fixed_sum(levels.iter().map(|&k| {
                    let s = self.scale(k);
                    term(x, k) * (-(c * (d / s).powf(a))).exp()
                }));
                ((s2 * space.v(x, y)).as_f64(), x, y)
            })
            .collect();
        let best1 = c1.iter().fold((0.0, 0, 0), |m, &v| if v.0 > m.0 { v } else { m });
        let best2 = c2.iter().fold((0.0, 0, 0), |m, &v| if v.0 > m.0 { v } else { m });
        let exhaustive = n <= budget.exhaustive_n;
        ExpSumReport {
            a: a.as_f64(),
            c: c.as_f64(),
            c1_fit: best1.0,
            c1_witness: (best1.1, xr.get(best1.2).map_or(0.0, |p| p.1.as_f64())),
            c2_fit: best2.0,
            c2_witness: (best2.1, best2.2),
            census_c1: Census {
                evaluated: xr.len(),
                admissible: xr.len(),
                exhaustive,
                seed: budget.seed,
            },
            census_c2: Census {
                evaluated: pairs.len(),
                admissible: pairs.len(),
                exhaustive,
                seed: budget.seed,
            },
        }
    }

    /// Level-`k + j0` descendants of every level-`k` cube, with one sample
    /// point per descendant.
    pub fn refine_subcubes(
        &self,
        space: &FinitePointSpace<T>,
        k: i32,
        j0: u32,
        sampler: Sampler,
        strict: bool,
    ) -> Result<LevelRefinement> {
        if strict {
            let lhs = self.scale(j0 as i32);
            let a0 = space.a0();
            let rhs = (T::lit(2.0) * a0).powi(-4) * self.outer_const;
            if lhs > rhs {
                return Err(Error::StrictGeometry(format!(
                    "delta^j0 = {lhs} exceeds (2A0)^-4 C = {rhs}"
                )));
            }
        }
        let target = k + j0 as i32;
        let clamped = target > self.net.k_max + 1;
        let parent_count = self.cube_count(k);
        let mut cubes: Vec<RefinedCube> = (0..parent_count)
            .map(|alpha| RefinedCube {
                alpha,
                subcubes: Vec::new(),
            })
            .collect();
        let mut r = match sampler {
            Sampler::Random { seed } => Some(rng(seed, (k as i64 + 1_000_000) as u64)),
            _ => None,
        };
        for (beta, members) in self.cubes(target).iter().enumerate() {
            let alpha = self.cube_of(k, members[0]);
            let center = self.center(target, beta);
            let center = if members.contains(&center) { center } else { members[0] };
            let sample = match sampler {
                Sampler::Center => center,
                Sampler::Random { .. } => {
                    let rr = r.as_mut().expect("rng");
                    let total: f64 = members.iter().map(|&x| space.weight(x).as_f64()).sum();
                    let u = rr.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = *members.last().expect("nonempty cube");
                    for &x in members {
                        acc += space.weight(x).as_f64();
                        if u < acc {
                            pick = x;
                            break;
                        }
                    }
                    pick
                }
                Sampler::WorstCase => {
                    let mut best = center;
                    for &x in members {
                        match space
                            .d(center, x)
                            .partial_cmp(&space.d(center, best))
                            .unwrap_or(Ordering::Equal)
                        {
                            Ordering::Greater => best = x,
                            Ordering::Equal if space.rank(x) < space.rank(best) => best = x,
                            _ => {}
                        }
                    }
                    best
                }
            };
            cubes[alpha].subcubes.push(Subcube {
                members: members.clone(),
                center,
                sample,
                measure: self.cube_measure(target, beta).as_f64(),
            });
        }
        Ok(LevelRefinement {
            k,
            j0,
            target,
            clamped,
            cubes,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sampler {
    /// The subcube's own center.
    Center,
    /// A point drawn with probability proportional to its weight.
    Random { seed: u64 },
    /// The member farthest from the subcube's center.
    WorstCase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subcube {
    pub members: Vec<usize>,
    pub center: usize,
    pub sample: usize,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedCube {
    pub alpha: usize,
    pub subcubes: Vec<Subcube>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRefinement {
    pub k: i32,
    pub j0: u32,
    /// Level the descendants were taken from.
    pub target: i32,
    /// The target lies past the finest level, where cubes are single points.
    pub clamped: bool,
    pub cubes: Vec<RefinedCube>,
}

impl LevelRefinement {
    pub fn subcubes(&self) -> impl Iterator<Item = &Subcube> {
        self.cubes.iter().flat_map(|c| c.subcubes.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSumReport {
    pub a: f64,
    pub c: f64,
    /// `max V_r(x) Σ_{δ^k ≥ r} V_{δ^k}(x)^{-1} exp(-c [d(x,𝒴^k)/δ^k]^a)`.
    pub c1_fit: f64,
    pub c1_witness: (usize, f64),
    /// `max V(x,y) Σ_k V_{δ^k}(x)^{-1} exp(-c [d(x,y)/δ^k]^a) exp(-c [d(x,𝒴^k)/δ^k]^a)`.
    pub c2_fit: f64,
    pub c2_witness: (usize, usize),
    pub census_c1: Census,
    pub census_c2: Census,
}
