//! Finite quasi-metric measure spaces: balls, volumes, norms, the maximal
//! operator and geometry audits.

use std::cmp::Ordering;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::fixed_sum;
use crate::report::{Census, Condition, EstimateReport};
use crate::sampling::{par_fits, rng, TupleList};
use crate::scalar::Scalar;

/// How distances were produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MetricKind {
    /// `|x - y|^rho` with the Euclidean base metric; `rho = 1` is Euclidean.
    Power {
        rho: f64,
    },
    Explicit,
}

/// Values of a function on the points, aligned with the point order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T>(pub Vec<T>);

impl<T> Deref for GridFunction<T> {
    type Target = Vec<T>;
    fn deref(&self) -> &Vec<T> {
        &self.0
    }
}

impl<T> DerefMut for GridFunction<T> {
    fn deref_mut(&mut self) -> &mut Vec<T> {
        &mut self.0
    }
}

#[derive(Clone, Debug)]
pub struct FinitePointSpace<T> {
    point_ids: Vec<String>,
    coords: Option<Vec<Vec<T>>>,
    metric: MetricKind,
    dist: Vec<T>,
    weights: Vec<T>,
    a0: T,
    rank: Vec<usize>,
    order: Vec<usize>,
    /// Per point: distances to all points in ascending order.
    sorted_d: Vec<Vec<T>>,
    /// Per point: `cum[m]` = measure of the `m` nearest points.
    cum: Vec<Vec<T>>,
    total: T,
    min_pos: T,
    diam: T,
}

impl<T: Scalar> FinitePointSpace<T> {
    /// Points in `R^m` with `d = |x - y|^rho`.
    pub fn from_coords(coords: Vec<Vec<T>>, weights: Vec<T>, rho: T, a0: T) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::Parse("points have differing dimensions".into()));
        }
        if !(rho > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "metric power must be positive, got {rho}"
            )));
        }
        let dist = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                let s = fixed_sum(coords[i].iter().zip(&coords[j]).map(|(&a, &b)| (a - b) * (a - b)));
                let e = s.sqrt();
                if rho == T::one() {
                    e
                } else {
                    e.powf(rho)
                }
            })
            .collect();
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::build(
            ids,
            Some(coords),
            MetricKind::Power { rho: rho.as_f64() },
            dist,
            weights,
            a0,
        )
    }

    /// Explicit distance matrix, row-major `n × n`.
    pub fn from_matrix(ids: Vec<String>, dist: Vec<T>, weights: Vec<T>, a0: T) -> Result<Self> {
        let n = ids.len();
        if dist.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: dist.len(),
            });
        }
        for i in 0..n {
            if dist[i * n + i] != T::zero() {
                return Err(Error::NonZeroDiagonal(i));
            }
            for j in 0..i {
                if dist[i * n + j] != dist[j * n + i] {
                    return Err(Error::AsymmetricMetric { i: j, j: i });
                }
            }
        }
        Self::build(ids, None, MetricKind::Explicit, dist, weights, a0)
    }

    /// `n` equispaced points on `[0, 1]` with unit weights and `d = |x - y|`.
    pub fn uniform_grid(n: usize) -> Result<Self> {
        Self::grid_with(n, vec![T::one(); n], T::one(), T::one())
    }

    pub fn grid_with(n: usize, weights: Vec<T>, rho: T, a0: T) -> Result<Self> {
        let h = if n > 1 {
            T::one() / T::from_usize_lossy(n - 1)
        } else {
            T::zero()
        };
        let coords = (0..n).map(|i| vec![T::from_usize_lossy(i) * h]).collect();
        Self::from_coords(coords, weights, rho, a0)
    }

    fn build(
        point_ids: Vec<String>,
        coords: Option<Vec<Vec<T>>>,
        metric: MetricKind,
        dist: Vec<T>,
        weights: Vec<T>,
        a0: T,
    ) -> Result<Self> {
        let n = point_ids.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    index: i,
                    value: w.as_f64(),
                });
            }
        }
        if !(a0 >= T::one()) {
            return Err(Error::InvalidParameter(format!("A0 must be at least 1, got {a0}")));
        }
        {
            let mut seen: Vec<&String> = point_ids.iter().collect();
            seen.sort();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Parse("duplicate point identifiers".into()));
            }
        }
        let mut min_pos = T::infinity();
        let mut diam = T::zero();
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < T::zero() {
                    return Err(Error::Parse(format!("invalid distance at ({i}, {j})")));
                }
                if i != j {
                    if d == T::zero() {
                        return Err(Error::ZeroDistance {
                            i: i.min(j),
                            j: i.max(j),
                        });
                    }
                    min_pos = min_pos.min(d);
                    diam = diam.max(d);
                }
            }
        }
        let order = canonical_order(&point_ids, coords.as_deref());
        let mut rank = vec![0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let (sorted_d, cum): (Vec<_>, Vec<_>) = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| {
                    dist[x * n + a]
                        .partial_cmp(&dist[x * n + b])
                        .unwrap_or(Ordering::Equal)
                        .then(rank[a].cmp(&rank[b]))
                });
                let ds: Vec<T> = idx.iter().map(|&y| dist[x * n + y]).collect();
                let mut c = Vec::with_capacity(n + 1);
                let mut acc = T::zero();
                c.push(acc);
                for &y in &idx {
                    acc = acc + weights[y];
                    c.push(acc);
                }
                (ds, c)
            })
            .unzip();
        let total = fixed_sum(weights.iter().copied());
        Ok(Self {
            point_ids,
            coords,
            metric,
            dist,
            weights,
            a0,
            rank,
            order,
            sorted_d,
            cum,
            total,
            min_pos,
            diam,
        })
    }

    /// Same points and metric with new weights.
    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::build(
            self.point_ids.clone(),
            self.coords.clone(),
            self.metric.clone(),
            self.dist.clone(),
            weights,
            self.a0,
        )
    }

    /// Relabeled copy: new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: perm.len(),
            });
        }
        let ids = perm.iter().map(|&p| self.point_ids[p].clone()).collect();
        let coords = self
            .coords
            .as_ref()
            .map(|c| perm.iter().map(|&p| c[p].clone()).collect());
        let dist = (0..n * n).map(|ij| self.d(perm[ij / n], perm[ij % n])).collect();
        let w = perm.iter().map(|&p| self.weights[p]).collect();
        Self::build(ids, coords, self.metric.clone(), dist, w, self.a0)
    }

    pub fn n(&self) -> usize {
        self.point_ids.len()
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> T {
        self.dist[x * self.n() + y]
    }

    pub fn distances(&self) -> &[T] {
        &self.dist
    }

    pub fn weight(&self, x: usize) -> T {
        self.weights[x]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn a0(&self) -> T {
        self.a0
    }

    pub fn metric(&self) -> &MetricKind {
        &self.metric
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn coords(&self) -> Option<&[Vec<T>]> {
        self.coords.as_deref()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.point_ids
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownPoint(id.into()))
    }

    /// Position of `x` in the relabeling-invariant point order.
    pub fn rank(&self, x: usize) -> usize {
        self.rank[x]
    }

    /// Points sorted by rank.
    pub fn canonical_order(&self) -> &[usize] {
        &self.order
    }

    pub fn total_measure(&self) -> T {
        self.total
    }

    /// Smallest positive distance; `+∞` for a one-point space.
    pub fn min_positive_distance(&self) -> T {
        self.min_pos
    }

    pub fn diameter(&self) -> T {
        self.diam
    }

    /// Radius offset used when enumerating balls at realized distances.
    pub fn epsilon0(&self) -> T {
        if self.min_pos.is_finite() {
            self.min_pos / T::lit(2.0)
        } else {
            T::one()
        }
    }

    /// `B(x, r) = {y : d(x, y) < r}`.
    pub fn ball(&self, x: usize, r: T) -> Result<Vec<usize>> {
        self.check_point(x)?;
        if !(r > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {r}"
            )));
        }
        Ok((0..self.n()).filter(|&y| self.d(x, y) < r).collect())
    }

    pub fn ball_by_id(&self, id: &str, r: T) -> Result<Vec<usize>> {
        self.ball(self.index_of(id)?, r)
    }

    fn check_point(&self, x: usize) -> Result<()> {
        if x < self.n() {
            Ok(())
        } else {
            Err(Error::UnknownPoint(x.to_string()))
        }
    }

    /// `V_r(x) = μ(B(x, r))`.
    #[inline]
    pub fn volume(&self, x: usize, r: T) -> T {
        let m = self.sorted_d[x].partition_point(|&d| d < r);
        self.cum[x][m]
    }

    /// `μ({y : d(x, y) ≤ r})`.
    #[inline]
    pub fn closed_volume(&self, x: usize, r: T) -> T {
        let m = self.sorted_d[x].partition_point(|&d| d <= r);
        self.cum[x][m]
    }

    /// `V(x, y) = μ(B(x, d(x, y)))`; zero when `x = y`.
    #[inline]
    pub fn v(&self, x: usize, y: usize) -> T {
        self.volume(x, self.d(x, y))
    }

    /// Sorted distinct positive distances, each shifted by `epsilon0`.
    pub fn realized_radii(&self) -> Vec<T> {
        let eps = self.epsilon0();
        let mut ds: Vec<T> = self.dist.iter().copied().filter(|&d| d > T::zero()).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        ds.dedup();
        let mut out: Vec<T> = std::iter::once(eps).chain(ds.into_iter().map(|d| d + eps)).collect();
        out.dedup();
        out
    }

    /// Radii `{d(x, y) + ε₀ : y ∈ X}` for one center.
    pub fn radii_at(&self, x: usize) -> Vec<T> {
        let eps = self.epsilon0();
        let mut out: Vec<T> = self.sorted_d[x].iter().map(|&d| d + eps).collect();
        out.dedup();
        out
    }

    pub fn lp_norm(&self, f: &[T], p: T) -> T {
        assert_eq!(f.len(), self.n(), "function length");
        if p.is_infinite() {
            return f.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        }
        assert!(p > T::zero(), "p must be positive");
        let s = fixed_sum(f.iter().zip(&self.weights).map(|(v, &w)| v.abs().powf(p) * w));
        s.powf(T::one() / p)
    }

    pub fn integral(&self, f: &[T]) -> T {
        fixed_sum(f.iter().zip(&self.weights).map(|(&v, &w)| v * w))
    }

    pub fn mean(&self, f: &[T]) -> T {
        self.integral(f) / self.total
    }

    /// `Mf(x) = sup_r μ(B(x,r))^{-1} ∫_{B(x,r)} |f| dμ`.
    ///
    /// The supremum over all radii is attained at the finite set
    /// `{d(x, y) + ε₀}`, which is what is evaluated here.
    pub fn maximal_operator(&self, f: &[T]) -> GridFunction<T> {
        let n = self.n();
        assert_eq!(f.len(), n, "function length");
        let eps = self.epsilon0();
        let vals = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| {
                    self.d(x, a)
                        .partial_cmp(&self.d(x, b))
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
                let mut num = vec![T::zero(); n + 1];
                for (m, &y) in idx.iter().enumerate() {
                    num[m + 1] = num[m] + f[y].abs() * self.weights[y];
                }
                let mut best = T::zero();
                for &y in &idx {
                    let r = self.d(x, y) + eps;
                    let m = self.sorted_d[x].partition_point(|&d| d < r);
                    best = best.max(num[m] / self.cum[x][m]);
                }
                best
            })
            .collect();
        GridFunction(vals)
    }

    /// Fit the quasi-triangle constant over triples.
    pub fn quasi_metric_audit(&self, seed: u64, triple_count: usize) -> QuasiMetricAudit {
        let n = self.n();
        let exhaustive = (n as u128).pow(3) <= triple_count as u128;
        let triples: Option<Vec<[usize; 3]>> = if exhaustive {
            None
        } else {
            let mut r = rng(seed, 0x51);
            Some(
                (0..triple_count)
                    .map(|_| std::array::from_fn(|_| r.gen_range(0..n)))
                    .collect(),
            )
        };
        let len = triples.as_ref().map_or(n * n * n, |t| t.len());
        let get = |i: usize| -> [usize; 3] {
            match &triples {
                Some(t) => t[i],
                None => [i / (n * n), (i / n) % n, i % n],
            }
        };
        // ratios compared directly so that an exact constant is reported exactly
        let best = (0..len)
            .into_par_iter()
            .filter_map(|i| {
                let [x, y, z] = get(i);
                let den = self.d(x, y) + self.d(y, z);
                (den > T::zero()).then(|| ((self.d(x, z) / den).as_f64(), i))
            })
            .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        let admissible = (0..len)
            .into_par_iter()
            .filter(|&i| {
                let [x, y, z] = get(i);
                self.d(x, y) + self.d(y, z) > T::zero()
            })
            .count();
        let a0_fit = best.map_or(1.0, |b| b.0.max(if admissible == 0 { 1.0 } else { 0.0 }));
        let mut symmetric = true;
        for x in 0..n {
            for y in 0..x {
                if self.d(x, y) != self.d(y, x) {
                    symmetric = false;
                }
            }
        }
        QuasiMetricAudit {
            a0_fit,
            declared_a0: self.a0.as_f64(),
            holds: a0_fit <= self.a0.as_f64() * (1.0 + 1e-12),
            symmetric,
            witness: best.map(|b| get(b.1).to_vec()),
            census: Census {
                evaluated: len,
                admissible,
                exhaustive,
                seed,
            },
        }
    }

    /// Fit `C_μ = sup μ(2B)/μ(B)` over balls centered at points with radii
    /// `d(x, y) + ε₀`.
    pub fn doubling_audit(&self, seed: u64, pair_count: usize) -> DoublingAudit {
        let n = self.n();
        let eps = self.epsilon0();
        let exhaustive = (n as u128) * (n as u128) <= pair_count as u128;
        let configs: Vec<(usize, T)> = if exhaustive {
            (0..n)
                .flat_map(|x| self.sorted_d[x].iter().map(move |&d| (x, d + eps)))
                .collect()
        } else {
            let mut r = rng(seed, 0xD0);
            (0..pair_count)
                .map(|_| {
                    let x = r.gen_range(0..n);
                    let y = r.gen_range(0..n);
                    (x, self.d(x, y) + eps)
                })
                .collect()
        };
        let mut c_mu = 1.0f64;
        let mut witness = (0usize, eps.as_f64(), 2.0);
        for &(x, r) in &configs {
            let q = (self.volume(x, r + r) / self.volume(x, r)).as_f64();
            if q > c_mu {
                c_mu = q;
                witness = (x, r.as_f64(), 2.0);
            }
        }
        let omega = c_mu.log2();
        let mut residual = 0.0f64;
        for &(x, r) in &configs {
            let base = self.volume(x, r).as_f64();
            for lambda in [2.0f64, 4.0, 8.0] {
                let big = self.volume(x, r * T::lit(lambda)).as_f64();
                residual = residual.max(big / (lambda.powf(omega) * base));
            }
        }
        DoublingAudit {
            c_mu_fit: c_mu,
            omega_fit: omega,
            worst_witness: witness,
            consistency_residual: residual,
            census: Census {
                evaluated: configs.len(),
                admissible: configs.len(),
                exhaustive,
                seed,
            },
        }
    }

    /// Fitted constants of the volume equivalences and the four integral
    /// bounds that follow from doubling.
    pub fn geometry_equivalence_audit(&self, seed: u64, budget: usize) -> EstimateReport {
        let n = self.n();
        let mut rep = EstimateReport::new("geometry equivalences");
        let radii = self.realized_radii();
        let m = radii.len();

        let pairs = TupleList::<2>::exhaustive(n);
        let swap = par_fits(pairs.len(), 1, |i, f| {
            let [x, y] = pairs.get(i);
            if x != y {
                f[0].observe(self.v(x, y).as_f64(), self.v(y, x).as_f64().ln(), &[x, y]);
            }
        });
        rep.push(Condition::fitted(
            "volume_swap",
            "V(x,y) <= C V(y,x)",
            &swap[0],
            pairs.census(pairs.len(), swap[0].admissible),
        ));

        let triples = sample_configs(n * n * m, budget, seed, 0x61);
        let eq = par_fits(triples.len(), 4, |i, f| {
            let c = triples[i];
            let (x, y, r) = (c / (n * m), (c / m) % n, radii[c % m]);
            let vxy = self.v(x, y);
            let sum3 = (self.volume(x, r) + self.volume(y, r) + vxy).as_f64();
            let sum_x = (self.volume(x, r) + vxy).as_f64();
            let sum_y = (self.volume(y, r) + vxy).as_f64();
            let big = self.volume(x, r + self.d(x, y)).as_f64();
            let w = [x, y, c % m];
            f[0].observe(sum3, big.ln(), &w);
            f[1].observe(big, sum_x.ln(), &w);
            f[2].observe(sum_x, big.ln(), &w);
            f[3].observe(big, sum_y.ln(), &w);
        });
        let census = Census {
            evaluated: triples.len(),
            admissible: triples.len(),
            exhaustive: triples.len() == n * n * m,
            seed,
        };
        let names = [
            ("equivalence_three_term_upper", "Vr(x)+Vr(y)+V(x,y) <= C mu(B(x, r+d))"),
            ("equivalence_x_lower", "mu(B(x, r+d)) <= C (Vr(x)+V(x,y))"),
            ("equivalence_x_upper", "Vr(x)+V(x,y) <= C mu(B(x, r+d))"),
            ("equivalence_y_lower", "mu(B(x, r+d)) <= C (Vr(y)+V(x,y))"),
        ];
        for ((name, anchor), fit) in names.iter().zip(&eq) {
            rep.push(Condition::fitted(name, anchor, fit, census.clone()));
        }

        let xr = sample_configs(n * m, budget, seed, 0x62);
        for gamma in [0.5f64, 1.0, 2.0] {
            let g = T::lit(gamma);
            let fit = par_fits(xr.len(), 1, |i, f| {
                let (x1, r) = (xr[i] / m, radii[xr[i] % m]);
                let s = fixed_sum((0..n).map(|y| {
                    let d = self.d(x1, y);
                    self.weights[y] / (self.volume(x1, r) + self.v(x1, y)) * (r / (r + d)).powf(g)
                }));
                f[0].observe(s.as_f64(), 0.0, &[x1, xr[i] % m]);
            });
            rep.push(Condition::fitted(
                &format!("decay_integral_gamma_{gamma}"),
                "int 1/(Vr(x1)+V(x1,y)) [r/(r+d)]^gamma dmu(y) <= C",
                &fit[0],
                census_of(&xr, n * m, seed),
            ));
        }
        for beta in [0.5f64, 1.0] {
            let b = T::lit(beta);
            let fit = par_fits(xr.len(), 2, |i, f| {
                let (x, big_r) = (xr[i] / m, radii[xr[i] % m]);
                let mut inner = T::zero();
                let mut outer = T::zero();
                for y in 0..n {
                    if y == x {
                        continue;
                    }
                    let d = self.d(x, y);
                    let v = self.v(x, y);
                    if d <= big_r {
                        inner = inner + self.weights[y] / v * (d / big_r).powf(b);
                    }
                    if d >= big_r {
                        outer = outer + self.weights[y] / v * (big_r / d).powf(b);
                    }
                }
                f[0].observe(inner.as_f64(), 0.0, &[x, xr[i] % m]);
                f[1].observe(outer.as_f64(), 0.0, &[x, xr[i] % m]);
            });
            rep.push(Condition::fitted(
                &format!("inner_integral_beta_{beta}"),
                "int_{d<=R} 1/V(x,y) [d/R]^beta dmu(y) <= C",
                &fit[0],
                census_of(&xr, n * m, seed),
            ));
            rep.push(Condition::fitted(
                &format!("outer_integral_beta_{beta}"),
                "int_{d>=R} 1/V(x,y) [R/d]^beta dmu(y) <= C",
                &fit[1],
                census_of(&xr, n * m, seed),
            ));
        }
        let xrr = sample_configs(n * m * m, budget, seed, 0x63);
        for gamma in [0.5f64, 1.0, 2.0] {
            let g = T::lit(gamma);
            let fit = par_fits(xrr.len(), 1, |i, f| {
                let c = xrr[i];
                let (x1, r, big_r) = (c / (m * m), radii[(c / m) % m], radii[c % m]);
                let s = fixed_sum((0..n).filter(|&x| self.d(x, x1) >= big_r).map(|x| {
                    let d = self.d(x1, x);
                    self.weights[x] / (self.volume(x1, r) + self.v(x1, x)) * (r / (r + d)).powf(g)
                }));
                let rhs = (r / (r + big_r)).powf(g);
                f[0].observe(s.as_f64(), rhs.as_f64().ln(), &[x1, (c / m) % m, c % m]);
            });
            rep.push(Condition::fitted(
                &format!("tail_integral_gamma_{gamma}"),
                "int_{d(x,x1)>=R} 1/(Vr(x1)+V(x1,x)) [r/(r+d)]^gamma dmu(x) <= C [r/(r+R)]^gamma",
                &fit[0],
                census_of(&xrr, n * m * m, seed),
            ));
        }
        rep
    }
}

fn census_of(list: &[usize], total: usize, seed: u64) -> Census {
    Census {
        evaluated: list.len(),
        admissible: list.len(),
        exhaustive: list.len() == total,
        seed,
    }
}

/// Linear configuration indices: all of `0..total` within budget, else a
/// seeded sample.
fn sample_configs(total: usize, budget: usize, seed: u64, stream: u64) -> Vec<usize> {
    if total <= budget {
        (0..total).collect()
    } else {
        let mut r = rng(seed, stream);
        (0..budget).map(|_| r.gen_range(0..total)).collect()
    }
}

fn canonical_order<T: Scalar>(ids: &[String], coords: Option<&[Vec<T>]>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        let by_coords = match coords {
            Some(c) => c[a]
                .iter()
                .zip(&c[b])
                .map(|(u, v)| u.partial_cmp(v).unwrap_or(Ordering::Equal))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal),
            None => Ordering::Equal,
        };
        by_coords.then_with(|| ids[a].cmp(&ids[b]))
    });
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricAudit {
    pub a0_fit: f64,
    pub declared_a0: f64,
    pub holds: bool,
    pub symmetric: bool,
    pub witness: Option<Vec<usize>>,
    pub census: Census,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingAudit {
    pub c_mu_fit: f64,
    pub omega_fit: f64,
    /// `(point, radius, λ)` attaining `C_mu_fit`.
    pub worst_witness: (usize, f64, f64),
    /// `sup μ(λB) / (λ^ω μ(B))` over `λ ∈ {2, 4, 8}`.
    pub consistency_residual: f64,
    pub census: Census,
}

#[derive(Deserialize)]
struct SpaceFile {
    points: Vec<serde_json::Value>,
    weights: Vec<f64>,
    metric: MetricFile,
    #[serde(rename = "A0", alias = "a0")]
    a0: f64,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum MetricFile {
    Euclidean,
    Power { rho: f64 },
    Explicit { matrix_file: String },
}

/// Read a space description (JSON); explicit matrices are resolved relative
/// to the file's directory.
pub fn load_space<T: Scalar>(path: &Path) -> Result<FinitePointSpace<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SpaceFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let weights: Vec<T> = file.weights.iter().map(|&w| T::lit(w)).collect();
    let a0 = T::lit(file.a0);
    match file.metric {
        MetricFile::Euclidean | MetricFile::Power { .. } => {
            let rho = match file.metric {
                MetricFile::Power { rho } => rho,
                _ => 1.0,
            };
            let coords = file
                .points
                .iter()
                .map(|p| match p {
                    serde_json::Value::Number(x) => Ok(vec![T::lit(x.as_f64().unwrap_or(f64::NAN))]),
                    serde_json::Value::Array(xs) => xs
                        .iter()
                        .map(|v| {
                            v.as_f64()
                                .map(T::lit)
                                .ok_or_else(|| Error::Parse("non-numeric coordinate".into()))
                        })
                        .collect(),
                    _ => Err(Error::Parse("formula metrics need numeric point coordinates".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            FinitePointSpace::from_coords(coords, weights, T::lit(rho), a0)
        }
        MetricFile::Explicit { matrix_file } => {
            let ids = file
                .points
                .iter()
                .map(|p| match p {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>();
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let raw = crate::io::read_f64_file(&base.join(&matrix_file))?;
            let dist = raw.into_iter().map(T::lit).collect();
            FinitePointSpace::from_matrix(ids, dist, weights, a0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_ball_excludes_boundary() {
        let s = FinitePointSpace::<f64>::uniform_grid(5).unwrap();
        assert_eq!(s.ball(2, 0.25).unwrap(), vec![2]);
        assert_eq!(s.ball(2, 0.2500001).unwrap(), vec![1, 2, 3]);
        assert_eq!(s.v(2, 3), 1.0);
        assert!(s.ball(2, 0.0).is_err());
    }

    #[test]
    fn one_point_space_is_degenerate_but_valid() {
        let s = FinitePointSpace::<f64>::uniform_grid(1).unwrap();
        let d = s.doubling_audit(0, 10);
        assert_eq!(d.c_mu_fit, 1.0);
        assert_eq!(d.omega_fit, 0.0);
        assert_eq!(s.quasi_metric_audit(0, 10).a0_fit, 1.0);
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        let s = FinitePointSpace::<f64>::uniform_grid(9).unwrap();
        let m = s.maximal_operator(&[3.0; 9]);
        for v in m.iter() {
            assert!((v - 3.0).abs() < 1e-15);
        }
    }
}
