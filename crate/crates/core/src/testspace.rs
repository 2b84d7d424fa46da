//! Test-function norms, Hölder norms, bumps, Calderón–Zygmund kernel audits
//! and measured operator ratios on test-function spaces.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::report::{Condition, EstimateReport};
use crate::sampling::{par_fits, rng, AuditBudget, TupleList};
use crate::scalar::Scalar;
use crate::space::{FinitePointSpace, GridFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSpaceParams {
    pub x1: usize,
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Require vanishing integral.
    pub cancellation_required: bool,
}

impl TestSpaceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0,1], got {}",
                self.beta
            )));
        }
        if !(self.gamma > 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidParameter("gamma and r must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestNorm {
    pub norm: f64,
    pub size: f64,
    pub regularity: f64,
    /// `|∫ f dμ|` when cancellation is required.
    pub cancellation_residual: Option<f64>,
}

/// Smallest constant in the size and regularity bounds; on a finite space the
/// infimum is the larger of the two exhaustive ratio maxima.
pub fn test_norm<T: Scalar>(space: &FinitePointSpace<T>, f: &[T], params: &TestSpaceParams) -> Result<TestNorm> {
    params.validate()?;
    let n = space.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.len(),
        });
    }
    if params.x1 >= n {
        return Err(Error::UnknownPoint(params.x1.to_string()));
    }
    let x1 = params.x1;
    let r = T::lit(params.r);
    let vr = space.volume(x1, r);
    // ln of 1/(V_r(x1) + V(x1,x)) [r/(r+d(x1,x))]^γ, and r + d(x1,x)
    let base: Vec<(f64, T)> = (0..n)
        .map(|x| {
            let d = space.d(x1, x);
            let rd = r + d;
            (
                -(vr + space.v(x1, x)).as_f64().ln() + params.gamma * (r / rd).as_f64().ln(),
                rd,
            )
        })
        .collect();
    let mut size = crate::report::RatioFit::default();
    for x in 0..n {
        size.observe(f[x].abs().as_f64(), base[x].0, &[x]);
    }
    let budget = AuditBudget {
        exhaustive_n: 512,
        ..AuditBudget::default()
    };
    let pairs = TupleList::<2>::plan(n, &budget, 0xC1);
    let win = T::lit(2.0) * space.a0();
    let reg = par_fits(pairs.len(), 1, |i, fits| {
        let [x, y] = pairs.get(i);
        if x == y {
            return;
        }
        let d = space.d(x, y);
        let (lb, rd) = base[x];
        if d > rd / win {
            return;
        }
        let lhs = (f[x] - f[y]).abs().as_f64();
        fits[0].observe(lhs, params.beta * (d / rd).as_f64().ln() + lb, &[x, y]);
    });
    let s = size.value();
    let g = reg[0].value();
    Ok(TestNorm {
        norm: s.max(g),
        size: s,
        regularity: g,
        cancellation_residual: params.cancellation_required.then(|| space.integral(f).abs().as_f64()),
    })
}

/// `(‖f‖_∞, max_{x≠y} |f(x)-f(y)| / d(x,y)^s)`.
pub fn holder_norm<T: Scalar>(space: &FinitePointSpace<T>, f: &[T], s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Hölder order must be positive, got {s}"
        )));
    }
    let n = space.n();
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs().as_f64()));
    let semi = (0..n)
        .into_par_iter()
        .map(|x| {
            (0..n)
                .filter(|&y| y != x)
                .map(|y| (f[x] - f[y]).abs().as_f64() / space.d(x, y).as_f64().powf(s))
                .fold(0.0f64, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0f64, f64::max);
    Ok((sup, semi))
}

/// Tent profile equal to 1 on `B(x,r)` and 0 off `B(x,2A0 r)`.
///
/// With `A0 = 1` the two radii would coincide for a closed profile, so the
/// ramp width `(2A0-1) r` is at least `r`.
pub fn make_bump<T: Scalar>(space: &FinitePointSpace<T>, x: usize, r: T) -> Result<GridFunction<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter("bump radius must be positive".into()));
    }
    if x >= space.n() {
        return Err(Error::UnknownPoint(x.to_string()));
    }
    let two_a0 = T::lit(2.0) * space.a0();
    let width = (two_a0 - T::one()) * r;
    Ok(GridFunction(
        (0..space.n())
            .map(|y| ((two_a0 * r - space.d(x, y)) / width).max(T::zero()).min(T::one()))
            .collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzTail {
    pub r0: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CZKernelParams {
    pub s: f64,
    pub tail: Option<CzTail>,
    pub second_difference: bool,
}

impl Default for CZKernelParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            tail: None,
            second_difference: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzAudit {
    pub report: EstimateReport,
    /// Mean of the row integrals `∫ K(x,y) dμ(y)`.
    pub c0: f64,
    /// Largest deviation of a row integral from that mean.
    pub c0_deviation: f64,
}

impl CzAudit {
    /// Largest fitted constant over the size and smoothness conditions.
    pub fn c_t(&self) -> f64 {
        self.report
            .conditions
            .iter()
            .filter_map(|c| c.c_fit())
            .fold(0.0, f64::max)
    }
}

/// Fitted constants of the size, smoothness and tail conditions of a
/// Calderón–Zygmund kernel.
pub fn verify_cz_kernel<T: Scalar>(
    space: &FinitePointSpace<T>,
    k: &Kernel<T>,
    params: &CZKernelParams,
    budget: &AuditBudget,
) -> Result<CzAudit> {
    let n = space.n();
    if k.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k.n(),
        });
    }
    if !(params.s > 0.0 && params.s <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "s must lie in (0,1], got {}",
            params.s
        )));
    }
    if let Some(t) = params.tail {
        if !(t.sigma > 0.0 && t.r0 > 0.0) {
            return Err(Error::InvalidParameter("tail r0 and sigma must be positive".into()));
        }
    }
    for x in 0..n {
        for y in 0..n {
            if x != y && !k.get(x, y).is_finite() {
                return Err(Error::InvalidParameter(format!("kernel entry ({x},{y}) is not finite")));
            }
        }
    }
    let s = params.s;
    let two_a0 = T::lit(2.0) * space.a0();
    let pairs = TupleList::<2>::plan(n, budget, 0xC3);
    let ln_v: Vec<f64> = (0..n * n).map(|i| space.v(i / n, i % n).as_f64().ln()).collect();
    // 0 size, 1 regularity, 2 second difference, 3 size tail, 4 regularity tail
    let fits = par_fits(pairs.len(), 5, |i, f| {
        let [x, y] = pairs.get(i);
        if x == y {
            return;
        }
        let d = space.d(x, y);
        let lv = ln_v[x * n + y];
        let kxy = k.get(x, y);
        f[0].observe(kxy.abs().as_f64(), -lv, &[x, y]);
        let tail = params
            .tail
            .filter(|t| d.as_f64() >= t.r0)
            .map(|t| t.sigma * (t.r0 / d.as_f64()).ln());
        if let Some(lt) = tail {
            f[3].observe(kxy.abs().as_f64(), lt - lv, &[x, y]);
        }
        let w1 = d / two_a0;
        let w2 = w1 / two_a0;
        for xp in 0..n {
            let dx = space.d(x, xp);
            if xp == x || dx > w1 {
                continue;
            }
            let lhs = ((kxy - k.get(xp, y)).abs() + (k.get(y, x) - k.get(y, xp)).abs()).as_f64();
            let lm = s * (dx / d).as_f64().ln() - lv;
            f[1].observe(lhs, lm, &[x, y, xp]);
            if let Some(lt) = tail {
                f[4].observe(lhs, lm + lt, &[x, y, xp]);
            }
            if !params.second_difference || dx > w2 {
                continue;
            }
            for yp in 0..n {
                let dy = space.d(y, yp);
                if yp == y || dy > w2 {
                    continue;
                }
                let lhs2 = ((kxy - k.get(xp, y)) - (k.get(x, yp) - k.get(xp, yp))).abs().as_f64();
                f[2].observe(lhs2, lm + s * (dy / d).as_f64().ln(), &[x, y, xp, yp]);
            }
        }
    });
    let evaluated = pairs.len();
    let mut rep = EstimateReport::new("Calderón–Zygmund kernel");
    rep.push(Condition::fitted(
        "size",
        "|K(x,y)| <= C_T / V(x,y)",
        &fits[0],
        pairs.census(evaluated, fits[0].admissible),
    ));
    rep.push(Condition::fitted(
        "regularity",
        "differences within (2A0)^-1 d(x,y), modulus [d(x,x')/d(x,y)]^s",
        &fits[1],
        pairs.census(evaluated, fits[1].admissible),
    ));
    if params.second_difference {
        rep.push(Condition::fitted(
            "second_difference",
            "mixed differences within (2A0)^-2 d(x,y)",
            &fits[2],
            pairs.census(evaluated, fits[2].admissible),
        ));
    }
    if params.tail.is_some() {
        rep.push(Condition::fitted(
            "size_tail",
            "|K(x,y)| <= C_T [r0/d(x,y)]^sigma / V(x,y) for d(x,y) >= r0",
            &fits[3],
            pairs.census(evaluated, fits[3].admissible),
        ));
        rep.push(Condition::fitted(
            "regularity_tail",
            "regularity with the extra [r0/d(x,y)]^sigma factor for d(x,y) >= r0",
            &fits[4],
            pairs.census(evaluated, fits[4].admissible),
        ));
    }
    let rows: Vec<f64> = k.row_integrals(space.weights()).iter().map(|v| v.as_f64()).collect();
    let c0 = if rows.is_empty() {
        0.0
    } else {
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    let c0_deviation = rows.iter().fold(0.0f64, |m, v| m.max((v - c0).abs()));
    Ok(CzAudit {
        report: rep,
        c0,
        c0_deviation,
    })
}

/// Bumps at three radii around `x1` plus `count` seeded random functions;
/// every probe is made mean-zero when cancellation is required.
pub fn default_test_probes<T: Scalar>(
    space: &FinitePointSpace<T>,
    params: &TestSpaceParams,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<T>>> {
    let n = space.n();
    let r = T::lit(params.r);
    let mut probes = Vec::new();
    for m in [1.0, 2.0, 4.0] {
        probes.push(make_bump(space, params.x1, r * T::lit(m))?.0);
    }
    let mut g = rng(seed, 0xC5);
    for _ in 0..count {
        probes.push((0..n).map(|_| T::lit(g.gen::<f64>() * 2.0 - 1.0)).collect());
    }
    if params.cancellation_required {
        for p in &mut probes {
            let m = space.mean(p);
            for v in p.iter_mut() {
                *v = *v - m;
            }
        }
    }
    Ok(probes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSpaceRatio {
    /// Lower bound on the operator norm on the test-function space.
    pub ratio: f64,
    pub witness_probe: Option<usize>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// `max ‖Tf‖_G / ‖f‖_G` over the probes; zero-norm probes are skipped.
pub fn operator_test_space_ratio<T: Scalar>(
    space: &FinitePointSpace<T>,
    t: &Kernel<T>,
    params: &TestSpaceParams,
    probes: &[Vec<T>],
) -> Result<TestSpaceRatio> {
    let w = space.weights();
    let mut out = TestSpaceRatio {
        ratio: 0.0,
        witness_probe: None,
        evaluated: 0,
        skipped: 0,
    };
    for (i, f) in probes.iter().enumerate() {
        let nf = test_norm(space, f, params)?.norm;
        if !(nf > 0.0) {
            out.skipped += 1;
            continue;
        }
        out.evaluated += 1;
        let tf = t.apply(f, w);
        let r = test_norm(space, &tf, params)?.norm / nf;
        if r > out.ratio || out.witness_probe.is_none() {
            out.ratio = out.ratio.max(r);
            out.witness_probe = Some(i);
        }
    }
    Ok(out)
}
