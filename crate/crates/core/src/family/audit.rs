//! Fitted and exact audits of averaging operators, detail kernels and their
//! compositions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mode, OperatorFamily};
use crate::dyadic::DyadicSystem;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::report::{linear_fit, Condition, EstimateReport, RatioFit};
use crate::sampling::{par_fits, rng, AuditBudget, TupleList};
use crate::scalar::Scalar;
use crate::space::FinitePointSpace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtiAuditParams {
    /// Decay orders for the size condition.
    pub gammas: Vec<f64>,
    /// Decay order used by the regularity conditions.
    pub gamma: f64,
    pub beta: f64,
    pub probe_count: usize,
    pub budget: AuditBudget,
}

impl Default for AtiAuditParams {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 1.0, 2.0],
            gamma: 1.0,
            beta: 1.0,
            probe_count: 8,
            budget: AuditBudget::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpAtiAuditParams {
    /// Defaults to the family's declared `nu`, else 1.
    pub nu: Option<f64>,
    /// Defaults to the family's declared `a`, else 1.
    pub a: Option<f64>,
    /// Hölder order in the regularity conditions; defaults to 1/2.
    pub eta: Option<f64>,
    pub budget: AuditBudget,
}

fn ln<T: Scalar>(v: T) -> f64 {
    v.as_f64().ln()
}

/// Size, regularity and second-difference fits of the averaging operators,
/// exact unit integrals, and the maximal-function bound.
pub fn verify_ati<T: Scalar>(
    family: &OperatorFamily<T>,
    space: &FinitePointSpace<T>,
    params: &AtiAuditParams,
) -> Result<EstimateReport> {
    if family.averages.is_empty() {
        return Err(Error::MissingData(
            "averaging operators are not stored with this family".into(),
        ));
    }
    let n = space.n();
    let w = space.weights();
    let a0 = space.a0();
    let delta = T::lit(family.delta);
    let mut rep = EstimateReport::new("averaging operators");

    let mut unit = 0.0f64;
    for (_, p) in &family.averages {
        for v in p.row_integrals(w).into_iter().chain(p.col_integrals(w)) {
            unit = unit.max((v - T::one()).abs().as_f64());
        }
    }
    rep.push(Condition::exact(
        "unit_integrals",
        "int P_k(x,y) dmu(y) = 1 = int P_k(x,y) dmu(x)",
        unit,
        T::IDENTITY_TOL,
    ));

    struct Lv<'a, T> {
        k: i32,
        s: T,
        p: &'a Kernel<T>,
    }
    let levels: Vec<Lv<T>> = family
        .averages
        .iter()
        .map(|(k, p)| Lv {
            k: *k,
            s: delta.powi(*k),
            p,
        })
        .collect();
    // ln of 1/(V_s(x) + V(x,y)) [s/(s+d)]^γ
    let log_size = |s: T, x: usize, y: usize, g: f64| -> f64 {
        let d = space.d(x, y);
        -ln(space.volume(x, s) + space.v(x, y)) + g * ln(s / (s + d))
    };

    let pairs = TupleList::<2>::plan(n, &params.budget, 0xA1);
    let ng = params.gammas.len();
    let size = par_fits(pairs.len(), ng, |i, fits| {
        let [x, y] = pairs.get(i);
        for (li, lv) in levels.iter().enumerate() {
            let lhs = lv.p.get(x, y).abs().as_f64();
            for (gi, &g) in params.gammas.iter().enumerate() {
                fits[gi].observe(lhs, log_size(lv.s, x, y, g), &[li, x, y]);
            }
        }
    });
    for (gi, &g) in params.gammas.iter().enumerate() {
        rep.push(Condition::fitted(
            &format!("size_gamma_{g}"),
            "|P_k(x,y)| <= C (V_s(x)+V(x,y))^-1 [s/(s+d)]^gamma",
            &size[gi],
            pairs.census(pairs.len() * levels.len(), size[gi].admissible),
        ));
    }

    let two_a0 = T::lit(2.0) * a0;
    let beta = params.beta;
    let gamma = params.gamma;
    let reg = par_fits(pairs.len(), 2, |i, fits| {
        let [x, y] = pairs.get(i);
        for (li, lv) in levels.iter().enumerate() {
            let base = lv.s + space.d(x, y);
            let win1 = base / two_a0;
            let win2 = win1 / two_a0;
            let ls = log_size(lv.s, x, y, gamma);
            for xp in 0..n {
                let dx = space.d(x, xp);
                if xp == x || dx > win1 {
                    continue;
                }
                let lhs = (lv.p.get(x, y) - lv.p.get(xp, y)).abs() + (lv.p.get(y, x) - lv.p.get(y, xp)).abs();
                fits[0].observe(lhs.as_f64(), beta * ln(dx / base) + ls, &[li, x, y, xp]);
                if dx > win2 {
                    continue;
                }
                for yp in 0..n {
                    let dy = space.d(y, yp);
                    if yp == y || dy > win2 {
                        continue;
                    }
                    let lhs = ((lv.p.get(x, y) - lv.p.get(xp, y)) - (lv.p.get(x, yp) - lv.p.get(xp, yp))).abs();
                    fits[1].observe(
                        lhs.as_f64(),
                        beta * (ln(dx / base) + ln(dy / base)) + ls,
                        &[li, x, y, xp, yp],
                    );
                }
            }
        }
    });
    rep.push(Condition::fitted(
        "regularity",
        "first-variable differences within (2A0)^-1 [s + d(x,y)]",
        &reg[0],
        pairs.census(pairs.len() * levels.len(), reg[0].admissible),
    ));
    rep.push(Condition::fitted(
        "second_difference",
        "mixed differences within (2A0)^-2 [s + d(x,y)]",
        &reg[1],
        pairs.census(pairs.len() * levels.len(), reg[1].admissible),
    ));

    // |P_k f(x)| <= C M f(x) over seeded probes
    let mut r = rng(params.budget.seed, 0xA3);
    let mut probes: Vec<Vec<T>> = (0..params.probe_count)
        .map(|_| (0..n).map(|_| T::lit(r.gen::<f64>() * 2.0 - 1.0)).collect())
        .collect();
    probes.extend((0..n.min(4)).map(|c| {
        (0..n)
            .map(|x| {
                if x == c * (n - 1) / 3.max(1) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }));
    let mut mfit = RatioFit::default();
    for (pi, f) in probes.iter().enumerate() {
        let mf = space.maximal_operator(f);
        for (li, lv) in levels.iter().enumerate() {
            let pf = lv.p.apply(f, w);
            for x in 0..n {
                if mf[x] > T::zero() {
                    mfit.observe(pf[x].abs().as_f64(), ln(mf[x]), &[pi, li, x]);
                }
            }
        }
        let _ = levels.iter().map(|l| l.k);
    }
    rep.push(Condition::fitted(
        "maximal_bound",
        "|P_k f(x)| <= C Mf(x)",
        &mfit,
        crate::report::Census {
            evaluated: probes.len() * levels.len() * n,
            admissible: mfit.admissible,
            exhaustive: false,
            seed: params.budget.seed,
        },
    ));
    Ok(rep)
}

struct QLevel<'a, T> {
    index: i32,
    s: T,
    q: &'a Kernel<T>,
    ln_v: Vec<f64>,
    /// `d(x, 𝒴)/s` or `None` when the level carries no new-center factor.
    dy: Option<Vec<f64>>,
}

/// Exact identity and cancellation checks plus fitted size and regularity
/// constants of the detail kernels.
pub fn verify_exp_ati<T: Scalar>(
    family: &OperatorFamily<T>,
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    params: &ExpAtiAuditParams,
) -> Result<EstimateReport> {
    let n = space.n();
    let w = space.weights();
    if family.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: family.n(),
        });
    }
    let nu = params.nu.or(family.params.nu).unwrap_or(1.0);
    let a = params.a.or(family.params.a).unwrap_or(1.0);
    let eta = params.eta.or(family.params.eta).unwrap_or(0.5);
    let delta = T::lit(family.delta);
    let mut rep = EstimateReport::new("detail kernels");

    let (id, sums) = family.invariant_violations(w);
    rep.push(Condition::exact(
        "identity",
        "sum of Q_k equals the mode identity",
        id,
        T::IDENTITY_TOL,
    ));
    rep.push(Condition::exact(
        "cancellation",
        "row and column integrals vanish (unit for the inhomogeneous Q_0)",
        sums,
        T::IDENTITY_TOL,
    ));

    let mut skipped = Vec::new();
    let levels: Vec<QLevel<T>> = family
        .levels
        .iter()
        .map(|l| {
            let s = delta.powi(l.scale);
            let no_factor = family.mode == Mode::Inhomogeneous && l.index == family.first_index();
            let ys = sys.new_centers(l.scale);
            let dy = if no_factor || ys.is_empty() {
                if !no_factor {
                    skipped.push(l.index);
                }
                None
            } else {
                Some(
                    (0..n)
                        .map(|x| (sys.dist_to_new_centers(x, l.scale) / s).as_f64())
                        .collect(),
                )
            };
            QLevel {
                index: l.index,
                s,
                q: &l.q,
                ln_v: (0..n).map(|x| ln(space.volume(x, s))).collect(),
                dy,
            }
        })
        .collect();
    if !skipped.is_empty() {
        rep.flag(format!(
            "levels {skipped:?} have no new centers; the full-form fits skip them"
        ));
    }
    let inhom_first = |lv: &QLevel<T>| family.mode == Mode::Inhomogeneous && lv.index == family.first_index();

    // ln of V^-1/2 V^-1/2 exp(-ν t^a) and of the new-center factor
    let base = |lv: &QLevel<T>, x: usize, y: usize| -> f64 {
        let t = (space.d(x, y) / lv.s).as_f64();
        -0.5 * (lv.ln_v[x] + lv.ln_v[y]) - nu * t.powf(a)
    };
    let yfac = |lv: &QLevel<T>, x: usize, y: usize| -> Option<f64> {
        if inhom_first(lv) {
            return Some(0.0);
        }
        lv.dy.as_ref().map(|dy| -nu * dy[x].max(dy[y]).powf(a))
    };

    let pairs = TupleList::<2>::plan(n, &params.budget, 0xB1);
    let a0 = space.a0();
    let two_a0 = T::lit(2.0) * a0;
    // 0 size plain, 1 size full, 2 reg, 3 second diff, 4 reg relative, 5 second diff relative
    let fits = par_fits(pairs.len(), 6, |i, f| {
        let [x, y] = pairs.get(i);
        for (li, lv) in levels.iter().enumerate() {
            let q = lv.q;
            let b = base(lv, x, y);
            let lhs = q.get(x, y).abs().as_f64();
            f[0].observe(lhs, b, &[li, x, y]);
            let Some(yf) = yfac(lv, x, y) else { continue };
            let full = b + yf;
            f[1].observe(lhs, full, &[li, x, y]);
            let rel = lv.s + space.d(x, y);
            let w1 = rel / two_a0;
            let w2 = w1 / two_a0;
            for xp in 0..n {
                let dx = space.d(x, xp);
                if xp == x || (dx > lv.s && dx > w1) {
                    continue;
                }
                let dlhs = ((q.get(x, y) - q.get(xp, y)).abs() + (q.get(y, x) - q.get(y, xp)).abs()).as_f64();
                if dx <= lv.s {
                    f[2].observe(dlhs, eta * ln(dx / lv.s) + full, &[li, x, y, xp]);
                }
                if dx <= w1 {
                    f[4].observe(dlhs, eta * ln(dx / rel) + full, &[li, x, y, xp]);
                }
                let in_abs = dx <= lv.s;
                let in_rel = dx <= w2;
                if !in_abs && !in_rel {
                    continue;
                }
                for yp in 0..n {
                    let dyy = space.d(y, yp);
                    if yp == y {
                        continue;
                    }
                    let lhs2 = ((q.get(x, y) - q.get(xp, y)) - (q.get(x, yp) - q.get(xp, yp)))
                        .abs()
                        .as_f64();
                    if in_abs && dyy <= lv.s {
                        f[3].observe(lhs2, eta * (ln(dx / lv.s) + ln(dyy / lv.s)) + full, &[li, x, y, xp, yp]);
                    }
                    if in_rel && dyy <= w2 {
                        f[5].observe(lhs2, eta * (ln(dx / rel) + ln(dyy / rel)) + full, &[li, x, y, xp, yp]);
                    }
                }
            }
        }
    });
    let evaluated = pairs.len() * levels.len();

    // least-squares ν from ln(|Q| sqrt(V V)) against (d/s)^a
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for i in 0..pairs.len() {
        let [x, y] = pairs.get(i);
        for lv in &levels {
            let v = lv.q.get(x, y).abs().as_f64();
            if v > 0.0 && x != y {
                ts.push((space.d(x, y) / lv.s).as_f64().powf(a));
                ys.push(v.ln() + 0.5 * (lv.ln_v[x] + lv.ln_v[y]));
            }
        }
    }
    let lsq = linear_fit(&ts, &ys);
    let nu_fit = lsq.map(|(slope, _, _)| -slope);
    let resid = lsq.map(|(_, _, r)| r);

    let names = [
        ("size_no_new_centers", "|Q_k| <= C (V_s(x)V_s(y))^-1/2 exp(-nu (d/s)^a)"),
        ("size", "size bound including the distance-to-new-centers factor"),
        ("regularity", "first-variable differences for d(x,x') <= s"),
        ("second_difference", "mixed differences for d(x,x'), d(y,y') <= s"),
        (
            "regularity_relative",
            "first-variable differences within (2A0)^-1 [s + d(x,y)]",
        ),
        (
            "second_difference_relative",
            "mixed differences within (2A0)^-2 [s + d(x,y)]",
        ),
    ];
    for (i, (name, anchor)) in names.iter().enumerate() {
        let mut c = Condition::fitted(name, anchor, &fits[i], pairs.census(evaluated, fits[i].admissible));
        c = if i == 0 {
            c.with_fit_details(nu_fit, Some(a), None, resid)
        } else {
            c.with_fit_details(Some(nu), Some(a), if i >= 2 { Some(eta) } else { None }, None)
        };
        rep.push(c);
    }
    Ok(rep)
}

#[derive(Clone, Debug)]
pub struct CompositionAudit<T> {
    pub kernel: Kernel<T>,
    pub report: EstimateReport,
    /// Size constant without the `δ^{|j-k|η}` gain and without the new-center factor.
    pub size_plain: f64,
}

/// Compose `A_j B_k` under the measure and fit the composition estimates at
/// the coarser of the two scales.
#[allow(clippy::too_many_arguments)]
pub fn compose_and_audit<T: Scalar>(
    fa: &OperatorFamily<T>,
    j: i32,
    fb: &OperatorFamily<T>,
    k: i32,
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    c: f64,
    eta_prime: f64,
) -> Result<CompositionAudit<T>> {
    let n = space.n();
    let w = space.weights();
    if fa.n() != n || fb.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if fa.n() != n { fa.n() } else { fb.n() },
        });
    }
    let la = fa
        .level(j)
        .ok_or_else(|| Error::InvalidParameter(format!("level {j} not in family")))?;
    let lb = fb
        .level(k)
        .ok_or_else(|| Error::InvalidParameter(format!("level {k} not in family")))?;
    let prod = la.q.compose(&lb.q, w);
    let a = fa.params.a.unwrap_or(1.0);
    let m = la.scale.min(lb.scale);
    let s = sys.scale(m);
    let ys = sys.new_centers(m);
    let mut rep = EstimateReport::new(format!("composition {j} x {k}"));

    let ln_v: Vec<f64> = (0..n).map(|x| ln(space.volume(x, s))).collect();
    let dy: Vec<f64> = (0..n).map(|x| (sys.dist_to_new_centers(x, m) / s).as_f64()).collect();
    let has_y = !ys.is_empty();
    let pairs = TupleList::<2>::exhaustive(n);
    let two_a0 = T::lit(2.0) * space.a0();
    let fits = par_fits(pairs.len(), 4, |i, f| {
        let [x, y] = pairs.get(i);
        let t = (space.d(x, y) / s).as_f64();
        let plain = -ln_v[x] - c * t.powf(a);
        let full = if has_y { plain - c * dy[x].powf(a) } else { plain };
        let v = prod.get(x, y).abs().as_f64();
        f[0].observe(v, plain, &[x, y]);
        f[1].observe(v, full, &[x, y]);
        if x == y {
            return;
        }
        let w2 = space.d(x, y) / (two_a0 * two_a0);
        let w3 = w2 / two_a0;
        for xp in 0..n {
            let dx = space.d(x, xp);
            if xp == x || dx > w2 {
                continue;
            }
            let lhs = ((prod.get(x, y) - prod.get(xp, y)).abs() + (prod.get(y, x) - prod.get(y, xp)).abs()).as_f64();
            f[2].observe(lhs, eta_prime * ln(dx / s) + full, &[x, y, xp]);
            if dx > w3 {
                continue;
            }
            for yp in 0..n {
                let dyy = space.d(y, yp);
                if yp == y || dyy > w3 {
                    continue;
                }
                let lhs2 = ((prod.get(x, y) - prod.get(xp, y)) - (prod.get(x, yp) - prod.get(xp, yp)))
                    .abs()
                    .as_f64();
                f[3].observe(lhs2, eta_prime * (ln(dx / s) + ln(dyy / s)) + full, &[x, y, xp, yp]);
            }
        }
    });
    let census = pairs.census(pairs.len(), pairs.len());
    rep.push(Condition::fitted(
        "size_no_new_centers",
        "|A_j B_k| <= C V^-1 exp(-c (d/s)^a)",
        &fits[0],
        census.clone(),
    ));
    rep.push(Condition::fitted(
        "size",
        "size bound with the new-center factor",
        &fits[1],
        census.clone(),
    ));
    rep.push(Condition::fitted(
        "regularity",
        "differences within (2A0)^-2 d(x,y)",
        &fits[2],
        census.clone(),
    ));
    rep.push(Condition::fitted(
        "second_difference",
        "mixed differences within (2A0)^-3 d(x,y)",
        &fits[3],
        census,
    ));
    if !has_y {
        rep.flag(format!(
            "no new centers at scale {m}; full size form equals the plain one"
        ));
    }

    let cancels = |q: &Kernel<T>, rows: bool| -> bool {
        let v = if rows { q.row_integrals(w) } else { q.col_integrals(w) };
        v.iter().all(|x| x.abs().as_f64() <= T::IDENTITY_TOL)
    };
    let mut viol = 0.0f64;
    let mut applicable = false;
    if cancels(&lb.q, true) {
        applicable = true;
        viol = viol.max(prod.row_integrals(w).iter().fold(0.0, |m, v| m.max(v.abs().as_f64())));
    }
    if cancels(&la.q, false) {
        applicable = true;
        viol = viol.max(prod.col_integrals(w).iter().fold(0.0, |m, v| m.max(v.abs().as_f64())));
    }
    if applicable {
        rep.push(Condition::exact(
            "cancellation",
            "integrals of A_j B_k vanish on the sides where the factors cancel",
            viol,
            T::IDENTITY_TOL,
        ));
    } else {
        rep.flag("neither factor cancels; cancellation not applicable");
    }
    let size_plain = fits[0].value();
    Ok(CompositionAudit {
        kernel: prod,
        report: rep,
        size_plain,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionDecay {
    pub offsets: Vec<u32>,
    /// Max over level pairs at each offset of the plain size constant.
    pub c_fit: Vec<f64>,
    /// Max entry of `A_j B_k` at each offset.
    pub max_abs: Vec<f64>,
    pub eta_fit: Option<f64>,
    pub residual: Option<f64>,
}

/// Fit `C(|j-k|) ≈ C δ^{η|j-k|}` from compositions at offsets `0..=max_offset`.
pub fn composition_decay<T: Scalar>(
    fa: &OperatorFamily<T>,
    fb: &OperatorFamily<T>,
    space: &FinitePointSpace<T>,
    sys: &DyadicSystem<T>,
    c: f64,
    max_offset: u32,
) -> Result<CompositionDecay> {
    let mut offsets = Vec::new();
    let mut c_fit = Vec::new();
    let mut max_abs = Vec::new();
    let lo = fa.first_index().max(fb.first_index());
    let hi = fa.last_index().min(fb.last_index());
    for off in 0..=max_offset {
        let mut best = 0.0f64;
        let mut mx = 0.0f64;
        let mut any = false;
        for k in lo..=hi {
            for (j, kk) in [(k + off as i32, k), (k, k + off as i32)] {
                if j < fa.first_index() || j > fa.last_index() || kk < fb.first_index() || kk > fb.last_index() {
                    continue;
                }
                let audit = compose_and_audit(fa, j, fb, kk, space, sys, c, 0.5)?;
                best = best.max(audit.size_plain);
                mx = mx.max(audit.kernel.max_abs().as_f64());
                any = true;
            }
        }
        if any {
            offsets.push(off);
            c_fit.push(best);
            max_abs.push(mx);
        }
    }
    let ld = fa.delta.ln().abs();
    let pts: Vec<(f64, f64)> = offsets
        .iter()
        .zip(&c_fit)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&o, &v)| (o as f64, v.ln()))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(CompositionDecay {
        offsets,
        c_fit,
        max_abs,
        eta_fit: fit.map(|(slope, _, _)| -slope / ld),
        residual: fit.map(|(_, _, r)| r),
    })
}
