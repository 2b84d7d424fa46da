use calderon_core::dyadic::{build_dyadic, build_nets, NetParams};
use calderon_core::engine::*;
use calderon_core::family::{build_haar_family, build_smoothed_family, Mode, SmoothedParams};
use calderon_core::space::FinitePointSpace;
use calderon_core::testspace::{holder_norm, make_bump, test_norm, TestSpaceParams};
use calderon_core::Kernel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `‖K‖` on `L²(μ)` is the largest singular value of `W^{1/2} K W^{1/2}`.
fn svd_norm(k: &Kernel<f64>, w: &[f64]) -> f64 {
    let n = k.n();
    let m = DMatrix::from_fn(n, n, |i, j| w[i].sqrt() * k.get(i, j) * w[j].sqrt());
    m.singular_values().max()
}

#[test]
fn power_iteration_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let n = 32;
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let k = Kernel::from_vec(n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let est = operator_norm_l2(&k, &w);
        let oracle = svd_norm(&k, &w);
        assert!(est.converged);
        assert!(
            (est.value - oracle).abs() <= 1e-8 * oracle,
            "{} vs {}",
            est.value,
            oracle
        );
    }
}

#[test]
fn mean_projection_has_unit_norm() {
    let w: Vec<f64> = (0..16).map(|i| 0.1 + i as f64 / 16.0).collect();
    let pi = Kernel::mean_projection(&w);
    assert!((operator_norm_l2(&pi, &w).value - 1.0).abs() <= 1e-10);
    assert!((svd_norm(&pi, &w) - 1.0).abs() <= 1e-12);
    assert!((operator_norm_l2(&Kernel::identity(&w), &w).value - 1.0).abs() <= 1e-12);
    assert_eq!(operator_norm_l2(&Kernel::zeros(16), &w).value, 0.0);
}

#[test]
fn test_norm_matches_double_loop() {
    let s = FinitePointSpace::<f64>::grid_with(24, (0..24).map(|i| 1.0 + (i % 2) as f64).collect(), 1.0, 1.0).unwrap();
    let params = TestSpaceParams {
        x1: 11,
        r: 0.2,
        beta: 0.4,
        gamma: 0.7,
        cancellation_required: false,
    };
    let f: Vec<f64> = (0..24).map(|i| ((i as f64) * 0.37).sin()).collect();
    let got = test_norm(&s, &f, &params).unwrap();
    let (x1, r) = (params.x1, params.r);
    let vol = |x: usize, rad: f64| -> f64 { (0..24).filter(|&y| s.d(x, y) < rad).map(|y| s.weight(y)).sum() };
    let bound = |x: usize| {
        let d = s.d(x1, x);
        1.0 / (vol(x1, r) + vol(x1, d)) * (r / (r + d)).powf(params.gamma)
    };
    let mut size = 0.0f64;
    let mut reg = 0.0f64;
    for x in 0..24 {
        size = size.max(f[x].abs() / bound(x));
        let rd = r + s.d(x1, x);
        for y in 0..24 {
            let d = s.d(x, y);
            if y == x || d > rd / 2.0 {
                continue;
            }
            reg = reg.max((f[x] - f[y]).abs() / ((d / rd).powf(params.beta) * bound(x)));
        }
    }
    assert!((got.size - size).abs() <= 1e-12 * size);
    assert!((got.regularity - reg).abs() <= 1e-12 * reg);
    assert_eq!(got.norm, got.size.max(got.regularity));
    assert!((got.norm - size.max(reg)).abs() <= 1e-12 * size.max(reg));

    let bad = TestSpaceParams { beta: 1.5, ..params };
    assert!(test_norm(&s, &f, &bad).is_err());
}

#[test]
fn holder_norm_of_the_coordinate() {
    let s = FinitePointSpace::<f64>::uniform_grid(17).unwrap();
    let f: Vec<f64> = (0..17).map(|i| i as f64 / 16.0).collect();
    let (sup, semi) = holder_norm(&s, &f, 1.0).unwrap();
    assert_eq!(sup, 1.0);
    assert!((semi - 1.0).abs() <= 1e-12);
    let (_, zero) = holder_norm(&s, &vec![2.0; 17], 0.5).unwrap();
    assert_eq!(zero, 0.0);
}

#[test]
fn bump_profile() {
    let s = FinitePointSpace::<f64>::uniform_grid(21).unwrap();
    let b = make_bump(&s, 10, 0.1).unwrap().0;
    for x in 0..21 {
        let d = s.d(10, x);
        if d < 0.1 - 1e-12 {
            assert_eq!(b[x], 1.0);
        }
        if d > 0.2 + 1e-12 {
            assert_eq!(b[x], 0.0);
        }
        assert!((0.0..=1.0).contains(&b[x]));
    }
}

#[test]
fn smoothed_family_identities_and_decay() {
    let s = FinitePointSpace::<f64>::uniform_grid(32).unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let w = s.weights();
    for mode in [Mode::Homogeneous, Mode::Inhomogeneous] {
        let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), mode).unwrap();
        assert!(fam.warnings.is_empty());
        let (sum_v, canc_v) = fam.invariant_violations(w);
        assert!(sum_v <= 1e-10 && canc_v <= 1e-10, "{sum_v} {canc_v}");
        let table = ProductTable::new(&fam, w);
        let r1 = operator_norm_l2(&split_identity_with(&fam, &table, w, 1).unwrap().r, w).value;
        let r3 = operator_norm_l2(&split_identity_with(&fam, &table, w, 3).unwrap().r, w).value;
        assert!(r3 < r1, "{r3} {r1}");
        for nw in 0..4 {
            let sp = split_identity_with(&fam, &table, w, nw).unwrap();
            assert!(sp.t.add(&sp.r).max_abs_diff(&fam.identity_target(w)) <= 1e-10);
        }
    }
}

#[test]
fn neumann_certificate_arithmetic() {
    assert_eq!(terms_needed(0.5, 1e-6), 20);
    assert_eq!(terms_needed(0.0, 1e-6), 0);
    let w = vec![1.0; 4];
    let id = Kernel::identity(&w);
    let half = id.scale(0.5);
    let t = id.sub(&half);
    let inv = neumann_invert(&half, &t, &id, &w, 1e-12).unwrap();
    assert!(inv.inverse.max_abs_diff(&id.scale(2.0)) <= 1e-11);
    assert!(inv.certificate.sound);
    assert!(inv.certificate.residual <= 2.0 * inv.certificate.tail_bound + inv.certificate.rounding_floor);
    let t0 = id.sub(&id);
    assert!(neumann_invert(&id, &t0, &id, &w, 1e-6).is_err());
}

#[test]
fn left_and_right_duals_synthesize_the_same_operator() {
    let s = FinitePointSpace::<f64>::grid_with(32, (0..32).map(|i| 1.0 + 0.5 * (i % 2) as f64).collect(), 1.0, 1.0)
        .unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let w = s.weights();
    let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
    let probes = ProbeSet::build(&s, &sys, Mode::Homogeneous, &ProbeParams::default());
    let split = split_identity(&fam, w, 3).unwrap();
    let (l, lr) = homogeneous_crf(&s, &fam, &split, 1e-10, ContinuousVariant::Left, &probes).unwrap();
    let (r, rr) = homogeneous_crf(&s, &fam, &split, 1e-10, ContinuousVariant::Right, &probes).unwrap();
    assert!(l.synthesis.max_abs_diff(&r.synthesis) <= 1e-8);
    for rep in [lr, rr] {
        assert!(
            rep.reconstruction.max_l2() <= 1e-8,
            "{:?}",
            rep.reconstruction.max_relative
        );
        assert!(rep.certificate.sound);
        assert_eq!(rep.reconstruction.bound_holds, Some(true));
        assert!(rep.audits[0].exact_passed());
    }
}

#[test]
fn single_atom_subcubes_make_variant_two_match_variant_zero() {
    // at j0 past the finest level every subcube is one point, so
    // μ(C)·A(x, y_C) is the integral of A over C
    let s = FinitePointSpace::<f64>::grid_with(16, (0..16).map(|i| 1.0 + 0.3 * (i % 4) as f64).collect(), 1.0, 1.0)
        .unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let w = s.weights();
    let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
    let split = split_identity(&fam, w, 1).unwrap();
    let j0 = (sys.k_max() - sys.k_min() + 3) as u32;
    let zero = discrete_split_with(
        &s,
        &sys,
        &fam,
        &split,
        j0,
        calderon_core::dyadic::Sampler::Center,
        Variant::Zero,
        Side::Primal,
        false,
    )
    .unwrap();
    let two = discrete_split_with(
        &s,
        &sys,
        &fam,
        &split,
        j0,
        calderon_core::dyadic::Sampler::Center,
        Variant::Two,
        Side::Primal,
        false,
    )
    .unwrap();
    assert!(zero.s.max_abs_diff(&two.s) <= 1e-13);
    assert!(zero.g.max_abs() <= 1e-13);
    assert!(zero.s.max_abs_diff(&split.t) <= 1e-12);
}

#[test]
fn haar_and_smoothed_agree_on_the_mean_free_identity() {
    let s = FinitePointSpace::<f64>::uniform_grid(16).unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let a = build_haar_family(&s, &sys, Mode::Homogeneous).sum();
    let b = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous)
        .unwrap()
        .sum();
    assert!(a.max_abs_diff(&b) <= 1e-10);
}
