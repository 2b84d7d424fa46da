use calderon_core::dyadic::{build_dyadic, build_nets, NetParams, Sampler};
use calderon_core::engine::*;
use calderon_core::family::{
    build_haar_family, build_smoothed_family, compose_and_audit, composition_decay, verify_ati, verify_exp_ati,
    AtiAuditParams, ExpAtiAuditParams, Mode, SmoothedParams,
};
use calderon_core::sampling::AuditBudget;
use calderon_core::space::FinitePointSpace;
use calderon_core::testspace::{verify_cz_kernel, CZKernelParams};
use proptest::prelude::*;

fn weighted(w: Vec<f64>) -> FinitePointSpace<f64> {
    let n = w.len();
    FinitePointSpace::grid_with(n, w, 1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn haar_identities_hold_for_any_weights(w in prop::collection::vec(0.1f64..10.0, 2..14)) {
        let s = weighted(w);
        let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
        let ws = s.weights();
        for mode in [Mode::Homogeneous, Mode::Inhomogeneous] {
            let fam = build_haar_family(&s, &sys, mode);
            let (a, b) = fam.invariant_violations(ws);
            prop_assert!(a <= 1e-10 && b <= 1e-10);
            let split = split_identity(&fam, ws, 0).unwrap();
            prop_assert!(split.r.max_abs() <= 1e-10);
            let ds = discrete_split_with(&s, &sys, &fam, &split, 1, Sampler::Random { seed: 3 }, Variant::Two, Side::Dual, false).unwrap();
            prop_assert!(ds.g.max_abs() <= 1e-10);
        }
    }

    #[test]
    fn smoothed_splits_sum_to_identity(w in prop::collection::vec(0.2f64..5.0, 4..14), nw in 0u32..3, j0 in 0u32..3) {
        let s = weighted(w);
        let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
        let ws = s.weights();
        let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
        let split = split_identity(&fam, ws, nw).unwrap();
        prop_assert!(split.identity_violation <= 1e-10);
        for v in Variant::ALL {
            let ds = discrete_split_with(&s, &sys, &fam, &split, j0, Sampler::WorstCase, v, Side::Primal, false).unwrap();
            prop_assert!(ds.identity_violation <= 1e-10);
        }
    }

    #[test]
    fn maximal_operator_bounds(f in prop::collection::vec(-3.0f64..3.0, 9)) {
        let s = FinitePointSpace::<f64>::uniform_grid(9).unwrap();
        let m = s.maximal_operator(&f).0;
        let sup = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for x in 0..9 {
            prop_assert!(m[x] >= f[x].abs() - 1e-15);
            prop_assert!(m[x] <= sup + 1e-15);
        }
    }

    #[test]
    fn doubling_is_scale_invariant(c in 0.01f64..100.0) {
        let s = weighted((0..12).map(|i| 1.0 + i as f64).collect());
        let t = s.with_weights(s.weights().iter().map(|w| w * c).collect()).unwrap();
        let a = s.doubling_audit(0, 1 << 12).c_mu_fit;
        let b = t.doubling_audit(0, 1 << 12).c_mu_fit;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn single_precision_pipeline() {
    let s = FinitePointSpace::<f32>::uniform_grid(16).unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let w = s.weights();
    let haar = build_haar_family(&s, &sys, Mode::Homogeneous);
    let (a, b) = haar.invariant_violations(w);
    assert!(a <= 1e-4 && b <= 1e-4);
    let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
    assert!(fam.warnings.is_empty(), "{:?}", fam.warnings);
    let split = split_identity(&fam, w, 3).unwrap();
    let probes = ProbeSet::build(&s, &sys, Mode::Homogeneous, &ProbeParams::default());
    let (_, rep) = homogeneous_crf(&s, &fam, &split, 1e-5, ContinuousVariant::Left, &probes).unwrap();
    assert!(
        rep.reconstruction.max_l2() <= 1e-4,
        "{:?}",
        rep.reconstruction.max_relative
    );
}

#[test]
fn family_audits_on_the_smoothed_family() {
    let s = FinitePointSpace::<f64>::uniform_grid(24).unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
    let ati = verify_ati(&fam, &s, &AtiAuditParams::default()).unwrap();
    assert!(ati.exact_passed());
    for c in &ati.conditions {
        if let Some(v) = c.c_fit() {
            assert!(v.is_finite(), "{}", c.name);
        }
    }
    let exp = verify_exp_ati(&fam, &s, &sys, &ExpAtiAuditParams::default()).unwrap();
    assert!(exp.exact_passed());

    let j = fam.first_index() + 1;
    let comp = compose_and_audit(&fam, j, &fam, j + 2, &s, &sys, 1.0, 0.5).unwrap();
    assert!(comp.kernel.is_finite());
    let decay = composition_decay(&fam, &fam, &s, &sys, 1.0, 3).unwrap();
    assert_eq!(decay.offsets, vec![0, 1, 2, 3]);
    // compositions of far-apart levels are smaller
    assert!(decay.max_abs[3] < decay.max_abs[0]);

    let haar = build_haar_family(&s, &sys, Mode::Homogeneous);
    assert!(verify_ati(&haar, &s, &AtiAuditParams::default())
        .unwrap()
        .exact_passed());
}

#[test]
fn cz_audit_of_the_remainder() {
    let s = FinitePointSpace::<f64>::uniform_grid(20).unwrap();
    let sys = build_dyadic(&s, build_nets(&s, &NetParams::default()).unwrap(), false).unwrap();
    let fam = build_smoothed_family(&s, &sys, SmoothedParams::default(), Mode::Homogeneous).unwrap();
    let r = split_identity(&fam, s.weights(), 1).unwrap().r;
    let audit = verify_cz_kernel(&s, &r, &CZKernelParams::default(), &AuditBudget::default()).unwrap();
    assert!(audit.c_t() > 0.0 && audit.c_t().is_finite());
    // cancellation in the mean-free mode: row integrals vanish
    assert!(audit.c0.abs() <= 1e-10);
}
