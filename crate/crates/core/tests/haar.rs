//! The Haar family is built from orthogonal projections, so every remainder
//! vanishes and every formula must reproduce its input to rounding.

use calderon_core::dyadic::{build_dyadic, build_nets, DyadicSystem, NetParams, Sampler};
use calderon_core::engine::*;
use calderon_core::family::{build_haar_family, Mode, OperatorFamily};
use calderon_core::space::FinitePointSpace;
use calderon_core::Kernel;

struct Setup {
    space: FinitePointSpace<f64>,
    sys: DyadicSystem<f64>,
}

fn setup(n: usize) -> Setup {
    let w: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * (i % 3) as f64).collect();
    let space = FinitePointSpace::grid_with(n, w, 1.0, 1.0).unwrap();
    let sys = build_dyadic(&space, build_nets(&space, &NetParams::default()).unwrap(), false).unwrap();
    Setup { space, sys }
}

const SAMPLERS: [Sampler; 3] = [Sampler::Center, Sampler::Random { seed: 17 }, Sampler::WorstCase];

fn haar(s: &Setup, mode: Mode) -> OperatorFamily<f64> {
    build_haar_family(&s.space, &s.sys, mode)
}

#[test]
fn projections_are_orthogonal_and_idempotent() {
    let s = setup(32);
    let w = s.space.weights();
    for mode in [Mode::Homogeneous, Mode::Inhomogeneous] {
        let fam = haar(&s, mode);
        for j in fam.indices() {
            let qj = fam.q(j).unwrap();
            assert!(qj.compose(qj, w).max_abs_diff(qj) <= 1e-12, "Q_{j}^2");
            for k in fam.indices().filter(|&k| k != j) {
                assert!(qj.compose(fam.q(k).unwrap(), w).max_abs() <= 1e-12, "Q_{j} Q_{k}");
            }
        }
        assert!(fam.sum().max_abs_diff(&fam.identity_target(w)) <= 1e-12);
    }
}

#[test]
fn remainders_vanish() {
    let s = setup(32);
    let w = s.space.weights();
    for mode in [Mode::Homogeneous, Mode::Inhomogeneous] {
        let fam = haar(&s, mode);
        let table = ProductTable::new(&fam, w);
        for nw in 0..=4 {
            let split = split_identity_with(&fam, &table, w, nw).unwrap();
            assert!(split.r.max_abs() <= 1e-12, "R_{nw}");
            for j0 in 1..=3 {
                for sampler in SAMPLERS {
                    let ds = discrete_split_with(
                        &s.space,
                        &s.sys,
                        &fam,
                        &split,
                        j0,
                        sampler,
                        Variant::Zero,
                        Side::Primal,
                        false,
                    )
                    .unwrap();
                    assert_eq!(ds.g.max_abs(), 0.0, "G at N={nw} j0={j0}");
                }
            }
        }
    }
}

#[test]
fn haar_decay_table_is_degenerate() {
    let s = setup(16);
    let fam = haar(&s, Mode::Homogeneous);
    let table = ProductTable::new(&fam, s.space.weights());
    let t = decay_study(
        &s.space,
        &s.sys,
        &fam,
        &table,
        &DecayStudyParams::new(DecayQuantity::RnL2, vec![0, 1, 2, 3]),
    )
    .unwrap();
    assert!(t.values.iter().all(|v| v.1 <= ROUNDING_ZERO));
    assert!(t.ratio.is_none());
    assert!(!t.flags.is_empty());
}

fn assert_exact(rep: &FormulaReport) {
    assert!(
        rep.reconstruction.max_l2() <= 1e-12,
        "{} {:?}",
        rep.variant,
        rep.reconstruction.max_relative
    );
    assert_eq!(rep.certificate.j_star, 0);
    assert!(rep.certificate.sound);
}

#[test]
fn continuous_formulae_are_exact() {
    let s = setup(32);
    let w = s.space.weights();
    let fam = haar(&s, Mode::Homogeneous);
    let probes = ProbeSet::build(&s.space, &s.sys, Mode::Homogeneous, &ProbeParams::default());
    for nw in [0, 1, 3] {
        let split = split_identity(&fam, w, nw).unwrap();
        for v in [ContinuousVariant::Left, ContinuousVariant::Right] {
            let (dual, rep) = homogeneous_crf(&s.space, &fam, &split, 1e-10, v, &probes).unwrap();
            assert_exact(&rep);
            // T_N = I_mode, so the duals are the windowed sums themselves
            for (k, d) in &dual.levels {
                assert!(d.max_abs_diff(&fam.windowed(*k, nw)) <= 1e-12);
            }
        }
    }
}

#[test]
fn constant_probe_is_annihilated_in_homogeneous_mode() {
    let s = setup(16);
    let w = s.space.weights();
    let fam = haar(&s, Mode::Homogeneous);
    let split = split_identity(&fam, w, 1).unwrap();
    let mut probes = ProbeSet::build(&s.space, &s.sys, Mode::Homogeneous, &ProbeParams::default());
    probes.probes.truncate(0);
    probes.probes.push(Probe {
        name: "one".into(),
        f: vec![1.0; 16],
    });
    let (_, rep) = homogeneous_crf(&s.space, &fam, &split, 1e-10, ContinuousVariant::Left, &probes).unwrap();
    assert!(rep.reconstruction.probes[0].abs_l2 <= 1e-12);
}

fn recon_bits(rep: &FormulaReport) -> Vec<u64> {
    rep.reconstruction.probes.iter().map(|p| p.abs_l2.to_bits()).collect()
}

#[test]
fn discrete_formulae_are_exact_and_sampler_blind() {
    let s = setup(32);
    let w = s.space.weights();
    let fam = haar(&s, Mode::Homogeneous);
    let table = ProductTable::new(&fam, w);
    let probes = ProbeSet::build(&s.space, &s.sys, Mode::Homogeneous, &ProbeParams::default());
    // Sampling Q_k^N is only constant on subcubes once j0 exceeds the window
    for (nw, j0s) in [(0u32, vec![1u32, 2, 3]), (1, vec![2, 3])] {
        let split = split_identity_with(&fam, &table, w, nw).unwrap();
        for j0 in j0s {
            for variant in Variant::ALL {
                for side in [Side::Primal, Side::Dual] {
                    let run = discrete_crf(
                        &s.space, &s.sys, &fam, &split, j0, 1e-10, variant, side, &probes, 5, false,
                    )
                    .unwrap();
                    run.runs.iter().for_each(assert_exact);
                    assert!(run.g_norms.iter().all(|&g| g == 0.0));
                    let first = recon_bits(&run.runs[0]);
                    for r in &run.runs[1..] {
                        assert_eq!(recon_bits(r), first, "{variant:?} {side:?} N={nw} j0={j0}");
                    }
                }
            }
        }
    }
}

#[test]
fn sampled_windows_need_finer_subcubes() {
    // With N = 1 and j0 = 1 the sampled factor Q_k^1 contains Q_{k+1}, which
    // varies inside level-(k+1) cubes, so variant 1 picks up a remainder.
    let s = setup(32);
    let w = s.space.weights();
    let fam = haar(&s, Mode::Homogeneous);
    let split = split_identity(&fam, w, 1).unwrap();
    let zero = discrete_split_with(
        &s.space,
        &s.sys,
        &fam,
        &split,
        1,
        Sampler::Center,
        Variant::Zero,
        Side::Primal,
        false,
    )
    .unwrap();
    assert_eq!(zero.g.max_abs(), 0.0);
    let one = discrete_split_with(
        &s.space,
        &s.sys,
        &fam,
        &split,
        1,
        Sampler::WorstCase,
        Variant::One,
        Side::Primal,
        false,
    )
    .unwrap();
    assert!(one.g.max_abs() > 1e-6);
}

#[test]
fn inhomogeneous_formulae_reconstruct_constants() {
    let s = setup(32);
    let w = s.space.weights();
    let fam = haar(&s, Mode::Inhomogeneous);
    let probes = ProbeSet::build(&s.space, &s.sys, Mode::Inhomogeneous, &ProbeParams::default());
    assert!(probes.probes.iter().any(|p| p.f.iter().all(|&v| v == 1.0)));
    for nw in [0u32, 1] {
        let split = split_identity(&fam, w, nw).unwrap();
        assert!(split.t.max_abs_diff(&Kernel::identity(w)) <= 1e-12);
        for sampler in SAMPLERS {
            let run = inhomogeneous_crf(
                &s.space,
                &s.sys,
                &fam,
                &split,
                1e-10,
                Some((nw + 1, sampler)),
                &probes,
                false,
            )
            .unwrap();
            assert_exact(&run.continuous);
            assert_exact(run.discrete.as_ref().unwrap());
            assert!(run.four_part_violation.unwrap() <= 1e-12);
        }
    }
}

#[test]
fn eight_grid_oracle() {
    let space = FinitePointSpace::<f64>::uniform_grid(8).unwrap();
    let params = NetParams {
        k_range: Some((0, 3)),
        ..NetParams::default()
    };
    let sys = build_dyadic(&space, build_nets(&space, &params).unwrap(), false).unwrap();
    let fam = build_haar_family(&space, &sys, Mode::Homogeneous);
    let w = space.weights();
    // P_0 is the mean and P_3 the identity, so both boundary terms drop out
    assert_eq!(fam.len(), 3);
    assert!(sys.cubes(3).iter().all(|c| c.len() == 1));
    // Q_2 = P_3 - P_2 takes a function to its deviation from pair averages
    let q = fam.q(2).unwrap();
    let f: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let g = q.apply(&f, w);
    for pair in sys.cubes(2) {
        let mean = pair.iter().map(|&i| f[i]).sum::<f64>() / pair.len() as f64;
        for &i in pair {
            assert!((g[i] - (f[i] - mean)).abs() <= 1e-14);
        }
    }
}
