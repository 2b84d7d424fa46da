use calderon_core::dyadic::{build_dyadic, build_nets, DyadicSystem, NetParams, Sampler};
use calderon_core::sampling::AuditBudget;
use calderon_core::space::FinitePointSpace;
use calderon_core::Error;

fn grid(n: usize) -> FinitePointSpace<f64> {
    FinitePointSpace::uniform_grid(n).unwrap()
}

fn system(space: &FinitePointSpace<f64>, params: &NetParams) -> DyadicSystem<f64> {
    build_dyadic(space, build_nets(space, params).unwrap(), false).unwrap()
}

fn brute_ball(s: &FinitePointSpace<f64>, x: usize, r: f64) -> Vec<usize> {
    let mut v = Vec::new();
    for y in 0..s.n() {
        if s.d(x, y) < r {
            v.push(y);
        }
    }
    v
}

#[test]
fn balls_match_linear_scan() {
    let s = grid(16);
    for x in 0..16 {
        for r in [0.01, 0.05, 0.2, 0.5, 1.1] {
            assert_eq!(s.ball(x, r).unwrap(), brute_ball(&s, x, r));
            let vol: f64 = brute_ball(&s, x, r).iter().map(|&y| s.weight(y)).sum();
            assert_eq!(s.volume(x, r), vol);
        }
    }
    assert_eq!(s.ball(3, s.min_positive_distance() / 2.0).unwrap(), vec![3]);
    // strictness drops the nearest neighbour
    assert_eq!(s.v(3, 4), s.weight(3));
    assert!(matches!(s.ball(99, 0.1), Err(Error::UnknownPoint(_))));
    assert!(s.ball(0, 0.0).is_err());
}

#[test]
fn maximal_function_matches_enumeration() {
    let s = grid(16);
    for p in [0usize, 5, 15] {
        let mut f = vec![0.0; 16];
        f[p] = 1.0;
        let m = s.maximal_operator(&f).0;
        for x in 0..16 {
            let mut best = 0.0f64;
            for y in 0..16 {
                let r = s.d(x, y) + s.epsilon0();
                let b = brute_ball(&s, x, r);
                let num: f64 = b.iter().map(|&z| f[z].abs() * s.weight(z)).sum();
                let den: f64 = b.iter().map(|&z| s.weight(z)).sum();
                best = best.max(num / den);
            }
            assert!((m[x] - best).abs() <= 1e-15, "x={x} p={p}");
        }
    }
    let one = s.maximal_operator(&vec![1.0; 16]).0;
    assert!(one.iter().all(|&v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn maximal_function_is_sublinear() {
    let s = grid(24);
    let f: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let g: Vec<f64> = (0..24).map(|i| ((i * 3) % 4) as f64 * 0.5).collect();
    let mf = s.maximal_operator(&f).0;
    let mg = s.maximal_operator(&g).0;
    let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
    let msum = s.maximal_operator(&sum).0;
    let m3 = s.maximal_operator(&f.iter().map(|v| -3.0 * v).collect::<Vec<_>>()).0;
    for x in 0..24 {
        assert!(mf[x] >= f[x].abs() - 1e-15);
        assert!(msum[x] <= mf[x] + mg[x] + 1e-12);
        assert!((m3[x] - 3.0 * mf[x]).abs() <= 1e-12);
    }
}

#[test]
fn squared_distance_grid_has_quasi_triangle_constant_in_one_two() {
    // spacing 1/16 keeps every squared distance exact
    let s = FinitePointSpace::<f64>::grid_with(17, vec![1.0; 17], 2.0, 2.0).unwrap();
    let audit = s.quasi_metric_audit(0, 1 << 20);
    assert!(audit.census.exhaustive);
    let mut oracle = 0.0f64;
    for x in 0..17 {
        for y in 0..17 {
            for z in 0..17 {
                let den = s.d(x, y) + s.d(y, z);
                if den > 0.0 {
                    oracle = oracle.max(s.d(x, z) / den);
                }
            }
        }
    }
    assert!((audit.a0_fit - oracle).abs() <= 1e-12 * oracle);
    assert!(audit.a0_fit > 1.0 && audit.a0_fit <= 2.0);
    assert!(audit.holds && audit.symmetric);

    let e = grid(16).quasi_metric_audit(0, 1 << 20);
    assert!(e.a0_fit <= 1.0 + 1e-12);
    let one = grid(1).quasi_metric_audit(0, 10);
    assert_eq!(one.a0_fit, 1.0);
}

#[test]
fn doubling_audit_on_grids() {
    let s = grid(64);
    let a = s.doubling_audit(0, 1 << 20);
    assert!(a.census.exhaustive);
    assert!((0.5..=1.5).contains(&a.omega_fit), "omega {}", a.omega_fit);
    assert!((a.omega_fit - a.c_mu_fit.log2()).abs() < 1e-15);

    let scaled = s.with_weights(vec![3.5; 64]).unwrap().doubling_audit(0, 1 << 20);
    assert!((scaled.c_mu_fit - a.c_mu_fit).abs() <= 1e-12 * a.c_mu_fit);

    let one = grid(1).doubling_audit(0, 10);
    assert_eq!(one.c_mu_fit, 1.0);
    assert_eq!(one.omega_fit, 0.0);

    let w: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
    let heavy = FinitePointSpace::<f64>::grid_with(8, w, 1.0, 1.0).unwrap();
    assert!(heavy.doubling_audit(0, 1 << 10).c_mu_fit > 2.0);
}

#[test]
fn explicit_metric_validation() {
    let ids: Vec<String> = (0..3).map(|i| format!("p{i}")).collect();
    let ok = vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
    assert!(FinitePointSpace::<f64>::from_matrix(ids.clone(), ok.clone(), vec![1.0; 3], 1.0).is_ok());
    let mut zero = ok.clone();
    zero[1] = 0.0;
    zero[3] = 0.0;
    assert!(matches!(
        FinitePointSpace::<f64>::from_matrix(ids.clone(), zero, vec![1.0; 3], 1.0),
        Err(Error::ZeroDistance { .. })
    ));
    let mut asym = ok.clone();
    asym[2] = 3.0;
    assert!(matches!(
        FinitePointSpace::<f64>::from_matrix(ids.clone(), asym, vec![1.0; 3], 1.0),
        Err(Error::AsymmetricMetric { .. })
    ));
    assert!(matches!(
        FinitePointSpace::<f64>::from_matrix(ids, ok, vec![1.0, 0.0, 1.0], 1.0),
        Err(Error::NonPositiveWeight { .. })
    ));
}

#[test]
fn lp_norm_against_two_pass_sum() {
    let s = FinitePointSpace::<f64>::grid_with(40, (0..40).map(|i| 0.5 + (i % 3) as f64).collect(), 1.0, 1.0).unwrap();
    let f: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let sq: Vec<f64> = f.iter().zip(s.weights()).map(|(v, w)| v * v * w).collect();
    let mut hi = 0.0f64;
    let mut lo = 0.0f64;
    for v in sq {
        let t = hi + v;
        lo += if hi.abs() >= v.abs() {
            (hi - t) + v
        } else {
            (v - t) + hi
        };
        hi = t;
    }
    let oracle = (hi + lo).sqrt();
    assert!((s.lp_norm(&f, 2.0) - oracle).abs() <= 1e-12 * oracle);
    let total: f64 = s.weights().iter().sum();
    for p in [1.0, 2.0, 4.0] {
        assert!((s.lp_norm(&vec![1.0; 40], p) - total.powf(1.0 / p)).abs() < 1e-12);
        assert_eq!(s.lp_norm(&vec![0.0; 40], p), 0.0);
    }
    assert_eq!(s.lp_norm(&f, f64::INFINITY), 5.0 / 3.0);
}

fn check_dyadic_exhaustively(s: &FinitePointSpace<f64>, sys: &DyadicSystem<f64>) {
    let n = s.n();
    let total: f64 = s.weights().iter().sum();
    for k in sys.padded_levels() {
        let mut seen = vec![0usize; n];
        let mut mass = 0.0;
        for (alpha, cube) in sys.cubes(k).iter().enumerate() {
            assert!(!cube.is_empty());
            for &x in cube {
                seen[x] += 1;
                assert_eq!(sys.cube_of(k, x), alpha);
            }
            mass += sys.cube_measure(k, alpha);
        }
        assert!(seen.iter().all(|&c| c == 1), "partition at level {k}");
        assert!((mass - total).abs() <= 1e-12 * total);
        // every finer cube sits in exactly one cube at this level
        if k < sys.k_max() + 1 {
            for cube in sys.cubes(k + 1) {
                let parent = sys.cube_of(k, cube[0]);
                assert!(cube.iter().all(|&x| sys.cube_of(k, x) == parent));
            }
        }
        // ball sandwich with the realized constants
        let c_in = sys.inner_constant() * sys.scale(k);
        let c_out = sys.outer_constant() * sys.scale(k);
        for (alpha, cube) in sys.cubes(k).iter().enumerate() {
            let z = sys.center(k, alpha);
            for x in brute_ball(s, z, c_in) {
                assert_eq!(sys.cube_of(k, x), alpha, "inner ball at level {k}");
            }
            for &x in cube {
                assert!(s.d(z, x) < c_out, "outer ball at level {k}");
            }
        }
    }
    let r = sys.report();
    assert!(r.partition_ok && r.nesting_ok && r.sandwich_ok);
}

#[test]
fn dyadic_invariants_on_eight_and_sixty_four_grids() {
    let strict = NetParams {
        delta: 1.0 / 12.0,
        strict: true,
        ..NetParams::default()
    };
    for n in [8usize, 64] {
        let s = grid(n);
        let sys = build_dyadic(&s, build_nets(&s, &strict).unwrap(), true).unwrap();
        check_dyadic_exhaustively(&s, &sys);
    }
    check_dyadic_exhaustively(&grid(8), &system(&grid(8), &NetParams::default()));
    let quarter = NetParams {
        delta: 0.25,
        ..NetParams::default()
    };
    check_dyadic_exhaustively(&grid(64), &system(&grid(64), &quarter));
}

#[test]
fn loose_delta_records_a_sandwich_witness() {
    // δ = 1/2 is outside the hypothesis 12 A0³ C0 δ ≤ c0; partition and
    // nesting survive but the inner ball can leak on the 64-grid.
    let s = grid(64);
    let r = system(&s, &NetParams::default()).report().clone();
    assert!(r.partition_ok && r.nesting_ok);
    if !r.sandwich_ok {
        assert!(r.sandwich_witness.is_some());
        assert!(r.inner_radius_fit < 1.0 / 3.0);
    }
}

#[test]
fn eight_grid_net_counts() {
    let s = grid(8);
    let params = NetParams {
        k_range: Some((0, 3)),
        ..NetParams::default()
    };
    let sys = system(&s, &params);
    let counts: Vec<usize> = (0..=3).map(|k| sys.cube_count(k)).collect();
    assert_eq!(counts, vec![1, 2, 4, 8]);
    for k in 0..3 {
        let ys = sys.new_centers(k);
        for x in 0..8 {
            let scan = ys.iter().map(|&y| s.d(x, y)).fold(f64::INFINITY, f64::min);
            assert_eq!(sys.dist_to_new_centers(x, k), scan);
        }
        for &y in ys {
            assert_eq!(sys.dist_to_new_centers(y, k), 0.0);
        }
    }
    assert!(sys.new_centers(3).is_empty());
    assert!(sys.dist_to_new_centers(0, 3).is_infinite());
}

#[test]
fn strict_mode_rejects_loose_constants() {
    let s = grid(8);
    let params = NetParams {
        strict: true,
        ..NetParams::default()
    };
    assert!(matches!(build_nets(&s, &params), Err(Error::StrictGeometry(_))));
}

#[test]
fn single_point_system() {
    let s = grid(1);
    let sys = system(&s, &NetParams::default());
    for k in sys.padded_levels() {
        assert_eq!(sys.cube_count(k), 1);
        assert!(sys.new_centers(k).is_empty());
    }
}

#[test]
fn refinement_recovers_cubes() {
    let s = grid(8);
    let params = NetParams {
        k_range: Some((0, 3)),
        ..NetParams::default()
    };
    let sys = system(&s, &params);
    for sampler in [Sampler::Center, Sampler::Random { seed: 9 }, Sampler::WorstCase] {
        let refined = sys.refine_subcubes(&s, 0, 2, sampler, false).unwrap();
        assert_eq!(refined.cubes.len(), 1);
        assert_eq!(refined.cubes[0].subcubes.len(), 4);
        let mut all: Vec<usize> = refined.cubes[0]
            .subcubes
            .iter()
            .flat_map(|q| q.members.clone())
            .collect();
        all.sort();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        for q in &refined.cubes[0].subcubes {
            assert!(q.members.contains(&q.sample));
        }
        let trivial = sys.refine_subcubes(&s, 1, 0, sampler, false).unwrap();
        for (c, cube) in trivial.cubes.iter().zip(sys.cubes(1)) {
            assert_eq!(c.subcubes.len(), 1);
            assert_eq!(&c.subcubes[0].members, cube);
        }
    }
}

/// Independent evaluation of both exponential sums from the nets alone.
fn expsum_oracle(s: &FinitePointSpace<f64>, sys: &DyadicSystem<f64>, a: f64, c: f64) -> (f64, f64) {
    let n = s.n();
    let delta = sys.delta();
    let levels: Vec<i32> = (sys.k_min() - 1..=sys.k_max()).collect();
    let vol = |x: usize, r: f64| -> f64 { (0..n).filter(|&y| s.d(x, y) < r).map(|y| s.weight(y)).sum() };
    let term = |x: usize, k: i32| -> f64 {
        let now = sys.centers_at(k);
        let ys: Vec<usize> = sys
            .centers_at(k + 1)
            .iter()
            .copied()
            .filter(|y| !now.contains(y))
            .collect();
        if ys.is_empty() {
            return 0.0;
        }
        let sc = delta.powi(k);
        let dy = ys.iter().map(|&y| s.d(x, y)).fold(f64::INFINITY, f64::min);
        (-c * (dy / sc).powf(a)).exp() / vol(x, sc)
    };
    let eps = s.min_positive_distance() / 2.0;
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let r = s.d(x, y) + eps;
            let s1: f64 = levels
                .iter()
                .filter(|&&k| delta.powi(k) >= r)
                .map(|&k| term(x, k))
                .sum();
            c1 = c1.max(s1 * vol(x, r));
            if x != y {
                let d = s.d(x, y);
                let s2: f64 = levels
                    .iter()
                    .map(|&k| term(x, k) * (-c * (d / delta.powi(k)).powf(a)).exp())
                    .sum();
                c2 = c2.max(s2 * vol(x, d));
            }
        }
    }
    (c1, c2)
}

#[test]
fn expsum_matches_enumeration() {
    let s = grid(64);
    let sys = system(&s, &NetParams::default());
    for (a, c) in [(1.0, 1.0), (0.5, 2.0)] {
        let rep = sys.verify_expsum(&s, a, c, &AuditBudget::default());
        let (o1, o2) = expsum_oracle(&s, &sys, a, c);
        assert!((rep.c1_fit - o1).abs() <= 1e-12 * o1, "{} vs {}", rep.c1_fit, o1);
        assert!((rep.c2_fit - o2).abs() <= 1e-12 * o2, "{} vs {}", rep.c2_fit, o2);
        assert!(rep.c1_fit.is_finite() && rep.c2_fit.is_finite());
        let ten = sys.verify_expsum(&s, a, 10.0 * c, &AuditBudget::default());
        assert!(ten.c1_fit <= rep.c1_fit && ten.c2_fit <= rep.c2_fit);
    }
}

#[test]
fn permuted_points_give_the_same_partition() {
    let s = FinitePointSpace::<f64>::grid_with(20, (0..20).map(|i| 1.0 + (i % 4) as f64).collect(), 1.0, 1.0).unwrap();
    let perm: Vec<usize> = (0..20).map(|i| (i * 7 + 3) % 20).collect();
    let p = s.permuted(&perm).unwrap();
    let a = system(&s, &NetParams::default());
    let b = system(&p, &NetParams::default());
    let ids = |sp: &FinitePointSpace<f64>, set: &[usize]| -> Vec<String> {
        let mut v: Vec<String> = set.iter().map(|&i| sp.point_ids()[i].clone()).collect();
        v.sort();
        v
    };
    for k in a.padded_levels() {
        let mut ca: Vec<Vec<String>> = a.cubes(k).iter().map(|c| ids(&s, c)).collect();
        let mut cb: Vec<Vec<String>> = b.cubes(k).iter().map(|c| ids(&p, c)).collect();
        ca.sort();
        cb.sort();
        assert_eq!(ca, cb, "level {k}");
    }
    let ea = s.geometry_equivalence_audit(0, 1_000_000);
    let eb = p.geometry_equivalence_audit(0, 1_000_000);
    for (x, y) in ea.conditions.iter().zip(&eb.conditions) {
        let (u, v) = (x.c_fit().unwrap_or(0.0), y.c_fit().unwrap_or(0.0));
        assert!(
            (u - v).abs() <= 1e-12 * u.max(1.0),
            "{} {u} {v} {:?} {:?}",
            x.name,
            x.outcome,
            y.outcome
        );
    }
}
