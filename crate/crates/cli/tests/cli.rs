use std::path::{Path, PathBuf};
use std::process::Command;

use calderon_lab::emit::{plot_csv, render};
use calderon_lab::{run_experiment, run_with_threads, AutoOr, ExperimentConfig, FamilySpec, StageStatus};
use rand::{Rng, SeedableRng};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calderon-lab"))
}

fn small_config(family: FamilySpec) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(configs().join("spaces/grid8.json"), family);
    cfg.name = "small".into();
    cfg.k_range = AutoOr::Fixed((0, 3));
    cfg
}

#[test]
fn missing_space_file_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg_path,
        r#"{"name": "x", "space": "nowhere.json", "family": {"constructor": "haar"}}"#,
    )
    .unwrap();
    let st = bin()
        .args(["run", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(!out.exists());

    let cfg = small_config(FamilySpec::Haar);
    let mut bad = cfg.clone();
    bad.space = dir.path().join("missing.json");
    let err = run_experiment(&bad, &out).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn malformed_configs_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"space": "s.json", "family": {"constructor": "haar"}, "bogus": 1}"#,
        r#"{"space": "s.json", "family": {"constructor": "haar"}, "n_window": "sometimes"}"#,
        r#"{"space": "s.json", "family": {"constructor": "haar"}, "tolerances": {"identity": 0, "neumann": 1e-10, "reconstruction": 1e-6}}"#,
        r#"{"space": "s.json", "family": {"constructor": "haar"}, "k_range": [3, 1]}"#,
        r#"{"space": "s.json", "family": {"constructor": "haar"}, "decay": [{"quantity": "RN_l2", "sweep": []}]}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.json"));
        std::fs::write(&p, text).unwrap();
        assert!(ExperimentConfig::load(&p).is_err(), "case {i}");
    }
    let p = dir.path().join("ok.json");
    std::fs::write(
        &p,
        r#"{"space": "s.json", "family": {"constructor": "smoothed", "nu": 2}, "n_window": 3, "j0": "auto"}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&p).unwrap();
    assert_eq!(cfg.n_window, AutoOr::Fixed(3));
    assert_eq!(cfg.j0, AutoOr::Auto);
    assert_eq!(cfg.space, dir.path().join("s.json"));
    assert_eq!(cfg.family.smoothed_params().unwrap().nu, 2.0);
    // the echo round-trips
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn reruns_produce_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs().join("haar-oracle.json")).unwrap();
    let a = run_with_threads(Some(1), || run_experiment(&cfg, &dir.path().join("a")))
        .unwrap()
        .unwrap();
    let b = run_with_threads(Some(3), || run_experiment(&cfg, &dir.path().join("b")))
        .unwrap()
        .unwrap();
    assert_eq!(a.manifest, b.manifest);
    assert_eq!(a.exit_code, 0);
    let on_disk = std::fs::read(dir.path().join("a/report.json")).unwrap();
    assert_eq!(
        calderon_lab::emit::sha256_hex(&on_disk),
        a.manifest.hash_of("report.json").unwrap()
    );
    assert!(a.manifest.hash_of("timings.json").is_none());
}

#[test]
fn rendering_round_trips_exactly() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut values = vec![
        0.0,
        -0.0,
        1.0,
        0.1,
        f64::MIN_POSITIVE,
        f64::MAX,
        f64::EPSILON,
        5e-324,
        std::f64::consts::PI,
    ];
    values.extend((0..2000).map(|_| f64::from_bits(rng.gen::<u64>() & !(0x7ffu64 << 52) | (rng.gen_range(1..2046u64) << 52))));
    for v in values {
        let back: f64 = render(v).parse().unwrap();
        assert_eq!(back.to_bits(), v.to_bits(), "{v:e} rendered as {}", render(v));
    }
}

#[test]
fn plot_csv_parses_back_to_report_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(&configs().join("smoothed-32.json")).unwrap();
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, 0);
    assert_eq!(out.report.decay.len(), 4);
    for (i, t) in out.report.decay.iter().enumerate() {
        let name = calderon_lab::emit::plot_file_name(i, t);
        let text = std::fs::read_to_string(dir.path().join(&name)).unwrap();
        assert_eq!(text, plot_csv(t));
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(header, vec![t.parameter.clone(), t.quantity.clone(), "fit".into()]);
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), t.values.len());
        for (row, &(p, v)) in rows.iter().zip(&t.values) {
            assert_eq!(row[0].parse::<u32>().unwrap(), p);
            let parsed: f64 = row[1].parse().unwrap();
            // within one ulp, and in practice identical
            assert!(parsed.to_bits().abs_diff(v.to_bits()) <= 1);
            assert_eq!(parsed, v);
            let fit: f64 = row[2].parse().unwrap();
            let want = t.scale.unwrap() * t.ratio.unwrap().powi(p as i32);
            assert_eq!(fit, want);
        }
        assert!(out.manifest.hash_of(&name).is_some());
    }
}

#[test]
fn empty_decay_section_writes_no_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(FamilySpec::Haar);
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, 0);
    let csvs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("decay_"))
        .collect();
    assert!(csvs.is_empty());
    assert!(out.manifest.notes.iter().any(|n| n.contains("no decay tables")));
    let decay = out.report.stages.iter().find(|s| s.name == "decay").unwrap();
    assert_eq!(decay.status, StageStatus::Skipped);
    assert!(decay.reason.is_some());
}

#[test]
fn stage_failure_leaves_a_partial_report() {
    // δ = 1/2 breaks the strict geometric hypotheses
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(FamilySpec::Haar);
    cfg.strict_geometry = true;
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, 1);
    assert!(!out.report.passed);
    let failed = out.report.failed_stage().unwrap();
    assert_eq!(failed.name, "dyadic");
    assert!(failed.reason.as_ref().unwrap().contains("strict"));
    assert!(out.report.space.is_some());
    assert!(out.report.families.is_empty());
    assert_eq!(out.report.stages.last().unwrap().status, StageStatus::Skipped);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn gating_failure_exits_1() {
    // smoothed formulae reconstruct to about 1e-11, short of a 1e-14 target
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(
        configs().join("spaces/grid32.json"),
        FamilySpec::Smoothed {
            nu: 1.0,
            a: 1.0,
            gamma: 1.0,
        },
    );
    cfg.modes = vec![calderon_core::family::Mode::Homogeneous];
    cfg.formulae = vec![calderon_lab::Formula::ContinuousLeft];
    cfg.family_audits = false;
    cfg.tolerances.reconstruction = 1e-14;
    let out = run_experiment(&cfg, &dir.path().join("diag")).unwrap();
    assert_eq!(out.exit_code, 0, "reconstruction is diagnostic by default");
    assert!(out.report.gates.iter().any(|g| !g.passed && !g.gating));
    cfg.gate_reconstruction = true;
    let out = run_experiment(&cfg, &dir.path().join("gate")).unwrap();
    assert_eq!(out.exit_code, 1);
    assert!(out.report.gating_failures().next().is_some());
    assert!(out.report.failed_stage().is_none());
}

#[test]
fn divergent_remainder_halts_the_run() {
    // Haar with N = 1 and j0 = 1: sampling Q_k^1 on level-(k+1) cubes leaves
    // a remainder of norm 1 in variant 1, which no Neumann series inverts
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(FamilySpec::Haar);
    cfg.modes = vec![calderon_core::family::Mode::Homogeneous];
    cfg.n_window = AutoOr::Fixed(1);
    cfg.j0 = AutoOr::Fixed(1);
    let out = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(out.exit_code, 1);
    assert_eq!(out.report.failed_stage().unwrap().name, "formulae_homogeneous");
}

#[test]
fn subcommands_round_trip_a_saved_family() {
    let dir = tempfile::tempdir().unwrap();
    let space = configs().join("spaces/grid8.json");
    let fam_dir = dir.path().join("fam");
    let st = bin()
        .args(["family", "build", space.to_str().unwrap(), "--constructor", "haar"])
        .args(["--k-min", "0", "--k-max", "3", "--mode", "inhomogeneous"])
        .args(["--out", fam_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(fam_dir.join("manifest.json").exists());

    let st = bin()
        .args(["family", "audit", fam_dir.to_str().unwrap(), "--space", space.to_str().unwrap()])
        .args(["--k-min", "0", "--k-max", "3"])
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert!(reports.as_array().is_some_and(|a| !a.is_empty()));

    let mut cfg = small_config(FamilySpec::Loaded {
        homogeneous: None,
        inhomogeneous: Some(fam_dir.clone()),
    });
    cfg.modes = vec![calderon_core::family::Mode::Inhomogeneous];
    cfg.n_window = AutoOr::Fixed(0);
    cfg.j0 = AutoOr::Fixed(1);
    let out = run_experiment(&cfg, &dir.path().join("run")).unwrap();
    assert_eq!(out.exit_code, 0);
    assert!(out.report.formulae.iter().all(|f| f.reconstruction.max_l2() <= 1e-12));

    // a loaded family must match the requested mode
    cfg.modes = vec![calderon_core::family::Mode::Homogeneous];
    cfg.family = FamilySpec::Loaded {
        homogeneous: Some(fam_dir),
        inhomogeneous: None,
    };
    let err = run_experiment(&cfg, &dir.path().join("bad")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn space_and_dyadic_subcommands() {
    let space = configs().join("spaces/grid8.json");
    let st = bin().args(["space", "audit", space.to_str().unwrap()]).output().unwrap();
    assert!(st.status.success());
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert_eq!(v["n"], 8);
    assert_eq!(v["quasi_metric"]["holds"], true);

    let st = bin()
        .args(["dyadic", "build", space.to_str().unwrap(), "--k-min", "0", "--k-max", "3"])
        .output()
        .unwrap();
    assert!(st.status.success());
    let v: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
    assert!(v.is_object());

    let st = bin()
        .args(["dyadic", "build", space.to_str().unwrap(), "--strict-geometry"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));

    let st = bin().args(["space", "audit", "/nonexistent/space.json"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn calderon_and_study_subcommands_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let space = configs().join("spaces/grid32.json");
    let out = dir.path().join("disc");
    let st = bin()
        .args(["calderon", "discrete", space.to_str().unwrap(), "--n", "1", "--sampler", "worst-case"])
        .args(["--out", out.to_str().unwrap(), "--threads", "2", "--seed", "4"])
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"]["probes"], 4);
    assert!(report["discrete"].as_array().unwrap().iter().all(|d| d["n_window"] == 1));

    let out = dir.path().join("study");
    let st = bin()
        .args(["study", "decay", space.to_str().unwrap(), "--quantity", "RN_l2", "--sweep", "0,1,2"])
        .args(["--out", out.to_str().unwrap()])
        .env("CALDERON_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stdout));
    let text = std::fs::read_to_string(out.join("decay_00_RN_l2.csv")).unwrap();
    assert!(text.starts_with("N,RN_l2,fit\n"));
    assert_eq!(text.lines().count(), 4);
}
