//! Staged experiment runs.
//!
//! Stages run in order: space, dyadic, one family/audit/split/formulae block
//! per mode, then decay studies. A stage error halts the run; everything
//! recorded so far is still written out.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use calderon_core::dyadic::{build_dyadic, build_nets, DyadicReport, DyadicSystem, ExpSumReport, Sampler};
use calderon_core::engine::{
    choose_discrete, choose_inhomogeneous, choose_n, decay_study, discrete_crf, discrete_split_with, homogeneous_crf,
    inhomogeneous_crf, inhomogeneous_crf_with, inhomogeneous_split, operator_norm_l2, split_identity_with, AutoChoice,
    Certificate, ContinuousVariant, DecayStudyParams, DecayTable, FormulaReport, IdentitySplit, ProbeParams, ProbeSet,
    ProductTable, Side, Variant, AUTO_RHO, P_VALUES,
};
use calderon_core::family::{
    build_haar_family, build_smoothed_family, verify_ati, verify_exp_ati, AtiAuditParams, ExpAtiAuditParams, Mode,
    OperatorFamily, Provenance,
};
use calderon_core::io::load_family;
use calderon_core::report::{EstimateReport, Outcome};
use calderon_core::sampling::AuditBudget;
use calderon_core::space::{load_space, DoublingAudit, FinitePointSpace, QuasiMetricAudit};
use serde::{Deserialize, Serialize};

use crate::config::{AutoOr, ExperimentConfig, FamilySpec, Formula};
use crate::emit::{write_artifacts, Manifest};
use crate::{LabError, EXIT_FAILED, EXIT_OK};

type CoreResult<T> = calderon_core::Result<T>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub reason: Option<String>,
    pub reports: Vec<EstimateReport>,
}

/// One checked quantity. Gating checks decide the exit code; the rest are
/// recorded for the reader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub stage: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub gating: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub n: usize,
    pub a0: f64,
    pub diameter: f64,
    pub min_distance: f64,
    pub quasi_metric: QuasiMetricAudit,
    pub doubling: DoublingAudit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSummary {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// `(k, number of cubes)`.
    pub cube_counts: Vec<(i32, usize)>,
    pub report: DyadicReport,
    pub expsum: ExpSumReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub mode: Mode,
    pub provenance: Provenance,
    pub first_index: i32,
    pub last_index: i32,
    pub sum_violation: f64,
    pub cancellation_violation: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub mode: Mode,
    pub n_window: u32,
    pub remainder_norm: f64,
    pub identity_violation: f64,
    pub auto: Option<AutoChoice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSummary {
    pub mode: Mode,
    pub variant: String,
    pub side: Option<Side>,
    pub n_window: u32,
    pub j0: u32,
    /// Per sampler, in the order center, random, worst case.
    pub identity_violation: Vec<f64>,
    pub g_norms: Vec<f64>,
    pub max_l2: f64,
    pub auto: Option<AutoChoice>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub run: String,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    /// The config as run, without its output directory.
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub space: Option<SpaceSummary>,
    pub dyadic: Option<DyadicSummary>,
    pub families: Vec<FamilySummary>,
    pub splits: Vec<SplitSummary>,
    pub formulae: Vec<FormulaReport>,
    pub discrete: Vec<DiscreteSummary>,
    pub decay: Vec<DecayTable>,
    pub certificates: Vec<CertificateRecord>,
    pub gates: Vec<Gate>,
    /// No stage failed and every gating check passed.
    pub passed: bool,
}

impl RunReport {
    fn new(cfg: &ExperimentConfig) -> Self {
        let mut config = cfg.clone();
        config.output = None;
        Self {
            name: cfg.name.clone(),
            config,
            stages: Vec::new(),
            space: None,
            dyadic: None,
            families: Vec::new(),
            splits: Vec::new(),
            formulae: Vec::new(),
            discrete: Vec::new(),
            decay: Vec::new(),
            certificates: Vec::new(),
            gates: Vec::new(),
            passed: false,
        }
    }

    fn gate(&mut self, stage: &str, name: String, value: f64, tolerance: f64, passed: bool, gating: bool) {
        self.gates.push(Gate {
            stage: stage.into(),
            name,
            value,
            tolerance,
            passed,
            gating,
        });
    }

    fn within(&mut self, stage: &str, name: String, value: f64, tolerance: f64, gating: bool) {
        self.gate(stage, name, value, tolerance, value <= tolerance, gating);
    }

    /// Every exact condition of an estimate report gates.
    fn gate_exact(&mut self, stage: &str, prefix: &str, rep: &EstimateReport) {
        for c in &rep.conditions {
            if let Outcome::Exact {
                max_violation,
                tolerance,
                passed,
            } = c.outcome
            {
                self.gate(
                    stage,
                    format!("{prefix}{}: {}", rep.subject, c.name),
                    max_violation,
                    tolerance,
                    passed,
                    true,
                );
            }
        }
    }

    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }

    pub fn gating_failures(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| g.gating && !g.passed)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    /// `(stage, seconds)`; kept out of the report so its hash is reproducible.
    pub timings: Vec<(String, f64)>,
    pub manifest: Manifest,
    pub exit_code: i32,
}

/// Load inputs, run every stage and write the artifacts into `out_dir`.
///
/// Unreadable inputs are reported before `out_dir` is touched.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, LabError> {
    cfg.validate()?;
    let space = load_space::<f64>(&cfg.space).map_err(|e| LabError::Input(e.to_string()))?;
    let loaded = load_inputs(cfg, space.n())?;
    std::fs::create_dir_all(out_dir).map_err(|e| LabError::Output {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let mut runner = Runner {
        cfg,
        report: RunReport::new(cfg),
        timings: Vec::new(),
    };
    if let Err(Halt(stage)) = runner.execute(&space, loaded) {
        runner.report.stages.push(StageRecord {
            name: "remaining".into(),
            status: StageStatus::Skipped,
            reason: Some(format!("run halted by failure in stage {stage}")),
            reports: Vec::new(),
        });
    }
    let mut report = runner.report;
    report.passed = report.failed_stage().is_none() && report.gating_failures().next().is_none();
    let manifest = write_artifacts(out_dir, &report, &runner.timings)?;
    let exit_code = if report.passed { EXIT_OK } else { EXIT_FAILED };
    Ok(RunOutcome {
        report,
        timings: runner.timings,
        manifest,
        exit_code,
    })
}

fn load_inputs(cfg: &ExperimentConfig, n: usize) -> Result<BTreeMap<Mode, OperatorFamily<f64>>, LabError> {
    let mut out = BTreeMap::new();
    if let FamilySpec::Loaded {
        homogeneous,
        inhomogeneous,
    } = &cfg.family
    {
        for &mode in &cfg.modes {
            let dir = match mode {
                Mode::Homogeneous => homogeneous,
                Mode::Inhomogeneous => inhomogeneous,
            }
            .as_ref()
            .ok_or_else(|| LabError::Input(format!("no saved family given for {} mode", mode_label(mode))))?;
            let fam = load_family::<f64>(dir).map_err(|e| LabError::Input(e.to_string()))?;
            if fam.mode != mode {
                return Err(LabError::Input(format!(
                    "{} holds a {} family",
                    dir.display(),
                    mode_label(fam.mode)
                )));
            }
            if fam.n() != n {
                return Err(LabError::Input(format!(
                    "{} has {} points, the space has {n}",
                    dir.display(),
                    fam.n()
                )));
            }
            out.insert(mode, fam);
        }
    }
    Ok(out)
}

pub fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Homogeneous => "homogeneous",
        Mode::Inhomogeneous => "inhomogeneous",
    }
}

fn sampler_label(s: Sampler) -> String {
    match s {
        Sampler::Center => "center".into(),
        Sampler::Random { seed } => format!("random({seed})"),
        Sampler::WorstCase => "worst_case".into(),
    }
}

struct Halt(String);

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    report: RunReport,
    timings: Vec<(String, f64)>,
}

/// Per-mode state shared between the split, formulae and decay stages.
struct ModeState {
    family: OperatorFamily<f64>,
    table: ProductTable<f64>,
    split: IdentitySplit<f64>,
}

impl Runner<'_> {
    fn stage(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut RunReport) -> CoreResult<Vec<EstimateReport>>,
    ) -> Result<(), Halt> {
        let t = Instant::now();
        let res = f(&mut self.report);
        self.timings.push((name.into(), t.elapsed().as_secs_f64()));
        let (status, reason, reports) = match res {
            Ok(r) => (StageStatus::Ok, None, r),
            Err(e) => (StageStatus::Failed, Some(e.to_string()), Vec::new()),
        };
        self.report.stages.push(StageRecord {
            name: name.into(),
            status,
            reason,
            reports,
        });
        if status == StageStatus::Failed {
            Err(Halt(name.into()))
        } else {
            Ok(())
        }
    }

    fn skip(&mut self, name: &str, reason: &str) {
        self.report.stages.push(StageRecord {
            name: name.into(),
            status: StageStatus::Skipped,
            reason: Some(reason.into()),
            reports: Vec::new(),
        });
    }

    fn execute(&mut self, space: &FinitePointSpace<f64>, mut loaded: BTreeMap<Mode, OperatorFamily<f64>>) -> Result<(), Halt> {
        let cfg = self.cfg;
        let tol = cfg.tolerances.clone();
        let w = space.weights();
        let budget = AuditBudget {
            seed: cfg.seeds.audit,
            ..cfg.budget
        };
        let n = space.n();
        let (triples, pairs) = if n <= budget.exhaustive_n {
            (n.pow(3), n * n)
        } else {
            (budget.samples, budget.samples)
        };

        self.stage("space", |rep| {
            let qm = space.quasi_metric_audit(budget.seed, triples);
            let dbl = space.doubling_audit(budget.seed, pairs);
            let geo = space.geometry_equivalence_audit(budget.seed, budget.samples);
            rep.gate(
                "space",
                "quasi-triangle inequality with the declared A0".into(),
                qm.a0_fit,
                qm.declared_a0,
                qm.holds,
                true,
            );
            rep.gate(
                "space",
                "symmetric distances".into(),
                if qm.symmetric { 0.0 } else { 1.0 },
                0.0,
                qm.symmetric,
                true,
            );
            rep.space = Some(SpaceSummary {
                n,
                a0: space.a0(),
                diameter: space.diameter(),
                min_distance: space.min_positive_distance(),
                quasi_metric: qm,
                doubling: dbl,
            });
            Ok(vec![geo])
        })?;

        let mut sys: Option<DyadicSystem<f64>> = None;
        self.stage("dyadic", |rep| {
            let s = build_dyadic(space, build_nets(space, &cfg.net_params())?, cfg.strict_geometry)?;
            let r = s.report().clone();
            rep.within(
                "dyadic",
                "cubes partition every level".into(),
                r.partition_max_error,
                tol.identity,
                true,
            );
            let nest = if r.nesting_ok { 0.0 } else { 1.0 };
            rep.gate("dyadic", "cubes are nested".into(), nest, 0.0, r.nesting_ok, true);
            let sw = if r.sandwich_ok { 0.0 } else { 1.0 };
            rep.gate("dyadic", "ball sandwich".into(), sw, 0.0, r.sandwich_ok, false);
            let expsum = s.verify_expsum(space, 1.0, 1.0, &budget);
            rep.dyadic = Some(DyadicSummary {
                delta: cfg.delta,
                k_min: s.k_min(),
                k_max: s.k_max(),
                cube_counts: (s.k_min()..=s.k_max()).map(|k| (k, s.cube_count(k))).collect(),
                report: r,
                expsum,
            });
            sys = Some(s);
            Ok(Vec::new())
        })?;
        let sys = sys.expect("dyadic stage succeeded");

        let mut states: BTreeMap<Mode, ModeState> = BTreeMap::new();
        for &mode in &cfg.modes {
            let label = mode_label(mode);
            let fam_stage = format!("family_{label}");
            let mut family = None;
            self.stage(&fam_stage, |rep| {
                let f = match &cfg.family {
                    FamilySpec::Haar => build_haar_family(space, &sys, mode),
                    s @ FamilySpec::Smoothed { .. } => {
                        build_smoothed_family(space, &sys, s.smoothed_params().expect("smoothed"), mode)?
                    }
                    FamilySpec::Loaded { .. } => loaded.remove(&mode).expect("loaded before the run"),
                };
                let (sum_v, canc_v) = f.invariant_violations(w);
                rep.within(&fam_stage, format!("{label}: sum of Q_k = I_mode"), sum_v, tol.identity, true);
                rep.within(
                    &fam_stage,
                    format!("{label}: row and column integrals"),
                    canc_v,
                    tol.identity,
                    true,
                );
                rep.families.push(FamilySummary {
                    mode,
                    provenance: f.provenance,
                    first_index: f.first_index(),
                    last_index: f.last_index(),
                    sum_violation: sum_v,
                    cancellation_violation: canc_v,
                    warnings: f.warnings.clone(),
                });
                family = Some(f);
                Ok(Vec::new())
            })?;
            let family = family.expect("family stage succeeded");

            let audit_stage = format!("audits_{label}");
            if cfg.family_audits {
                self.stage(&audit_stage, |rep| {
                    let mut out = Vec::new();
                    if !family.averages.is_empty() {
                        let p = AtiAuditParams {
                            budget,
                            ..AtiAuditParams::default()
                        };
                        out.push(verify_ati(&family, space, &p)?);
                    }
                    let p = ExpAtiAuditParams {
                        budget,
                        ..ExpAtiAuditParams::default()
                    };
                    out.push(verify_exp_ati(&family, space, &sys, &p)?);
                    let prefix = format!("{label} ");
                    for r in &out {
                        rep.gate_exact(&audit_stage, &prefix, r);
                    }
                    Ok(out)
                })?;
            } else {
                self.skip(&audit_stage, "family audits disabled in the config");
            }

            let split_stage = format!("split_{label}");
            let mut state = None;
            self.stage(&split_stage, |rep| {
                let table = ProductTable::new(&family, w);
                let (split, auto) = match cfg.n_window {
                    AutoOr::Auto => {
                        let (a, s) = choose_n(&family, &table, w, cfg.scan.n_max)?;
                        (s, Some(a))
                    }
                    AutoOr::Fixed(nw) => (split_identity_with(&family, &table, w, nw)?, None),
                };
                rep.within(
                    &split_stage,
                    format!("{label}: T_N + R_N = I_mode"),
                    split.identity_violation,
                    tol.identity,
                    true,
                );
                rep.splits.push(SplitSummary {
                    mode,
                    n_window: split.n_window,
                    remainder_norm: auto
                        .as_ref()
                        .map_or_else(|| operator_norm_l2(&split.r, w).value, |a| a.rho),
                    identity_violation: split.identity_violation,
                    auto,
                });
                state = Some(ModeState { family, table, split });
                Ok(Vec::new())
            })?;
            let state = state.expect("split stage succeeded");

            let formulae_stage = format!("formulae_{label}");
            let wanted: Vec<Formula> = cfg
                .formulae
                .iter()
                .copied()
                .filter(|f| (*f == Formula::Inhomogeneous) == (mode == Mode::Inhomogeneous))
                .collect();
            if wanted.is_empty() {
                self.skip(&formulae_stage, "no reproducing formula selected for this mode");
            } else {
                let ctx = Ctx {
                    cfg,
                    space,
                    sys: &sys,
                    state: &state,
                    stage: &formulae_stage,
                };
                self.stage(&formulae_stage, |rep| {
                    let probes = ProbeSet::build(
                        space,
                        &sys,
                        mode,
                        &ProbeParams {
                            seed: cfg.seeds.probes,
                            ..ProbeParams::default()
                        },
                    );
                    for f in wanted {
                        match f {
                            Formula::ContinuousLeft | Formula::ContinuousRight => {
                                let v = if f == Formula::ContinuousLeft {
                                    ContinuousVariant::Left
                                } else {
                                    ContinuousVariant::Right
                                };
                                let (_, fr) = homogeneous_crf(space, &state.family, &state.split, tol.neumann, v, &probes)?;
                                ctx.push_formula(rep, fr);
                            }
                            Formula::Discrete => {
                                for &variant in &cfg.variants {
                                    for &side in &cfg.sides {
                                        ctx.discrete(rep, variant, side, &probes)?;
                                    }
                                }
                            }
                            Formula::Inhomogeneous => ctx.inhomogeneous(rep, &probes)?,
                        }
                    }
                    Ok(Vec::new())
                })?;
            }
            states.insert(mode, state);
        }

        if cfg.decay.is_empty() {
            self.skip("decay", "no decay tables requested");
            return Ok(());
        }
        self.stage("decay", |rep| {
            for spec in &cfg.decay {
                let mode = spec.mode.unwrap_or(if states.contains_key(&Mode::Homogeneous) {
                    Mode::Homogeneous
                } else {
                    cfg.modes[0]
                });
                let st = states.get(&mode).ok_or_else(|| {
                    calderon_core::Error::InvalidParameter(format!(
                        "decay study {} needs the {} family",
                        spec.quantity.name(),
                        mode_label(mode)
                    ))
                })?;
                let mut p = DecayStudyParams::new(spec.quantity, spec.sweep.clone());
                p.n_window = spec.n_window.unwrap_or(st.split.n_window);
                p.sampler = cfg.sampler;
                p.seed = cfg.seeds.probes;
                p.beta = spec.beta.unwrap_or(p.beta);
                p.gamma = spec.gamma.unwrap_or(p.gamma);
                rep.decay.push(decay_study(space, &sys, &st.family, &st.table, &p)?);
            }
            Ok(Vec::new())
        })
    }
}

/// Borrowed inputs of one formulae stage.
struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    space: &'a FinitePointSpace<f64>,
    sys: &'a DyadicSystem<f64>,
    state: &'a ModeState,
    stage: &'a str,
}

impl Ctx<'_> {
    fn samplers(&self) -> [Sampler; 3] {
        [
            Sampler::Center,
            Sampler::Random {
                seed: self.cfg.seeds.sampler,
            },
            Sampler::WorstCase,
        ]
    }

    fn push_formula(&self, rep: &mut RunReport, fr: FormulaReport) {
        let tol = &self.cfg.tolerances;
        let run = match &fr.sampler {
            Some(s) => format!("{}[{s}]", fr.variant),
            None => fr.variant.clone(),
        };
        let c = &fr.certificate;
        rep.gate(
            self.stage,
            format!("{run}: Neumann certificate"),
            c.residual,
            2.0 * c.tail_bound + c.rounding_floor,
            c.sound,
            true,
        );
        for a in &fr.audits {
            rep.gate_exact(self.stage, &format!("{run}: "), a);
        }
        let gating = self.cfg.gate_reconstruction;
        for (i, p) in P_VALUES.iter().enumerate() {
            // L² carries the target, the other exponents get a decade of slack
            let t = if *p == 2.0 {
                tol.reconstruction
            } else {
                10.0 * tol.reconstruction
            };
            rep.within(
                self.stage,
                format!("{run}: relative L^{p} reconstruction error"),
                fr.reconstruction.max_relative[i],
                t,
                gating,
            );
        }
        if let Some(ok) = fr.reconstruction.bound_holds {
            rep.gate(
                self.stage,
                format!("{run}: error within the certified bound"),
                if ok { 0.0 } else { 1.0 },
                0.0,
                ok,
                gating,
            );
        }
        rep.certificates.push(CertificateRecord {
            run,
            certificate: fr.certificate.clone(),
        });
        rep.formulae.push(fr);
    }

    /// Windows and subcube depths to try, in scan order.
    fn grid(&self) -> (Vec<u32>, Vec<u32>) {
        let s = &self.cfg.scan;
        (
            self.cfg.n_window.fixed().map_or_else(|| (0..=s.n_max).collect(), |v| vec![v]),
            self.cfg.j0.fixed().map_or_else(|| (0..=s.j0_max).collect(), |v| vec![v]),
        )
    }

    /// First `(N, j0)` whose remainder norm is at most [`AUTO_RHO`]; with both
    /// fixed, that pair unconditionally.
    fn pick(
        &self,
        mut remainder: impl FnMut(&IdentitySplit<f64>, u32) -> CoreResult<f64>,
    ) -> CoreResult<(Option<AutoChoice>, IdentitySplit<f64>, u32)> {
        let st = self.state;
        let w = self.space.weights();
        let (ns, js) = self.grid();
        if let (AutoOr::Fixed(nw), AutoOr::Fixed(j0)) = (self.cfg.n_window, self.cfg.j0) {
            return Ok((None, split_identity_with(&st.family, &st.table, w, nw)?, j0));
        }
        let mut scanned = Vec::new();
        let mut last = f64::INFINITY;
        for nw in ns {
            let split = split_identity_with(&st.family, &st.table, w, nw)?;
            for &j0 in &js {
                let rho = remainder(&split, j0)?;
                scanned.push((nw, Some(j0), rho));
                last = rho;
                if rho <= AUTO_RHO {
                    let choice = AutoChoice {
                        n_window: nw,
                        j0: Some(j0),
                        rho,
                        scanned,
                    };
                    return Ok((Some(choice), split, j0));
                }
            }
        }
        Err(calderon_core::Error::Divergent { rho: last })
    }

    fn discrete(
        &self,
        rep: &mut RunReport,
        variant: Variant,
        side: Side,
        probes: &ProbeSet<f64>,
    ) -> CoreResult<()> {
        let (cfg, space, sys, st) = (self.cfg, self.space, self.sys, self.state);
        let w = space.weights();
        let strict = cfg.strict_geometry;
        let (auto, split, j0) = if cfg.n_window == AutoOr::Auto && cfg.j0 == AutoOr::Auto {
            let (a, s, _) = choose_discrete(
                space,
                sys,
                &st.family,
                &st.table,
                variant,
                side,
                cfg.sampler,
                cfg.scan.n_max,
                cfg.scan.j0_max,
                strict,
            )?;
            let j0 = a.j0.expect("discrete choice carries j0");
            (Some(a), s, j0)
        } else {
            self.pick(|split, j0| {
                let ds = discrete_split_with(space, sys, &st.family, split, j0, cfg.sampler, variant, side, strict)?;
                Ok(operator_norm_l2(&ds.remainder(), w).value)
            })?
        };
        let run = discrete_crf(
            space,
            sys,
            &st.family,
            &split,
            j0,
            cfg.tolerances.neumann,
            variant,
            side,
            probes,
            cfg.seeds.sampler,
            strict,
        )?;
        let name = format!("discrete_{}_{}", variant.label(), side_label(side));
        rep.within(
            self.stage,
            format!("{name}: S_N + G_N + R_N = I_mode"),
            run.identity_violation,
            cfg.tolerances.identity,
            true,
        );
        rep.discrete.push(DiscreteSummary {
            mode: Mode::Homogeneous,
            variant: name,
            side: Some(side),
            n_window: run.n_window,
            j0,
            identity_violation: vec![run.identity_violation],
            g_norms: run.g_norms.clone(),
            max_l2: run.max_l2,
            auto,
        });
        for fr in run.runs {
            self.push_formula(rep, fr);
        }
        Ok(())
    }

    fn inhomogeneous(&self, rep: &mut RunReport, probes: &ProbeSet<f64>) -> CoreResult<()> {
        let (cfg, space, sys, st) = (self.cfg, self.space, self.sys, self.state);
        let w = space.weights();
        let strict = cfg.strict_geometry;
        let tol = cfg.tolerances.neumann;
        let cont = inhomogeneous_crf(space, sys, &st.family, &st.split, tol, None, probes, strict)?;
        self.push_formula(rep, cont.continuous);

        let (auto, split, j0) = if cfg.n_window == AutoOr::Auto && cfg.j0 == AutoOr::Auto {
            let (a, s, _) = choose_inhomogeneous(
                space,
                sys,
                &st.family,
                &st.table,
                cfg.sampler,
                cfg.scan.n_max,
                cfg.scan.j0_max,
                strict,
            )?;
            let j0 = a.j0.expect("discrete choice carries j0");
            (Some(a), s, j0)
        } else {
            self.pick(|split, j0| {
                let is = inhomogeneous_split(space, sys, &st.family, split, j0, cfg.sampler, strict)?;
                Ok(operator_norm_l2(&is.r.add(&is.r1).add(&is.r2), w).value)
            })?
        };
        let mut viol = Vec::new();
        let mut g_norms = Vec::new();
        let mut max_l2 = 0.0f64;
        let mut runs = Vec::new();
        for sampler in self.samplers() {
            let is = inhomogeneous_split(space, sys, &st.family, &split, j0, sampler, strict)?;
            viol.push(is.identity_violation);
            g_norms.push(operator_norm_l2(&is.r1.add(&is.r2), w).value);
            let fr = inhomogeneous_crf_with(space, &st.family, &is, tol, probes)?;
            max_l2 = max_l2.max(fr.reconstruction.max_l2());
            rep.within(
                self.stage,
                format!(
                    "inhomogeneous_discrete[{}]: four-part split sums to I",
                    sampler_label(sampler)
                ),
                is.identity_violation,
                cfg.tolerances.identity,
                true,
            );
            runs.push(fr);
        }
        rep.discrete.push(DiscreteSummary {
            mode: Mode::Inhomogeneous,
            variant: "inhomogeneous_discrete".into(),
            side: None,
            n_window: split.n_window,
            j0,
            identity_violation: viol,
            g_norms,
            max_l2,
            auto,
        });
        for fr in runs {
            self.push_formula(rep, fr);
        }
        Ok(())
    }
}

fn side_label(side: Side) -> &'static str {
    match side {
        Side::Primal => "primal",
        Side::Dual => "dual",
    }
}
