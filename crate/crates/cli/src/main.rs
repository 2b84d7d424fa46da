use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calderon_core::dyadic::{build_dyadic, build_nets, DyadicSystem, NetParams, Sampler};
use calderon_core::engine::DecayQuantity;
use calderon_core::family::{
    build_haar_family, build_smoothed_family, verify_ati, verify_exp_ati, AtiAuditParams, ExpAtiAuditParams, Mode,
    OperatorFamily, SmoothedParams,
};
use calderon_core::io::{dyadic_json, load_family, save_family};
use calderon_core::sampling::AuditBudget;
use calderon_core::space::{load_space, FinitePointSpace};
use calderon_lab::{
    run_experiment, run_with_threads, AutoOr, DecaySpec, ExperimentConfig, FamilySpec, Formula, LabError, EXIT_FAILED,
    EXIT_INPUT, EXIT_OK,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "calderon-lab", version, about = "Multiscale reproducing formulae on finite point clouds")]
struct Cli {
    /// Seed for audits, probes and the random sampler.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "CALDERON_LAB_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail when the dyadic constants violate the construction's hypotheses.
    #[arg(long, global = true)]
    strict_geometry: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-metric, doubling and volume-equivalence audits of a space.
    Space {
        #[command(subcommand)]
        action: SpaceAction,
    },
    /// Nets and dyadic cubes.
    Dyadic {
        #[command(subcommand)]
        action: DyadicAction,
    },
    /// Build, save and audit operator families.
    Family {
        #[command(subcommand)]
        action: FamilyAction,
    },
    /// Run one kind of reproducing formula end to end.
    Calderon {
        #[command(subcommand)]
        formula: FormulaKind,
    },
    /// Sweep a remainder quantity and fit its decay.
    Study {
        #[command(subcommand)]
        action: StudyAction,
    },
    /// Run an experiment config.
    Run { config: PathBuf },
}

#[derive(Subcommand)]
enum SpaceAction {
    Audit { space: PathBuf },
}

#[derive(Subcommand)]
enum DyadicAction {
    Build {
        space: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Subcommand)]
enum FamilyAction {
    /// Construct a family and save it under `--out`.
    Build {
        space: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum, default_value = "homogeneous")]
        mode: ModeArg,
    },
    /// Audit a saved family against its space.
    Audit {
        dir: PathBuf,
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        k_min: Option<i32>,
        #[arg(long)]
        k_max: Option<i32>,
    },
}

#[derive(Subcommand)]
enum FormulaKind {
    /// Left and right continuous formulae on the homogeneous family
    Continuous(FormulaArgs),
    /// Sampled formulae, all three variants on both sides
    Discrete(FormulaArgs),
    /// Continuous and discrete formulae on the inhomogeneous family
    Inhomogeneous(FormulaArgs),
}

#[derive(Subcommand)]
enum StudyAction {
    Decay {
        space: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum)]
        quantity: QuantityArg,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        sweep: Vec<u32>,
        /// Window for the j0 sweep.
        #[arg(long)]
        n: Option<u32>,
    },
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, requires = "k_max")]
    k_min: Option<i32>,
    #[arg(long, requires = "k_min")]
    k_max: Option<i32>,
}

impl GridArgs {
    fn k_range(&self) -> Option<(i32, i32)> {
        self.k_min.zip(self.k_max)
    }
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum, default_value = "smoothed")]
    constructor: ConstructorArg,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

impl FamilyArgs {
    fn spec(&self) -> FamilySpec {
        match self.constructor {
            ConstructorArg::Haar => FamilySpec::Haar,
            ConstructorArg::Smoothed => FamilySpec::Smoothed {
                nu: self.nu,
                a: self.a,
                gamma: 1.0,
            },
        }
    }
}

#[derive(Args, Clone)]
struct FormulaArgs {
    space: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    family: FamilyArgs,
    /// Window `N`; scanned when omitted.
    #[arg(long)]
    n: Option<u32>,
    /// Subcube depth; scanned when omitted.
    #[arg(long)]
    j0: Option<u32>,
    #[arg(long, value_enum, default_value = "center")]
    sampler: SamplerArg,
}

#[derive(ValueEnum, Clone, Copy)]
enum ConstructorArg {
    Haar,
    Smoothed,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Homogeneous,
    Inhomogeneous,
}

#[derive(ValueEnum, Clone, Copy)]
enum SamplerArg {
    Center,
    Random,
    WorstCase,
}

#[derive(ValueEnum, Clone, Copy)]
enum QuantityArg {
    #[value(name = "RN_l2")]
    RnL2,
    #[value(name = "RN_testspace_ratio")]
    RnTestspaceRatio,
    #[value(name = "GN_l2")]
    GnL2,
    #[value(name = "CZ_CT_of_RN")]
    CzCtOfRn,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Homogeneous => Mode::Homogeneous,
            ModeArg::Inhomogeneous => Mode::Inhomogeneous,
        }
    }
}

impl From<QuantityArg> for DecayQuantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::RnL2 => DecayQuantity::RnL2,
            QuantityArg::RnTestspaceRatio => DecayQuantity::RnTestspaceRatio,
            QuantityArg::GnL2 => DecayQuantity::GnL2,
            QuantityArg::CzCtOfRn => DecayQuantity::CzCtOfRn,
        }
    }
}

/// An error with the exit code it maps to.
struct Failure(i32, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure(e.exit_code(), e.to_string())
    }
}

impl From<calderon_core::Error> for Failure {
    fn from(e: calderon_core::Error) -> Self {
        use calderon_core::Error as E;
        let code = match e {
            E::Divergent { .. } | E::IdentityViolation { .. } | E::StrictGeometry(_) => EXIT_FAILED,
            _ => EXIT_INPUT,
        };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let res = run_with_threads(threads, move || dispatch(&cli)).map_err(Failure::from);
    let code = match res.and_then(|r| r) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    let budget = AuditBudget::with_seed(cli.seed.unwrap_or(0));
    match &cli.command {
        Command::Space {
            action: SpaceAction::Audit { space },
        } => {
            let s = load(space)?;
            let n = s.n();
            let exhaustive = n <= budget.exhaustive_n;
            let triples = if exhaustive { n.pow(3) } else { budget.samples };
            let pairs = if exhaustive { n * n } else { budget.samples };
            let qm = s.quasi_metric_audit(budget.seed, triples);
            let ok = qm.holds && qm.symmetric;
            let out = json!({
                "n": n,
                "quasi_metric": qm,
                "doubling": s.doubling_audit(budget.seed, pairs),
                "geometry": s.geometry_equivalence_audit(budget.seed, budget.samples),
            });
            emit(cli, "space_audit.json", &out)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Dyadic {
            action: DyadicAction::Build { space, grid },
        } => {
            let s = load(space)?;
            let sys = dyadic(cli, &s, grid.delta, grid.k_range())?;
            let text = dyadic_json(&s, &sys);
            println!("{text}");
            if let Some(dir) = &cli.out {
                write_file(dir, "dyadic.json", &text)?;
            }
            let r = sys.report();
            Ok(if r.partition_ok && r.nesting_ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Family {
            action: FamilyAction::Build {
                space,
                grid,
                family,
                mode,
            },
        } => {
            let dir = cli
                .out
                .as_ref()
                .ok_or_else(|| Failure(EXIT_INPUT, "family build needs --out".into()))?;
            let s = load(space)?;
            let sys = dyadic(cli, &s, grid.delta, grid.k_range())?;
            let fam = construct(&s, &sys, family, (*mode).into())?;
            let (sum_v, canc_v) = fam.invariant_violations(s.weights());
            save_family(&fam, dir)?;
            let out = json!({
                "levels": fam.len(),
                "first_index": fam.first_index(),
                "sum_violation": sum_v,
                "cancellation_violation": canc_v,
                "warnings": fam.warnings,
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            Ok(EXIT_OK)
        }
        Command::Family {
            action: FamilyAction::Audit {
                dir,
                space,
                k_min,
                k_max,
            },
        } => {
            let s = load(space)?;
            let fam = load_family::<f64>(dir)?;
            let sys = dyadic(cli, &s, fam.delta, k_min.zip(*k_max))?;
            let mut reports = Vec::new();
            if !fam.averages.is_empty() {
                reports.push(verify_ati(
                    &fam,
                    &s,
                    &AtiAuditParams {
                        budget,
                        ..AtiAuditParams::default()
                    },
                )?);
            }
            reports.push(verify_exp_ati(
                &fam,
                &s,
                &sys,
                &ExpAtiAuditParams {
                    budget,
                    ..ExpAtiAuditParams::default()
                },
            )?);
            let ok = reports.iter().all(|r| r.exact_passed());
            emit(cli, "family_audit.json", &reports)?;
            Ok(if ok { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Calderon { formula } => {
            let (args, formulae, mode) = match formula {
                FormulaKind::Continuous(a) => (
                    a,
                    vec![Formula::ContinuousLeft, Formula::ContinuousRight],
                    Mode::Homogeneous,
                ),
                FormulaKind::Discrete(a) => (a, vec![Formula::Discrete], Mode::Homogeneous),
                FormulaKind::Inhomogeneous(a) => (a, vec![Formula::Inhomogeneous], Mode::Inhomogeneous),
            };
            let mut cfg = base_config(cli, &args.space, &args.grid, &args.family);
            cfg.name = format!("calderon-{}", calderon_lab::harness::mode_label(mode));
            cfg.modes = vec![mode];
            cfg.formulae = formulae;
            cfg.n_window = args.n.map_or(AutoOr::Auto, AutoOr::Fixed);
            cfg.j0 = args.j0.map_or(AutoOr::Auto, AutoOr::Fixed);
            cfg.sampler = match args.sampler {
                SamplerArg::Center => Sampler::Center,
                SamplerArg::Random => Sampler::Random {
                    seed: cfg.seeds.sampler,
                },
                SamplerArg::WorstCase => Sampler::WorstCase,
            };
            experiment(cli, cfg)
        }
        Command::Study {
            action:
                StudyAction::Decay {
                    space,
                    grid,
                    family,
                    quantity,
                    sweep,
                    n,
                },
        } => {
            let mut cfg = base_config(cli, space, grid, family);
            cfg.name = "study-decay".into();
            cfg.modes = vec![Mode::Homogeneous];
            cfg.formulae = Vec::new();
            cfg.family_audits = false;
            cfg.decay = vec![DecaySpec {
                quantity: (*quantity).into(),
                sweep: sweep.clone(),
                mode: None,
                n_window: *n,
                beta: None,
                gamma: None,
            }];
            experiment(cli, cfg)
        }
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            apply_globals(cli, &mut cfg);
            experiment(cli, cfg)
        }
    }
}

fn load(path: &Path) -> Result<FinitePointSpace<f64>, Failure> {
    Ok(load_space::<f64>(path)?)
}

fn dyadic(
    cli: &Cli,
    s: &FinitePointSpace<f64>,
    delta: f64,
    k_range: Option<(i32, i32)>,
) -> Result<DyadicSystem<f64>, Failure> {
    let params = NetParams {
        delta,
        k_range,
        strict: cli.strict_geometry,
        ..NetParams::default()
    };
    Ok(build_dyadic(s, build_nets(s, &params)?, cli.strict_geometry)?)
}

fn construct(
    s: &FinitePointSpace<f64>,
    sys: &DyadicSystem<f64>,
    args: &FamilyArgs,
    mode: Mode,
) -> Result<OperatorFamily<f64>, Failure> {
    Ok(match args.constructor {
        ConstructorArg::Haar => build_haar_family(s, sys, mode),
        ConstructorArg::Smoothed => build_smoothed_family(
            s,
            sys,
            SmoothedParams {
                nu: args.nu,
                a: args.a,
                gamma: 1.0,
            },
            mode,
        )?,
    })
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure(EXIT_INPUT, format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(name), text).map_err(io)
}

/// Print as JSON and, with `--out`, also write it there.
fn emit(cli: &Cli, name: &str, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("json");
    println!("{text}");
    if let Some(dir) = &cli.out {
        write_file(dir, name, &text)?;
    }
    Ok(())
}

fn base_config(cli: &Cli, space: &Path, grid: &GridArgs, family: &FamilyArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(space.to_path_buf(), family.spec());
    cfg.delta = grid.delta;
    cfg.k_range = grid.k_range().map_or(AutoOr::Auto, AutoOr::Fixed);
    apply_globals(cli, &mut cfg);
    cfg
}

fn apply_globals(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        cfg.seeds.audit = seed;
        cfg.seeds.probes = seed;
        cfg.seeds.sampler = seed;
        if let Sampler::Random { .. } = cfg.sampler {
            cfg.sampler = Sampler::Random { seed };
        }
    }
    cfg.strict_geometry |= cli.strict_geometry;
}

fn experiment(cli: &Cli, cfg: ExperimentConfig) -> Result<i32, Failure> {
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| {
        let name = if cfg.name.is_empty() { "run" } else { &cfg.name };
        PathBuf::from("calderon-out").join(name)
    });
    let outcome = run_experiment(&cfg, &out)?;
    let r = &outcome.report;
    for s in &r.stages {
        let status = serde_json::to_value(s.status).expect("json");
        match &s.reason {
            Some(why) => println!("{:<24} {} ({why})", s.name, status.as_str().unwrap_or("")),
            None => println!("{:<24} {}", s.name, status.as_str().unwrap_or("")),
        }
    }
    for g in r.gating_failures() {
        println!("FAILED {}: {:e} > {:e}", g.name, g.value, g.tolerance);
    }
    for t in &r.decay {
        let ratio = t.ratio.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("decay {:<20} ratio {ratio} monotone {}", t.quantity, t.monotone);
    }
    println!("artifacts in {}", out.display());
    Ok(outcome.exit_code)
}
