use std::path::{Path, PathBuf};

use calderon_core::dyadic::{NetParams, Sampler};
use calderon_core::engine::{DecayQuantity, Side, Variant};
use calderon_core::family::{Mode, SmoothedParams};
use calderon_core::sampling::AuditBudget;
use serde::{Deserialize, Serialize};

use crate::LabError;

/// A fixed value or `"auto"`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AutoOr<T> {
    #[default]
    Auto,
    Fixed(T),
}

impl<T> AutoOr<T> {
    pub fn fixed(self) -> Option<T> {
        match self {
            AutoOr::Auto => None,
            AutoOr::Fixed(v) => Some(v),
        }
    }
}

impl<T: Serialize> Serialize for AutoOr<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Fixed(v) => v.serialize(s),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for AutoOr<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Tag(String),
            Value(T),
        }
        match Raw::deserialize(d)? {
            Raw::Tag(t) if t == "auto" => Ok(AutoOr::Auto),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("expected \"auto\" or a value, found {t:?}"))),
            Raw::Value(v) => Ok(AutoOr::Fixed(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case")]
pub enum FamilySpec {
    Haar,
    Smoothed {
        #[serde(default = "one")]
        nu: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        gamma: f64,
    },
    /// A saved family directory per mode.
    Loaded {
        homogeneous: Option<PathBuf>,
        inhomogeneous: Option<PathBuf>,
    },
}

fn one() -> f64 {
    1.0
}

impl FamilySpec {
    pub fn smoothed_params(&self) -> Option<SmoothedParams> {
        match *self {
            FamilySpec::Smoothed { nu, a, gamma } => Some(SmoothedParams { nu, a, gamma }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub identity: f64,
    pub neumann: f64,
    /// Target for the relative L² reconstruction error.
    pub reconstruction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            neumann: 1e-10,
            reconstruction: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub audit: u64,
    #[serde(default)]
    pub probes: u64,
    #[serde(default)]
    pub sampler: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub n_max: u32,
    pub j0_max: u32,
}

impl Default for Scan {
    fn default() -> Self {
        Self { n_max: 10, j0_max: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    ContinuousLeft,
    ContinuousRight,
    Discrete,
    Inhomogeneous,
}

impl Formula {
    pub const ALL: [Formula; 4] = [
        Formula::ContinuousLeft,
        Formula::ContinuousRight,
        Formula::Discrete,
        Formula::Inhomogeneous,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub quantity: DecayQuantity,
    pub sweep: Vec<u32>,
    /// Family to study; homogeneous when that mode was built.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Window for `GN_l2`; defaults to the chosen `N`.
    #[serde(default)]
    pub n_window: Option<u32>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Space file; relative paths resolve against the config's directory.
    pub space: PathBuf,
    #[serde(default = "half")]
    pub delta: f64,
    #[serde(default)]
    pub k_range: AutoOr<(i32, i32)>,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(rename = "C0", default = "one")]
    pub big_c0: f64,
    #[serde(default)]
    pub strict_geometry: bool,
    pub family: FamilySpec,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub n_window: AutoOr<u32>,
    #[serde(default)]
    pub j0: AutoOr<u32>,
    #[serde(default = "center")]
    pub sampler: Sampler,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "both_sides")]
    pub sides: Vec<Side>,
    #[serde(default = "all_formulae")]
    pub formulae: Vec<Formula>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub budget: AuditBudget,
    #[serde(default)]
    pub scan: Scan,
    /// Fitted audits of the family (ATI, exp-ATI); exhaustive on small spaces.
    #[serde(default = "yes")]
    pub family_audits: bool,
    #[serde(default)]
    pub decay: Vec<DecaySpec>,
    /// Make reconstruction tolerance failures gating.
    #[serde(default)]
    pub gate_reconstruction: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn center() -> Sampler {
    Sampler::Center
}
fn both_modes() -> Vec<Mode> {
    vec![Mode::Homogeneous, Mode::Inhomogeneous]
}
fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}
fn both_sides() -> Vec<Side> {
    vec![Side::Primal, Side::Dual]
}
fn all_formulae() -> Vec<Formula> {
    Formula::ALL.to_vec()
}

impl ExperimentConfig {
    /// Minimal config with every optional field at its default.
    pub fn new(space: PathBuf, family: FamilySpec) -> Self {
        Self {
            name: String::new(),
            space,
            delta: half(),
            k_range: AutoOr::Auto,
            c0: 1.0,
            big_c0: 1.0,
            strict_geometry: false,
            family,
            modes: both_modes(),
            n_window: AutoOr::Auto,
            j0: AutoOr::Auto,
            sampler: Sampler::Center,
            variants: all_variants(),
            sides: both_sides(),
            formulae: all_formulae(),
            seeds: Seeds::default(),
            tolerances: Tolerances::default(),
            budget: AuditBudget::default(),
            scan: Scan::default(),
            family_audits: true,
            decay: Vec::new(),
            gate_reconstruction: false,
            output: None,
        }
    }

    /// Parse a config file and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| LabError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.space);
        if let FamilySpec::Loaded {
            homogeneous,
            inhomogeneous,
        } = &mut self.family
        {
            homogeneous.iter_mut().for_each(fix);
            inhomogeneous.iter_mut().for_each(fix);
        }
        if let Some(o) = &mut self.output {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Input(m));
        let t = &self.tolerances;
        if !(t.identity > 0.0 && t.neumann > 0.0 && t.reconstruction > 0.0) {
            return bad("all tolerances must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if let AutoOr::Fixed((lo, hi)) = self.k_range {
            if lo > hi {
                return bad(format!("empty k_range [{lo}, {hi}]"));
            }
        }
        if self.modes.is_empty() {
            return bad("no modes selected".into());
        }
        if let FamilySpec::Smoothed { nu, a, .. } = self.family {
            if !(nu > 0.0) || !(a > 0.0 && a <= 1.0) {
                return bad("smoothed family needs nu > 0 and a in (0,1]".into());
            }
        }
        for d in &self.decay {
            if d.sweep.is_empty() {
                return bad(format!("decay study {} has an empty sweep", d.quantity.name()));
            }
        }
        Ok(())
    }

    pub fn net_params(&self) -> NetParams {
        NetParams {
            delta: self.delta,
            k_range: self.k_range.fixed(),
            c0: self.c0,
            big_c0: self.big_c0,
            strict: self.strict_geometry,
        }
    }
}
