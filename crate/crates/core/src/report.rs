//! Estimate reports shared by every audit.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Census {
    /// Configurations evaluated.
    pub evaluated: usize,
    /// Configurations inside the admissible window with a positive right-hand side.
    pub admissible: usize,
    pub exhaustive: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Exact {
        max_violation: f64,
        tolerance: f64,
        passed: bool,
    },
    Fitted {
        c_fit: f64,
        log10_c_fit: f64,
        nu_fit: Option<f64>,
        a_used: Option<f64>,
        eta_fit: Option<f64>,
        residual: Option<f64>,
        witness: Option<Vec<usize>>,
        census: Census,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    /// Short description of the inequality or identity checked.
    pub anchor: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Condition {
    pub fn exact(name: &str, anchor: &str, max_violation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            outcome: Outcome::Exact {
                max_violation,
                tolerance,
                passed: max_violation <= tolerance,
            },
        }
    }

    pub fn fitted(name: &str, anchor: &str, fit: &RatioFit, census: Census) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            outcome: Outcome::Fitted {
                c_fit: fit.value(),
                log10_c_fit: fit.log_max / std::f64::consts::LN_10,
                nu_fit: None,
                a_used: None,
                eta_fit: None,
                residual: None,
                witness: fit.witness.clone(),
                census,
            },
        }
    }

    pub fn c_fit(&self) -> Option<f64> {
        match &self.outcome {
            Outcome::Fitted { c_fit, .. } => Some(*c_fit),
            Outcome::Exact { .. } => None,
        }
    }

    pub fn passed(&self) -> Option<bool> {
        match &self.outcome {
            Outcome::Exact { passed, .. } => Some(*passed),
            Outcome::Fitted { .. } => None,
        }
    }

    pub fn with_fit_details(
        mut self,
        nu: Option<f64>,
        a: Option<f64>,
        eta: Option<f64>,
        residual: Option<f64>,
    ) -> Self {
        if let Outcome::Fitted {
            nu_fit,
            a_used,
            eta_fit,
            residual: r,
            ..
        } = &mut self.outcome
        {
            *nu_fit = nu;
            *a_used = a;
            *eta_fit = eta;
            *r = residual;
        }
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub subject: String,
    pub conditions: Vec<Condition>,
    pub flags: Vec<String>,
}

impl EstimateReport {
    pub fn new(subject: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, c: Condition) {
        debug_assert!(
            self.conditions.iter().all(|o| o.name != c.name),
            "duplicate condition {}",
            c.name
        );
        self.conditions.push(c);
    }

    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// True when every exact condition passed.
    pub fn exact_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed().unwrap_or(true))
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }
}

/// Running maximum of `LHS / RHS`, kept in the log domain so that underflowing
/// right-hand sides still produce a comparable ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioFit {
    pub log_max: f64,
    pub witness: Option<Vec<usize>>,
    pub admissible: usize,
}

impl Default for RatioFit {
    fn default() -> Self {
        Self {
            log_max: f64::NEG_INFINITY,
            witness: None,
            admissible: 0,
        }
    }
}

impl RatioFit {
    /// Record `lhs / exp(log_rhs)`; `lhs == 0` counts as admissible with ratio 0.
    pub fn observe(&mut self, lhs: f64, log_rhs: f64, witness: &[usize]) {
        if !log_rhs.is_finite() && log_rhs > 0.0 {
            return;
        }
        self.admissible += 1;
        if lhs <= 0.0 {
            if self.witness.is_none() {
                self.witness = Some(witness.to_vec());
            }
            return;
        }
        let r = lhs.ln() - log_rhs;
        if r > self.log_max {
            self.log_max = r;
            self.witness = Some(witness.to_vec());
        }
    }

    /// Merge in index order; ties keep the earlier witness.
    pub fn merge(&mut self, other: RatioFit) {
        self.admissible += other.admissible;
        if other.log_max > self.log_max {
            self.log_max = other.log_max;
            self.witness = other.witness;
        } else if self.witness.is_none() {
            self.witness = other.witness;
        }
    }

    pub fn value(&self) -> f64 {
        if self.log_max == f64::NEG_INFINITY {
            0.0
        } else {
            self.log_max.exp()
        }
    }
}

pub fn merge_fits(parts: impl IntoIterator<Item = RatioFit>) -> RatioFit {
    let mut acc = RatioFit::default();
    for p in parts {
        acc.merge(p);
    }
    acc
}

/// Least-squares slope and intercept of `y` against `x` with RMS residual.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Some((slope, intercept, (rss / nf).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_fit_tracks_max_and_witness() {
        let mut f = RatioFit::default();
        f.observe(1.0, 0.0, &[0]);
        f.observe(3.0, 2f64.ln(), &[1]);
        f.observe(0.0, 0.0, &[2]);
        assert!((f.value() - 1.5).abs() < 1e-15);
        assert_eq!(f.witness, Some(vec![1]));
        assert_eq!(f.admissible, 3);
    }

    #[test]
    fn underflowed_rhs_gives_finite_log_ratio() {
        let mut f = RatioFit::default();
        f.observe(1e-10, -2000.0, &[0]);
        assert!(f.log_max.is_finite());
        assert!(f.value().is_infinite());
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (s, b, r) = linear_fit(&xs, &ys).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (b - 2.0).abs() < 1e-14 && r < 1e-14);
    }
}
