//! Identity splits, Neumann inversion and the reproducing formulae.

mod auto;
mod continuous;
mod decay;
mod discrete;
mod inhomogeneous;
mod neumann;
mod norm;
mod probes;
mod split;

/// Entrywise tolerance for the algebraic splits: `1e-8` in double precision,
/// the scalar's identity tolerance when that is looser.
pub(crate) fn split_tol<T: crate::Scalar>() -> f64 {
    T::IDENTITY_TOL.max(1e-8)
}

pub use auto::{choose_discrete, choose_inhomogeneous, choose_n, AutoChoice, AUTO_RHO};
pub use continuous::{homogeneous_crf, ContinuousVariant};
pub use decay::{decay_study, DecayQuantity, DecayStudyParams, DecayTable, ROUNDING_ZERO};
pub use discrete::{
    discrete_crf, discrete_crf_with, discrete_split, discrete_split_with, DiscreteRun, DiscreteSplit, Side, Variant,
};
pub use inhomogeneous::{
    inhomogeneous_crf, inhomogeneous_crf_with, inhomogeneous_split, InhomogeneousRun, InhomogeneousSplit,
};
pub use neumann::{neumann_invert, terms_needed, Certificate, NeumannInverse};
pub use norm::{operator_norm_l2, NormEstimate};
pub use probes::{reconstruction_errors, Probe, ProbeParams, ProbeSet, ReconstructionReport, P_VALUES};
pub use split::{split_identity, split_identity_with, IdentitySplit, ProductTable};

use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::report::EstimateReport;

/// Reconstruction kernels of one reproducing formula plus its certificate.
#[derive(Clone, Debug)]
pub struct DualFamily<T> {
    pub variant: String,
    /// `(family index, kernel)` in level order.
    pub levels: Vec<(i32, Kernel<T>)>,
    /// Assembled reconstruction operator; equals `I_mode` up to the certificate.
    pub synthesis: Kernel<T>,
    pub certificate: Certificate,
}

/// Outcome of one reproducing-formula run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormulaReport {
    pub variant: String,
    pub n_window: u32,
    pub j0: Option<u32>,
    pub sampler: Option<String>,
    pub certificate: Certificate,
    pub synthesis_norm: f64,
    pub reconstruction: ReconstructionReport,
    pub audits: Vec<EstimateReport>,
}
