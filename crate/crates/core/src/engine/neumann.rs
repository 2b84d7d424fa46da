use serde::{Deserialize, Serialize};

use super::norm::operator_norm_l2;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Power-iteration estimate of `‖R‖₂`.
    pub rho: f64,
    pub j_star: u32,
    /// `ρ^{j*+1} / (1 - ρ)`.
    pub tail_bound: f64,
    /// `‖T · inverse - I_mode‖₂`, measured.
    pub residual: f64,
    /// Residual attributable to rounding alone, `10³ ε ‖T‖ ‖inverse‖`.
    pub rounding_floor: f64,
    /// `residual ≤ 2 tail_bound + rounding_floor`.
    pub sound: bool,
}

#[derive(Clone, Debug)]
pub struct NeumannInverse<T> {
    pub inverse: Kernel<T>,
    pub certificate: Certificate,
}

/// Smallest `j` with `ρ^{j+1} / (1 - ρ) ≤ tol`.
pub fn terms_needed(rho: f64, tol: f64) -> u32 {
    if rho <= 0.0 {
        return 0;
    }
    let mut j = 0u32;
    while rho.powi(j as i32 + 1) / (1.0 - rho) > tol {
        j += 1;
    }
    j
}

/// `I_mode + R + … + R^{j*}` as an approximate inverse of `T = I_mode - R`.
///
/// `t` is only used to measure the residual.
pub fn neumann_invert<T: Scalar>(
    r: &Kernel<T>,
    t: &Kernel<T>,
    identity: &Kernel<T>,
    weights: &[T],
    tol: f64,
) -> Result<NeumannInverse<T>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let rho = operator_norm_l2(r, weights).value;
    if rho >= 1.0 || !rho.is_finite() {
        return Err(Error::Divergent { rho });
    }
    let j_star = terms_needed(rho, tol);
    let mut inv = identity.clone();
    if j_star > 0 {
        let mut pow = r.clone();
        inv.add_assign(&pow);
        for _ in 1..j_star {
            pow = pow.compose(r, weights);
            inv.add_assign(&pow);
        }
    }
    let tail_bound = if rho == 0.0 {
        0.0
    } else {
        rho.powi(j_star as i32 + 1) / (1.0 - rho)
    };
    let residual = operator_norm_l2(&t.compose(&inv, weights).sub(identity), weights).value;
    let rounding_floor = 1e3
        * T::epsilon().as_f64()
        * operator_norm_l2(t, weights).value.max(1.0)
        * operator_norm_l2(&inv, weights).value.max(1.0);
    Ok(NeumannInverse {
        inverse: inv,
        certificate: Certificate {
            rho,
            j_star,
            tail_bound,
            residual,
            rounding_floor,
            sound: residual <= 2.0 * tail_bound + rounding_floor,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn term_counts() {
        assert_eq!(terms_needed(0.5, 1e-6), 20);
        assert_eq!(terms_needed(0.0, 1e-6), 0);
    }
}
