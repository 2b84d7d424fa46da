use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kernel::{fixed_sum, Kernel};
use crate::sampling::rng;
use crate::scalar::Scalar;

const POWER_TOL: f64 = 1e-10;
const POWER_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `L²(μ)` operator norm of `f ↦ Σ_y K(x,y) f(y) w_y`.
///
/// In the coordinates `g = w^{1/2} f` the operator is the matrix
/// `M = W^{1/2} K W^{1/2}`; its largest singular value is found by power
/// iteration on `MᵀM` from a fixed pseudo-random start. The loop is
/// sequential and accumulates in index order.
pub fn operator_norm_l2<T: Scalar>(k: &Kernel<T>, weights: &[T]) -> NormEstimate {
    let n = k.n();
    let sw: Vec<f64> = weights.iter().map(|w| w.as_f64().sqrt()).collect();
    let m: Vec<f64> = (0..n * n)
        .map(|i| sw[i / n] * k.data()[i].as_f64() * sw[i % n])
        .collect();
    if n == 0 || m.iter().all(|&v| v == 0.0) {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut r = rng(0x5EED, 0);
    let mut v: Vec<f64> = (0..n).map(|_| 0.5 + r.gen::<f64>()).collect();
    normalize(&mut v);
    let mut sigma2 = 0.0f64;
    let mut mv = vec![0.0; n];
    let mut w = vec![0.0; n];
    for it in 1..=POWER_CAP {
        for i in 0..n {
            mv[i] = fixed_sum(m[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b));
        }
        w.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let c = mv[i];
            for (wj, a) in w.iter_mut().zip(&m[i * n..(i + 1) * n]) {
                *wj += a * c;
            }
        }
        // Rayleigh quotient of MᵀM at the unit vector v
        let next = fixed_sum(v.iter().zip(&w).map(|(a, b)| a * b));
        let norm_w = fixed_sum(w.iter().map(|x| x * x)).sqrt();
        if norm_w == 0.0 {
            return NormEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm_w);
        if (next - sigma2).abs() <= POWER_TOL * next.abs() * 0.5 {
            return NormEstimate {
                value: next.max(0.0).sqrt(),
                iterations: it,
                converged: true,
            };
        }
        sigma2 = next;
    }
    NormEstimate {
        value: sigma2.max(0.0).sqrt(),
        iterations: POWER_CAP,
        converged: false,
    }
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}
