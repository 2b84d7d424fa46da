//! Deterministic work lists for audits and chunked parallel reductions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{Census, RatioFit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditBudget {
    /// Enumerate every configuration when the space has at most this many points.
    pub exhaustive_n: usize,
    /// Number of seeded samples otherwise.
    pub samples: usize,
    pub seed: u64,
}

impl Default for AuditBudget {
    fn default() -> Self {
        Self {
            exhaustive_n: 128,
            samples: 100_000,
            seed: 0,
        }
    }
}

impl AuditBudget {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A list of index tuples, either the full product `0..n` to the `K` or a
/// seeded sample generated up front.
#[derive(Clone, Debug)]
pub struct TupleList<const K: usize> {
    n: usize,
    sampled: Option<Vec<[u32; K]>>,
    seed: u64,
}

impl<const K: usize> TupleList<K> {
    pub fn plan(n: usize, budget: &AuditBudget, stream: u64) -> Self {
        let total = (n as u128).pow(K as u32);
        if n <= budget.exhaustive_n || total <= budget.samples as u128 {
            return Self {
                n,
                sampled: None,
                seed: budget.seed,
            };
        }
        let mut r = rng(budget.seed, stream);
        let items = (0..budget.samples)
            .map(|_| std::array::from_fn(|_| r.gen_range(0..n) as u32))
            .collect();
        Self {
            n,
            sampled: Some(items),
            seed: budget.seed,
        }
    }

    pub fn exhaustive(n: usize) -> Self {
        Self {
            n,
            sampled: None,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        match &self.sampled {
            Some(v) => v.len(),
            None => self.n.pow(K as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exhaustive(&self) -> bool {
        self.sampled.is_none()
    }

    pub fn get(&self, i: usize) -> [usize; K] {
        match &self.sampled {
            Some(v) => v[i].map(|x| x as usize),
            None => {
                let mut out = [0usize; K];
                let mut rem = i;
                for slot in out.iter_mut().rev() {
                    *slot = rem % self.n;
                    rem /= self.n;
                }
                out
            }
        }
    }

    pub fn census(&self, evaluated: usize, admissible: usize) -> Census {
        Census {
            evaluated,
            admissible,
            exhaustive: self.is_exhaustive(),
            seed: self.seed,
        }
    }
}

const CHUNK: usize = 1024;

/// Run `f(i, fits)` for `i in 0..len`, reducing `nfits` ratio maxima.
///
/// Work is split into fixed-size chunks merged in chunk order, so the result
/// equals the sequential one for any thread count.
pub fn par_fits<F>(len: usize, nfits: usize, f: F) -> Vec<RatioFit>
where
    F: Fn(usize, &mut [RatioFit]) + Sync,
{
    let nchunks = len.div_ceil(CHUNK);
    let parts: Vec<Vec<RatioFit>> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut fits = vec![RatioFit::default(); nfits];
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                f(i, &mut fits);
            }
            fits
        })
        .collect();
    let mut acc = vec![RatioFit::default(); nfits];
    for part in parts {
        for (a, p) in acc.iter_mut().zip(part) {
            a.merge(p);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_decoding_is_lexicographic() {
        let t = TupleList::<3>::exhaustive(4);
        assert_eq!(t.len(), 64);
        assert_eq!(t.get(0), [0, 0, 0]);
        assert_eq!(t.get(1), [0, 0, 1]);
        assert_eq!(t.get(4 * 4 * 2 + 4 + 3), [2, 1, 3]);
    }

    #[test]
    fn sampled_plan_is_seeded() {
        let b = AuditBudget {
            exhaustive_n: 2,
            samples: 50,
            seed: 9,
        };
        let a = TupleList::<3>::plan(10, &b, 1);
        let c = TupleList::<3>::plan(10, &b, 1);
        assert!(!a.is_exhaustive());
        assert_eq!(a.len(), 50);
        for i in 0..50 {
            assert_eq!(a.get(i), c.get(i));
        }
    }

    #[test]
    fn par_fits_matches_sequential() {
        let vals: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 1000) as f64).collect();
        let fits = par_fits(vals.len(), 1, |i, f| f[0].observe(vals[i], 0.0, &[i]));
        let mut seq = RatioFit::default();
        for (i, &v) in vals.iter().enumerate() {
            seq.observe(v, 0.0, &[i]);
        }
        assert_eq!(fits[0], seq);
    }
}
