//! Classical bound of the symmetric Bell inequality.
//!
//! A local model assigns each party a pair of outcomes `(e_i, f_i)` for its
//! two settings, possibly at random through a shared variable. The
//! inequality is linear in the joint distribution, so its minimum over all
//! local models is attained at a deterministic assignment. The value of a
//! deterministic assignment depends only on how many parties chose each of
//! the four outcome pairs, which reduces the search from `4^N` assignments
//! to `(N+3 choose 3)` count tuples.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Largest `N` accepted by [`brute_force_min`].
pub const BRUTE_FORCE_MAX: usize = 10;

/// Numbers of parties answering `(+,+)`, `(+,-)`, `(-,+)`, `(-,-)` for
/// settings `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub counts: [u64; 4],
}

impl DeterministicStrategy {
    pub fn new(counts: [u64; 4]) -> Result<Self> {
        if counts.iter().sum::<u64>() == 0 {
            return Err(invalid("strategy needs at least one party"));
        }
        Ok(DeterministicStrategy { counts })
    }

    pub fn n_parties(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Value of the inequality's left-hand side for a strategy of `n_atoms`
/// parties.
pub fn strategy_value(s: &DeterministicStrategy, n_atoms: u64) -> Result<i64> {
    if s.n_parties() != n_atoms || n_atoms == 0 {
        return Err(invalid(format!(
            "counts {:?} sum to {}, expected {}",
            s.counts,
            s.n_parties(),
            n_atoms
        )));
    }
    Ok(value_of_counts(s.counts.map(|c| c as i64)))
}

fn value_of_counts([pp, pm, mp, mm]: [i64; 4]) -> i64 {
    let n = pp + pm + mp + mm;
    let e = pp + pm - mp - mm;
    let f = pp - pm + mp - mm;
    let x = pp - pm - mp + mm;
    // E² ≡ F² ≡ N (mod 2), so both halves are exact
    2 * e + (e * e - n) / 2 + (e * f - x) + (f * f - n) / 2 + 2 * n
}

/// Minimum over all count tuples together with a minimising strategy.
pub fn classical_min(n_atoms: u64) -> Result<(i64, DeterministicStrategy)> {
    if n_atoms == 0 {
        return Err(invalid("need at least one party"));
    }
    let n = n_atoms as i64;
    let mut best = (i64::MAX, [0i64; 4]);
    for pp in 0..=n {
        for pm in 0..=n - pp {
            for mp in 0..=n - pp - pm {
                let counts = [pp, pm, mp, n - pp - pm - mp];
                let v = value_of_counts(counts);
                if v < best.0 {
                    best = (v, counts);
                }
            }
        }
    }
    Ok((best.0, DeterministicStrategy { counts: best.1.map(|c| c as u64) }))
}

/// Minimum over all `4^N` party-by-party assignments, evaluating the
/// correlator sums directly.
pub fn brute_force_min(n_atoms: usize) -> Result<(i64, DeterministicStrategy)> {
    if n_atoms == 0 {
        return Err(invalid("need at least one party"));
    }
    if n_atoms > BRUTE_FORCE_MAX {
        return Err(Error::ResourceLimit(format!(
            "brute force is limited to {BRUTE_FORCE_MAX} parties, got {n_atoms}"
        )));
    }
    let n = n_atoms;
    let mut best = (i64::MAX, [0u64; 4]);
    let mut e = vec![0i64; n];
    let mut f = vec![0i64; n];
    for code in 0u64..(1u64 << (2 * n)) {
        for i in 0..n {
            let pair = (code >> (2 * i)) & 3;
            e[i] = if pair & 1 == 0 { 1 } else { -1 };
            f[i] = if pair & 2 == 0 { 1 } else { -1 };
        }
        let (mut s0, mut s00, mut s01, mut s11) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            s0 += e[i];
            for j in 0..n {
                if i != j {
                    s00 += e[i] * e[j];
                    s01 += e[i] * f[j];
                    s11 += f[i] * f[j];
                }
            }
        }
        let v = 2 * s0 + s00 / 2 + s01 + s11 / 2 + 2 * n as i64;
        if v < best.0 {
            let mut counts = [0u64; 4];
            for i in 0..n {
                let k = match (e[i], f[i]) {
                    (1, 1) => 0,
                    (1, _) => 1,
                    (_, 1) => 2,
                    _ => 3,
                };
                counts[k] += 1;
            }
            best = (v, counts);
        }
    }
    Ok((best.0, DeterministicStrategy { counts: best.1 }))
}
