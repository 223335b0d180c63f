//! Fixed-magnetization basis of the spin chain: all site-occupation
//! patterns with a given number of up spins.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Largest chain the basis enumeration will attempt.
pub const MAX_SITES: usize = 28;

/// Enumerated basis of the subspace with exactly `n_up` up spins on
/// `n_sites` sites. Patterns are bitmasks (bit i set = site i occupied),
/// stored in increasing numeric order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinSector {
    pub n_sites: usize,
    pub n_up: usize,
    states: Vec<u32>,
}

/// Binomial coefficient as u64, with overflow guard.
fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u64)?;
        acc /= (i + 1) as u64;
    }
    Some(acc)
}

impl SpinSector {
    pub fn new(n_sites: usize, n_up: usize) -> Result<Self> {
        if n_up > n_sites {
            return Err(CoreError::Config(format!(
                "cannot place {n_up} up spins on {n_sites} sites"
            )));
        }
        if n_sites > MAX_SITES {
            return Err(CoreError::Config(format!(
                "{n_sites} sites exceeds the {MAX_SITES}-site memory guard"
            )));
        }
        let expected = binomial(n_sites, n_up)
            .ok_or_else(|| CoreError::Config("sector size overflows".into()))? as usize;
        let mut states = Vec::with_capacity(expected);
        if n_up == 0 {
            states.push(0);
        } else {
            // Gosper's hack: next integer with the same popcount.
            let mut s: u32 = (1u32 << n_up) - 1;
            let limit: u32 = if n_sites == 32 { u32::MAX } else { (1u32 << n_sites) - 1 };
            loop {
                states.push(s);
                let c = s & s.wrapping_neg();
                let r = s + c;
                let next = (((r ^ s) >> 2) / c) | r;
                if next > limit || c == 0 {
                    break;
                }
                s = next;
            }
        }
        debug_assert_eq!(states.len(), expected);
        Ok(Self { n_sites, n_up, states })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Position of a pattern in the basis.
    pub fn index_of(&self, pattern: u32) -> Option<usize> {
        self.states.binary_search(&pattern).ok()
    }

    /// Spin value σᶻ = ±1 of `site` in basis state `index`.
    pub fn spin(&self, index: usize, site: usize) -> f64 {
        if (self.states[index] >> site) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Pattern of ±1 spins for a basis state.
    pub fn spins(&self, index: usize) -> Vec<i8> {
        (0..self.n_sites)
            .map(|i| if (self.states[index] >> i) & 1 == 1 { 1 } else { -1 })
            .collect()
    }

    /// Basis index of a ±1 pattern, if it lies in this sector.
    pub fn index_of_pattern(&self, pattern: &[i8]) -> Result<usize> {
        if pattern.len() != self.n_sites {
            return Err(CoreError::Validation(format!(
                "pattern length {} does not match {} sites",
                pattern.len(),
                self.n_sites
            )));
        }
        let mut bits: u32 = 0;
        for (i, &s) in pattern.iter().enumerate() {
            match s {
                1 => bits |= 1 << i,
                -1 => {}
                other => {
                    return Err(CoreError::Validation(format!(
                        "pattern entries must be ±1, got {other}"
                    )))
                }
            }
        }
        self.index_of(bits).ok_or_else(|| {
            CoreError::Validation(format!(
                "pattern has {} up spins, sector holds {}",
                bits.count_ones(),
                self.n_up
            ))
        })
    }
}
