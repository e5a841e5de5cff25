//! Counts of permutations of `{1, …, r−1}` by their pattern of consecutive
//! inversions.

use crate::error::{Error, Result};
use crate::par;

pub const MAX_DELTA_ORDER: usize = 12;

/// `Δ_{r,γ}` for every binary `γ = (γ₂, …, γ_{r−1})`, indexed by the integer
/// whose most significant bit is `γ₂`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescentTable {
    order: usize,
    counts: Vec<u64>,
}

impl DescentTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of pattern bits, `r − 2`.
    pub fn bits(&self) -> usize {
        self.order - 2
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    /// Looks up a pattern given as a slice of 0/1 values starting at `γ₂`.
    pub fn get(&self, gamma: &[u8]) -> Option<u64> {
        if gamma.len() != self.bits() || gamma.iter().any(|&g| g > 1) {
            return None;
        }
        let idx = gamma.iter().fold(0usize, |acc, &g| (acc << 1) | g as usize);
        Some(self.counts[idx])
    }

    /// The pattern of `index` as a string of `0`/`1`, `γ₂` first.
    pub fn gamma_bits(&self, index: usize) -> String {
        (0..self.bits())
            .rev()
            .map(|b| if index >> b & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Checks `Σ_γ Δ = (r−1)!` and `Δ_γ = Δ_{𝟙−γ}`.
    pub fn certify(&self) -> Result<()> {
        let expect = factorial(self.order - 1);
        if self.total() != expect {
            return Err(Error::CertificateViolation {
                what: "descent counts sum to (r-1)!",
                residual: self.total().abs_diff(expect) as f64,
            });
        }
        let mask = self.counts.len() - 1;
        for (idx, &c) in self.counts.iter().enumerate() {
            if c != self.counts[!idx & mask] {
                return Err(Error::CertificateViolation {
                    what: "descent count complement symmetry",
                    residual: c.abs_diff(self.counts[!idx & mask]) as f64,
                });
            }
        }
        Ok(())
    }

    /// `(gamma_bits, count)` rows in index order.
    pub fn rows(&self) -> impl Iterator<Item = (String, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(idx, &c)| (self.gamma_bits(idx), c))
    }
}

pub fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

fn extend(last: usize, used: u32, len: usize, target: usize, pattern: usize, counts: &mut [u64]) {
    if len == target {
        counts[pattern] += 1;
        return;
    }
    for next in 0..target {
        if used >> next & 1 == 0 {
            let bit = usize::from(last > next);
            extend(next, used | 1 << next, len + 1, target, pattern << 1 | bit, counts);
        }
    }
}

/// Exhaustive enumeration of the `(r−1)!` permutations, split over the first
/// element.
pub fn delta_table(r: usize) -> Result<DescentTable> {
    if r > MAX_DELTA_ORDER {
        return Err(Error::OrderTooLarge {
            order: r,
            max: MAX_DELTA_ORDER,
        });
    }
    if r < 2 {
        return Err(Error::InvalidArgument(format!("order must be at least 2, got {r}")));
    }
    let len = r - 1;
    let size = 1usize << (r - 2);
    let partial = par::map_range(len, |first| {
        let mut counts = vec![0u64; size];
        extend(first, 1 << first, 1, len, 0, &mut counts);
        counts
    });
    let mut counts = vec![0u64; size];
    for part in partial {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let table = DescentTable { order: r, counts };
    table.certify()?;
    Ok(table)
}
