//! Binary packings with large pairwise Hamming distance, grown greedily from
//! seeded random candidates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Longest word supported (one machine word per codeword).
pub const MAX_CODE_LEN: usize = 64;
pub const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VGCode {
    pub m: usize,
    pub d: usize,
    /// Word length `m^d`.
    pub len: usize,
    /// Required pairwise distance `⌈m^d / 8⌉`.
    pub min_distance: u32,
    /// Words stored as bit sets; bit `i` is cell `i` (row-major grid order).
    pub codewords: Vec<u64>,
    /// Count the construction aimed for, `2^⌈m^d / 8⌉`.
    pub target_count: usize,
    /// Candidates rejected before stopping.
    pub rejections: usize,
}

impl VGCode {
    /// Greedy construction: draw uniform random words and keep each one
    /// whose distance to every accepted word is at least `⌈m^d/8⌉`; stop at
    /// `2^⌈m^d/8⌉` words or after a million rejections.
    pub fn greedy<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Result<Self> {
        let len = m.checked_pow(d as u32).filter(|l| (1..=MAX_CODE_LEN).contains(l));
        let Some(len) = len else {
            return invalid(format!("m^d must lie in 1..={MAX_CODE_LEN} (m = {m}, d = {d})"));
        };
        let min_distance = len.div_ceil(8) as u32;
        let target_count = 1usize << len.div_ceil(8);
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        let mut codewords: Vec<u64> = Vec::with_capacity(target_count);
        let mut rejections = 0;
        while codewords.len() < target_count && rejections < MAX_REJECTIONS {
            let w = rng.random::<u64>() & mask;
            if codewords.iter().all(|&c| (c ^ w).count_ones() >= min_distance) {
                codewords.push(w);
            } else {
                rejections += 1;
            }
        }
        Ok(Self { m, d, len, min_distance, codewords, target_count, rejections })
    }

    pub fn len_words(&self) -> usize {
        self.codewords.len()
    }

    pub fn reached_target(&self) -> bool {
        self.codewords.len() >= self.target_count
    }

    /// Word `i` as a vector of cell indicators.
    pub fn omega(&self, i: usize) -> Vec<bool> {
        let w = self.codewords[i];
        (0..self.len).map(|b| (w >> b) & 1 == 1).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> u32 {
        (self.codewords[i] ^ self.codewords[j]).count_ones()
    }

    /// Smallest pairwise distance (exhaustive); `None` with fewer than two words.
    pub fn min_pairwise_distance(&self) -> Option<u32> {
        let n = self.codewords.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.distance(i, j)).min()
    }
}
