//! Counter-based Gaussian generation.
//!
//! Every sheet cell draws from its own stream, keyed by `(seed, time index,
//! space index)`. A cell's value therefore never depends on iteration order,
//! on which sub-grid is generated, or on how ensemble members are scheduled
//! across threads.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

const SEED_SALT: u64 = 0x243F_6A88_85A3_08D3;
const ROW_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const COL_MUL: u64 = 0x9E37_79B9_7F4A_7C15;
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key shared by all cells of time row `n`.
#[inline]
pub fn row_key(seed: u64, n: usize) -> u64 {
    let base = mix64(seed ^ SEED_SALT);
    mix64(base ^ (n as u64).wrapping_add(1).wrapping_mul(ROW_MUL))
}

/// Key of a single cell; `j` may be negative or beyond the grid edge.
#[inline]
pub fn cell_key(row: u64, j: i64) -> u64 {
    mix64(row ^ (j as u64).wrapping_add(1).wrapping_mul(COL_MUL))
}

/// SplitMix64 stream started at a cell key.
#[derive(Debug, Clone)]
pub struct CellStream {
    state: u64,
}

impl CellStream {
    pub fn new(key: u64) -> Self {
        Self { state: key }
    }
}

impl RngCore for CellStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Standard normal draw for cell `(n, j)` under `seed`.
#[inline]
pub fn standard_normal(seed: u64, n: usize, j: i64) -> f64 {
    normal_from_row(row_key(seed, n), j)
}

#[inline]
pub(crate) fn normal_from_row(row: u64, j: i64) -> f64 {
    let mut stream = CellStream::new(cell_key(row, j));
    StandardNormal.sample(&mut stream)
}
