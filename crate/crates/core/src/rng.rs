//! Counter-based random streams addressed by a path.
//!
//! Every random decision in the library draws from a [`RandomStream`] keyed by
//! `(seed, layer, index, purpose)`. The seed fixes a ChaCha key and the path
//! selects one of its 2^64 independent streams, so sibling streams can be
//! consumed in any order, on any thread, without changing each other's output.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// What a stream is used for. Part of the stream path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    FeatureSelection = 1,
    CenterSampling = 2,
    PcaInit = 3,
    KMeans = 4,
    Shuffle = 5,
    Dropout = 6,
    WeightInit = 7,
    MonteCarlo = 8,
    Subset = 9,
    General = 10,
}

/// A value-like handle on one reproducible random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    layer: u32,
    index: u32,
    purpose: Purpose,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            layer: 0,
            index: 0,
            purpose: Purpose::General,
        }
    }

    /// The stream at an explicit path under the same seed.
    pub fn at(&self, layer: u32, index: u32, purpose: Purpose) -> Self {
        Self {
            seed: self.seed,
            layer,
            index,
            purpose,
        }
    }

    pub fn with_layer(&self, layer: u32) -> Self {
        Self { layer, ..*self }
    }

    pub fn with_index(&self, index: u32) -> Self {
        Self { index, ..*self }
    }

    pub fn with_purpose(&self, purpose: Purpose) -> Self {
        Self { purpose, ..*self }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }

    /// 64-bit ChaCha stream id: 24 bits of layer, 32 bits of index, 8 bits of purpose.
    fn stream_id(&self) -> u64 {
        ((self.layer as u64 & 0xFF_FFFF) << 40) | ((self.index as u64) << 8) | self.purpose as u64
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id());
        rng
    }
}

/// Draws `m` distinct indices from `0..population` by partial Fisher–Yates.
///
/// The result keeps draw order. Large draws run over an explicit index array,
/// small ones over a sparse swap map; both produce the same sequence.
pub fn subsample_without_replacement(
    stream: &RandomStream,
    population: usize,
    m: usize,
) -> Result<Vec<usize>> {
    if m > population {
        return Err(invalid(format!(
            "cannot draw {m} distinct items from a population of {population}"
        )));
    }
    let mut rng = stream.rng();
    Ok(draw_distinct(&mut rng, population, m))
}

pub(crate) fn draw_distinct<R: Rng>(rng: &mut R, population: usize, m: usize) -> Vec<usize> {
    debug_assert!(m <= population);
    if m.saturating_mul(8) >= population {
        let mut pool: Vec<usize> = (0..population).collect();
        for i in 0..m {
            let j = rng.random_range(i..population);
            pool.swap(i, j);
        }
        pool.truncate(m);
        pool
    } else {
        let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * m);
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let j = rng.random_range(i..population);
            let at_j = *swapped.get(&j).unwrap_or(&j);
            let at_i = *swapped.get(&i).unwrap_or(&i);
            swapped.insert(j, at_i);
            out.push(at_j);
        }
        out
    }
}
