use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Yields index lists of at most `batch_size` samples. Sequential mode walks
/// the source in order and visits every sample exactly once.
#[derive(Debug, Clone)]
pub struct BatchIterator {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl BatchIterator {
    pub fn sequential(len: usize, batch_size: usize) -> Self {
        BatchIterator {
            order: (0..len).collect(),
            batch_size: batch_size.max(1),
            cursor: 0,
        }
    }

    pub fn shuffled(len: usize, batch_size: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        BatchIterator {
            order,
            batch_size: batch_size.max(1),
            cursor: 0,
        }
    }

    pub fn batch_count(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let out = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(out)
    }
}

/// Contiguous ranges covering `0..len` in temporal order.
pub fn sequential_batches(len: usize, batch_size: usize) -> impl Iterator<Item = Range<usize>> {
    let b = batch_size.max(1);
    (0..len.div_ceil(b)).map(move |k| k * b..((k + 1) * b).min(len))
}
