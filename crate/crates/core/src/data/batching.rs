use rand::seq::{index, SliceRandom};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// `batch_count` batches of `batch_size` indices into a dataset of `len`.
///
/// A uniform shuffle is cut into consecutive batches; once fewer than
/// `batch_size` indices remain, the leftovers are dropped and a fresh shuffle
/// continues the sequence. No index repeats while `batch_count * batch_size`
/// does not exceed `len`.
pub fn batch_indices(len: usize, batch_count: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 || batch_count == 0 {
        return Err(Error::invalid("batch size and batch count must be positive"));
    }
    if batch_size > len {
        return Err(Error::invalid(format!("batch size {batch_size} exceeds dataset size {len}")));
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut out = Vec::with_capacity(batch_count);
    for _ in 0..batch_count {
        if cursor + batch_size > len {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        out.push(order[cursor..cursor + batch_size].to_vec());
        cursor += batch_size;
    }
    Ok(out)
}

pub fn batches<T: Scalar>(
    dataset: &Dataset<T>,
    batch_count: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot batch an empty dataset"));
    }
    batch_indices(dataset.len(), batch_count, batch_size, seed)
}

/// Uniform draw of `min(count, len)` distinct indices, in draw order.
pub fn draw_indices(len: usize, count: usize, rng: &mut rng::Rng) -> Vec<usize> {
    index::sample(rng, len, count.min(len)).into_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_repeats_within_an_epoch() {
        let b = batch_indices(100, 3, 32, 1).unwrap();
        let mut all: Vec<usize> = b.concat();
        assert_eq!(all.len(), 96);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 96);
    }

    #[test]
    fn deterministic_and_reshuffles() {
        assert_eq!(batch_indices(50, 10, 8, 9).unwrap(), batch_indices(50, 10, 8, 9).unwrap());
        assert_ne!(batch_indices(50, 10, 8, 9).unwrap(), batch_indices(50, 10, 8, 10).unwrap());
        let long = batch_indices(10, 7, 4, 0).unwrap();
        assert_eq!(long.len(), 7);
        for batch in &long {
            let mut b = batch.clone();
            b.sort();
            b.dedup();
            assert_eq!(b.len(), 4);
        }
        assert!(batch_indices(3, 1, 4, 0).is_err());
    }

    proptest! {
        #[test]
        fn epochs_cover_every_index(len in 5usize..60, bs in 1usize..5, seed in any::<u64>()) {
            let bs = bs.min(len);
            let mut seen = vec![false; len];
            for epoch in 0..(20 * len) as u64 {
                for b in batch_indices(len, 1, bs, seed.wrapping_add(epoch)).unwrap() {
                    for i in b { seen[i] = true; }
                }
                if seen.iter().all(|&s| s) { break; }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
