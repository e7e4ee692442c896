use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Seeded shuffled split of `0..n` into (train, test) index lists, each sorted
/// ascending. `|train| = round(ratio · n)`.
pub fn train_test_split(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::validation(
            "split ratio",
            format!("{ratio} must lie in (0, 1)"),
        ));
    }
    let n_train = libm::round(ratio * n as f64) as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::validation(
            "split ratio",
            format!("{ratio} leaves an empty side for n = {n}"),
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut idx);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
