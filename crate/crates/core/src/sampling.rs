//! Participant selection with prescribed inclusion probabilities.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{unit_interval, Error, Result};

/// Draws exactly `n` distinct devices such that device `k` is included
/// with probability `inclusion[k]`.
///
/// Systematic PPS sampling over a uniformly random device order: the unit
/// intervals of the cumulated probabilities are hit by the points
/// `u, u + 1, …, u + n - 1` for one uniform `u`. Since every `r_k <= 1`,
/// no device is hit twice. Returned indices are sorted.
pub fn sample_participants<R: Rng + ?Sized>(
    inclusion: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    for &r in inclusion {
        unit_interval("inclusion probability", r)?;
    }
    let sum: f64 = inclusion.iter().sum();
    if n == 0 || (sum - n as f64).abs() > 1e-9 {
        return Err(Error::InclusionSum { sum, expected: n });
    }
    let k = inclusion.len();
    if n == k {
        return Ok((0..k).collect());
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    let u: f64 = rng.random();

    let mut chosen = Vec::with_capacity(n);
    let mut next = u;
    let mut upper = 0.0;
    for (pos, &dev) in order.iter().enumerate() {
        upper = if pos + 1 == k {
            n as f64
        } else {
            upper + inclusion[dev]
        };
        if chosen.len() < n && next < upper {
            chosen.push(dev);
            next += 1.0;
        }
    }
    debug_assert_eq!(chosen.len(), n);
    chosen.sort_unstable();
    Ok(chosen)
}
