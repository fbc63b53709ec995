use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// Cell indices hidden at `ratio`, in row-major order. For a fixed seed the
/// masks are nested: a larger ratio hides a superset of cells.
pub fn mask_indices(cells: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!(
            "mask ratio must be in [0, 1), got {ratio}"
        )));
    }
    let count = (ratio * cells as f64).round() as usize;
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut hidden = order[..count].to_vec();
    hidden.sort_unstable();
    Ok(hidden)
}

/// Replaces `round(ratio * T * C)` uniformly chosen cells with `fill`.
pub fn mask_missing_with(x: &SeriesFrame, ratio: f64, seed: u64, fill: f64) -> Result<SeriesFrame> {
    let mut out = x.clone();
    for i in mask_indices(x.data().len(), ratio, seed)? {
        out.data_mut()[i] = fill;
    }
    Ok(out)
}

/// [`mask_missing_with`] filling zeros (the channel mean after z-scoring).
pub fn mask_missing(x: &SeriesFrame, ratio: f64, seed: u64) -> Result<SeriesFrame> {
    mask_missing_with(x, ratio, seed, 0.0)
}
