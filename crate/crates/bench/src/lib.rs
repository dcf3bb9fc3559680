//! Synthetic aerial-like label frames for benchmarks.

use landrisk::{ClassId, LabelMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Blocky label map: a grass/paved background with scattered rectangles of
/// other classes, loosely resembling an urban scene seen from above.
pub fn synthetic_frame(width: usize, height: usize, n_classes: u8, seed: u64) -> LabelMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = vec![2u8; width * height];
    for _ in 0..(width * height / 4000).max(1) {
        let class = rng.gen_range(0..n_classes);
        let w = rng.gen_range(1..=width.min(64));
        let h = rng.gen_range(1..=height.min(64));
        let x0 = rng.gen_range(0..=width - w);
        let y0 = rng.gen_range(0..=height - h);
        for y in y0..y0 + h {
            ids[y * width + x0..y * width + x0 + w].fill(class);
        }
    }
    LabelMap::from_vec(width, height, ids.into_iter().map(ClassId).collect()).expect("valid shape")
}
