//! Shared fixtures for the benchmark suite.

use markpp::{Mark, MarkSpace, MarkedPattern, MarkedPoint, Point, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible two-mark pattern of `n` uniform points on the unit
/// window, marks alternating by index.
pub fn uniform_pattern(n: usize, seed: u64) -> MarkedPattern {
    let window = Window::unit();
    let ms = MarkSpace::counting(&["a", "b"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<MarkedPoint> = (0..n)
        .map(|i| MarkedPoint {
            loc: Point::new(rng.random(), rng.random()),
            mark: Mark(i % 2),
        })
        .collect();
    MarkedPattern::new(window, ms, points).unwrap()
}
