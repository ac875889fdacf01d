//! Intensity estimates from point configurations.

use crate::cluster::PointConfiguration;

/// `count / length` over `window`, with the block-bootstrap standard error
/// over `blocks` equal blocks. The bootstrap variance of a mean of
/// resampled blocks is available in closed form, so no resampling is drawn.
pub fn estimate_intensity(points: &PointConfiguration, window: (f64, f64), blocks: usize) -> (f64, f64) {
    let (lo, hi) = window;
    assert!(hi > lo, "window length must be positive");
    let blocks = blocks.max(1);
    let len = hi - lo;
    let count = points.count_in(lo, hi);
    if count == 0 {
        return (0.0, 0.0);
    }
    let width = len / blocks as f64;
    let counts: Vec<f64> = (0..blocks)
        .map(|i| {
            let a = lo + i as f64 * width;
            let b = if i + 1 == blocks { hi } else { a + width };
            // Half-open blocks, the last one closed.
            let c = points.count_in(a, b) - if i + 1 == blocks { 0 } else { points.count_in(b, b) };
            c as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / blocks as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / blocks as f64;
    let se = (var / blocks as f64).sqrt() / width;
    (count as f64 / len, se)
}

/// Pooled intensity `Σ counts / Σ lengths` over disjoint windows.
pub fn pool_intensity(parts: &[(usize, f64)]) -> f64 {
    let count: usize = parts.iter().map(|p| p.0).sum();
    let len: f64 = parts.iter().map(|p| p.1).sum();
    if len > 0.0 {
        count as f64 / len
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        let p = PointConfiguration::empty(0.0, 10.0, 0.0);
        assert_eq!(estimate_intensity(&p, (0.0, 10.0), 10), (0.0, 0.0));
    }

    #[test]
    fn evenly_spread_points_have_zero_spread() {
        let pts: Vec<f64> = (0..100).map(|i| i as f64 + 0.5).collect();
        let p = PointConfiguration::from_points(pts, 0.0, 100.0, 0.0);
        let (l, se) = estimate_intensity(&p, (0.0, 100.0), 10);
        assert_eq!(l, 1.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn boundary_points_counted_once() {
        let pts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let p = PointConfiguration::from_points(pts, 0.0, 10.0, 0.0);
        let (l, _) = estimate_intensity(&p, (0.0, 10.0), 5);
        assert_eq!(l, 1.1);
    }

    #[test]
    fn pooled_is_count_weighted() {
        assert_eq!(pool_intensity(&[(10, 5.0), (30, 15.0)]), 2.0);
        assert_eq!(pool_intensity(&[]), 0.0);
    }
}
