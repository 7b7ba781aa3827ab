//! Deterministic synthetic grayscale scenes for desk-scale training and tests.
//!
//! Each scene is a smooth background gradient overlaid with a few soft-edged ellipses
//! and rectangles, so it has both flat regions and edges for a denoiser to learn from.

use crate::imaging::Image;
use crate::noise::{Seed, Stream};

enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64 },
    Rect { top: f64, left: f64, bottom: f64, right: f64 },
}

struct Layer {
    shape: Shape,
    level: f64,
    softness: f64,
}

impl Layer {
    /// Coverage in [0, 1], smoothed over roughly `softness` pixels at the boundary.
    fn coverage(&self, y: f64, x: f64) -> f64 {
        let signed = match self.shape {
            Shape::Ellipse { cy, cx, ry, rx } => {
                let r = (((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2)).sqrt();
                (1.0 - r) * ry.min(rx)
            }
            Shape::Rect { top, left, bottom, right } => (y - top).min(bottom - y).min(x - left).min(right - x),
        };
        (0.5 + signed / self.softness).clamp(0.0, 1.0)
    }
}

/// One scene of size `height x width` with values in `[0, 1]`.
pub fn scene(height: usize, width: usize, rng: &mut Stream) -> Image {
    let (h, w) = (height as f64, width as f64);
    let base = 0.2 + 0.5 * rng.uniform();
    let gy = (rng.uniform() - 0.5) * 0.4;
    let gx = (rng.uniform() - 0.5) * 0.4;
    let count = 3 + rng.below(4);
    let layers: Vec<Layer> = (0..count)
        .map(|_| {
            let shape = if rng.coin() {
                Shape::Ellipse {
                    cy: rng.uniform() * h,
                    cx: rng.uniform() * w,
                    ry: (0.08 + 0.25 * rng.uniform()) * h,
                    rx: (0.08 + 0.25 * rng.uniform()) * w,
                }
            } else {
                let (y0, x0) = (rng.uniform() * h, rng.uniform() * w);
                Shape::Rect {
                    top: y0,
                    left: x0,
                    bottom: y0 + (0.15 + 0.4 * rng.uniform()) * h,
                    right: x0 + (0.15 + 0.4 * rng.uniform()) * w,
                }
            };
            Layer {
                shape,
                level: 0.05 + 0.9 * rng.uniform(),
                softness: 1.0 + 2.0 * rng.uniform(),
            }
        })
        .collect();
    Image::from_fn(height, width, |y, x| {
        let (fy, fx) = (y as f64, x as f64);
        let mut v = base + gy * (fy / h - 0.5) + gx * (fx / w - 0.5);
        for layer in &layers {
            let a = layer.coverage(fy, fx);
            v = (1.0 - a) * v + a * layer.level;
        }
        v.clamp(0.0, 1.0)
    })
}

/// `count` scenes; scene `i` depends only on `(seed, i)`.
pub fn scenes(count: usize, height: usize, width: usize, seed: Seed) -> Vec<Image> {
    (0..count)
        .map(|i| scene(height, width, &mut Stream::derived(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_in_range_and_deterministic() {
        let a = scenes(4, 40, 30, Seed(3));
        assert_eq!(a, scenes(4, 40, 30, Seed(3)));
        assert_ne!(a[0], a[1]);
        for img in &a {
            assert_eq!(img.dims(), (40, 30));
            assert!(img.min() >= 0.0 && img.max() <= 1.0);
            assert!(img.max() - img.min() > 0.05, "scene should not be flat");
        }
        assert_eq!(scenes(2, 8, 8, Seed(3))[1], scenes(5, 8, 8, Seed(3))[1]);
    }
}
