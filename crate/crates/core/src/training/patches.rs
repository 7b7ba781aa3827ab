use crate::error::{domain, Result};
use crate::imaging::Image;
use crate::noise::Stream;

/// Random `size x size` crop with a uniformly drawn top-left corner, mirrored left-right
/// with probability 1/2. Draws: row, column, then the flip bit.
pub fn sample_patch(image: &Image, size: usize, rng: &mut Stream) -> Result<Image> {
    let (h, w) = image.dims();
    if h < size || w < size || size == 0 {
        return domain(format!("cannot cut a {size}x{size} patch from a {h}x{w} image"));
    }
    let top = rng.below(h - size + 1);
    let left = rng.below(w - size + 1);
    let patch = image.window(top, left, size, size)?;
    Ok(if rng.coin() { patch.flip_horizontal() } else { patch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Seed;

    #[test]
    fn whole_image_patch() {
        let img = Image::from_fn(4, 4, |y, x| (y * 4 + x) as f64);
        let mut rng = Stream::new(Seed(1));
        let mut flipped = 0;
        for _ in 0..200 {
            let p = sample_patch(&img, 4, &mut rng).unwrap();
            if p == img {
                continue;
            }
            assert_eq!(p, img.flip_horizontal());
            flipped += 1;
        }
        assert!(flipped > 50 && flipped < 150);
    }

    #[test]
    fn reproducible_sequence() {
        let img = Image::from_fn(20, 30, |y, x| (y * 30 + x) as f64);
        let run = |seed| {
            let mut rng = Stream::new(Seed(seed));
            (0..20).map(|_| sample_patch(&img, 8, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn flip_rate() {
        let img = Image::from_fn(2, 2, |_, x| x as f64);
        let mut rng = Stream::new(Seed(12));
        let flips = (0..10_000)
            .filter(|_| sample_patch(&img, 2, &mut rng).unwrap().get(0, 0) == 1.0)
            .count();
        let rate = flips as f64 / 10_000.0;
        assert!((rate - 0.5).abs() <= 0.02, "flip rate {rate}");
    }

    #[test]
    fn too_small() {
        let img = Image::zeros(5, 9);
        assert!(sample_patch(&img, 6, &mut Stream::new(Seed(0))).is_err());
    }
}
