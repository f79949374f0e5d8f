//! Procedural test scenes and the edits used to derive queries from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{ImageBuffer, Mask};

fn color(rng: &mut ChaCha8Rng) -> [f32; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

/// Gradient background with a handful of random rectangles and discs.
pub fn render_scene(seed: u64, height: usize, width: usize) -> Result<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c0, c1) = (color(&mut rng), color(&mut rng));
    let angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
    let (ca, sa) = (angle.cos(), angle.sin());
    let shapes: Vec<(bool, [f32; 4], [f32; 3])> = (0..rng.gen_range(4..8))
        .map(|_| {
            let disc = rng.gen_bool(0.5);
            let cx = rng.gen_range(0.0..1.0);
            let cy = rng.gen_range(0.0..1.0);
            let rx = rng.gen_range(0.08..0.25);
            let ry = if disc { rx } else { rng.gen_range(0.08..0.25) };
            (disc, [cx, cy, rx, ry], color(&mut rng))
        })
        .collect();
    let mut data = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        let fy = (y as f32 + 0.5) / height as f32;
        for x in 0..width {
            let fx = (x as f32 + 0.5) / width as f32;
            let t = (((fx - 0.5) * ca + (fy - 0.5) * sa) / std::f32::consts::SQRT_2 + 0.5)
                .clamp(0.0, 1.0);
            let mut px = [0f32; 3];
            for c in 0..3 {
                px[c] = c0[c] + t * (c1[c] - c0[c]);
            }
            for (disc, [cx, cy, rx, ry], col) in &shapes {
                let (dx, dy) = ((fx - cx) / rx, (fy - cy) / ry);
                let inside = if *disc {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    px = *col;
                }
            }
            data.extend_from_slice(&px);
        }
    }
    ImageBuffer::new(height, width, 3, data)
}

/// Axis-aligned rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn mask(&self, height: usize, width: usize) -> Mask {
        Mask::from_fn(height, width, |x, y| self.contains(x, y))
    }
}

/// Copies `rect` of `donor` into `target` at the same position.
pub fn splice(target: &ImageBuffer, donor: &ImageBuffer, rect: Rect) -> Result<ImageBuffer> {
    if !target.same_shape(donor) {
        return Err(Error::param("splice donor must match the target shape"));
    }
    if rect.x1 > target.width()
        || rect.y1 > target.height()
        || rect.x0 >= rect.x1
        || rect.y0 >= rect.y1
    {
        return Err(Error::param(format!("patch {rect:?} is outside the image")));
    }
    ImageBuffer::from_fn(
        target.height(),
        target.width(),
        target.channels(),
        |x, y, c| {
            if rect.contains(x, y) {
                donor.get(x, y, c)
            } else {
                target.get(x, y, c)
            }
        },
    )
}

/// Square patch of side `side` at a seeded position.
pub fn random_rect(seed: u64, height: usize, width: usize, side: usize) -> Rect {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = rng.gen_range(0..=width - side);
    let y0 = rng.gen_range(0..=height - side);
    Rect {
        x0,
        y0,
        x1: x0 + side,
        y1: y0 + side,
    }
}

/// Resize followed by seeded additive Gaussian noise.
pub fn benign_transform(
    image: &ImageBuffer,
    height: usize,
    width: usize,
    sigma: f32,
    seed: u64,
) -> Result<ImageBuffer> {
    let resized = image.resize_bilinear(height, width)?;
    let noise = Normal::new(0.0f32, sigma).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = resized
        .data()
        .iter()
        .map(|&v| (v + noise.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(height, width, image.channels(), data)
}
