//! De-warping: resample a query along a dense flow field so it lines up with
//! a candidate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FlowField, ImageBuffer};

/// Bilinear sample of channel `c` at real coordinates `(x, y)` (pixel units,
/// pixel centres on integers). Coordinates outside the image clamp to the
/// nearest edge pixel.
#[inline]
pub fn sample_bilinear(image: &ImageBuffer, x: f32, y: f32, c: usize) -> f32 {
    let max_x = (image.width() - 1) as f32;
    let max_y = (image.height() - 1) as f32;
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, max_x) };
    let y = if y.is_nan() { 0.0 } else { y.clamp(0.0, max_y) };
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = (
        (x0 + 1).min(image.width() - 1),
        (y0 + 1).min(image.height() - 1),
    );
    let (fx, fy) = (x - x0 as f32, y - y0 as f32);

    let v00 = image.get(x0, y0, c);
    let v10 = image.get(x1, y0, c);
    let v01 = image.get(x0, y1, c);
    let v11 = image.get(x1, y1, c);
    let top = v00 + fx * (v10 - v00);
    let bottom = v01 + fx * (v11 - v01);
    let v = top + fy * (bottom - top);
    // rounding must not leave the range of the four taps
    let lo = v00.min(v10).min(v01).min(v11);
    let hi = v00.max(v10).max(v01).max(v11);
    v.clamp(lo, hi)
}

/// Output pixel `(x, y)` is the query sampled at `(x + dx, y + dy)`.
pub fn dewarp(query: &ImageBuffer, flow: &FlowField) -> Result<ImageBuffer> {
    if flow.height() != query.height() || flow.width() != query.width() {
        return Err(Error::param(format!(
            "flow {}x{} does not match image {}x{}",
            flow.height(),
            flow.width(),
            query.height(),
            query.width()
        )));
    }
    let (w, ch) = (query.width(), query.channels());
    let mut data = vec![0f32; query.data().len()];
    data.par_chunks_mut(w * ch)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let (dx, dy) = flow.at(x, y);
                let (sx, sy) = (x as f32 + dx, y as f32 + dy);
                for c in 0..ch {
                    row[x * ch + c] = sample_bilinear(query, sx, sy, c);
                }
            }
        });
    ImageBuffer::new(query.height(), w, ch, data)
}

pub fn identity_flow(height: usize, width: usize) -> FlowField {
    FlowField::constant(height, width, 0.0, 0.0).expect("zero flow is valid")
}
