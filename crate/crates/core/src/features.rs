//! Deterministic image fingerprints.
//!
//! The feature map is a grid of soft-assigned HSV histograms: 16×16 cells per
//! image, each cell spanning two seventeenths of the image along each axis
//! (so neighbours overlap by half a cell), with 8 hue × 4 saturation × 8 value
//! bins. Cell geometry is proportional to the image, and pixels contribute by
//! fractional area coverage, so a uniformly rescaled image yields the same map.
//! GeM pooling over the cells and L2 normalisation give the 256-D descriptor.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{Descriptor, FeatureMap, ImageBuffer, DESCRIPTOR_DIM};

/// Cells per image side.
pub const GRID_CELLS: usize = 16;
/// Minimum image side accepted by the extractor.
pub const MIN_SIDE: usize = 16;
/// Default GeM exponent.
pub const DEFAULT_GEM_P: f64 = 3.0;

const HUE_BINS: usize = 8;
const SAT_BINS: usize = 4;
const VAL_BINS: usize = 8;

/// Result of [`extract_descriptor`].
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub descriptor: Descriptor,
    /// The pooled vector was all zeros and the descriptor is the fallback `e_0`.
    pub fallback: bool,
}

/// `(pixel, weight)` coverage lists for each cell along one axis.
fn axis_cells(len: usize) -> Vec<Vec<(usize, f64)>> {
    let step = len as f64 / (GRID_CELLS + 1) as f64;
    (0..GRID_CELLS)
        .map(|i| {
            let (a, b) = (i as f64 * step, (i + 2) as f64 * step);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(len);
            (first..last)
                .filter_map(|p| {
                    let w = (b.min(p as f64 + 1.0) - a.max(p as f64)).max(0.0);
                    (w > 0.0).then_some((p, w))
                })
                .collect()
        })
        .collect()
}

/// Linear soft assignment of `u` in `[0, 1]` to `bins` bins centred at
/// `(b + 0.5) / bins`; returns `(lo, w_lo, hi, w_hi)`.
#[inline]
fn soft_linear(u: f64, bins: usize) -> (usize, f64, usize, f64) {
    let t = u * bins as f64 - 0.5;
    if t <= 0.0 {
        return (0, 1.0, 0, 0.0);
    }
    if t >= (bins - 1) as f64 {
        return (bins - 1, 1.0, bins - 1, 0.0);
    }
    let lo = t.floor();
    let f = t - lo;
    (lo as usize, 1.0 - f, lo as usize + 1, f)
}

/// Circular variant for hue in `[0, 1)`.
#[inline]
fn soft_circular(u: f64, bins: usize) -> (usize, f64, usize, f64) {
    let t = (u * bins as f64 - 0.5).rem_euclid(bins as f64);
    let lo = t.floor();
    let f = t - lo;
    let lo = lo as usize % bins;
    (lo, 1.0 - f, (lo + 1) % bins, f)
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h.rem_euclid(1.0), s, max)
}

/// Soft histogram contributions of one pixel: up to 8 `(channel, weight)`.
fn pixel_bins(px: &[f32], out: &mut Vec<(usize, f64)>) {
    out.clear();
    if px.len() == 1 {
        let (a, wa, b, wb) = soft_linear(px[0] as f64, VAL_BINS);
        out.push((a, wa));
        if wb > 0.0 {
            out.push((b, wb));
        }
        return;
    }
    let (h, s, v) = rgb_to_hsv(px[0] as f64, px[1] as f64, px[2] as f64);
    let (h0, hw0, h1, hw1) = soft_circular(h, HUE_BINS);
    let (s0, sw0, s1, sw1) = soft_linear(s, SAT_BINS);
    let (v0, vw0, v1, vw1) = soft_linear(v, VAL_BINS);
    for (hb, hw) in [(h0, hw0), (h1, hw1)] {
        for (sb, sw) in [(s0, sw0), (s1, sw1)] {
            for (vb, vw) in [(v0, vw0), (v1, vw1)] {
                let w = hw * sw * vw;
                if w > 0.0 {
                    out.push(((hb * SAT_BINS + sb) * VAL_BINS + vb, w));
                }
            }
        }
    }
}

/// Grid-histogram feature map with `DESCRIPTOR_DIM` channels per cell; every
/// cell vector sums to one.
pub fn extract_feature_map(image: &ImageBuffer) -> Result<FeatureMap> {
    if image.height() < MIN_SIDE || image.width() < MIN_SIDE {
        return Err(Error::dim(format!(
            "image {}x{} is smaller than the {MIN_SIDE}x{MIN_SIDE} minimum",
            image.height(),
            image.width()
        )));
    }
    let gray = image.channels() == 1;
    let bins = if gray { VAL_BINS } else { DESCRIPTOR_DIM };
    let rows = axis_cells(image.height());
    let cols = axis_cells(image.width());

    // per-pixel soft bins, computed once
    let (h, w) = (image.height(), image.width());
    let mut offsets = Vec::with_capacity(h * w + 1);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(h * w * 2);
    let mut scratch = Vec::with_capacity(8);
    offsets.push(0);
    for y in 0..h {
        for x in 0..w {
            pixel_bins(image.pixel(x, y), &mut scratch);
            entries.extend_from_slice(&scratch);
            offsets.push(entries.len());
        }
    }

    let mut activations = Vec::with_capacity(GRID_CELLS * GRID_CELLS * DESCRIPTOR_DIM);
    let mut hist = vec![0f64; bins];
    for row in &rows {
        for col in &cols {
            hist.iter_mut().for_each(|v| *v = 0.0);
            for &(y, wy) in row {
                for &(x, wx) in col {
                    let p = y * w + x;
                    let wxy = wy * wx;
                    for &(bin, wb) in &entries[offsets[p]..offsets[p + 1]] {
                        hist[bin] += wxy * wb;
                    }
                }
            }
            let total: f64 = hist.iter().sum();
            if gray {
                let scale = (DESCRIPTOR_DIM / VAL_BINS) as f64 * total;
                activations.extend((0..DESCRIPTOR_DIM).map(|c| hist[c % VAL_BINS] / scale));
            } else {
                activations.extend(hist.iter().map(|v| v / total));
            }
        }
    }
    FeatureMap::new(GRID_CELLS, GRID_CELLS, DESCRIPTOR_DIM, activations)
}

/// Generalized-mean pooling of every channel over all cells:
/// `g_k = (mean_x x^p)^(1/p)`.
pub fn gem_pool(map: &FeatureMap, p: f64) -> Result<Vec<f64>> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::param(format!(
            "GeM exponent must be a finite p >= 1, got {p}"
        )));
    }
    let k = map.channels();
    let n = map.cells();
    if let Some(bad) = map
        .activations()
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::Domain(format!(
            "GeM needs finite non-negative activations, found {bad}"
        )));
    }
    let acts = map.activations();
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let max = (0..n).map(|i| acts[i * k + c]).fold(0.0f64, f64::max);
        if max == 0.0 {
            out.push(0.0);
            continue;
        }
        // scaling by the max keeps x^p representable for large p
        let mean = (0..n).map(|i| (acts[i * k + c] / max).powf(p)).sum::<f64>() / n as f64;
        out.push(max * mean.powf(1.0 / p));
    }
    Ok(out)
}

/// Feature map → GeM → L2 normalisation.
pub fn extract_descriptor(image: &ImageBuffer, p: f64) -> Result<Extracted> {
    let pooled = gem_pool(&extract_feature_map(image)?, p)?;
    let (descriptor, fallback) = Descriptor::normalized(&pooled)?;
    Ok(Extracted {
        descriptor,
        fallback,
    })
}

const PHASH_SIZE: usize = 32;

fn dct_1d(input: &[f64], out: &mut [f64], cos: &[f64]) {
    let n = input.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = input
            .iter()
            .enumerate()
            .map(|(i, x)| x * cos[k * n + i])
            .sum();
    }
}

/// 64-bit DCT perceptual hash.
///
/// Grayscale, bilinear resize to 32×32, unnormalised 2-D DCT-II, then the
/// row-major 8×8 low-frequency block without the DC term followed by
/// coefficient (0, 8). Bit `i` (most significant first) is set iff coefficient
/// `i` is strictly greater than the median of the 64. Coefficients within
/// rounding noise of zero are snapped to zero.
pub fn phash64(image: &ImageBuffer) -> Result<u64> {
    let small = image.to_gray().resize_bilinear(PHASH_SIZE, PHASH_SIZE)?;
    let n = PHASH_SIZE;
    let cos: Vec<f64> = (0..n * n)
        .map(|ki| {
            let (k, i) = (ki / n, ki % n);
            (PI / n as f64 * (i as f64 + 0.5) * k as f64).cos()
        })
        .collect();
    let pixels: Vec<f64> = small.data().iter().map(|&v| v as f64).collect();

    // rows, then columns
    let mut rows = vec![0f64; n * n];
    for y in 0..n {
        dct_1d(
            &pixels[y * n..(y + 1) * n],
            &mut rows[y * n..(y + 1) * n],
            &cos,
        );
    }
    let mut coeffs = vec![0f64; n * n];
    let mut column = vec![0f64; n];
    let mut out = vec![0f64; n];
    for x in 0..n {
        for y in 0..n {
            column[y] = rows[y * n + x];
        }
        dct_1d(&column, &mut out, &cos);
        for v in 0..n {
            coeffs[v * n + x] = out[v];
        }
    }

    let scale: f64 = pixels.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
    let mut picked: Vec<f64> = Vec::with_capacity(64);
    for v in 0..8 {
        for u in 0..8 {
            if (u, v) != (0, 0) {
                picked.push(coeffs[v * n + u]);
            }
        }
    }
    picked.push(coeffs[8]);
    for c in &mut picked {
        if c.abs() <= 1e-9 * scale {
            *c = 0.0;
        }
    }
    let mut sorted = picked.clone();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[31] + sorted[32]);
    Ok(picked.iter().enumerate().fold(
        0u64,
        |acc, (i, &c)| if c > median { acc | 1 << (63 - i) } else { acc },
    ))
}

/// Hamming distance between two equal-width bit codes stored as 64-bit words.
pub fn hamming(a: &[u64], b: &[u64]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::param(format!(
            "code widths differ: {} vs {} bits",
            a.len() * 64,
            b.len() * 64
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum())
}
