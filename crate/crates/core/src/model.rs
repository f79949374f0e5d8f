//! Domain value types shared by every stage of the pipeline.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Width of a fingerprint descriptor.
pub const DESCRIPTOR_DIM: usize = 256;

/// Row-major raster with values in `[0, 1]`, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::dim(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::Domain(format!(
                "pixel value {} at index {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let v = f(x, y, c);
                    data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Luma (BT.601 weights) for colour images, identity for grayscale.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Bilinear resize with pixel-centre alignment and edge clamping.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Result<ImageBuffer> {
        if height == 0 || width == 0 {
            return Err(Error::dim(format!("cannot resize to {height}x{width}")));
        }
        let sy = self.height as f32 / height as f32;
        let sx = self.width as f32 / width as f32;
        let mut data = Vec::with_capacity(height * width * self.channels);
        for y in 0..height {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            for x in 0..width {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                for c in 0..self.channels {
                    data.push(crate::geometry::sample_bilinear(self, fx, fy, c));
                }
            }
        }
        Ok(ImageBuffer {
            height,
            width,
            channels: self.channels,
            data,
        })
    }
}

/// Row-major matrix of `len` vectors of width `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("vector dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::dim(format!(
                "{} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut set = Self::with_capacity(dim, rows.len());
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::dim(format!(
                "row of width {} pushed into set of dimension {}",
                row.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copies the given rows, in order, into a new set.
    pub fn select(&self, indices: &[usize]) -> VectorSet {
        let mut out = VectorSet::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    /// Columns `[start, start + width)` of every row.
    pub fn column_block(&self, start: usize, width: usize) -> VectorSet {
        let mut out = VectorSet::with_capacity(width, self.len());
        for r in self.rows() {
            out.data.extend_from_slice(&r[start..start + width]);
        }
        out
    }
}

/// 256-D unit-norm fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    values: Vec<f32>,
}

impl Descriptor {
    /// Wraps precomputed values; they must already be finite and 256 wide.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(Error::dim(format!(
                "descriptor must have {DESCRIPTOR_DIM} components, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "descriptor contains non-finite values".into(),
            ));
        }
        Ok(Self { values })
    }

    /// L2-normalizes `values`. A zero vector maps to the basis vector `e_0`;
    /// the returned flag is true in that case.
    pub fn normalized(values: &[f64]) -> Result<(Self, bool)> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(Error::dim(format!(
                "descriptor must have {DESCRIPTOR_DIM} components, got {}",
                values.len()
            )));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Domain(
                "descriptor contains non-finite values".into(),
            ));
        }
        if norm == 0.0 {
            let mut e0 = vec![0.0; DESCRIPTOR_DIM];
            e0[0] = 1.0;
            return Ok((Self { values: e0 }, true));
        }
        let values = values.iter().map(|v| (v / norm) as f32).collect();
        Ok((Self { values }, false))
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }

    pub fn cosine_distance(&self, other: &Descriptor) -> f64 {
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 1.0;
        }
        1.0 - dot / denom
    }
}

impl AsRef<[f32]> for Descriptor {
    fn as_ref(&self) -> &[f32] {
        &self.values
    }
}

/// Grid of non-negative activation vectors, cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    activations: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        activations: Vec<f64>,
    ) -> Result<Self> {
        if height * width * channels != activations.len() || channels == 0 {
            return Err(Error::dim(format!(
                "feature map {height}x{width}x{channels} does not match {} activations",
                activations.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            activations,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.activations[i..i + self.channels]
    }

    pub fn activations(&self) -> &[f64] {
        &self.activations
    }
}

/// Quantized descriptor: coarse cell plus one byte per PQ subspace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    pub coarse_id: u32,
    pub pq_code: Vec<u8>,
}

impl BinaryCode {
    /// Stored payload in bits. The coarse id is implied by inverted-list
    /// membership, so only the sub-codes count.
    pub fn payload_bits(&self) -> usize {
        8 * self.pq_code.len()
    }
}

/// Dense per-pixel displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        if dx.len() != height * width || dy.len() != height * width {
            return Err(Error::dim(format!(
                "flow components of length {}/{} do not match {height}x{width}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "flow contains non-finite displacements".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            dx,
            dy,
        })
    }

    pub fn constant(height: usize, width: usize, dx: f32, dy: f32) -> Result<Self> {
        Self::new(
            height,
            width,
            vec![dx; height * width],
            vec![dy; height * width],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }
}

/// Outcome of comparing a query against a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Benign,
    Manipulated,
    Distinct,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Benign => "benign",
            Verdict::Manipulated => "manipulated",
            Verdict::Distinct => "distinct",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benign" => Ok(Verdict::Benign),
            "manipulated" => Ok(Verdict::Manipulated),
            "distinct" => Ok(Verdict::Distinct),
            other => Err(Error::param(format!("unknown verdict {other:?}"))),
        }
    }
}

/// `t`×`t` grid of real values (row-major) with the pair verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub size: usize,
    pub grid: Vec<f32>,
    pub verdict: Verdict,
}

impl Heatmap {
    pub fn new(size: usize, grid: Vec<f32>, verdict: Verdict) -> Result<Self> {
        if grid.len() != size * size {
            return Err(Error::dim(format!(
                "heatmap grid of {} values is not {size}x{size}",
                grid.len()
            )));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("heatmap contains non-finite values".into()));
        }
        Ok(Self {
            size,
            grid,
            verdict,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.grid[row * self.size + col]
    }
}

/// Binary H×W mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub id: u64,
    pub path: PathBuf,
    pub group: String,
}

/// Id → image path table with relevance groups.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for r in &rows {
            if !seen.insert(r.id) {
                return Err(Error::DuplicateId(r.id));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&ManifestRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.id).collect()
    }
}
