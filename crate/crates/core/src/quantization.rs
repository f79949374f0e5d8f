//! Two-level quantizer: a coarse k-means codebook partitions the space and a
//! product quantizer encodes the residual to each coarse centroid, one byte
//! per contiguous block of dimensions.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kmeans::kmeans_train;
use crate::linalg::{l2_sq, nearest};
use crate::model::{BinaryCode, VectorSet};

/// Centroids per PQ sub-codebook (one byte per sub-code).
pub const PQ_CENTROIDS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodebookConfig {
    pub coarse_k: usize,
    pub pq_m: usize,
    pub iters: usize,
    pub seed: u64,
    /// Upper bound on vectors used to train the coarse quantizer.
    pub coarse_train_sample: usize,
    /// Upper bound on residuals used to train the sub-codebooks.
    pub pq_train_sample: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            coarse_k: 1024,
            pq_m: 16,
            iters: 25,
            seed: 0,
            coarse_train_sample: 262_144,
            pq_train_sample: 65_536,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    coarse: VectorSet,
    sub: Vec<VectorSet>,
    trained_on: Option<u64>,
}

/// Per-query lookup table: entry `(m, j)` is the squared distance between
/// block `m` of the query residual and sub-centroid `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcTable {
    m: usize,
    table: Vec<f32>,
}

impl AdcTable {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entry(&self, block: usize, centroid: usize) -> f32 {
        self.table[block * PQ_CENTROIDS + centroid]
    }

    /// Asymmetric distance to a PQ code, summed block by block.
    #[inline]
    pub fn distance(&self, code: &[u8]) -> f32 {
        debug_assert_eq!(code.len(), self.m);
        let mut acc = 0.0f32;
        for (row, &c) in self.table.chunks_exact(PQ_CENTROIDS).zip(code) {
            acc += row[c as usize];
        }
        acc
    }
}

fn block_seed(seed: u64, block: usize) -> u64 {
    seed ^ (block as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sorted seeded subsample of `0..n` of size at most `cap`.
fn sample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

/// Trains `m` sub-codebooks of 256 centroids over contiguous dimension blocks.
///
/// With fewer than 256 training vectors each block is clustered into as many
/// centroids as there are vectors and the table is padded by repeating the
/// last centroid; the padding rows are never selected because encoding breaks
/// ties toward the lowest index.
pub fn pq_train(vectors: &VectorSet, m: usize, iters: usize, seed: u64) -> Result<Vec<VectorSet>> {
    let dim = vectors.dim();
    if m == 0 || !dim.is_multiple_of(m) {
        return Err(Error::param(format!(
            "pq-m {m} does not divide dimension {dim}"
        )));
    }
    if vectors.is_empty() {
        return Err(Error::param(
            "product quantizer needs at least one training vector",
        ));
    }
    let width = dim / m;
    let k = PQ_CENTROIDS.min(vectors.len());
    (0..m)
        .map(|b| {
            let block = vectors.column_block(b * width, width);
            let trained = kmeans_train(&block, k, iters, block_seed(seed, b))?;
            let mut centroids = trained.centroids;
            let last = centroids.row(k - 1).to_vec();
            for _ in k..PQ_CENTROIDS {
                centroids.push(&last)?;
            }
            Ok(centroids)
        })
        .collect()
}

impl Codebook {
    /// Placeholder codebook with no coarse centroids; every encode or search
    /// against it fails with a state error.
    pub fn untrained(dim: usize) -> Self {
        Self {
            dim,
            coarse: VectorSet::with_capacity(dim, 0),
            sub: Vec::new(),
            trained_on: None,
        }
    }

    pub fn from_parts(
        coarse: VectorSet,
        sub: Vec<VectorSet>,
        trained_on: Option<u64>,
    ) -> Result<Self> {
        let dim = coarse.dim();
        let m = sub.len();
        if !coarse.is_empty() {
            if m == 0 || !dim.is_multiple_of(m) {
                return Err(Error::param(format!(
                    "pq-m {m} does not divide dimension {dim}"
                )));
            }
            for s in &sub {
                if s.dim() != dim / m || s.len() != PQ_CENTROIDS {
                    return Err(Error::dim(format!(
                        "sub-codebook must be {PQ_CENTROIDS}x{}, got {}x{}",
                        dim / m,
                        s.len(),
                        s.dim()
                    )));
                }
            }
        }
        if coarse
            .as_slice()
            .iter()
            .chain(sub.iter().flat_map(|s| s.as_slice()))
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain(
                "codebook contains non-finite centroids".into(),
            ));
        }
        Ok(Self {
            dim,
            coarse,
            sub,
            trained_on,
        })
    }

    /// Coarse k-means on a capped seeded subsample, then PQ on the residuals.
    pub fn train(data: &VectorSet, config: &CodebookConfig) -> Result<Self> {
        let dim = data.dim();
        if config.pq_m == 0 || !dim.is_multiple_of(config.pq_m) {
            return Err(Error::param(format!(
                "pq-m {} does not divide dimension {dim}",
                config.pq_m
            )));
        }
        let cap = config.coarse_train_sample.max(config.coarse_k);
        let sample = if data.len() <= cap {
            data.clone()
        } else {
            data.select(&sample_indices(data.len(), cap, config.seed))
        };
        let coarse = kmeans_train(&sample, config.coarse_k, config.iters, config.seed)?;

        let pq_sample_idx = sample_indices(
            sample.len(),
            config.pq_train_sample,
            config.seed.wrapping_add(1),
        );
        let mut residuals = VectorSet::with_capacity(dim, pq_sample_idx.len());
        let mut buf = vec![0f32; dim];
        for &i in &pq_sample_idx {
            let c = coarse.centroids.row(coarse.assignments[i] as usize);
            for ((r, &x), &y) in buf.iter_mut().zip(sample.row(i)).zip(c) {
                *r = x - y;
            }
            residuals.push(&buf)?;
        }
        let sub = pq_train(&residuals, config.pq_m, config.iters, config.seed)?;
        Self::from_parts(coarse.centroids, sub, Some(sample.len() as u64))
    }

    pub fn is_trained(&self) -> bool {
        !self.coarse.is_empty() && !self.sub.is_empty()
    }

    fn ensure_trained(&self) -> Result<()> {
        if self.is_trained() {
            Ok(())
        } else {
            Err(Error::State("codebook is untrained".into()))
        }
    }

    fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::dim(format!(
                "vector of width {} against codebook of dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coarse_k(&self) -> usize {
        self.coarse.len()
    }

    pub fn pq_m(&self) -> usize {
        self.sub.len()
    }

    pub fn block_width(&self) -> usize {
        self.dim / self.sub.len().max(1)
    }

    pub fn coarse_centroids(&self) -> &VectorSet {
        &self.coarse
    }

    pub fn sub_codebooks(&self) -> &[VectorSet] {
        &self.sub
    }

    pub fn trained_on(&self) -> Option<u64> {
        self.trained_on
    }

    /// Nearest coarse cell (lowest index on ties).
    pub fn coarse_assign(&self, v: &[f32]) -> Result<u32> {
        self.ensure_trained()?;
        self.check_dim(v)?;
        Ok(nearest(v, self.coarse.as_slice(), self.dim).0 as u32)
    }

    /// The `nprobe` coarse cells nearest to `v`, nearest first, ties by index.
    pub fn nearest_cells(&self, v: &[f32], nprobe: usize) -> Result<Vec<u32>> {
        self.ensure_trained()?;
        self.check_dim(v)?;
        let mut cells: Vec<(f32, u32)> = self
            .coarse
            .rows()
            .enumerate()
            .map(|(j, c)| (l2_sq(v, c), j as u32))
            .collect();
        let nprobe = nprobe.min(cells.len());
        let by_distance = |a: &(f32, u32), b: &(f32, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if nprobe < cells.len() {
            cells.select_nth_unstable_by(nprobe, by_distance);
            cells.truncate(nprobe);
        }
        cells.sort_unstable_by(by_distance);
        Ok(cells.into_iter().map(|(_, j)| j).collect())
    }

    fn residual(&self, v: &[f32], coarse_id: u32) -> Vec<f32> {
        v.iter()
            .zip(self.coarse.row(coarse_id as usize))
            .map(|(a, b)| a - b)
            .collect()
    }

    /// PQ code of a residual vector.
    pub fn encode_residual(&self, residual: &[f32]) -> Vec<u8> {
        let w = self.block_width();
        residual
            .chunks_exact(w)
            .zip(&self.sub)
            .map(|(block, sub)| nearest(block, sub.as_slice(), w).0 as u8)
            .collect()
    }

    pub fn encode(&self, v: &[f32]) -> Result<BinaryCode> {
        let coarse_id = self.coarse_assign(v)?;
        let pq_code = self.encode_residual(&self.residual(v, coarse_id));
        Ok(BinaryCode { coarse_id, pq_code })
    }

    /// Concatenated sub-centroids for a PQ code (the residual estimate).
    pub fn reconstruct_residual(&self, pq_code: &[u8]) -> Result<Vec<f32>> {
        self.ensure_trained()?;
        if pq_code.len() != self.sub.len() {
            return Err(Error::format(
                "code",
                0,
                format!(
                    "code has {} sub-codes, codebook has {}",
                    pq_code.len(),
                    self.sub.len()
                ),
            ));
        }
        Ok(pq_code
            .iter()
            .zip(&self.sub)
            .flat_map(|(&c, sub)| sub.row(c as usize).iter().copied())
            .collect())
    }

    /// Coarse centroid plus the PQ residual estimate.
    pub fn reconstruct(&self, code: &BinaryCode) -> Result<Vec<f32>> {
        self.ensure_trained()?;
        if code.coarse_id as usize >= self.coarse_k() {
            return Err(Error::format(
                "code",
                0,
                format!(
                    "coarse id {} out of range (k={})",
                    code.coarse_id,
                    self.coarse_k()
                ),
            ));
        }
        let residual = self.reconstruct_residual(&code.pq_code)?;
        Ok(self
            .coarse
            .row(code.coarse_id as usize)
            .iter()
            .zip(residual)
            .map(|(c, r)| c + r)
            .collect())
    }

    pub fn adc_table(&self, query: &[f32], coarse_id: u32) -> Result<AdcTable> {
        self.ensure_trained()?;
        self.check_dim(query)?;
        if coarse_id as usize >= self.coarse_k() {
            return Err(Error::param(format!("coarse id {coarse_id} out of range")));
        }
        let residual = self.residual(query, coarse_id);
        let w = self.block_width();
        let mut table = Vec::with_capacity(self.sub.len() * PQ_CENTROIDS);
        for (block, sub) in residual.chunks_exact(w).zip(&self.sub) {
            table.extend(sub.rows().map(|c| l2_sq(block, c)));
        }
        Ok(AdcTable {
            m: self.sub.len(),
            table,
        })
    }
}
