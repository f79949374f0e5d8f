//! Inverted-file index over PQ codes with asymmetric-distance search.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::formats::{read_file, write_file, ByteReader};
use crate::model::VectorSet;
use crate::quantization::{Codebook, PQ_CENTROIDS};
use crate::FORMAT_VERSION;

pub const INDEX_MAGIC: &[u8; 4] = b"SIPX";

/// Default number of coarse cells scanned per query.
pub const DEFAULT_NPROBE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchHit {
    pub id: u64,
    /// Squared L2 distance in residual space (ADC estimate).
    pub distance: f32,
}

impl SearchHit {
    /// Ascending distance, then ascending id.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

struct HeapEntry(SearchHit);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct InvertedList {
    ids: Vec<u64>,
    /// `ids.len() * m` sub-codes, entry-major.
    codes: Vec<u8>,
}

/// Append-only IVF-PQ index. Searches never mutate it, so a built index can
/// be shared across threads freely.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    codebook: Codebook,
    lists: Vec<InvertedList>,
    size: usize,
    seen: HashSet<u64>,
}

impl Index {
    pub fn new(codebook: Codebook) -> Self {
        let lists = vec![InvertedList::default(); codebook.coarse_k()];
        Self {
            codebook,
            lists,
            size: 0,
            seen: HashSet::new(),
        }
    }

    pub fn build(descriptors: &VectorSet, ids: &[u64], codebook: Codebook) -> Result<Self> {
        let mut index = Self::new(codebook);
        index.add(descriptors, ids)?;
        Ok(index)
    }

    /// Encodes and appends vectors. Nothing is inserted if any id is a
    /// duplicate, either within the batch or against the index.
    pub fn add(&mut self, descriptors: &VectorSet, ids: &[u64]) -> Result<()> {
        if descriptors.len() != ids.len() {
            return Err(Error::param(format!(
                "{} descriptors but {} ids",
                descriptors.len(),
                ids.len()
            )));
        }
        if descriptors.is_empty() {
            return Ok(());
        }
        if !self.codebook.is_trained() {
            return Err(Error::State("index codebook is untrained".into()));
        }
        if descriptors.dim() != self.codebook.dim() {
            return Err(Error::dim(format!(
                "descriptors of width {} for index of dimension {}",
                descriptors.dim(),
                self.codebook.dim()
            )));
        }
        let mut batch = HashSet::with_capacity(ids.len());
        for &id in ids {
            if self.seen.contains(&id) || !batch.insert(id) {
                return Err(Error::DuplicateId(id));
            }
        }
        let codes = descriptors
            .as_slice()
            .par_chunks_exact(descriptors.dim())
            .map(|v| self.codebook.encode(v))
            .collect::<Result<Vec<_>>>()?;
        for (code, &id) in codes.into_iter().zip(ids) {
            let list = &mut self.lists[code.coarse_id as usize];
            list.ids.push(id);
            list.codes.extend_from_slice(&code.pq_code);
        }
        self.seen.extend(batch);
        self.size += ids.len();
        Ok(())
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn list_len(&self, cell: usize) -> usize {
        self.lists[cell].ids.len()
    }

    /// Entries of one inverted list as `(id, pq_code)` in insertion order.
    pub fn list_entries(&self, cell: usize) -> impl Iterator<Item = (u64, &[u8])> {
        let list = &self.lists[cell];
        let m = self.codebook.pq_m().max(1);
        list.ids.iter().copied().zip(list.codes.chunks_exact(m))
    }

    /// Top-`k` entries by ADC distance over the `nprobe` coarse cells nearest
    /// to `query`. `nprobe` larger than the number of cells scans them all.
    pub fn search(&self, query: &[f32], k: usize, nprobe: usize) -> Result<Vec<SearchHit>> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if nprobe == 0 {
            return Err(Error::param("nprobe must be at least 1"));
        }
        let cells = self.codebook.nearest_cells(query, nprobe)?;
        let m = self.codebook.pq_m();
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::with_capacity(k + 1);
        for cell in cells {
            let list = &self.lists[cell as usize];
            if list.ids.is_empty() {
                continue;
            }
            let table = self.codebook.adc_table(query, cell)?;
            for (&id, code) in list.ids.iter().zip(list.codes.chunks_exact(m)) {
                let hit = SearchHit {
                    id,
                    distance: table.distance(code),
                };
                if heap.len() < k {
                    heap.push(HeapEntry(hit));
                } else if hit.rank_cmp(&heap.peek().unwrap().0) == Ordering::Less {
                    heap.pop();
                    heap.push(HeapEntry(hit));
                }
            }
        }
        Ok(heap.into_sorted_vec().into_iter().map(|e| e.0).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cb = &self.codebook;
        let m = cb.pq_m();
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(cb.coarse_k() as u32).to_le_bytes());
        out.extend_from_slice(&(cb.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(m as u32).to_le_bytes());
        for v in cb.coarse_centroids().as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for sub in cb.sub_codebooks() {
            for v in sub.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for list in &self.lists {
            out.extend_from_slice(&(list.ids.len() as u64).to_le_bytes());
            for (id, code) in list.ids.iter().zip(list.codes.chunks_exact(m.max(1))) {
                out.extend_from_slice(&id.to_le_bytes());
                out.extend_from_slice(code);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], context: &str) -> Result<Self> {
        let mut r = ByteReader::new(bytes, context);
        r.magic(INDEX_MAGIC)?;
        r.version()?;
        let coarse_k = r.u32("coarse-k")? as usize;
        let dim_at = r.offset();
        let dim = r.u32("dim")? as usize;
        let m_at = r.offset();
        let m = r.u32("pq-m")? as usize;
        if dim == 0 {
            return Err(Error::format(context, dim_at, "dim must be positive"));
        }
        if coarse_k > 0 && (m == 0 || !dim.is_multiple_of(m)) {
            return Err(Error::format(
                context,
                m_at,
                format!("pq-m {m} does not divide dim {dim}"),
            ));
        }
        let coarse = VectorSet::new(
            dim,
            r.f32s(coarse_k.saturating_mul(dim), "coarse centroids")?,
        )
        .expect("width checked");
        let width = dim.checked_div(m).unwrap_or(0);
        let mut sub = Vec::with_capacity(m);
        for _ in 0..m {
            sub.push(
                VectorSet::new(width.max(1), r.f32s(PQ_CENTROIDS * width, "sub-codebook")?)
                    .expect("width checked"),
            );
        }
        let codebook = Codebook::from_parts(coarse, sub, None)
            .map_err(|e| Error::format(context, r.offset(), e.to_string()))?;

        let mut index = Index::new(codebook);
        let entry = 8 + m;
        for cell in 0..coarse_k {
            let len_at = r.offset();
            let len = r.u64("list length")?;
            let need = (len as u128) * entry as u128;
            let remaining = (bytes.len() as u64 - r.offset()) as u128;
            if need > remaining {
                return Err(Error::format(
                    context,
                    len_at,
                    format!("truncated payload: list {cell} declares {len} entries, {remaining} bytes remain"),
                ));
            }
            let list = &mut index.lists[cell];
            for _ in 0..len {
                let at = r.offset();
                let id = r.u64("id")?;
                if !index.seen.insert(id) {
                    return Err(Error::format(context, at, format!("duplicate id {id}")));
                }
                list.ids.push(id);
                list.codes.extend_from_slice(r.take(m, "pq code")?);
            }
            index.size += len as usize;
        }
        r.finish()?;
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, &path.display().to_string())
    }
}
