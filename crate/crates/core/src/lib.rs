//! Image provenance pipeline.
//!
//! Three stages: a compact fingerprint plus IVF-PQ index finds the top-k
//! candidates for a query image, a pairwise scorer re-ranks them and picks
//! the original (or declares no match), and a comparator aligns the pair and
//! produces a coarse manipulation heatmap.
//!
//! ```text
//! image ──extract_descriptor──▶ Descriptor ──Index::search──▶ top-k ids
//!                                                   │
//!             PairScorer (classical | file) ◀───────┘
//!                    │
//!                reorder ──▶ RerankDecision ──▶ Heatmap / mask
//! ```

pub mod comparator;
pub mod error;
pub mod eval;
pub mod features;
pub mod formats;
pub mod geometry;
pub mod index;
pub mod kmeans;
pub mod model;
pub mod quantization;
pub mod rerank;
pub mod scenes;

mod linalg;

pub use comparator::{
    adjusted_mask, classify_pair_classical, normalize_heatmap, ssd_heatmap, threshold_mask,
    upsample_heatmap, ClassicalConfig, ClassicalScorer, FileScorer, PairInput, PairScore,
    PairScorer,
};
pub use error::{Error, Result};
pub use features::{extract_descriptor, extract_feature_map, gem_pool, hamming, phash64};
pub use geometry::{dewarp, identity_flow};
pub use index::{Index, SearchHit};
pub use kmeans::{kmeans_train, KMeansResult};
pub use model::{
    BinaryCode, Descriptor, FeatureMap, FlowField, Heatmap, ImageBuffer, Manifest, ManifestRow,
    Mask, VectorSet, Verdict, DESCRIPTOR_DIM,
};
pub use quantization::{Codebook, CodebookConfig};
pub use rerank::{reorder, score_candidates, RerankDecision};

/// Version of the binary file formats written by this crate.
pub const FORMAT_VERSION: u32 = 1;
