//! Second stage: pairwise scoring of the retrieved candidates and the final
//! match decision.

use rayon::prelude::*;

use crate::comparator::{PairInput, PairScore, PairScorer};
use crate::error::{Error, Result};
use crate::model::ImageBuffer;

pub const DEFAULT_RERANK_K: usize = 100;
pub const DEFAULT_TAU_SAME: f64 = 0.5;

/// Outcome of re-ranking one query's candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankDecision {
    /// Position (in the initial ranking) of the chosen match, or
    /// `scores.len()` when no candidate reaches the threshold.
    pub match_index: usize,
    /// Same-scores aligned with the initial ranking.
    pub scores: Vec<f64>,
    /// Candidate ids by descending score, initial rank breaking ties.
    pub reordered: Vec<u64>,
}

impl RerankDecision {
    pub fn is_match(&self) -> bool {
        self.match_index < self.scores.len()
    }

    /// Initial-ranking position of the match, if any.
    pub fn matched(&self) -> Option<usize> {
        self.is_match().then_some(self.match_index)
    }
}

/// Scores every candidate against the query. Output order follows
/// `candidate_ids`; the resolver maps an id to its image or fails with a
/// lookup error.
pub fn score_candidates<R, S>(
    query_id: u64,
    query: &ImageBuffer,
    candidate_ids: &[u64],
    resolver: R,
    scorer: &S,
) -> Result<Vec<(u64, PairScore)>>
where
    R: Fn(u64) -> Result<ImageBuffer> + Sync,
    S: PairScorer + ?Sized,
{
    candidate_ids
        .par_iter()
        .map(|&id| {
            let candidate = resolver(id)?;
            let score = scorer.score(&PairInput {
                query_id,
                query,
                candidate_id: id,
                candidate: &candidate,
                flow: None,
            })?;
            Ok((id, score))
        })
        .collect()
}

/// Sorts candidates by descending score and picks the best one if it reaches
/// `tau_same`.
pub fn reorder(scores: &[f64], initial_ranking: &[u64], tau_same: f64) -> Result<RerankDecision> {
    if scores.len() != initial_ranking.len() {
        return Err(Error::param(format!(
            "{} scores for {} candidates",
            scores.len(),
            initial_ranking.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::param(format!("non-finite score {bad}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let match_index = match order.first() {
        Some(&best) if scores[best] >= tau_same => best,
        _ => scores.len(),
    };
    Ok(RerankDecision {
        match_index,
        scores: scores.to_vec(),
        reordered: order.iter().map(|&i| initial_ranking[i]).collect(),
    })
}
