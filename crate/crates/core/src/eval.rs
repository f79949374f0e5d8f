//! Metrics, exact oracles, synthetic corpora and the recall/latency harness.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::comparator::{adjusted_mask, PairScore};
use crate::error::{Error, Result};
use crate::index::{Index, SearchHit};
use crate::model::{Mask, VectorSet};

/// Fraction of queries whose relevant id appears within the first `k` results.
pub fn ir_at_k(results: &[Vec<u64>], truth: &[u64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if results.len() != truth.len() {
        return Err(Error::param(format!(
            "{} result lists for {} queries",
            results.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Domain("no queries".into()));
    }
    let hits = results
        .iter()
        .zip(truth)
        .filter(|(ranked, rel)| ranked.iter().take(k).any(|id| id == *rel))
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Mean, over positives in descending-score order, of the precision at each
/// positive. Equal scores keep their input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::param(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::param("scores contain NaN"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Domain(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut found = 0usize;
    let mut sum = 0f64;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            found += 1;
            sum += found as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Intersection over union of two equally sized masks; two empty masks
/// score 1.
pub fn mask_iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    if pred.height != gt.height || pred.width != gt.width {
        return Err(Error::param(format!(
            "mask {}x{} vs ground truth {}x{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// IoU of the verdict-adjusted prediction mask against the ground truth.
pub fn iou_adjusted(score: &PairScore, gt: &Mask, theta: f32) -> Result<f64> {
    let pred = adjusted_mask(score, gt.height, gt.width, theta)?;
    mask_iou(&pred, gt)
}

/// Exact squared L2 distance accumulated in double precision.
fn exact_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Exhaustive exact scan; ties by ascending id. Returns `min(k, n)` hits.
pub fn brute_force_search(
    descriptors: &VectorSet,
    ids: &[u64],
    query: &[f32],
    k: usize,
) -> Result<Vec<SearchHit>> {
    if ids.len() != descriptors.len() {
        return Err(Error::param(format!(
            "{} ids for {} descriptors",
            ids.len(),
            descriptors.len()
        )));
    }
    if query.len() != descriptors.dim() {
        return Err(Error::dim(format!(
            "query has {} components, descriptors have {}",
            query.len(),
            descriptors.dim()
        )));
    }
    let mut all: Vec<(f64, u64)> = descriptors
        .rows()
        .zip(ids)
        .map(|(row, &id)| (exact_l2(row, query), id))
        .collect();
    let k = k.min(all.len());
    let cmp = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < all.len() && k > 0 {
        all.select_nth_unstable_by(k - 1, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all.truncate(k);
    Ok(all
        .into_iter()
        .map(|(d, id)| SearchHit {
            id,
            distance: d as f32,
        })
        .collect())
}

/// ADC distances against every stored entry, fully sorted; the reference
/// for a search that probes every cell.
pub fn exhaustive_adc_search(index: &Index, query: &[f32], k: usize) -> Result<Vec<SearchHit>> {
    let cb = index.codebook();
    let mut all = Vec::with_capacity(index.len());
    for cell in 0..cb.coarse_k() {
        if index.list_len(cell) == 0 {
            continue;
        }
        let table = cb.adc_table(query, cell as u32)?;
        all.extend(index.list_entries(cell).map(|(id, code)| SearchHit {
            id,
            distance: table.distance(code),
        }));
    }
    all.sort_by(SearchHit::rank_cmp);
    all.truncate(k);
    Ok(all)
}

fn check_lists(approx: &[Vec<u64>], exact: &[Vec<u64>], k: usize) -> Result<()> {
    if approx.len() != exact.len() {
        return Err(Error::param(format!(
            "{} result lists against {} oracle lists",
            approx.len(),
            exact.len()
        )));
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if exact.is_empty() {
        return Err(Error::Domain("no queries".into()));
    }
    Ok(())
}

/// Fraction of queries whose exact nearest neighbour (first oracle entry)
/// appears among the first `k` results.
pub fn recall_at_k(approx: &[Vec<u64>], exact: &[Vec<u64>], k: usize) -> Result<f64> {
    check_lists(approx, exact, k)?;
    let hits = approx
        .iter()
        .zip(exact)
        .filter(|(a, e)| {
            e.first()
                .is_none_or(|nn| a.iter().take(k).any(|id| id == nn))
        })
        .count();
    Ok(hits as f64 / exact.len() as f64)
}

/// |approx ∩ exact| / |exact| averaged over queries, both truncated to `k`.
pub fn overlap_at_k(approx: &[Vec<u64>], exact: &[Vec<u64>], k: usize) -> Result<f64> {
    check_lists(approx, exact, k)?;
    let total: f64 = approx
        .iter()
        .zip(exact)
        .map(|(a, e)| {
            let e = &e[..e.len().min(k)];
            if e.is_empty() {
                return 1.0;
            }
            let hits = a.iter().take(k).filter(|id| e.contains(id)).count();
            hits as f64 / e.len() as f64
        })
        .sum();
    Ok(total / exact.len() as f64)
}

pub const CLUSTER_CENTERS: usize = 1024;
pub const DEFAULT_CLUSTER_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticMode {
    /// Isotropic Gaussian samples projected onto the unit sphere.
    GaussianUnit,
    /// Unit cluster centres plus Gaussian noise of total norm about
    /// `spread`, renormalised.
    Clustered { spread: f64 },
}

impl SyntheticMode {
    pub fn clustered() -> Self {
        SyntheticMode::Clustered {
            spread: DEFAULT_CLUSTER_SPREAD,
        }
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Seeded L2-normalised synthetic descriptors. For a fixed seed and mode the
/// first `n` rows do not depend on how many rows are requested, so held-out
/// queries can be drawn as the tail of a larger sample.
pub fn gen_synthetic(n: usize, dim: usize, seed: u64, mode: SyntheticMode) -> Result<VectorSet> {
    if n == 0 || dim == 0 {
        return Err(Error::param("n and dim must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = VectorSet::with_capacity(dim, n);
    let to_f32 = |v: Vec<f64>| -> Vec<f32> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| (x / norm) as f32).collect()
    };
    match mode {
        SyntheticMode::GaussianUnit => {
            for _ in 0..n {
                out.push(&to_f32(gaussian_unit(&mut rng, dim)))?;
            }
        }
        SyntheticMode::Clustered { spread } => {
            if !(spread.is_finite() && spread >= 0.0) {
                return Err(Error::param(format!(
                    "spread must be finite and non-negative, got {spread}"
                )));
            }
            let centers: Vec<Vec<f64>> = (0..CLUSTER_CENTERS)
                .map(|_| gaussian_unit(&mut rng, dim))
                .collect();
            let scale = spread / (dim as f64).sqrt();
            for _ in 0..n {
                let c = &centers[rng.gen_range(0..CLUSTER_CENTERS)];
                let mut v: Vec<f64> = c
                    .iter()
                    .map(|&x| x + scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if v.iter().all(|&x| x == 0.0) {
                    v = c.clone();
                }
                out.push(&to_f32(v))?;
            }
        }
    }
    Ok(out)
}

/// One row of the recall/latency report.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub nprobe: usize,
    /// Exact nearest neighbour found within the top `k`.
    pub recall: f64,
    /// Top-`k` overlap with the exact-L2 oracle.
    pub overlap: f64,
    /// Top-`k` overlap with the exhaustive-ADC oracle, when one was supplied.
    pub overlap_adc: Option<f64>,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    /// Returned ids per query.
    pub results: Vec<Vec<u64>>,
}

/// Exact-L2 top-`k` ids for every query, computed in parallel.
pub fn exact_oracle(
    descriptors: &VectorSet,
    ids: &[u64],
    queries: &VectorSet,
    k: usize,
) -> Result<Vec<Vec<u64>>> {
    queries
        .as_slice()
        .par_chunks_exact(queries.dim())
        .map(|q| {
            Ok(brute_force_search(descriptors, ids, q, k)?
                .into_iter()
                .map(|h| h.id)
                .collect())
        })
        .collect()
}

/// Exhaustive-ADC top-`k` ids for every query, computed in parallel.
pub fn adc_oracle(index: &Index, queries: &VectorSet, k: usize) -> Result<Vec<Vec<u64>>> {
    queries
        .as_slice()
        .par_chunks_exact(queries.dim())
        .map(|q| {
            Ok(exhaustive_adc_search(index, q, k)?
                .into_iter()
                .map(|h| h.id)
                .collect())
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Sweeps `nprobe`, timing each query on the calling thread. One untimed
/// warm-up pass over all queries precedes the sweep.
pub fn bench_recall_latency(
    index: &Index,
    queries: &VectorSet,
    exact: &[Vec<u64>],
    adc: Option<&[Vec<u64>]>,
    k: usize,
    sweep: &[usize],
) -> Result<Vec<BenchRow>> {
    if queries.is_empty() {
        return Err(Error::param("no queries"));
    }
    let mut rows = Vec::with_capacity(sweep.len());
    if let Some(&first) = sweep.first() {
        for q in queries.rows() {
            index.search(q, k, first)?;
        }
    }
    for &nprobe in sweep {
        let mut times = Vec::with_capacity(queries.len());
        let mut found = Vec::with_capacity(queries.len());
        for q in queries.rows() {
            let start = Instant::now();
            let hits = index.search(q, k, nprobe)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            found.push(hits.into_iter().map(|h| h.id).collect::<Vec<_>>());
        }
        let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
        times.sort_by(f64::total_cmp);
        let n = times.len();
        let median_ms = if n % 2 == 1 {
            times[n / 2]
        } else {
            (times[n / 2 - 1] + times[n / 2]) / 2.0
        };
        rows.push(BenchRow {
            nprobe,
            recall: recall_at_k(&found, exact, k)?,
            overlap: overlap_at_k(&found, exact, k)?,
            overlap_adc: adc.map(|o| overlap_at_k(&found, o, k)).transpose()?,
            mean_ms,
            median_ms,
            p99_ms: percentile(&times, 0.99),
            results: found,
        });
    }
    Ok(rows)
}

/// Report as TSV with a header line.
pub fn format_bench_tsv(rows: &[BenchRow]) -> String {
    let mut s = String::from("nprobe\trecall\toverlap\toverlap_adc\tmean_ms\tmedian_ms\tp99_ms\n");
    for r in rows {
        let adc = r
            .overlap_adc
            .map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            s,
            "{}\t{:.6}\t{:.6}\t{}\t{:.4}\t{:.4}\t{:.4}",
            r.nprobe, r.recall, r.overlap, adc, r.mean_ms, r.median_ms, r.p99_ms
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparator::ClassicalConfig;
    use crate::model::{Heatmap, Verdict};
    use crate::quantization::{Codebook, CodebookConfig};
    use proptest::prelude::*;

    #[test]
    fn ir_examples() {
        let results = vec![vec![7, 1, 2], vec![4, 5, 8]];
        let truth = [7, 8];
        assert_eq!(ir_at_k(&results, &truth, 1).unwrap(), 0.5);
        assert_eq!(ir_at_k(&results, &truth, 10).unwrap(), 1.0);
        assert_eq!(ir_at_k(&results, &[99, 98], 3).unwrap(), 0.0);
        assert!(matches!(
            ir_at_k(&results, &truth, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(),
            1.0
        );
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[false, false, false, true]).unwrap();
        assert_eq!(ap, 0.25);
        assert!(matches!(
            average_precision(&[0.5], &[false]),
            Err(Error::Domain(_))
        ));
        // ties keep input order
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    fn score(verdict: Verdict, grid: Vec<f32>) -> PairScore {
        PairScore {
            same_score: 0.9,
            verdict,
            heatmap: Heatmap::new(7, grid, verdict).unwrap(),
        }
    }

    #[test]
    fn iou_adjustment_rules() {
        let theta = ClassicalConfig::default().theta;
        let gt = Mask::from_fn(20, 20, |x, y| x < 10 && y < 10);
        assert_eq!(
            iou_adjusted(&score(Verdict::Benign, vec![1.0; 49]), &gt, theta).unwrap(),
            0.0
        );
        assert_eq!(
            iou_adjusted(&score(Verdict::Distinct, vec![0.0; 49]), &gt, theta).unwrap(),
            0.25
        );
        let empty = Mask::filled(20, 20, false);
        assert_eq!(
            iou_adjusted(&score(Verdict::Benign, vec![0.0; 49]), &empty, theta).unwrap(),
            1.0
        );
        let wrong = Mask::filled(21, 20, false);
        assert!(matches!(mask_iou(&empty, &wrong), Err(Error::Parameter(_))));
    }

    #[test]
    fn iou_of_manipulated_matches_own_mask() {
        let grid: Vec<f32> = (0..49).map(|i| if i % 7 < 3 { 1.0 } else { 0.0 }).collect();
        let s = score(Verdict::Manipulated, grid);
        let pred = adjusted_mask(&s, 28, 28, 0.35).unwrap();
        assert_eq!(iou_adjusted(&s, &pred, 0.35).unwrap(), 1.0);
    }

    #[test]
    fn brute_force_basics() {
        let data = gen_synthetic(50, 8, 3, SyntheticMode::GaussianUnit).unwrap();
        let ids: Vec<u64> = (0..50).map(|i| 100 - i).collect();
        let hits = brute_force_search(&data, &ids, data.row(17), 5).unwrap();
        assert_eq!((hits[0].id, hits[0].distance), (ids[17], 0.0));
        assert_eq!(
            brute_force_search(&data, &ids, data.row(0), 80)
                .unwrap()
                .len(),
            50
        );
        // ties by id
        let flat = VectorSet::new(2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let hits = brute_force_search(&flat, &[9, 4, 1], &[1.0, 0.0], 3).unwrap();
        assert_eq!(hits.iter().map(|h| h.id).collect::<Vec<_>>(), vec![4, 9, 1]);
    }

    #[test]
    fn synthetic_is_seeded_and_unit() {
        for mode in [SyntheticMode::GaussianUnit, SyntheticMode::clustered()] {
            let a = gen_synthetic(200, 32, 11, mode).unwrap();
            assert_eq!(a, gen_synthetic(200, 32, 11, mode).unwrap());
            assert_ne!(a, gen_synthetic(200, 32, 12, mode).unwrap());
            for r in a.rows() {
                let n: f64 = r.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-5);
            }
            let longer = gen_synthetic(300, 32, 11, mode).unwrap();
            assert_eq!(&longer.as_slice()[..a.as_slice().len()], a.as_slice());
        }
    }

    #[test]
    fn clustered_has_lower_quantizer_sse() {
        let n = 4000;
        let k = 64;
        let sse = |mode| {
            let data = gen_synthetic(n, 32, 5, mode).unwrap();
            crate::kmeans::kmeans_train(&data, k, 15, 0).unwrap().sse()
        };
        let clustered = sse(SyntheticMode::Clustered { spread: 0.3 });
        let gaussian = sse(SyntheticMode::GaussianUnit);
        assert!(
            clustered < gaussian,
            "clustered {clustered} vs gaussian {gaussian}"
        );
    }

    #[test]
    fn full_probe_equals_exhaustive_adc() {
        let data = gen_synthetic(3000, 32, 2, SyntheticMode::clustered()).unwrap();
        let cfg = CodebookConfig {
            coarse_k: 16,
            pq_m: 4,
            iters: 8,
            ..Default::default()
        };
        let cb = Codebook::train(&data, &cfg).unwrap();
        let ids: Vec<u64> = (0..3000).collect();
        let index = Index::build(&data, &ids, cb).unwrap();
        let queries = gen_synthetic(3040, 32, 2, SyntheticMode::clustered()).unwrap();
        let queries = queries.select(&(3000..3040).collect::<Vec<_>>());
        let exact = exact_oracle(&data, &ids, &queries, 20).unwrap();
        let adc = adc_oracle(&index, &queries, 20).unwrap();
        let rows =
            bench_recall_latency(&index, &queries, &exact, Some(&adc), 20, &[1, 2, 4, 8, 16])
                .unwrap();
        for w in rows.windows(2) {
            assert!(w[1].recall >= w[0].recall);
            assert!(w[1].overlap >= w[0].overlap);
        }
        assert_eq!(rows.last().unwrap().overlap_adc, Some(1.0));
        assert_eq!(rows.last().unwrap().results, adc);
        let tsv = format_bench_tsv(&rows);
        assert_eq!(tsv.lines().count(), 6);
        assert!(tsv.starts_with("nprobe\trecall\toverlap"));
    }

    #[test]
    fn recall_examples() {
        assert_eq!(
            overlap_at_k(&[vec![1, 2, 3]], &[vec![3, 4, 5]], 3).unwrap(),
            1.0 / 3.0
        );
        assert_eq!(overlap_at_k(&[vec![1, 2]], &[vec![2, 1]], 2).unwrap(), 1.0);
        assert_eq!(
            recall_at_k(
                &[vec![1, 2, 3], vec![1, 2, 3]],
                &[vec![3, 4], vec![4, 3]],
                3
            )
            .unwrap(),
            0.5
        );
        assert_eq!(recall_at_k(&[vec![1, 2, 3]], &[vec![3]], 2).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn ir_is_monotone_in_k(lists in proptest::collection::vec(proptest::collection::vec(0u64..20, 0..15), 1..10), seed in 0u64..20) {
            let truth: Vec<u64> = (0..lists.len() as u64).map(|i| (i * 7 + seed) % 20).collect();
            let mut prev = 0.0;
            for k in 1..20 {
                let v = ir_at_k(&lists, &truth, k).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn ap_invariant_under_monotone_map(scores in proptest::collection::vec(-5.0f64..5.0, 1..30), mask in any::<u32>()) {
            let labels: Vec<bool> = (0..scores.len()).map(|i| (mask >> (i % 32)) & 1 == 1 || i == 0).collect();
            let a = average_precision(&scores, &labels).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert!((a - average_precision(&mapped, &labels).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn iou_bounded_and_exact(a in proptest::collection::vec(any::<bool>(), 36), b in proptest::collection::vec(any::<bool>(), 36)) {
            let ma = Mask { height: 6, width: 6, data: a };
            let mb = Mask { height: 6, width: 6, data: b };
            let v = mask_iou(&ma, &mb).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v == 1.0, ma == mb);
        }
    }
}
