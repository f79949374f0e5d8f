//! Pairwise comparison: SSD heatmaps, heatmap post-processing and the
//! pluggable pair scorer used by re-ranking and localisation.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{extract_descriptor, DEFAULT_GEM_P};
use crate::formats::read_file;
use crate::geometry::{dewarp, identity_flow};
use crate::model::{FlowField, Heatmap, ImageBuffer, Mask, Verdict};

pub const DEFAULT_GRID: usize = 7;
pub const DEFAULT_THRESHOLD: f32 = 0.35;

/// Score of one query/candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    /// Likelihood in `[0, 1]` that the two images share an origin.
    pub same_score: f64,
    pub verdict: Verdict,
    /// Normalised grid; its verdict equals `verdict`.
    pub heatmap: Heatmap,
}

/// One pair handed to a [`PairScorer`].
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub query_id: u64,
    pub query: &'a ImageBuffer,
    pub candidate_id: u64,
    pub candidate: &'a ImageBuffer,
    /// Flow aligning the query onto the candidate grid; identity when absent.
    pub flow: Option<&'a FlowField>,
}

/// Scores query/candidate pairs. Implementations must be pure: the same
/// input always yields the same score.
pub trait PairScorer: Sync {
    fn score(&self, pair: &PairInput<'_>) -> Result<PairScore>;
}

/// Thresholds of the classical scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalConfig {
    /// Descriptor cosine distance at which `same_score` reaches zero.
    pub tau_d: f64,
    /// Pairs scoring below this are `distinct`.
    pub tau_same: f64,
    /// Normalised cell value above which a cell is hot.
    pub theta: f32,
    /// Largest hot-cell fraction still read as a local manipulation.
    pub area_cap: f64,
    /// Raw SSD grids whose max-min spread is below this carry no localisation
    /// signal and normalise to zeros.
    pub min_contrast: f64,
    pub grid: usize,
    pub gem_p: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            tau_d: 0.3,
            tau_same: 0.5,
            theta: DEFAULT_THRESHOLD,
            area_cap: 0.5,
            min_contrast: 0.01,
            grid: DEFAULT_GRID,
            gem_p: DEFAULT_GEM_P,
        }
    }
}

/// Boundaries of `t` near-equal spans over `len`; the last `len % t` spans
/// get one extra element.
fn spans(len: usize, t: usize) -> Vec<(usize, usize)> {
    let base = len / t;
    let extra = len % t;
    let mut start = 0;
    (0..t)
        .map(|i| {
            let size = base + usize::from(i >= t - extra);
            let span = (start, start + size);
            start += size;
            span
        })
        .collect()
}

/// Per-pixel squared difference summed over channels, average-pooled onto a
/// `t`×`t` grid (row-major).
pub fn ssd_heatmap(a: &ImageBuffer, b: &ImageBuffer, t: usize) -> Result<Vec<f32>> {
    if !a.same_shape(b) {
        return Err(Error::param(format!(
            "images differ in shape: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    if t == 0 || a.height() < t || a.width() < t {
        return Err(Error::dim(format!(
            "cannot pool {}x{} onto a {t}x{t} grid",
            a.height(),
            a.width()
        )));
    }
    let rows = spans(a.height(), t);
    let cols = spans(a.width(), t);
    let mut grid = Vec::with_capacity(t * t);
    for &(y0, y1) in &rows {
        for &(x0, x1) in &cols {
            let mut sum = 0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    for (p, q) in a.pixel(x, y).iter().zip(b.pixel(x, y)) {
                        let d = (p - q) as f64;
                        sum += d * d;
                    }
                }
            }
            grid.push((sum / ((y1 - y0) * (x1 - x0)) as f64) as f32);
        }
    }
    Ok(grid)
}

/// Min-max normalisation to `[0, 1]`; a constant grid maps to zeros.
pub fn normalize_heatmap(grid: &[f32]) -> Vec<f32> {
    let (lo, hi) = grid
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if grid.is_empty() || hi <= lo {
        return vec![0.0; grid.len()];
    }
    let range = (hi - lo) as f64;
    grid.iter()
        .map(|&v| ((v - lo) as f64 / range) as f32)
        .collect()
}

/// Catmull-Rom kernel (a = -0.5).
fn cubic_weights(f: f64) -> [f64; 4] {
    let a = -0.5;
    let w = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
        } else if x < 2.0 {
            a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
        } else {
            0.0
        }
    };
    [w(1.0 + f), w(f), w(1.0 - f), w(2.0 - f)]
}

/// Taps and weights for resampling `n_in` samples to `n_out` with centre
/// alignment; taps and coordinates clamp to the edge.
fn cubic_axis(n_in: usize, n_out: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let base = src.floor();
            let f = src - base;
            let base = base as isize;
            let taps = [-1isize, 0, 1, 2].map(|d| (base + d).clamp(0, n_in as isize - 1) as usize);
            (taps, cubic_weights(f))
        })
        .collect()
}

/// Bicubic (Catmull-Rom) upsampling of a `t`×`t` grid to `height`×`width`,
/// clipped to `[0, 1]`.
pub fn upsample_heatmap(grid: &[f32], t: usize, height: usize, width: usize) -> Result<Vec<f32>> {
    if grid.len() != t * t || t == 0 {
        return Err(Error::dim(format!(
            "grid of {} values is not {t}x{t}",
            grid.len()
        )));
    }
    if height < t || width < t {
        return Err(Error::dim(format!(
            "target {height}x{width} is smaller than the {t}x{t} grid"
        )));
    }
    let ys = cubic_axis(t, height);
    let xs = cubic_axis(t, width);
    // horizontal pass: t rows × width
    let mut horiz = vec![0f64; t * width];
    for r in 0..t {
        for (x, (taps, w)) in xs.iter().enumerate() {
            horiz[r * width + x] = (0..4).map(|i| w[i] * grid[r * t + taps[i]] as f64).sum();
        }
    }
    let mut out = Vec::with_capacity(height * width);
    for (taps, w) in &ys {
        for x in 0..width {
            let v: f64 = (0..4).map(|i| w[i] * horiz[taps[i] * width + x]).sum();
            out.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Ok(out)
}

/// Set where the map is strictly above `theta`.
pub fn threshold_mask(map: &[f32], height: usize, width: usize, theta: f32) -> Result<Mask> {
    if map.len() != height * width {
        return Err(Error::dim(format!(
            "{} values do not fill {height}x{width}",
            map.len()
        )));
    }
    Ok(Mask {
        height,
        width,
        data: map.iter().map(|&v| v > theta).collect(),
    })
}

/// Prediction mask adjusted by the pair verdict: all zeros for a benign
/// pair, all ones for a distinct pair, otherwise the thresholded upsampled
/// normalised heatmap.
pub fn adjusted_mask(score: &PairScore, height: usize, width: usize, theta: f32) -> Result<Mask> {
    match score.verdict {
        Verdict::Benign => Ok(Mask::filled(height, width, false)),
        Verdict::Distinct => Ok(Mask::filled(height, width, true)),
        Verdict::Manipulated => {
            let hm = &score.heatmap;
            let up = upsample_heatmap(&normalize_heatmap(&hm.grid), hm.size, height, width)?;
            threshold_mask(&up, height, width, theta)
        }
    }
}

/// Verdict from the same-score and a normalised grid.
pub fn decide_verdict(same_score: f64, grid: &[f32], config: &ClassicalConfig) -> Verdict {
    if same_score < config.tau_same {
        return Verdict::Distinct;
    }
    let hot = grid.iter().filter(|&&v| v > config.theta).count();
    if hot == 0 {
        Verdict::Benign
    } else if hot as f64 / grid.len() as f64 <= config.area_cap {
        Verdict::Manipulated
    } else {
        Verdict::Distinct
    }
}

fn to_channels(img: &ImageBuffer, channels: usize) -> ImageBuffer {
    if img.channels() == channels {
        img.clone()
    } else {
        img.to_gray()
    }
}

/// Deterministic pair classifier built from the descriptor distance and the
/// SSD heatmap of the aligned pair.
///
/// A query whose size differs from the candidate is first resampled onto the
/// candidate grid; a colour/grayscale mix is compared in grayscale.
pub fn classify_pair_classical(
    query: &ImageBuffer,
    candidate: &ImageBuffer,
    flow: Option<&FlowField>,
    config: &ClassicalConfig,
) -> Result<PairScore> {
    let dq = extract_descriptor(query, config.gem_p)?.descriptor;
    let dc = extract_descriptor(candidate, config.gem_p)?.descriptor;
    let d_desc = dq.cosine_distance(&dc).max(0.0);
    let same_score = 1.0 - (d_desc / config.tau_d).clamp(0.0, 1.0);

    let channels = query.channels().min(candidate.channels());
    let cand = to_channels(candidate, channels);
    let mut q = to_channels(query, channels);
    if q.height() != cand.height() || q.width() != cand.width() {
        q = q.resize_bilinear(cand.height(), cand.width())?;
    }
    let aligned = match flow {
        Some(f) => dewarp(&q, f)?,
        None => dewarp(&q, &identity_flow(q.height(), q.width()))?,
    };
    let raw = ssd_heatmap(&aligned, &cand, config.grid)?;
    let (lo, hi) = raw
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let grid = if ((hi - lo) as f64) < config.min_contrast {
        vec![0.0; raw.len()]
    } else {
        normalize_heatmap(&raw)
    };
    let verdict = decide_verdict(same_score, &grid, config);
    Ok(PairScore {
        same_score,
        verdict,
        heatmap: Heatmap::new(config.grid, grid, verdict)?,
    })
}

/// [`classify_pair_classical`] behind the [`PairScorer`] interface.
#[derive(Debug, Clone, Default)]
pub struct ClassicalScorer {
    pub config: ClassicalConfig,
}

impl ClassicalScorer {
    pub fn new(config: ClassicalConfig) -> Self {
        Self { config }
    }
}

impl PairScorer for ClassicalScorer {
    fn score(&self, pair: &PairInput<'_>) -> Result<PairScore> {
        classify_pair_classical(pair.query, pair.candidate, pair.flow, &self.config)
    }
}

/// Precomputed scores loaded from a TSV of
/// `query_id  candidate_id  same_score  verdict  g_0 … g_{t²-1}`.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    scores: HashMap<(u64, u64), PairScore>,
}

impl FileScorer {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let mut scores = HashMap::new();
        let mut offset = 0u64;
        for line in text.lines() {
            let at = offset;
            offset += line.len() as u64 + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with("query_id") {
                continue;
            }
            let fail = |msg: String| Error::format(context, at, msg);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 5 {
                return Err(fail(format!(
                    "expected at least 5 columns, found {}",
                    cols.len()
                )));
            }
            let qid = cols[0]
                .parse::<u64>()
                .map_err(|_| fail(format!("bad query id {:?}", cols[0])))?;
            let cid = cols[1]
                .parse::<u64>()
                .map_err(|_| fail(format!("bad candidate id {:?}", cols[1])))?;
            let same_score = cols[2]
                .parse::<f64>()
                .ok()
                .filter(|s| s.is_finite())
                .ok_or_else(|| fail(format!("bad same_score {:?}", cols[2])))?;
            let verdict: Verdict = cols[3].parse().map_err(|e: Error| fail(e.to_string()))?;
            let grid = cols[4..]
                .iter()
                .map(|v| {
                    v.parse::<f32>()
                        .map_err(|_| fail(format!("bad grid value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let t = (grid.len() as f64).sqrt().round() as usize;
            if t * t != grid.len() {
                return Err(fail(format!(
                    "{} grid values do not form a square",
                    grid.len()
                )));
            }
            let heatmap = Heatmap::new(t, grid, verdict).map_err(|e| fail(e.to_string()))?;
            scores.insert(
                (qid, cid),
                PairScore {
                    same_score,
                    verdict,
                    heatmap,
                },
            );
        }
        Ok(Self { scores })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|e| {
            Error::format(
                path.display().to_string(),
                e.utf8_error().valid_up_to() as u64,
                "not UTF-8",
            )
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl PairScorer for FileScorer {
    fn score(&self, pair: &PairInput<'_>) -> Result<PairScore> {
        self.scores
            .get(&(pair.query_id, pair.candidate_id))
            .cloned()
            .ok_or(Error::Lookup(pair.candidate_id))
    }
}

/// One line of the file-scorer TSV format.
pub fn format_pair_score(query_id: u64, candidate_id: u64, score: &PairScore) -> String {
    let mut line = format!(
        "{query_id}\t{candidate_id}\t{}\t{}",
        score.same_score, score.verdict
    );
    for v in &score.heatmap.grid {
        line.push('\t');
        line.push_str(&v.to_string());
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scene(h: usize, w: usize) -> ImageBuffer {
        ImageBuffer::from_fn(h, w, 3, |x, y, c| {
            let (fx, fy) = (x as f32 / w as f32, y as f32 / h as f32);
            [0.2 + 0.6 * fx, 0.3 + 0.4 * (fx * fy), 0.8 - 0.5 * fy][c]
        })
        .unwrap()
    }

    fn invert_region(img: &ImageBuffer, x0: usize, y0: usize, x1: usize, y1: usize) -> ImageBuffer {
        ImageBuffer::from_fn(img.height(), img.width(), img.channels(), |x, y, c| {
            let v = img.get(x, y, c);
            if x >= x0 && x < x1 && y >= y0 && y < y1 {
                1.0 - v
            } else {
                v
            }
        })
        .unwrap()
    }

    #[test]
    fn spans_put_remainder_last() {
        assert_eq!(spans(10, 3), vec![(0, 3), (3, 6), (6, 10)]);
        assert_eq!(
            spans(9, 7),
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 7), (7, 9)]
        );
    }

    #[test]
    fn identical_images_give_zero_grid() {
        let img = scene(30, 40);
        assert!(ssd_heatmap(&img, &img, 7)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_difference() {
        // 70x70 splits into 10x10 cells
        let img = scene(70, 70);
        let edited = invert_region(&img, 32, 41, 38, 48);
        let grid = ssd_heatmap(&img, &edited, 7).unwrap();
        let hot: Vec<usize> = (0..49).filter(|&i| grid[i] != 0.0).collect();
        assert_eq!(hot, vec![4 * 7 + 3]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(matches!(
            ssd_heatmap(&scene(20, 20), &scene(20, 21), 7),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_heatmap(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_heatmap(&[3.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn upsample_identity_and_constant() {
        let grid: Vec<f32> = (0..49).map(|i| i as f32 / 48.0).collect();
        assert_eq!(upsample_heatmap(&grid, 7, 7, 7).unwrap(), grid);
        let up = upsample_heatmap(&[0.4; 49], 7, 33, 50).unwrap();
        assert!(up.iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn bicubic_matches_bilinear_on_ramp_interior() {
        let t = 7;
        let grid: Vec<f32> = (0..t * t)
            .map(|i| (i % t) as f32 / 10.0 + (i / t) as f32 / 20.0)
            .collect();
        let (h, w) = (70, 91);
        let up = upsample_heatmap(&grid, t, h, w).unwrap();
        for y in 0..h {
            let sy = (y as f64 + 0.5) * t as f64 / h as f64 - 0.5;
            for x in 0..w {
                let sx = (x as f64 + 0.5) * t as f64 / w as f64 - 0.5;
                // the cubic support stays inside the grid between centres 1 and t-2
                if sx < 1.0 || sy < 1.0 || sx > (t - 2) as f64 || sy > (t - 2) as f64 {
                    continue;
                }
                let bilinear = sx / 10.0 + sy / 20.0;
                assert!((up[y * w + x] as f64 - bilinear).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let m = threshold_mask(&[0.3, 0.4], 1, 2, 0.35).unwrap();
        assert_eq!(m.data, vec![false, true]);
        assert_eq!(threshold_mask(&[0.3, 1.0], 1, 2, 1.0).unwrap().count(), 0);
        assert_eq!(threshold_mask(&[0.01, 1.0], 1, 2, 0.0).unwrap().count(), 2);
    }

    #[test]
    fn self_pair_is_benign() {
        let img = scene(64, 64);
        let s = classify_pair_classical(&img, &img, None, &ClassicalConfig::default()).unwrap();
        assert_eq!(s.same_score, 1.0);
        assert_eq!(s.verdict, Verdict::Benign);
        assert!(s.heatmap.grid.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverted_cell_is_manipulated_and_hot() {
        let img = scene(70, 70);
        let edited = invert_region(&img, 30, 20, 40, 30);
        let s = classify_pair_classical(&edited, &img, None, &ClassicalConfig::default()).unwrap();
        assert_eq!(s.verdict, Verdict::Manipulated);
        let hottest = (0..49)
            .max_by(|&a, &b| s.heatmap.grid[a].total_cmp(&s.heatmap.grid[b]))
            .unwrap();
        assert_eq!(hottest, 2 * 7 + 3);
    }

    #[test]
    fn noise_image_is_distinct() {
        let img = scene(64, 64);
        let noise = ImageBuffer::from_fn(64, 64, 3, |x, y, c| {
            ((x * 7919 + y * 104_729 + c * 31) as u32).wrapping_mul(2_654_435_761) as f32
                / u32::MAX as f32
        })
        .unwrap();
        let s = classify_pair_classical(&noise, &img, None, &ClassicalConfig::default()).unwrap();
        assert_eq!(s.verdict, Verdict::Distinct);
        assert_eq!(s.same_score, 0.0);
    }

    #[test]
    fn adjusted_mask_rules() {
        let grid: Vec<f32> = (0..49).map(|i| if i == 24 { 1.0 } else { 0.0 }).collect();
        let mk = |verdict| PairScore {
            same_score: 0.9,
            verdict,
            heatmap: Heatmap::new(7, grid.clone(), verdict).unwrap(),
        };
        assert_eq!(
            adjusted_mask(&mk(Verdict::Benign), 14, 14, 0.35)
                .unwrap()
                .count(),
            0
        );
        assert_eq!(
            adjusted_mask(&mk(Verdict::Distinct), 14, 14, 0.35)
                .unwrap()
                .count(),
            196
        );
        let m = adjusted_mask(&mk(Verdict::Manipulated), 14, 14, 0.35).unwrap();
        let composed = threshold_mask(
            &upsample_heatmap(&normalize_heatmap(&grid), 7, 14, 14).unwrap(),
            14,
            14,
            0.35,
        )
        .unwrap();
        assert_eq!(m, composed);
        assert!(m.get(7, 7) && !m.get(0, 0));
    }

    #[test]
    fn file_scorer_reads_rows() {
        let grid = vec!["0"; 49].join("\t");
        let text = format!(
            "query_id\tcandidate_id\tsame_score\tverdict\tgrid\n5\t9\t0.75\tbenign\t{grid}\n"
        );
        let fs = FileScorer::parse(&text, "mem").unwrap();
        let img = scene(20, 20);
        let pair = |cid| PairInput {
            query_id: 5,
            query: &img,
            candidate_id: cid,
            candidate: &img,
            flow: None,
        };
        let s = fs.score(&pair(9)).unwrap();
        assert_eq!(
            (s.same_score, s.verdict, s.heatmap.size),
            (0.75, Verdict::Benign, 7)
        );
        assert!(matches!(fs.score(&pair(10)), Err(Error::Lookup(10))));
        let line = format_pair_score(5, 9, &s);
        let again = FileScorer::parse(&line, "mem").unwrap();
        assert_eq!(again.score(&pair(9)).unwrap(), s);
        assert!(FileScorer::parse("1\t2\t0.5\tweird\t0", "mem").is_err());
        assert!(FileScorer::parse("1\t2\t0.5\tbenign\t0\t0", "mem").is_err());
    }

    proptest! {
        #[test]
        fn ssd_is_symmetric(seed in any::<u32>(), h in 7usize..20, w in 7usize..20) {
            let a = ImageBuffer::from_fn(h, w, 1, |x, y, _| ((x as u32 * 31 + y as u32 * 17 + seed) % 101) as f32 / 100.0).unwrap();
            let b = ImageBuffer::from_fn(h, w, 1, |x, y, _| ((x as u32 * 13 + y as u32 * 7 + seed / 3) % 97) as f32 / 96.0).unwrap();
            prop_assert_eq!(ssd_heatmap(&a, &b, 7).unwrap(), ssd_heatmap(&b, &a, 7).unwrap());
            prop_assert!(ssd_heatmap(&a, &a, 7).unwrap().iter().all(|&v| v == 0.0));
        }

        #[test]
        fn growing_edit_never_cools_cells(x0 in 0usize..60, y0 in 0usize..60, s1 in 1usize..20, grow in 0usize..20) {
            let img = scene(70, 70);
            let small = invert_region(&img, x0, y0, (x0 + s1).min(70), (y0 + s1).min(70));
            let s2 = s1 + grow;
            let big = invert_region(&img, x0, y0, (x0 + s2).min(70), (y0 + s2).min(70));
            let hot = |e: &ImageBuffer| ssd_heatmap(&img, e, 7).unwrap().iter().filter(|&&v| v > 0.0).count();
            prop_assert!(hot(&big) >= hot(&small));
        }

        #[test]
        fn verdict_is_symmetric_without_flow(seed in 0u32..1000, x0 in 0usize..50, y0 in 0usize..50) {
            let img = scene(64, 64);
            let other = ImageBuffer::from_fn(64, 64, 3, |x, y, c| {
                let v = img.get(x, y, c);
                if x >= x0 && x < x0 + 12 && y >= y0 && y < y0 + 12 { ((seed as usize + c * 7) % 10) as f32 / 10.0 } else { v }
            }).unwrap();
            let cfg = ClassicalConfig::default();
            let ab = classify_pair_classical(&img, &other, None, &cfg).unwrap();
            let ba = classify_pair_classical(&other, &img, None, &cfg).unwrap();
            prop_assert_eq!(ab.verdict, ba.verdict);
            prop_assert_eq!(ab.heatmap.grid, ba.heatmap.grid);
        }
    }
}
