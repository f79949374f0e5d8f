use std::fmt::Write as _;
use std::path::Path;

use provenance_core::comparator::{format_pair_score, ClassicalConfig, PairScorer};
use provenance_core::eval::{
    adc_oracle, average_precision, bench_recall_latency, exact_oracle, format_bench_tsv,
    gen_synthetic, iou_adjusted, ir_at_k, SyntheticMode,
};
use provenance_core::formats::{
    read_descriptors, read_flow, read_image, read_manifest, read_mask, write_descriptors,
    write_gray_map, write_hashes, write_image, write_mask,
};
use provenance_core::index::DEFAULT_NPROBE;
use provenance_core::rerank::{reorder, score_candidates, DEFAULT_RERANK_K};
use provenance_core::{
    adjusted_mask, classify_pair_classical, dewarp, extract_descriptor, normalize_heatmap, phash64,
    upsample_heatmap, ClassicalScorer, Codebook, CodebookConfig, Error, FileScorer, ImageBuffer,
    Index, Manifest, VectorSet, DESCRIPTOR_DIM,
};
use rayon::prelude::*;

use crate::args::*;
use crate::config::{pick, Config};
use crate::tsv;
use crate::Failure;

/// Global flags merged with the config file.
pub struct Ctx {
    pub seed: u64,
    pub quiet: bool,
    pub config: Config,
}

impl Ctx {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn classical(&self, theta: Option<f32>) -> ClassicalConfig {
        let d = ClassicalConfig::default();
        let c = &self.config;
        ClassicalConfig {
            tau_d: pick(None, c.tau_d, d.tau_d),
            tau_same: pick(None, c.tau_same, d.tau_same),
            theta: pick(theta, c.theta, d.theta),
            area_cap: pick(None, c.area_cap, d.area_cap),
            min_contrast: pick(None, c.min_contrast, d.min_contrast),
            grid: pick(None, c.grid, d.grid),
            gem_p: pick(None, c.p, d.gem_p),
        }
    }
}

type Res = Result<(), Failure>;

fn manifest(path: &Path) -> Result<Manifest, Failure> {
    read_manifest(path).map_err(|e| match e {
        Error::DuplicateId(_) => Failure::data(format!("{}: {e}", path.display())),
        e => e.into(),
    })
}

fn vectors(path: &Path) -> Result<VectorSet, Failure> {
    let descs = read_descriptors(path)?;
    Ok(VectorSet::from_rows(DESCRIPTOR_DIM, &descs)?)
}

fn row_ids(
    manifest_path: Option<&Path>,
    rows: usize,
    first: u64,
    what: &Path,
) -> Result<Vec<u64>, Failure> {
    match manifest_path {
        Some(p) => {
            let m = manifest(p)?;
            if m.len() != rows {
                return Err(Failure::data(format!(
                    "{} has {} rows but {} holds {rows} descriptors",
                    p.display(),
                    m.len(),
                    what.display()
                )));
            }
            Ok(m.ids())
        }
        None => Ok((first..first + rows as u64).collect()),
    }
}

pub fn describe(ctx: &Ctx, a: &DescribeArgs) -> Res {
    let m = manifest(&a.images)?;
    match a.method {
        Method::Gem => {
            let p = pick(a.p, ctx.config.p, provenance_core::features::DEFAULT_GEM_P);
            let out: Vec<_> = m
                .rows()
                .par_iter()
                .map(|r| extract_descriptor(&read_image(&r.path)?, p))
                .collect::<provenance_core::Result<_>>()?;
            for (r, e) in m.rows().iter().zip(&out) {
                if e.fallback {
                    ctx.info(format!("warning: image {} has an all-zero descriptor; stored as a unit basis vector", r.id));
                }
            }
            let descs: Vec<_> = out.into_iter().map(|e| e.descriptor).collect();
            write_descriptors(&a.out, &descs)?;
            ctx.info(format!(
                "wrote {} descriptors to {}",
                descs.len(),
                a.out.display()
            ));
        }
        Method::Phash => {
            let codes: Vec<u64> = m
                .rows()
                .par_iter()
                .map(|r| phash64(&read_image(&r.path)?))
                .collect::<provenance_core::Result<_>>()?;
            write_hashes(&a.out, &codes)?;
            ctx.info(format!(
                "wrote {} hashes to {}",
                codes.len(),
                a.out.display()
            ));
        }
    }
    Ok(())
}

pub fn train_index(ctx: &Ctx, a: &TrainIndexArgs) -> Res {
    let data = vectors(&a.descriptors)?;
    let ids = row_ids(a.manifest.as_deref(), data.len(), 0, &a.descriptors)?;
    let d = CodebookConfig::default();
    let c = &ctx.config;
    let cfg = CodebookConfig {
        coarse_k: pick(a.coarse_k, c.coarse_k, d.coarse_k),
        pq_m: pick(a.pq_m, c.pq_m, d.pq_m),
        iters: pick(a.iters, c.iters, d.iters),
        seed: ctx.seed,
        ..d
    };
    let index = Index::build(&data, &ids, Codebook::train(&data, &cfg)?)?;
    index.save(&a.out)?;
    ctx.info(format!(
        "indexed {} vectors into {} cells ({} bytes per code) at {}",
        index.len(),
        cfg.coarse_k,
        cfg.pq_m,
        a.out.display()
    ));
    Ok(())
}

pub fn add(ctx: &Ctx, a: &AddArgs) -> Res {
    let mut index = Index::load(&a.index)?;
    let data = vectors(&a.descriptors)?;
    let first = a.first_id.unwrap_or(index.len() as u64);
    let ids = row_ids(a.manifest.as_deref(), data.len(), first, &a.descriptors)?;
    index.add(&data, &ids)?;
    let out = a.out.as_deref().unwrap_or(&a.index);
    index.save(out)?;
    ctx.info(format!(
        "index now holds {} vectors ({})",
        index.len(),
        out.display()
    ));
    Ok(())
}

pub fn search(ctx: &Ctx, a: &SearchArgs) -> Res {
    let index = Index::load(&a.index)?;
    let queries = vectors(&a.queries)?;
    let k = pick(a.k, ctx.config.k, 100);
    let nprobe = pick(a.nprobe, ctx.config.nprobe, DEFAULT_NPROBE);
    let hits: Vec<_> = queries
        .as_slice()
        .par_chunks_exact(DESCRIPTOR_DIM)
        .map(|q| index.search(q, k, nprobe))
        .collect::<provenance_core::Result<_>>()?;
    write_text(&a.out, &tsv::format_results(&hits))?;
    ctx.info(format!(
        "searched {} queries; results in {}",
        hits.len(),
        a.out.display()
    ));
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Res {
    std::fs::write(path, text)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

pub fn rerank(ctx: &Ctx, a: &RerankArgs) -> Res {
    let results = tsv::read_results(&a.results)?;
    let corpus = manifest(&a.manifest)?;
    let queries = manifest(&a.query_manifest)?;
    let classical = ctx.classical(None);
    let scorer: Box<dyn PairScorer> = match a.scorer.as_str() {
        "classical" => Box::new(ClassicalScorer::new(classical)),
        s => match s.strip_prefix("file:") {
            Some(p) => Box::new(FileScorer::load(Path::new(p))?),
            None => {
                return Err(Failure::usage(format!(
                    "invalid value {s:?} for --scorer; expected classical or file:<scores.tsv>"
                )))
            }
        },
    };
    let k = pick(a.k, ctx.config.k, DEFAULT_RERANK_K);
    let tau_same = pick(a.tau_same, ctx.config.tau_same, classical.tau_same);
    if let Some(&row) = results.keys().find(|&&r| r >= queries.len()) {
        return Err(Failure::data(format!(
            "{} refers to query_row {row} but {} has {} rows",
            a.results.display(),
            a.query_manifest.display(),
            queries.len()
        )));
    }
    if let Some(dir) = &a.heatmap_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))?;
    }
    let resolve = |id: u64| -> provenance_core::Result<ImageBuffer> {
        read_image(&corpus.get(id).ok_or(Error::Lookup(id))?.path)
    };
    let mut out = format!("{}\n", tsv::DECISIONS_HEADER);
    let mut matched = 0;
    for (row, q) in queries.rows().iter().enumerate() {
        let query = read_image(&q.path)?;
        let cand: Vec<u64> = results
            .get(&row)
            .map_or(&[][..], |v| &v[..])
            .iter()
            .take(k)
            .copied()
            .collect();
        let scored = score_candidates(q.id, &query, &cand, resolve, scorer.as_ref())?;
        let scores: Vec<f64> = scored.iter().map(|(_, s)| s.same_score).collect();
        let decision = reorder(&scores, &cand, tau_same)?;
        match decision.matched() {
            Some(i) => {
                matched += 1;
                let (id, s) = &scored[i];
                let _ = writeln!(out, "{}\t{id}\t{}\t{}", q.id, s.same_score, s.verdict);
                if let Some(dir) = &a.heatmap_dir {
                    let cand_img = resolve(*id)?;
                    let (h, w) = (cand_img.height(), cand_img.width());
                    let up = upsample_heatmap(
                        &normalize_heatmap(&s.heatmap.grid),
                        s.heatmap.size,
                        h,
                        w,
                    )?;
                    write_gray_map(&up, h, w, &dir.join(format!("{}.pgm", q.id)))?;
                    let mask = adjusted_mask(s, h, w, classical.theta)?;
                    write_mask(&mask, &dir.join(format!("{}_mask.pgm", q.id)))?;
                }
            }
            None => {
                let best = scores.iter().copied().fold(0.0, f64::max);
                let _ = writeln!(out, "{}\tNONE\t{best}\tdistinct", q.id);
            }
        }
    }
    write_text(&a.out, &out)?;
    ctx.info(format!(
        "{matched}/{} queries matched; decisions in {}",
        queries.len(),
        a.out.display()
    ));
    Ok(())
}

pub fn dewarp_cmd(ctx: &Ctx, a: &DewarpArgs) -> Res {
    let img = read_image(&a.image)?;
    let flow = read_flow(&a.flow)?;
    write_image(&dewarp(&img, &flow)?, &a.out)?;
    ctx.info(format!("wrote {}", a.out.display()));
    Ok(())
}

fn classify(
    ctx: &Ctx,
    query: &Path,
    candidate: &Path,
    flow: Option<&Path>,
    theta: Option<f32>,
) -> Result<(ClassicalConfig, ImageBuffer, provenance_core::PairScore), Failure> {
    let cfg = ctx.classical(theta);
    let q = read_image(query)?;
    let c = read_image(candidate)?;
    let flow = flow.map(read_flow).transpose()?;
    let score = classify_pair_classical(&q, &c, flow.as_ref(), &cfg)?;
    Ok((cfg, c, score))
}

pub fn heatmap(ctx: &Ctx, a: &HeatmapArgs) -> Res {
    let (cfg, c, score) = classify(ctx, &a.query, &a.candidate, a.flow.as_deref(), a.theta)?;
    let (h, w) = (c.height(), c.width());
    let up = upsample_heatmap(&score.heatmap.grid, score.heatmap.size, h, w)?;
    write_gray_map(&up, h, w, &a.out)?;
    write_mask(&adjusted_mask(&score, h, w, cfg.theta)?, &a.mask)?;
    println!(
        "{}",
        format_pair_score(0, 0, &score)
            .splitn(3, '\t')
            .nth(2)
            .unwrap_or_default()
    );
    Ok(())
}

fn relevant_ids(corpus: &Manifest, queries: &Manifest) -> Vec<u64> {
    queries
        .rows()
        .iter()
        .map(|q| {
            corpus
                .rows()
                .iter()
                .find(|r| r.group == q.group)
                .map_or(u64::MAX, |r| r.id)
        })
        .collect()
}

pub fn eval(_ctx: &Ctx, cmd: &EvalCommand) -> Res {
    match cmd {
        EvalCommand::Ir(a) => {
            let corpus = manifest(&a.manifest)?;
            let queries = manifest(&a.query_manifest)?;
            let truth = relevant_ids(&corpus, &queries);
            let ranked: Vec<Vec<u64>> = match (&a.results, &a.decisions) {
                (Some(p), _) => {
                    let r = tsv::read_results(p)?;
                    (0..queries.len())
                        .map(|i| r.get(&i).cloned().unwrap_or_default())
                        .collect()
                }
                (None, Some(p)) => {
                    let d = tsv::read_decisions(p)?;
                    queries
                        .rows()
                        .iter()
                        .map(|q| d.get(&q.id).copied().flatten().into_iter().collect())
                        .collect()
                }
                (None, None) => {
                    return Err(Failure::usage("eval ir needs --results or --decisions"))
                }
            };
            for &k in &a.k {
                println!("IR@{k}\t{:.6}", ir_at_k(&ranked, &truth, k)?);
            }
        }
        EvalCommand::Ap(a) => {
            let (scores, labels) = tsv::read_scored_labels(&a.scores)?;
            println!("AP\t{:.6}", average_precision(&scores, &labels)?);
        }
        EvalCommand::Iou(a) => {
            let (cfg, _, score) =
                classify(_ctx, &a.query, &a.candidate, a.flow.as_deref(), a.theta)?;
            let gt = read_mask(&a.gt)?;
            println!(
                "IoU\t{:.6}\tverdict\t{}",
                iou_adjusted(&score, &gt, cfg.theta)?,
                score.verdict
            );
        }
    }
    Ok(())
}

pub fn bench(ctx: &Ctx, a: &BenchArgs) -> Res {
    let mode = match a.mode {
        Mode::Clustered => SyntheticMode::Clustered { spread: a.spread },
        Mode::GaussianUnit => SyntheticMode::GaussianUnit,
    };
    if a.queries == 0 {
        return Err(Failure::usage("--queries must be at least 1"));
    }
    let all = gen_synthetic(a.n + a.queries, a.dim, ctx.seed, mode)?;
    let base = all.select(&(0..a.n).collect::<Vec<_>>());
    let queries = all.select(&(a.n..a.n + a.queries).collect::<Vec<_>>());
    drop(all);
    let d = CodebookConfig::default();
    let c = &ctx.config;
    let cfg = CodebookConfig {
        coarse_k: pick(a.coarse_k, c.coarse_k, d.coarse_k),
        pq_m: pick(a.pq_m, c.pq_m, d.pq_m),
        iters: pick(a.iters, c.iters, 20),
        seed: ctx.seed,
        coarse_train_sample: a.train_sample,
        ..d
    };
    ctx.info(format!(
        "training on {} of {} vectors",
        cfg.coarse_train_sample.min(a.n),
        a.n
    ));
    let ids: Vec<u64> = (0..a.n as u64).collect();
    let index = Index::build(&base, &ids, Codebook::train(&base, &cfg)?)?;
    let k = pick(a.k, c.k, 100);
    ctx.info("computing exact oracle");
    let exact = exact_oracle(&base, &ids, &queries, k)?;
    let adc = if a.adc_oracle {
        ctx.info("computing exhaustive ADC oracle");
        Some(adc_oracle(&index, &queries, k)?)
    } else {
        None
    };
    // latency is measured on one thread regardless of --threads
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Failure::data(e.to_string()))?;
    let rows = pool
        .install(|| bench_recall_latency(&index, &queries, &exact, adc.as_deref(), k, &a.nprobe))?;
    let report = format_bench_tsv(&rows);
    match &a.out {
        Some(p) => {
            write_text(p, &report)?;
            ctx.info(format!("report in {}", p.display()));
        }
        None => print!("{report}"),
    }
    Ok(())
}
