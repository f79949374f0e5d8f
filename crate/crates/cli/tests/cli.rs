use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use provenance_core::formats::{read_descriptors, write_flow, write_image, write_mask};
use provenance_core::scenes::{benign_transform, random_rect, render_scene, splice};
use provenance_core::FlowField;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_provenance"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `count` scenes starting at `seed` and a manifest listing them.
fn corpus(dir: &Path, name: &str, seed: u64, count: u64) -> PathBuf {
    let mut text = String::from("id\tpath\tgroup\n");
    for i in 0..count {
        let file = format!("{name}_{i}.ppm");
        write_image(&render_scene(seed + i, 48, 48).unwrap(), &dir.join(&file)).unwrap();
        text.push_str(&format!("{}\t{file}\tg{i}\n", 100 + i));
    }
    let path = dir.join(format!("{name}.tsv"));
    std::fs::write(&path, text).unwrap();
    path
}

fn result_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(String::from).collect())
        .collect()
}

#[test]
fn tiny_index_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = corpus(d, "c", 1, 3);
    let (sipd, sipx, res) = (d.join("c.sipd"), d.join("c.sipx"), d.join("r.tsv"));
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    assert_eq!(read_descriptors(&sipd).unwrap().len(), 3);
    ok(&[
        "train-index",
        "--descriptors",
        s(&sipd),
        "--manifest",
        s(&m),
        "--coarse-k",
        "2",
        "--pq-m",
        "2",
        "--out",
        s(&sipx),
    ]);
    ok(&[
        "search",
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--k",
        "10",
        "--out",
        s(&res),
    ]);
    let rows = result_rows(&res);
    for q in 0..3 {
        let mut ids: Vec<&str> = rows
            .iter()
            .filter(|r| r[0] == q.to_string())
            .map(|r| r[2].as_str())
            .collect();
        ids.sort();
        assert_eq!(ids, vec!["100", "101", "102"]);
    }
    let head = std::fs::read_to_string(&res).unwrap();
    assert!(head.starts_with("query_row\trank\tid\tdistance\n0\t1\t100\t"));
}

#[test]
fn k_larger_than_index() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = corpus(d, "c", 20, 10);
    let (sipd, sipx, res) = (d.join("c.sipd"), d.join("c.sipx"), d.join("r.tsv"));
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    ok(&[
        "train-index",
        "--descriptors",
        s(&sipd),
        "--coarse-k",
        "4",
        "--pq-m",
        "8",
        "--out",
        s(&sipx),
        "--quiet",
    ]);
    ok(&[
        "search",
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--k",
        "100",
        "--nprobe",
        "64",
        "--out",
        s(&res),
        "--quiet",
    ]);
    let rows = result_rows(&res);
    for q in 0..10 {
        assert_eq!(rows.iter().filter(|r| r[0] == q.to_string()).count(), 10);
    }
    // without a manifest the ids are row numbers
    assert!(rows.iter().all(|r| r[2].parse::<u64>().unwrap() < 10));
}

#[test]
fn add_appends_and_rejects_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = corpus(d, "c", 40, 6);
    let (sipd, sipx, res) = (d.join("c.sipd"), d.join("c.sipx"), d.join("r.tsv"));
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    ok(&[
        "train-index",
        "--descriptors",
        s(&sipd),
        "--coarse-k",
        "2",
        "--pq-m",
        "4",
        "--out",
        s(&sipx),
        "--quiet",
    ]);
    ok(&[
        "add",
        "--index",
        s(&sipx),
        "--descriptors",
        s(&sipd),
        "--quiet",
    ]);
    ok(&[
        "search",
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--k",
        "100",
        "--out",
        s(&res),
        "--quiet",
    ]);
    assert_eq!(result_rows(&res).iter().filter(|r| r[0] == "0").count(), 12);
    let out = run(&[
        "add",
        "--index",
        s(&sipx),
        "--descriptors",
        s(&sipd),
        "--first-id",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate id"));
}

#[test]
fn phash_describe_writes_siph() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), "c", 3, 2);
    let out = dir.path().join("h.siph");
    ok(&[
        "describe",
        "--images",
        s(&m),
        "--method",
        "phash",
        "--out",
        s(&out),
        "--quiet",
    ]);
    let codes = provenance_core::formats::read_hashes(&out).unwrap();
    assert_eq!(codes.len(), 2);
    assert_ne!(codes[0], codes[1]);
}

#[test]
fn usage_errors_exit_one_with_flag_list() {
    let out = run(&["search", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(
        err.contains("--bogus") && err.contains("valid flags") && err.contains("--nprobe"),
        "{err}"
    );
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subcommands"));
    let out = run(&[
        "rerank",
        "--results",
        "a",
        "--manifest",
        "b",
        "--query-manifest",
        "c",
        "--scorer",
        "magic",
        "--out",
        "d",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "missing results file is a data error"
    );
}

#[test]
fn data_errors_exit_two_naming_file_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), "c", 1, 2);
    let sipd = dir.path().join("c.sipd");
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    let bytes = std::fs::read(&sipd).unwrap();
    std::fs::write(&sipd, &bytes[..bytes.len() - 10]).unwrap();
    let out = run(&[
        "train-index",
        "--descriptors",
        s(&sipd),
        "--out",
        s(&dir.path().join("x.sipx")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains(s(&sipd)) && err.contains("offset"), "{err}");
}

#[test]
fn version_lists_formats() {
    let v = ok(&["--version"]);
    assert!(
        v.contains(env!("CARGO_PKG_VERSION")) && v.contains("SIPX v1") && v.contains("SIPD v1"),
        "{v}"
    );
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = corpus(d, "c", 60, 8);
    let (sipd, sipx, res) = (d.join("c.sipd"), d.join("c.sipx"), d.join("r.tsv"));
    let cfg = d.join("cfg.toml");
    std::fs::write(&cfg, "k = 5\ncoarse_k = 2\npq_m = 4\n").unwrap();
    let c = s(&cfg);
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    ok(&[
        "train-index",
        "--config",
        c,
        "--descriptors",
        s(&sipd),
        "--out",
        s(&sipx),
        "--quiet",
    ]);
    ok(&[
        "search",
        "--config",
        c,
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--out",
        s(&res),
        "--quiet",
    ]);
    assert_eq!(result_rows(&res).iter().filter(|r| r[0] == "0").count(), 5);
    ok(&[
        "search",
        "--config",
        c,
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--k",
        "2",
        "--out",
        s(&res),
        "--quiet",
    ]);
    assert_eq!(result_rows(&res).iter().filter(|r| r[0] == "0").count(), 2);
    std::fs::write(&cfg, "kk = 5\n").unwrap();
    let out = run(&[
        "search",
        "--config",
        c,
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--out",
        s(&res),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dewarp_heatmap_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let orig = render_scene(5, 70, 70).unwrap();
    let donor = render_scene(6, 70, 70).unwrap();
    let rect = random_rect(1, 70, 70, 20);
    let edited = splice(&orig, &donor, rect).unwrap();
    let (q, c, gt) = (d.join("q.ppm"), d.join("c.ppm"), d.join("gt.pgm"));
    write_image(&edited, &q).unwrap();
    write_image(&orig, &c).unwrap();
    write_mask(&rect.mask(70, 70), &gt).unwrap();
    let flow = d.join("f.sipf");
    write_flow(&FlowField::constant(70, 70, 0.0, 0.0).unwrap(), &flow).unwrap();

    let aligned = d.join("a.ppm");
    ok(&[
        "dewarp",
        "--image",
        s(&q),
        "--flow",
        s(&flow),
        "--out",
        s(&aligned),
        "--quiet",
    ]);
    assert_eq!(std::fs::read(&aligned).unwrap(), std::fs::read(&q).unwrap());

    let (heat, mask) = (d.join("h.pgm"), d.join("m.pgm"));
    let line = ok(&[
        "heatmap",
        "--query",
        s(&q),
        "--candidate",
        s(&c),
        "--flow",
        s(&flow),
        "--out",
        s(&heat),
        "--mask",
        s(&mask),
    ]);
    assert!(line.contains("manipulated"), "{line}");
    let heat_img = provenance_core::formats::read_image(&heat).unwrap();
    assert_eq!(
        (heat_img.height(), heat_img.width(), heat_img.channels()),
        (70, 70, 1)
    );

    let iou = ok(&[
        "eval",
        "iou",
        "--query",
        s(&q),
        "--candidate",
        s(&c),
        "--gt",
        s(&gt),
    ]);
    let v: f64 = iou.split('\t').nth(1).unwrap().parse().unwrap();
    assert!(v >= 0.3, "{iou}");

    let scores = d.join("s.tsv");
    std::fs::write(&scores, "score\tlabel\n0.9\t1\n0.8\t0\n0.7\t1\n").unwrap();
    assert_eq!(
        ok(&["eval", "ap", "--scores", s(&scores)]).trim(),
        "AP\t0.833333"
    );
}

/// Builds the desk corpus: originals, distractors and three derived queries
/// per original (benign, spliced, spliced + benign).
fn desk_corpus(d: &Path) -> (PathBuf, PathBuf) {
    let (originals, distractors) = (8u64, 16u64);
    let mut corpus = String::from("id\tpath\tgroup\n");
    for i in 0..originals + distractors {
        let file = format!("o{i}.ppm");
        write_image(&render_scene(300 + i, 64, 64).unwrap(), &d.join(&file)).unwrap();
        corpus.push_str(&format!("{i}\t{file}\tg{i}\n"));
    }
    let mut queries = String::from("id\tpath\tgroup\n");
    for i in 0..originals {
        let orig = render_scene(300 + i, 64, 64).unwrap();
        let edited = splice(
            &orig,
            &render_scene(900 + i, 64, 64).unwrap(),
            random_rect(i, 64, 64, 20),
        )
        .unwrap();
        let variants = [
            benign_transform(&orig, 56, 56, 0.02, i).unwrap(),
            edited.clone(),
            benign_transform(&edited, 72, 72, 0.02, i + 50).unwrap(),
        ];
        for (v, img) in variants.iter().enumerate() {
            let file = format!("q{i}_{v}.ppm");
            write_image(img, &d.join(&file)).unwrap();
            queries.push_str(&format!("{}\t{file}\tg{i}\n", 1000 + 3 * i + v as u64));
        }
    }
    let (cm, qm) = (d.join("corpus.tsv"), d.join("queries.tsv"));
    std::fs::write(&cm, corpus).unwrap();
    std::fs::write(&qm, queries).unwrap();
    (cm, qm)
}

/// Runs stage 1 → 2 → 3 and returns every output file's bytes by name.
fn pipeline(d: &Path, threads: &str) -> Vec<(String, Vec<u8>)> {
    let (cm, qm) = (d.join("corpus.tsv"), d.join("queries.tsv"));
    let out = d.join(format!("out{threads}"));
    std::fs::create_dir_all(&out).unwrap();
    let p = |n: &str| out.join(n);
    let t = ["--threads", threads, "--quiet", "--seed", "3"];
    let with = |args: &[&str]| {
        let mut v = args.to_vec();
        v.extend_from_slice(&t);
        ok(&v)
    };
    with(&["describe", "--images", s(&cm), "--out", s(&p("c.sipd"))]);
    with(&["describe", "--images", s(&qm), "--out", s(&p("q.sipd"))]);
    with(&[
        "train-index",
        "--descriptors",
        s(&p("c.sipd")),
        "--manifest",
        s(&cm),
        "--coarse-k",
        "4",
        "--out",
        s(&p("c.sipx")),
    ]);
    with(&[
        "search",
        "--index",
        s(&p("c.sipx")),
        "--queries",
        s(&p("q.sipd")),
        "--out",
        s(&p("results.tsv")),
    ]);
    with(&[
        "rerank",
        "--results",
        s(&p("results.tsv")),
        "--manifest",
        s(&cm),
        "--query-manifest",
        s(&qm),
        "--heatmap-dir",
        s(&p("heat")),
        "--out",
        s(&p("decisions.tsv")),
    ]);
    let mut files: Vec<(String, Vec<u8>)> =
        ["c.sipd", "q.sipd", "c.sipx", "results.tsv", "decisions.tsv"]
            .iter()
            .map(|n| (n.to_string(), std::fs::read(p(n)).unwrap()))
            .collect();
    let mut heat: Vec<_> = std::fs::read_dir(p("heat"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    heat.sort();
    for h in heat {
        files.push((
            h.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&h).unwrap(),
        ));
    }
    files
}

#[test]
fn desk_pipeline_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (cm, qm) = desk_corpus(d);
    let a = pipeline(d, "1");
    let b = pipeline(d, "3");
    assert_eq!(a.len(), b.len());
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
    assert!(a.iter().filter(|(n, _)| n.ends_with("_mask.pgm")).count() >= 20);

    let out = d.join("out1");
    let ir = ok(&[
        "eval",
        "ir",
        "--results",
        s(&out.join("results.tsv")),
        "--manifest",
        s(&cm),
        "--query-manifest",
        s(&qm),
        "--k",
        "1,100",
    ]);
    assert!(ir.contains("IR@100\t1.000000"), "{ir}");
    let after = ok(&[
        "eval",
        "ir",
        "--decisions",
        s(&out.join("decisions.tsv")),
        "--manifest",
        s(&cm),
        "--query-manifest",
        s(&qm),
        "--k",
        "1",
    ]);
    let before: f64 = ir
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let after: f64 = after.trim().split('\t').nth(1).unwrap().parse().unwrap();
    assert!(
        after >= before,
        "rerank IR@1 {after} < search IR@1 {before}"
    );

    let decisions = std::fs::read_to_string(out.join("decisions.tsv")).unwrap();
    assert!(decisions.starts_with("query_id\tmatch_id\tsame_score\tverdict\n"));
    for line in decisions.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        let qid: u64 = cols[0].parse().unwrap();
        if !qid.is_multiple_of(3) {
            assert_eq!(cols[3], "manipulated", "{line}");
        }
    }
}

#[test]
fn file_scorer_drives_rerank() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let m = corpus(d, "c", 70, 3);
    let (sipd, sipx, res, dec) = (
        d.join("c.sipd"),
        d.join("c.sipx"),
        d.join("r.tsv"),
        d.join("d.tsv"),
    );
    ok(&["describe", "--images", s(&m), "--out", s(&sipd), "--quiet"]);
    ok(&[
        "train-index",
        "--descriptors",
        s(&sipd),
        "--manifest",
        s(&m),
        "--coarse-k",
        "1",
        "--pq-m",
        "2",
        "--out",
        s(&sipx),
        "--quiet",
    ]);
    ok(&[
        "search",
        "--index",
        s(&sipx),
        "--queries",
        s(&sipd),
        "--out",
        s(&res),
        "--quiet",
    ]);
    let grid = vec!["0"; 49].join("\t");
    let mut scores = String::new();
    for q in 100..103 {
        for c in 100..103 {
            // every query prefers candidate 102
            let sc = if c == 102 { 0.9 } else { 0.1 };
            scores.push_str(&format!("{q}\t{c}\t{sc}\tbenign\t{grid}\n"));
        }
    }
    let sf = d.join("scores.tsv");
    std::fs::write(&sf, scores).unwrap();
    let scorer = format!("file:{}", s(&sf));
    ok(&[
        "rerank",
        "--results",
        s(&res),
        "--manifest",
        s(&m),
        "--query-manifest",
        s(&m),
        "--scorer",
        &scorer,
        "--out",
        s(&dec),
        "--quiet",
    ]);
    let text = std::fs::read_to_string(&dec).unwrap();
    let matched: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap())
        .collect();
    assert_eq!(matched, vec!["102"; 3]);
    let out = run(&[
        "rerank",
        "--results",
        s(&res),
        "--manifest",
        s(&m),
        "--query-manifest",
        s(&m),
        "--scorer",
        "magic",
        "--out",
        s(&dec),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("rep.tsv");
    ok(&[
        "bench",
        "--n",
        "3000",
        "--dim",
        "32",
        "--queries",
        "20",
        "--coarse-k",
        "16",
        "--pq-m",
        "4",
        "--iters",
        "5",
        "--nprobe",
        "1,4,16",
        "--k",
        "10",
        "--adc-oracle",
        "--seed",
        "7",
        "--out",
        s(&rep),
        "--quiet",
    ]);
    let text = std::fs::read_to_string(&rep).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    let recall: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(recall.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(rows[2][3], "1.000000");
}
