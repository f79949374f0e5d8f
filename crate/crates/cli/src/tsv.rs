//! Readers and writers for the TSV files exchanged between subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::Failure;

pub const RESULTS_HEADER: &str = "query_row\trank\tid\tdistance";
pub const DECISIONS_HEADER: &str = "query_id\tmatch_id\tsame_score\tverdict";

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn bad(path: &Path, offset: usize, msg: impl std::fmt::Display) -> Failure {
    Failure::data(format!(
        "format error in {} at offset {offset}: {msg}",
        path.display()
    ))
}

/// Data lines of a headed TSV file with their byte offsets.
fn rows<'a>(
    path: &Path,
    text: &'a str,
    header: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>, Failure> {
    let mut offset = 0;
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let at = offset;
        offset += line.len() + 1;
        let line = line.trim_end_matches('\r');
        if i == 0 {
            if line != header {
                return Err(bad(path, 0, format!("header must be {header:?}")));
            }
            continue;
        }
        if !line.is_empty() {
            out.push((at, line.split('\t').collect()));
        }
    }
    if offset == 0 || text.is_empty() {
        return Err(bad(path, 0, "empty file"));
    }
    Ok(out)
}

/// Candidate ids per query row, in rank order.
pub fn read_results(path: &Path) -> Result<BTreeMap<usize, Vec<u64>>, Failure> {
    let text = read_text(path)?;
    let mut ranked: BTreeMap<usize, Vec<(usize, u64)>> = BTreeMap::new();
    for (at, cols) in rows(path, &text, RESULTS_HEADER)? {
        if cols.len() != 4 {
            return Err(bad(
                path,
                at,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let row: usize = cols[0]
            .parse()
            .map_err(|_| bad(path, at, format!("bad query_row {:?}", cols[0])))?;
        let rank: usize = cols[1]
            .parse()
            .map_err(|_| bad(path, at, format!("bad rank {:?}", cols[1])))?;
        let id: u64 = cols[2]
            .parse()
            .map_err(|_| bad(path, at, format!("bad id {:?}", cols[2])))?;
        ranked.entry(row).or_default().push((rank, id));
    }
    Ok(ranked
        .into_iter()
        .map(|(row, mut v)| {
            v.sort_by_key(|&(rank, _)| rank);
            (row, v.into_iter().map(|(_, id)| id).collect())
        })
        .collect())
}

pub fn format_results(hits: &[Vec<provenance_core::SearchHit>]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for (row, list) in hits.iter().enumerate() {
        for (rank, h) in list.iter().enumerate() {
            let _ = writeln!(s, "{row}\t{}\t{}\t{}", rank + 1, h.id, h.distance);
        }
    }
    s
}

/// Matched id (if any) per query id.
pub fn read_decisions(path: &Path) -> Result<BTreeMap<u64, Option<u64>>, Failure> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (at, cols) in rows(path, &text, DECISIONS_HEADER)? {
        if cols.len() != 4 {
            return Err(bad(
                path,
                at,
                format!("expected 4 columns, found {}", cols.len()),
            ));
        }
        let qid: u64 = cols[0]
            .parse()
            .map_err(|_| bad(path, at, format!("bad query_id {:?}", cols[0])))?;
        let matched = match cols[1] {
            "NONE" => None,
            v => Some(
                v.parse()
                    .map_err(|_| bad(path, at, format!("bad match_id {v:?}")))?,
            ),
        };
        out.insert(qid, matched);
    }
    Ok(out)
}

/// `(score, label)` pairs; an optional non-numeric first line is a header.
pub fn read_scored_labels(path: &Path) -> Result<(Vec<f64>, Vec<bool>), Failure> {
    let text = read_text(path)?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    let mut offset = 0;
    for (i, line) in text.split('\n').enumerate() {
        let at = offset;
        offset += line.len() + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if i == 0 && cols.first().is_some_and(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if cols.len() != 2 {
            return Err(bad(
                path,
                at,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        let score: f64 = cols[0]
            .parse()
            .map_err(|_| bad(path, at, format!("bad score {:?}", cols[0])))?;
        let label = match cols[1] {
            "1" => true,
            "0" => false,
            v => return Err(bad(path, at, format!("label must be 0 or 1, found {v:?}"))),
        };
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}
