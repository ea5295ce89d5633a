//! Browser bindings. Each export takes plain strings and numbers and
//! returns a JSON string; errors come back as `{"error": "..."}`.

use std::collections::BTreeSet;

use mder::corpus::EntityKind;
use mder::crf::{brute_force, log_partition, viterbi, TransitionMatrix};
use mder::mining::{
    betweenness, build_graph, canonical_paper, filter_edges, top_k, years, AliasMap, RawPaper,
};
use mder::rules::{RuleLexicon, RuleTag};
use mder::tagscheme::{Tag, NUM_TAGS};
use mder::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Longest sentence the CRF explorer will enumerate exhaustively.
pub const MAX_CRF_LENGTH: usize = 6;

fn lines(s: &str) -> Vec<String> {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Rule tags and matched spans for `text`. With all three lists empty the
/// bundled lexicon is used.
pub fn rule_tags_json(text: &str, methods: &str, datasets: &str, blacklist: &str) -> Result<Value, String> {
    let (m, d, b) = (lines(methods), lines(datasets), lines(blacklist));
    let lexicon = if m.is_empty() && d.is_empty() && b.is_empty() {
        RuleLexicon::builtin()
    } else {
        RuleLexicon::new(&m, &d, &b).map_err(|e| e.to_string())?
    };
    let tags = lexicon.tag(text).0;
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        let kind = match tags[i] {
            RuleTag::BeginMethod => Some(EntityKind::M),
            RuleTag::BeginDataset => Some(EntityKind::D),
            _ => None,
        };
        let Some(kind) = kind else {
            i += 1;
            continue;
        };
        let inside = if kind == EntityKind::M { RuleTag::InsideMethod } else { RuleTag::InsideDataset };
        let mut end = i + 1;
        while end < tags.len() && tags[end] == inside {
            end += 1;
        }
        let surface: String = chars[i..end].iter().collect();
        spans.push(json!({ "start": i, "end": end, "kind": kind, "surface": surface }));
        i = end;
    }
    let (nm, nd, nb) = lexicon.sizes();
    Ok(json!({
        "chars": chars.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "tags": tags.iter().map(|t| t.as_str()).collect::<Vec<_>>(),
        "spans": spans,
        "lexicon": { "methods": nm, "datasets": nd, "blacklist": nb },
    }))
}

/// Random emissions and transitions for a `length`-character input,
/// decoded by Viterbi and checked against exhaustive enumeration.
pub fn crf_json(seed: u64, length: usize, scale: f64) -> Result<Value, String> {
    if length == 0 || length > MAX_CRF_LENGTH {
        return Err(format!("length must be between 1 and {MAX_CRF_LENGTH}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-scale..=scale)).collect() };
    let z = Tensor::from_vec(&[length, NUM_TAGS], draw(length * NUM_TAGS)).map_err(|e| e.to_string())?;
    let k = NUM_TAGS + 2;
    let a = TransitionMatrix::from_tensor(Tensor::from_vec(&[k, k], draw(k * k)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let (path, score) = viterbi(&z, &a).map_err(|e| e.to_string())?;
    let log_z = log_partition(&z, &a).map_err(|e| e.to_string())?;
    let oracle = brute_force(&z, &a).map_err(|e| e.to_string())?;
    let name = |i: usize| Tag::from_index(i).map(|t| t.as_str().to_string()).unwrap_or_default();
    let mut labels: Vec<String> = (0..NUM_TAGS).map(name).collect();
    labels.extend(["START".to_string(), "STOP".to_string()]);
    let transitions: Vec<Vec<Option<f64>>> = (0..k)
        .map(|i| (0..k).map(|j| Some(a.get(i, j)).filter(|v| v.is_finite())).collect())
        .collect();
    Ok(json!({
        "labels": labels,
        "emissions": (0..length).map(|t| z.row(t).to_vec()).collect::<Vec<_>>(),
        "transitions": transitions,
        "viterbi": { "path": path.iter().map(|&i| name(i)).collect::<Vec<_>>(), "score": score },
        "oracle": { "path": oracle.best_path.iter().map(|&i| name(i)).collect::<Vec<_>>(), "score": oracle.best_score },
        "log_partition": log_z,
        "oracle_log_partition": oracle.log_partition,
        "best_path_probability": (score - log_z).exp(),
        "probability_mass": oracle.probability_mass,
        "paths": (NUM_TAGS as u64).pow(length as u32),
    }))
}

/// Per-year co-occurrence graphs from JSON lines with `paper_id`, `year`,
/// `methods` and `datasets`. Betweenness is computed on the full graph;
/// only edges of at least `min_weight` are returned for drawing.
pub fn mine_json(papers: &str, min_weight: u32, k: usize) -> Result<Value, String> {
    let aliases = AliasMap::new();
    let none = BTreeSet::new();
    let mut parsed = Vec::new();
    for (i, line) in papers.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPaper = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        parsed.push(canonical_paper(&raw, &aliases, &none).map_err(|e| e.to_string())?);
    }
    let mut out = Vec::new();
    for year in years(&parsed) {
        let g = build_graph(&parsed, year);
        let scores = betweenness(&g);
        let ranked = if scores.is_empty() { Vec::new() } else { top_k(&scores, k).map_err(|e| e.to_string())? };
        let shown = filter_edges(&g, min_weight).map_err(|e| e.to_string())?;
        out.push(json!({
            "year": year,
            "graph": shown.to_node_link_json(Some(&scores), None),
            "top": ranked.iter().map(|(n, s)| json!({ "entity": n, "betweenness": s })).collect::<Vec<_>>(),
        }));
    }
    Ok(json!({ "papers": parsed.len(), "years": out }))
}

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen]
pub fn rule_tags(text: &str, methods: &str, datasets: &str, blacklist: &str) -> String {
    respond(rule_tags_json(text, methods, datasets, blacklist))
}

#[wasm_bindgen]
pub fn crf_explore(seed: u32, length: u32, scale: f64) -> String {
    respond(crf_json(seed as u64, length as usize, scale))
}

#[wasm_bindgen]
pub fn mine(papers: &str, min_weight: u32, top: u32) -> String {
    respond(mine_json(papers, min_weight, top as usize))
}
