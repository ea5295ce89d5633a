//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails. Set `MDER_ACCEPT_ONLY=3,5`
//! to run a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use mder::augment::{augment, build_glossaries};
use mder::corpus::{
    build_mixed, generate_synthetic, split_corpus, AnnotatedSentence, Corpus, EntityKind,
    EntitySpan, SplitSpec, SyntheticSpec,
};
use mder::crf::{brute_force, log_partition, path_score, viterbi, TransitionMatrix};
use mder::metrics::prf;
use mder::mining::{betweenness, build_graph, filter_edges, CooccurrenceGraph, PaperEntities};
use mder::model::{sequence_loss_and_grad, AblationFlags, EncodedSequence, ModelConfig, ModelParams};
use mder::rules::RuleLexicon;
use mder::tagscheme::{decode_entities, encode_tags};
use mder::tensor::Tensor;
use mder::train::{cross_corpus_grid, evaluate, train, Folds, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn random_transitions(rng: &mut ChaCha8Rng) -> TransitionMatrix {
    let mut a = TransitionMatrix::from_tensor(random_tensor(&[8, 8], -2.0, 2.0, rng)).unwrap();
    a.pin_forbidden();
    a
}

fn crf_instances() -> Vec<(Tensor, TransitionMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..200)
        .map(|_| {
            let m = rng.gen_range(1..=5);
            (random_tensor(&[m, 6], -3.0, 3.0, &mut rng), random_transitions(&mut rng))
        })
        .collect()
}

fn c1_crf_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut path_mismatch = 0;
    for (z, a) in crf_instances() {
        let bf = brute_force(&z, &a).unwrap();
        let (path, score) = viterbi(&z, &a).unwrap();
        if path != bf.best_path {
            path_mismatch += 1;
        }
        worst = worst
            .max((score - bf.best_score).abs())
            .max((log_partition(&z, &a).unwrap() - bf.log_partition).abs());
    }
    outcome(
        path_mismatch == 0 && worst <= 1e-8,
        format!("200 instances, path mismatches {path_mismatch}, max |diff| {worst:.2e} (tol 1e-8)"),
    )
}

fn c2_crf_normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for (z, a) in crf_instances() {
        let m = z.rows();
        let log_z = log_partition(&z, &a).unwrap();
        let mut total = 0.0;
        for code in 0..6usize.pow(m as u32) {
            let path: Vec<usize> = (0..m).map(|i| code / 6usize.pow(i as u32) % 6).collect();
            total += (path_score(&z, &path, &a).unwrap() - log_z).exp();
        }
        worst = worst.max((total - 1.0).abs());
    }
    outcome(worst <= 1e-8, format!("max |sum p - 1| {worst:.2e} (tol 1e-8)"))
}

fn gradient_error(flags: AblationFlags, seed: u64) -> f64 {
    let c = ModelConfig::tiny();
    let mut p = ModelParams::init(&c, &flags, 8, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    // Larger weights than the default init so every tensor receives a
    // gradient well above finite-difference noise.
    for l in &mut p.lstm {
        l.w.scale(3.0);
    }
    p.char_embedding.scale(10.0);
    if let Some(r) = &mut p.rule_embedding {
        r.scale(10.0);
    }
    if let Some(a) = &mut p.attention {
        a.w_query.scale(10.0);
        a.w_key.scale(10.0);
    }
    if let Some(t) = &mut p.transitions {
        t.0.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    }
    p.projection_bias.data.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    p.pin();
    let seq = EncodedSequence {
        char_ids: vec![2, 3, 4, 2, 7],
        rule_ids: vec![0, 1, 4, 5, 2],
        mask: vec![true; 5],
    };
    let gold = [0, 1, 4, 2, 3];
    let loss = |q: &ModelParams| {
        let mut g = q.zeros_like();
        sequence_loss_and_grad(&seq, &gold, q, &c, None, &mut g).unwrap()
    };
    let mut grads = p.zeros_like();
    sequence_loss_and_grad(&seq, &gold, &p, &c, None, &mut grads).unwrap();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let count = p.tensors().len();
    for ti in 0..count {
        let an = grads.tensors()[ti].1.data.clone();
        let name = p.tensors()[ti].0.clone();
        let mut fd = vec![0.0; an.len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut a = p.clone();
            a.tensors_mut()[ti].1.data[i] += eps;
            let mut b = p.clone();
            b.tensors_mut()[ti].1.data[i] -= eps;
            *slot = (loss(&a) - loss(&b)) / (2.0 * eps);
        }
        if name == "crf.transitions" {
            let t = p.transitions.as_ref().unwrap();
            for (i, v) in fd.iter_mut().enumerate() {
                if t.is_forbidden(i / 8, i % 8) {
                    *v = 0.0;
                }
            }
        }
        let diff = fd.iter().zip(&an).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|x| x * x).sum::<f64>().sqrt()
            + an.iter().map(|x| x * x).sum::<f64>().sqrt();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    worst
}

fn c3_gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (_, flags)) in AblationFlags::variants().into_iter().enumerate() {
        worst = worst.max(gradient_error(flags, 40 + i as u64));
    }
    outcome(
        worst < 1e-4,
        format!("tiny config, m=5, all variants, max per-tensor relative error {worst:.2e} (tol 1e-4)"),
    )
}

fn random_sentence(rng: &mut ChaCha8Rng) -> AnnotatedSentence {
    const ALPHABET: &[char] = &['a', 'b', 'Z', '1', '-', '.', ' ', ' ', 'é', '中', '(', '\t'];
    let n = rng.gen_range(1..40);
    let chars: Vec<char> = (0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect();
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < n {
        let start = pos + rng.gen_range(0..6);
        let end = start + rng.gen_range(1..6);
        if end > n {
            break;
        }
        let s = &chars[start..end];
        if !s[0].is_whitespace() && !s[s.len() - 1].is_whitespace() {
            let kind = if rng.gen_bool(0.5) { EntityKind::M } else { EntityKind::D };
            spans.push(EntitySpan::new(start, end, kind));
        }
        pos = end;
    }
    AnnotatedSentence::new(chars.into_iter().collect::<String>(), spans).unwrap()
}

fn c4_tag_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut spans = 0;
    for _ in 0..10_000 {
        let s = random_sentence(&mut rng);
        spans += s.entities.len();
        let tags = encode_tags(&s).unwrap();
        if decode_entities(&s.text, &tags).unwrap() != s.entities {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("10000 sentences ({spans} spans), {failures} mismatches"))
}

fn synthetic(preset: &str, n: usize, seed: u64) -> Corpus {
    generate_synthetic(&SyntheticSpec::preset(preset).unwrap(), n, seed).unwrap()
}

fn epochs_env(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

/// Reduced widths for desk-scale runs; the rule-embedding and kernel
/// counts and all training hyperparameters stay at their defaults.
fn desk_config(width: usize) -> ModelConfig {
    ModelConfig {
        d_char: width,
        d_hidden: width,
        d_query: width,
        ..ModelConfig::default()
    }
}

fn small_config(width: usize) -> ModelConfig {
    ModelConfig {
        d_rule: 16,
        d_char: width,
        d_hidden: width,
        kernels: 16,
        d_query: width,
        ..ModelConfig::default()
    }
}

/// Learning rate for the short reduced-width runs; the default step size
/// needs far more updates than a desk budget allows at these widths.
const DESK_LR: f64 = 0.01;

fn c5_trainability() -> Outcome {
    let corpus = synthetic("nlp", 50, 0);
    let lexicon = RuleLexicon::builtin();
    let cfg = TrainConfig {
        max_epochs: 100,
        patience: 100,
        seed: 0,
        target_f1: Some(0.95),
        ..TrainConfig::default()
    };
    let (ckpt, report) = train(&corpus, &corpus, &desk_config(64), &cfg, &lexicon).unwrap();
    let f1 = evaluate(&ckpt, &lexicon, &corpus).unwrap().overall.f1;
    let l = report.losses();
    let decreasing = l.len() >= 3 && l[0] > l[1] && l[1] > l[2];
    outcome(
        f1 >= 0.95 && decreasing,
        format!(
            "50 sentences, F1 {f1:.3} at epoch {} (need >= 0.95 within 100), first losses {:.4} > {:.4} > {:.4}",
            report.selected_epoch,
            l[0],
            l.get(1).copied().unwrap_or(f64::NAN),
            l.get(2).copied().unwrap_or(f64::NAN)
        ),
    )
}

fn c6_ablation() -> Outcome {
    let corpus = synthetic("nlp", 500, 6);
    let (tr, va, te) = split_corpus(&corpus, &SplitSpec::default()).unwrap();
    let lexicon = RuleLexicon::builtin();
    let mut scores = Vec::new();
    for (name, flags) in AblationFlags::variants() {
        let cfg = TrainConfig {
            max_epochs: epochs_env("MDER_ACCEPT_ABLATION_EPOCHS", 12),
            learning_rate: DESK_LR,
            patience: 100,
            seed: 6,
            ablation: flags,
            ..TrainConfig::default()
        };
        let (ckpt, _) = train(&tr, &va, &small_config(32), &cfg, &lexicon).unwrap();
        scores.push((name, evaluate(&ckpt, &lexicon, &te).unwrap().overall.f1));
    }
    let full = scores[0].1;
    let ok = scores.iter().all(|(_, f)| full >= f - 0.02);
    let listing: Vec<String> = scores.iter().map(|(n, f)| format!("{n} {f:.3}")).collect();
    outcome(ok, format!("test F1: {} (full >= each - 0.02)", listing.join(", ")))
}

fn c7_protocol_shape() -> Outcome {
    let lexicon = RuleLexicon::builtin();
    let mut details = Vec::new();
    let mut ok = true;
    for seed in [1u64, 2, 3] {
        let n = 200;
        let areas: Vec<Corpus> = ["nlp", "cv", "dm", "ai"]
            .iter()
            .enumerate()
            .map(|(i, p)| synthetic(p, n, seed * 10 + i as u64))
            .collect();
        let mixed = build_mixed(&areas, n / 4, seed).unwrap();
        let folds: Vec<Folds> = areas
            .iter()
            .chain(std::iter::once(&mixed))
            .map(|c| {
                let spec = SplitSpec { seed, ..SplitSpec::default() };
                let (train, val, test) = split_corpus(c, &spec).unwrap();
                Folds { name: c.name.clone(), train, val, test }
            })
            .collect();
        let cfg = TrainConfig {
            max_epochs: epochs_env("MDER_ACCEPT_GRID_EPOCHS", 25),
            learning_rate: DESK_LR,
            patience: 100,
            seed,
            ..TrainConfig::default()
        };
        let grid = cross_corpus_grid(&folds, &small_config(32), &cfg, &lexicon).unwrap();
        let shape = grid.f1.len() == 5
            && grid.f1.iter().all(|r| r.len() == 5)
            && grid.row_mean.len() == 5
            && grid.row_std.len() == 5;
        let bad = grid.off_diagonal_maxima();
        ok &= shape && bad.len() <= 1;
        let diag: Vec<String> = (0..5).map(|i| format!("{:.2}", grid.f1[i][i])).collect();
        details.push(format!("seed {seed}: diag [{}] rows failing {:?}", diag.join(" "), bad));
    }
    outcome(ok, format!("5x5 grids with mean/std; {}", details.join("; ")))
}

fn c8_split() -> Outcome {
    let corpus = synthetic("nlp", 2800, 8);
    let (a, b, c) = split_corpus(&corpus, &SplitSpec::default()).unwrap();
    let sizes = (a.len(), b.len(), c.len());
    outcome(sizes == (1960, 280, 560), format!("sizes {sizes:?} (want (1960, 280, 560))"))
}

fn c9_augmentation() -> Outcome {
    let corpus = synthetic("nlp", 2800, 9);
    let (tr, _, te) = split_corpus(&corpus, &SplitSpec::default()).unwrap();
    let glossary = build_glossaries(&tr);
    let mut arithmetic = true;
    let mut ratios = Vec::new();
    for (m, want) in [(1.5, 5.25), (2.0, 7.0), (2.5, 8.75), (3.0, 10.5), (3.5, 12.25), (4.0, 14.0)] {
        let aug = augment(&tr, m, &glossary, 9, true).unwrap();
        let ratio = aug.len() as f64 / te.len() as f64;
        arithmetic &= (ratio - want).abs() < 1e-12 && aug.validate().is_ok();
        arithmetic &= aug.sentences[..tr.len()] == tr.sentences[..];
        ratios.push(format!("{ratio}"));
    }

    let small = synthetic("nlp", 150, 19);
    let (tr, va, te) = split_corpus(&small, &SplitSpec::default()).unwrap();
    let glossary = build_glossaries(&tr);
    let lexicon = RuleLexicon::builtin();
    let cfg = TrainConfig {
        max_epochs: epochs_env("MDER_ACCEPT_AUGMENT_EPOCHS", 12),
        learning_rate: DESK_LR,
        patience: 100,
        seed: 9,
        ..TrainConfig::default()
    };
    let mut f1 = Vec::new();
    for m in [1.0, 2.0] {
        let aug = augment(&tr, m, &glossary, 9, true).unwrap();
        let (ckpt, _) = train(&aug, &va, &small_config(32), &cfg, &lexicon).unwrap();
        f1.push(evaluate(&ckpt, &lexicon, &te).unwrap().overall.f1);
    }
    let trend = f1[1] >= f1[0] - 0.02;
    outcome(
        arithmetic && trend,
        format!("ratios [{}]; frozen-test F1 x1 {:.3} -> x2 {:.3}", ratios.join(", "), f1[0], f1[1]),
    )
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

fn c10_runtime() -> Outcome {
    let lexicon = RuleLexicon::builtin();
    let val = synthetic("cv", 10, 100);
    let base = 40;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in [1usize, 2, 4] {
        let corpus = synthetic("cv", base * k, 10);
        let cfg = TrainConfig { max_epochs: 2, patience: 10, seed: 10, ..TrainConfig::default() };
        // Best of two runs damps scheduler noise.
        let mut best = f64::INFINITY;
        for _ in 0..2 {
            let t = Instant::now();
            train(&corpus, &val, &small_config(24), &cfg, &lexicon).unwrap();
            best = best.min(t.elapsed().as_secs_f64());
        }
        xs.push((base * k) as f64);
        ys.push(best);
    }
    let r2 = r_squared(&xs, &ys);
    let times: Vec<String> = ys.iter().map(|y| format!("{y:.2}s")).collect();
    outcome(r2 >= 0.95, format!("sizes 40/80/160: [{}], R^2 {r2:.4} (need >= 0.95)", times.join(", ")))
}

/// Betweenness by enumerating every simple path between every pair.
fn enumerated_betweenness(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    fn walk(adj: &[Vec<usize>], cur: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == t {
            out.push(path.clone());
            return;
        }
        for &w in &adj[cur] {
            if !path.contains(&w) {
                path.push(w);
                walk(adj, w, t, path, out);
                path.pop();
            }
        }
    }
    let mut cb = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let mut all = Vec::new();
            walk(&adj, s, t, &mut vec![s], &mut all);
            let Some(len) = all.iter().map(Vec::len).min() else { continue };
            let shortest: Vec<&Vec<usize>> = all.iter().filter(|p| p.len() == len).collect();
            for (v, c) in cb.iter_mut().enumerate() {
                if v != s && v != t {
                    *c += shortest.iter().filter(|p| p.contains(&v)).count() as f64 / shortest.len() as f64;
                }
            }
        }
    }
    cb
}

fn c11_mining() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let nodes: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let mut edges = BTreeSet::new();
        let mut g = CooccurrenceGraph::default();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.35) {
                    edges.insert((a, b));
                    g.add_edge(&nodes[a], &nodes[b], 1);
                }
            }
        }
        let fast = betweenness(&g);
        let slow = enumerated_betweenness(n, &edges);
        for (i, name) in nodes.iter().enumerate() {
            worst = worst.max((fast.get(name).copied().unwrap_or(0.0) - slow[i]).abs());
        }
    }

    let pool = ["svm", "lstm", "cnn", "crf", "bert", "lda", "knn"];
    let papers: Vec<PaperEntities> = (0..60)
        .map(|i| PaperEntities {
            paper_id: format!("p{i}"),
            year: 2009 + (i % 3),
            methods: pool.iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect(),
            datasets: BTreeSet::new(),
        })
        .collect();
    let mut weight_errors = 0;
    for year in 2009..2012 {
        let g = build_graph(&papers, year);
        for a in pool {
            for b in pool {
                if a < b {
                    let direct = papers
                        .iter()
                        .filter(|p| p.year == year && p.methods.contains(a) && p.methods.contains(b))
                        .count() as u32;
                    if g.weight(a, b) != direct {
                        weight_errors += 1;
                    }
                }
            }
        }
    }

    // Hand-computed: only weights 3, 4 and 5 survive "greater than 2",
    // and g (reached only through a weight-1 edge) disappears.
    let mut fixture = CooccurrenceGraph::default();
    for (a, b, w) in [("a", "b", 5), ("b", "c", 3), ("c", "d", 2), ("a", "c", 1), ("d", "e", 4), ("e", "f", 3), ("f", "g", 1)] {
        fixture.add_edge(a, b, w);
    }
    let kept = filter_edges(&fixture, 3).unwrap();
    let want_edges: BTreeMap<(String, String), u32> = [("a", "b", 5), ("b", "c", 3), ("d", "e", 4), ("e", "f", 3)]
        .into_iter()
        .map(|(a, b, w)| ((a.to_string(), b.to_string()), w))
        .collect();
    let want_nodes: BTreeSet<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
    let filter_ok = kept.edges == want_edges && kept.nodes == want_nodes;

    outcome(
        worst <= 1e-9 && weight_errors == 0 && filter_ok,
        format!(
            "50 graphs max |diff| {worst:.1e}; {weight_errors} weight mismatches; weight > 2 subgraph {}",
            if filter_ok { "matches" } else { "differs" }
        ),
    )
}

fn c12_metrics() -> Outcome {
    // P = 416706 / 597000 = 0.698, R = 416706 / 698000 = 0.597.
    let (p, r, f) = prf(597_000, 416_706, 698_000).unwrap();
    outcome(
        (f - 0.6436).abs() <= 1e-4,
        format!("P {p:.3} R {r:.3} -> F1 {f:.5} (want 0.6436 +- 0.0001)"),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("MDER_ACCEPT_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [Criterion; 12] = [
        (1, "CRF oracle equivalence", c1_crf_oracle),
        (2, "CRF normalization", c2_crf_normalization),
        (3, "gradient check", c3_gradient_check),
        (4, "tag round-trip", c4_tag_round_trip),
        (5, "trainability", c5_trainability),
        (6, "ablation harness", c6_ablation),
        (7, "cross-corpus protocol shape", c7_protocol_shape),
        (8, "split exactness", c8_split),
        (9, "augmentation arithmetic and trend", c9_augmentation),
        (10, "runtime linearity", c10_runtime),
        (11, "mining oracles", c11_mining),
        (12, "metrics fixture", c12_metrics),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let r = run();
        println!(
            "[{}] {id:>2}. {name}: {} ({:.1}s)",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            t.elapsed().as_secs_f64()
        );
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
