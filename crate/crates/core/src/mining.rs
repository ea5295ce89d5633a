//! Trend mining over extracted entities: canonical names, per-year method
//! co-occurrence graphs, edge-weight filtering, betweenness centrality,
//! rankings and dataset frequencies.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Entities found in one paper, after canonicalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperEntities {
    pub paper_id: String,
    pub year: i32,
    #[serde(default)]
    pub methods: BTreeSet<String>,
    #[serde(default)]
    pub datasets: BTreeSet<String>,
}

impl PaperEntities {
    pub fn validate(&self) -> Result<()> {
        if !(1950..=2100).contains(&self.year) {
            return Err(Error::Config(format!(
                "paper {} has implausible year {}",
                self.paper_id, self.year
            )));
        }
        Ok(())
    }
}

/// Raw per-paper surfaces as produced by extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPaper {
    pub paper_id: String,
    pub year: i32,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default)]
    pub datasets: Vec<String>,
}

/// Surface to canonical-name overrides, keyed by normalized surface.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasMap(BTreeMap<String, String>);

impl AliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, canonical: &str) {
        self.0.insert(normalize(alias), normalize(canonical));
    }

    /// One `alias<TAB>canonical` pair per line; blank lines and `#`
    /// comments are ignored.
    pub fn parse(source: &str) -> Result<Self> {
        let mut map = AliasMap::new();
        for (i, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((a, c)) = line.split_once('\t') else {
                return Err(Error::Parse {
                    path: "<aliases>".into(),
                    line: i + 1,
                    message: "expected `alias<TAB>canonical`".into(),
                });
            };
            map.insert(a, c);
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        AliasMap::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }
}

/// Lowercase, trim, collapse internal whitespace, strip surrounding
/// punctuation.
pub fn normalize(surface: &str) -> String {
    let lower = surface.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let joined = words.join(" ");
    joined
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

pub fn canonicalize(surface: &str, aliases: &AliasMap) -> String {
    let n = normalize(surface);
    aliases.0.get(&n).cloned().unwrap_or(n)
}

/// Terms to drop before canonicalization, one per line, matched on their
/// normalized form.
pub fn parse_exclusions(source: &str) -> BTreeSet<String> {
    source
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize)
        .collect()
}

pub fn load_exclusions(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_exclusions(&text))
}

/// Drops excluded surfaces, canonicalizes the rest and deduplicates.
pub fn canonical_paper(
    raw: &RawPaper,
    aliases: &AliasMap,
    exclusions: &BTreeSet<String>,
) -> Result<PaperEntities> {
    let clean = |xs: &[String]| -> BTreeSet<String> {
        xs.iter()
            .filter(|s| !exclusions.contains(&normalize(s)))
            .map(|s| canonicalize(s, aliases))
            .filter(|s| !s.is_empty())
            .collect()
    };
    let p = PaperEntities {
        paper_id: raw.paper_id.clone(),
        year: raw.year,
        methods: clean(&raw.methods),
        datasets: clean(&raw.datasets),
    };
    p.validate()?;
    Ok(p)
}

/// Undirected weighted graph. Edge keys are ordered pairs `(a, b)` with
/// `a < b`; the weight counts papers containing both endpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), u32>,
}

impl CooccurrenceGraph {
    pub fn add_edge(&mut self, a: &str, b: &str, weight: u32) {
        if a == b {
            return;
        }
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.nodes.insert(a.to_string());
        self.nodes.insert(b.to_string());
        *self.edges.entry(key).or_insert(0) += weight;
    }

    pub fn weight(&self, a: &str, b: &str) -> u32 {
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    /// Adjacency lists over node indices in name order.
    fn adjacency(&self) -> (Vec<&String>, Vec<Vec<usize>>) {
        let names: Vec<&String> = self.nodes.iter().collect();
        let index: BTreeMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut adj = vec![Vec::new(); names.len()];
        for (a, b) in self.edges.keys() {
            let (i, j) = (index[a], index[b]);
            adj[i].push(j);
            adj[j].push(i);
        }
        (names, adj)
    }

    pub fn to_node_link_json(
        &self,
        scores: Option<&BTreeMap<String, f64>>,
        categories: Option<&BTreeMap<String, String>>,
    ) -> serde_json::Value {
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|n| {
                let mut v = json!({ "id": n });
                if let Some(s) = scores.and_then(|s| s.get(n)) {
                    v["betweenness"] = json!(s);
                }
                if let Some(c) = categories.and_then(|c| c.get(n)) {
                    v["category"] = json!(c);
                }
                v
            })
            .collect();
        let links: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|((a, b), w)| json!({ "source": a, "target": b, "weight": w }))
            .collect();
        json!({ "directed": false, "multigraph": false, "nodes": nodes, "links": links })
    }

    pub fn to_graphml(&self, categories: Option<&BTreeMap<String, String>>) -> String {
        let esc = |s: &str| {
            s.replace('&', "&amp;")
                .replace('<', "&lt;")
                .replace('>', "&gt;")
                .replace('"', "&quot;")
        };
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"int\"/>\n");
        out.push_str("  <key id=\"category\" for=\"node\" attr.name=\"category\" attr.type=\"string\"/>\n");
        out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
        for n in &self.nodes {
            match categories.and_then(|c| c.get(n)) {
                Some(c) => {
                    let _ = writeln!(
                        out,
                        "    <node id=\"{}\"><data key=\"category\">{}</data></node>",
                        esc(n),
                        esc(c)
                    );
                }
                None => {
                    let _ = writeln!(out, "    <node id=\"{}\"/>", esc(n));
                }
            }
        }
        for ((a, b), w) in &self.edges {
            let _ = writeln!(
                out,
                "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{w}</data></edge>",
                esc(a),
                esc(b)
            );
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }
}

/// Method co-occurrence graph of the papers published in `year`.
pub fn build_graph(papers: &[PaperEntities], year: i32) -> CooccurrenceGraph {
    let mut g = CooccurrenceGraph::default();
    for p in papers.iter().filter(|p| p.year == year) {
        let ms: Vec<&String> = p.methods.iter().collect();
        g.nodes.extend(ms.iter().map(|m| m.to_string()));
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                g.add_edge(ms[i], ms[j], 1);
            }
        }
    }
    g
}

/// Keeps edges with weight `>= min_weight` and the nodes they touch.
/// `min_weight = 3` reproduces a strict "weight greater than 2" cut.
pub fn filter_edges(g: &CooccurrenceGraph, min_weight: u32) -> Result<CooccurrenceGraph> {
    if min_weight == 0 {
        return Err(Error::Config("min_weight must be at least 1".into()));
    }
    let mut out = CooccurrenceGraph::default();
    for ((a, b), &w) in &g.edges {
        if w >= min_weight {
            out.add_edge(a, b, w);
        }
    }
    Ok(out)
}

/// Unnormalized shortest-path betweenness on the unweighted skeleton,
/// counting each unordered pair once. Equal-length paths share credit.
pub fn betweenness(g: &CooccurrenceGraph) -> BTreeMap<String, f64> {
    let (names, adj) = g.adjacency();
    let n = names.len();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    names
        .into_iter()
        .zip(cb)
        .map(|(name, c)| (name.clone(), c / 2.0))
        .collect()
}

/// The `k` highest scores, ties broken by name.
pub fn top_k(scores: &BTreeMap<String, f64>, k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut v: Vec<(String, f64)> = scores.iter().map(|(n, s)| (n.clone(), *s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    Ok(v)
}

/// Number of papers from `year` mentioning each dataset.
pub fn dataset_frequency(papers: &[PaperEntities], year: i32) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in papers.iter().filter(|p| p.year == year) {
        for d in &p.datasets {
            *out.entry(d.clone()).or_insert(0) += 1;
        }
    }
    out
}

pub fn years(papers: &[PaperEntities]) -> BTreeSet<i32> {
    papers.iter().map(|p| p.year).collect()
}

/// `year,rank,entity,score` rows.
pub fn rankings_csv(rows: &[(i32, Vec<(String, f64)>)]) -> String {
    let mut out = String::from("year,rank,entity,score\n");
    for (year, ranked) in rows {
        for (i, (name, score)) in ranked.iter().enumerate() {
            let quoted = if name.contains([',', '"', '\n']) {
                format!("\"{}\"", name.replace('"', "\"\""))
            } else {
                name.clone()
            };
            let _ = writeln!(out, "{year},{},{quoted},{score}", i + 1);
        }
    }
    out
}

/// Node categories: one `entity<TAB>category` pair per line.
pub fn parse_categories(source: &str) -> BTreeMap<String, String> {
    source
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(e, c)| (normalize(e), c.trim().to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper(id: &str, year: i32, methods: &[&str], datasets: &[&str]) -> PaperEntities {
        PaperEntities {
            paper_id: id.into(),
            year,
            methods: methods.iter().map(|s| s.to_string()).collect(),
            datasets: datasets.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn graph(edges: &[(&str, &str, u32)]) -> CooccurrenceGraph {
        let mut g = CooccurrenceGraph::default();
        for (a, b, w) in edges {
            g.add_edge(a, b, *w);
        }
        g
    }

    /// All-pairs enumeration of shortest paths by depth-first search.
    fn brute_betweenness(g: &CooccurrenceGraph) -> BTreeMap<String, f64> {
        let (names, adj) = g.adjacency();
        let n = names.len();
        let mut cb = vec![0.0; n];
        fn paths(adj: &[Vec<usize>], cur: usize, t: usize, seen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur == t {
                out.push(seen.clone());
                return;
            }
            for &w in &adj[cur] {
                if !seen.contains(&w) {
                    seen.push(w);
                    paths(adj, w, t, seen, out);
                    seen.pop();
                }
            }
        }
        for s in 0..n {
            for t in s + 1..n {
                let mut all = Vec::new();
                paths(&adj, s, t, &mut vec![s], &mut all);
                let Some(best) = all.iter().map(|p| p.len()).min() else { continue };
                let shortest: Vec<&Vec<usize>> = all.iter().filter(|p| p.len() == best).collect();
                for v in 0..n {
                    if v == s || v == t {
                        continue;
                    }
                    let through = shortest.iter().filter(|p| p.contains(&v)).count();
                    cb[v] += through as f64 / shortest.len() as f64;
                }
            }
        }
        names.into_iter().zip(cb).map(|(n, c)| (n.clone(), c)).collect()
    }

    #[test]
    fn canonical_forms() {
        let mut a = AliasMap::new();
        assert_eq!(canonicalize("SVM", &a), "svm");
        a.insert("lstms", "lstm");
        assert_eq!(canonicalize(" LSTMs.", &a), "lstm");
        assert_eq!(canonicalize("Support   Vector\tMachine", &a), "support vector machine");
        let parsed = AliasMap::parse("# aliases\nSupport Vector Machine\tSVM\n\n").unwrap();
        assert_eq!(canonicalize("support vector machine", &parsed), "svm");
        assert!(AliasMap::parse("no tab here").is_err());
    }

    #[test]
    fn exclusions_apply_before_aliases() {
        let mut a = AliasMap::new();
        a.insert("our model", "svm");
        let ex = parse_exclusions("Our Model\n");
        let raw = RawPaper {
            paper_id: "p".into(),
            year: 2015,
            methods: vec!["Our model".into(), "SVM".into(), "svm".into()],
            datasets: vec![],
        };
        let p = canonical_paper(&raw, &a, &ex).unwrap();
        assert_eq!(p.methods.into_iter().collect::<Vec<_>>(), vec!["svm"]);
        let bad = RawPaper { year: 1800, ..raw };
        assert!(canonical_paper(&bad, &a, &ex).is_err());
    }

    #[test]
    fn graph_construction() {
        let g = build_graph(&[paper("1", 2010, &["a", "b", "c"], &[])], 2010);
        assert_eq!(g.edges.len(), 3);
        assert!(g.edges.values().all(|&w| w == 1));
        let g = build_graph(
            &[paper("1", 2010, &["a", "b"], &[]), paper("2", 2010, &["a", "b"], &[]), paper("3", 2011, &["a", "b"], &[])],
            2010,
        );
        assert_eq!(g.weight("b", "a"), 2);
    }

    #[test]
    fn weights_match_pair_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pool = ["a", "b", "c", "d", "e", "f"];
        let papers: Vec<PaperEntities> = (0..20)
            .map(|i| {
                let ms: Vec<&str> = pool.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
                paper(&i.to_string(), 2012, &ms, &[])
            })
            .collect();
        let g = build_graph(&papers, 2012);
        for x in pool {
            for y in pool {
                if x < y {
                    let direct = papers
                        .iter()
                        .filter(|p| p.methods.contains(x) && p.methods.contains(y))
                        .count() as u32;
                    assert_eq!(g.weight(x, y), direct);
                }
            }
        }
    }

    #[test]
    fn strict_filter() {
        let g = graph(&[("a", "b", 1), ("b", "c", 2), ("c", "d", 3)]);
        let f = filter_edges(&g, 3).unwrap();
        assert_eq!(f.edges.len(), 1);
        assert_eq!(f.nodes.iter().collect::<Vec<_>>(), vec!["c", "d"]);
        assert_eq!(filter_edges(&g, 1).unwrap().edges, g.edges);
        assert!(filter_edges(&g, 0).is_err());
    }

    #[test]
    fn betweenness_small_cases() {
        let b = betweenness(&graph(&[("a", "b", 1), ("b", "c", 1)]));
        assert_eq!((b["a"], b["b"], b["c"]), (0.0, 1.0, 0.0));
        let k4 = graph(&[("a", "b", 1), ("a", "c", 1), ("a", "d", 1), ("b", "c", 1), ("b", "d", 1), ("c", "d", 1)]);
        assert!(betweenness(&k4).values().all(|&v| v == 0.0));
        // Square: each node sits on one of two shortest paths for one pair.
        let sq = graph(&[("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "a", 1)]);
        assert!(betweenness(&sq).values().all(|&v| (v - 0.5).abs() < 1e-12));
        // Disconnected components are independent.
        let two = graph(&[("a", "b", 1), ("b", "c", 1), ("x", "y", 1), ("y", "z", 1)]);
        let b = betweenness(&two);
        assert_eq!((b["b"], b["y"]), (1.0, 1.0));
    }

    #[test]
    fn top_k_order() {
        let s: BTreeMap<String, f64> =
            [("b", 1.0), ("a", 1.0), ("c", 3.0), ("d", 0.0)].into_iter().map(|(k, v)| (k.into(), v)).collect();
        let t = top_k(&s, 10).unwrap();
        let names: Vec<&str> = t.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(names, vec!["c", "a", "b", "d"]);
        assert_eq!(top_k(&s, 2).unwrap().len(), 2);
        assert!(top_k(&s, 0).is_err());
    }

    #[test]
    fn dataset_counts_use_set_semantics() {
        let raw = RawPaper {
            paper_id: "1".into(),
            year: 2019,
            methods: vec![],
            datasets: vec!["UCI".into(), "uci".into()],
        };
        let p1 = canonical_paper(&raw, &AliasMap::new(), &BTreeSet::new()).unwrap();
        let p2 = paper("2", 2019, &[], &["uci"]);
        let f = dataset_frequency(&[p1, p2, paper("3", 2018, &[], &["uci"])], 2019);
        assert_eq!(f["uci"], 2);
    }

    #[test]
    fn exports() {
        let g = graph(&[("svm", "lstm", 3), ("a&b", "svm", 1)]);
        let cats: BTreeMap<String, String> = parse_categories("svm\tclassic\n");
        let j = g.to_node_link_json(Some(&betweenness(&g)), Some(&cats));
        assert_eq!(j["links"].as_array().unwrap().len(), 2);
        assert_eq!(j["nodes"][2]["category"], "classic");
        let x = g.to_graphml(Some(&cats));
        assert!(x.contains("<node id=\"a&amp;b\"/>"));
        assert!(x.contains("<data key=\"weight\">3</data>"));
        let csv = rankings_csv(&[(2010, vec![("svm".into(), 1.0), ("x,y".into(), 0.5)])]);
        assert_eq!(csv, "year,rank,entity,score\n2010,1,svm,1\n2010,2,\"x,y\",0.5\n");
    }

    proptest! {
        #[test]
        fn betweenness_matches_enumeration(edges in prop::collection::vec((0u8..8, 0u8..8), 0..16)) {
            let mut g = CooccurrenceGraph::default();
            for (a, b) in edges {
                g.add_edge(&format!("n{a}"), &format!("n{b}"), 1);
            }
            let fast = betweenness(&g);
            let slow = brute_betweenness(&g);
            for (k, v) in &fast {
                prop_assert!((v - slow[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn filtering_is_monotone(ws in prop::collection::vec(1u32..6, 6)) {
            let names = ["a", "b", "c", "d"];
            let mut g = CooccurrenceGraph::default();
            let mut i = 0;
            for x in 0..4 {
                for y in x + 1..4 {
                    g.add_edge(names[x], names[y], ws[i]);
                    i += 1;
                }
            }
            for t in 1..6 {
                let lo = filter_edges(&g, t).unwrap();
                let hi = filter_edges(&g, t + 1).unwrap();
                prop_assert!(hi.edges.keys().all(|k| lo.edges.contains_key(k)));
                let touched: BTreeSet<&String> = lo.edges.keys().flat_map(|(a, b)| [a, b]).collect();
                prop_assert_eq!(touched.len(), lo.nodes.len());
            }
        }
    }
}
