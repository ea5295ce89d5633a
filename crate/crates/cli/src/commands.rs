//! Subcommand implementations. JSON artifacts carry a `run` block with the
//! resolved configuration; other artifacts get a `<file>.run.json` sidecar.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use mder::augment::{augment, build_glossaries};
use mder::corpus::{
    build_mixed, generate_synthetic, load_corpus, read_paragraphs, segment_sentences, split_corpus,
    AnnotatedSentence, Corpus, EntityKind, SyntheticSpec,
};
use mder::metrics::{MetricsReport, RepeatSummary};
use mder::mining::{
    betweenness, build_graph, canonical_paper, dataset_frequency, filter_edges, load_exclusions,
    parse_categories, rankings_csv, top_k, years, AliasMap, PaperEntities, RawPaper,
};
use mder::model::Checkpoint;
use mder::train::{cross_corpus_grid, evaluate, train_with_log, Folds, Tagger, TrainConfig};
use mder::util::write_atomic;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::Command;

pub fn run(command: &Command, run: &RunConfig) -> Result<()> {
    let ctx = Ctx { run, command: command.name() };
    match command {
        Command::Prepare { input, output } => ctx.prepare(input, output),
        Command::Split { corpus, out_dir } => ctx.split(corpus, out_dir),
        Command::Mix { corpora, per_area, output } => ctx.mix(corpora, *per_area, output),
        Command::Synth { preset, grammar, n, output } => {
            ctx.synth(preset.as_deref(), grammar.as_deref(), *n, output)
        }
        Command::Train { train, val, test, output, log, report } => {
            ctx.train(train, val, test.as_deref(), output, log.as_deref(), report.as_deref())
        }
        Command::Eval { model, corpus, output } => ctx.eval(model, corpus, output.as_deref()),
        Command::Grid { corpora, output, csv } => ctx.grid(corpora, output, csv.as_deref()),
        Command::Predict { model, input, output } => ctx.predict(model, input, output),
        Command::Augment { input, output } => ctx.augment(input, output),
        Command::Mine { input, out_dir } => ctx.mine(input, out_dir),
        Command::Report { inputs, output, csv } => ctx.report(inputs, output, csv.as_deref()),
    }
}

struct Ctx<'a> {
    run: &'a RunConfig,
    command: &'static str,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        self.run.path(p)
    }

    fn provenance(&self) -> Value {
        self.run.provenance(self.command)
    }

    fn load(&self, p: &Path) -> Result<Corpus> {
        Ok(load_corpus(self.path(p))?)
    }

    /// Writes `body` with the provenance block added under `run`.
    fn write_json(&self, p: &Path, mut body: Map<String, Value>) -> Result<()> {
        body.insert("run".into(), self.provenance());
        let text = serde_json::to_string_pretty(&Value::Object(body))? + "\n";
        write_atomic(&self.path(p), text.as_bytes())?;
        log::info!("wrote {}", self.path(p).display());
        Ok(())
    }

    /// Writes a non-JSON artifact and its provenance sidecar.
    fn write_text(&self, p: &Path, text: &str) -> Result<()> {
        let full = self.path(p);
        write_atomic(&full, text.as_bytes())?;
        let mut sidecar = full.clone().into_os_string();
        sidecar.push(".run.json");
        let meta = serde_json::to_string_pretty(&json!({ "run": self.provenance() }))? + "\n";
        write_atomic(Path::new(&sidecar), meta.as_bytes())?;
        log::info!("wrote {}", full.display());
        Ok(())
    }

    fn write_corpus(&self, p: &Path, corpus: &Corpus) -> Result<()> {
        self.write_text(p, &corpus.to_jsonl())
    }

    fn prepare(&self, input: &Path, output: &Path) -> Result<()> {
        let sentences: Vec<AnnotatedSentence> = read_paragraphs(self.path(input))?
            .iter()
            .flat_map(|p| segment_sentences(p))
            .map(AnnotatedSentence::unannotated)
            .collect();
        let corpus = Corpus::new(stem(output), sentences)?;
        self.write_corpus(output, &corpus)
    }

    fn split(&self, corpus: &Path, out_dir: &Path) -> Result<()> {
        let corpus = self.load(corpus)?;
        let (train, val, test) = split_corpus(&corpus, &self.run.split_spec()?)?;
        for (part, c) in [("train", &train), ("val", &val), ("test", &test)] {
            self.write_corpus(&out_dir.join(format!("{}.{part}.jsonl", corpus.name)), c)?;
        }
        Ok(())
    }

    fn mix(&self, corpora: &[PathBuf], per_area: usize, output: &Path) -> Result<()> {
        let corpora = corpora.iter().map(|p| self.load(p)).collect::<Result<Vec<_>>>()?;
        let mixed = build_mixed(&corpora, per_area, self.run.seed)?;
        self.write_corpus(output, &mixed)
    }

    fn synth(&self, preset: Option<&str>, grammar: Option<&Path>, n: usize, output: &Path) -> Result<()> {
        let spec = match (preset, grammar) {
            (Some(name), None) => SyntheticSpec::preset(name)?,
            (None, Some(path)) => SyntheticSpec::load(self.path(path))?,
            _ => bail!("synth needs exactly one of --preset or --grammar"),
        };
        let corpus = generate_synthetic(&spec, n, self.run.seed)?;
        self.write_corpus(output, &corpus)
    }

    fn train(
        &self,
        train: &Path,
        val: &Path,
        test: Option<&Path>,
        output: &Path,
        log_path: Option<&Path>,
        report: Option<&Path>,
    ) -> Result<()> {
        let train_set = self.load(train)?;
        let val_set = self.load(val)?;
        let test_set = test.map(|p| self.load(p)).transpose()?;
        let lexicon = self.run.lexicon()?;
        let repeats = self.run.repeats;
        let mut log_lines = String::new();
        let mut runs = Vec::new();
        let mut scores = Vec::new();
        for r in 0..repeats {
            let seed = self.run.seed.wrapping_add(r as u64);
            let config = TrainConfig { seed, ..self.run.train.clone() };
            let (mut ckpt, train_report) =
                train_with_log(&train_set, &val_set, &self.run.model, &config, &lexicon, &mut |e| {
                    log::info!("seed {seed} epoch {} loss {:.4} val F1 {:.4}", e.epoch, e.train_loss, e.val_f1);
                    let mut line = serde_json::to_value(e).expect("epoch log serializes");
                    line["seed"] = json!(seed);
                    let _ = writeln!(log_lines, "{line}");
                })?;
            ckpt.metadata = json!({ "run": self.provenance(), "seed": seed });
            let path = if repeats == 1 { output.to_path_buf() } else { seeded_path(output, seed) };
            ckpt.save(&self.path(&path))?;
            let metrics = test_set.as_ref().map(|t| evaluate(&ckpt, &lexicon, t)).transpose()?;
            if let Some(m) = &metrics {
                scores.push(m.clone());
            }
            runs.push(json!({
                "seed": seed,
                "checkpoint": path,
                "train": train_report,
                "test": metrics,
            }));
        }
        if let Some(p) = log_path {
            self.write_text(p, &log_lines)?;
        }
        let mut body = Map::new();
        body.insert("runs".into(), Value::Array(runs));
        if !scores.is_empty() {
            body.insert("summary".into(), serde_json::to_value(RepeatSummary::new(scores))?);
        }
        match report {
            Some(p) => self.write_json(p, body),
            None => {
                body.insert("run".into(), self.provenance());
                println!("{}", serde_json::to_string_pretty(&Value::Object(body))?);
                Ok(())
            }
        }
    }

    fn eval(&self, model: &Path, corpus: &Path, output: Option<&Path>) -> Result<()> {
        let ckpt = Checkpoint::load(&self.path(model))?;
        let tagger = Tagger::new(ckpt, self.run.lexicon()?)?;
        let metrics = tagger.evaluate(&self.load(corpus)?)?;
        let mut body = Map::new();
        body.insert("model".into(), json!(model));
        body.insert("corpus".into(), json!(corpus));
        body.insert("metrics".into(), serde_json::to_value(&metrics)?);
        match output {
            Some(p) => self.write_json(p, body),
            None => {
                body.insert("run".into(), self.provenance());
                println!("{}", serde_json::to_string_pretty(&Value::Object(body))?);
                Ok(())
            }
        }
    }

    fn grid(&self, corpora: &[PathBuf], output: &Path, csv: Option<&Path>) -> Result<()> {
        let spec = self.run.split_spec()?;
        let folds = corpora
            .iter()
            .map(|p| {
                let c = self.load(p)?;
                let (train, val, test) = split_corpus(&c, &spec)?;
                Ok(Folds { name: c.name.clone(), train, val, test })
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = cross_corpus_grid(&folds, &self.run.model, &self.run.train, &self.run.lexicon()?)?;
        if let Some(p) = csv {
            self.write_text(p, &grid.to_csv())?;
        }
        let mut body = Map::new();
        body.insert("grid".into(), serde_json::to_value(&grid)?);
        self.write_json(output, body)
    }

    fn predict(&self, model: &Path, input: &Path, output: &Path) -> Result<()> {
        let ckpt = Checkpoint::load(&self.path(model))?;
        let tagger = Tagger::new(ckpt, self.run.lexicon()?)?;
        let path = self.path(input);
        let source = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut out = String::new();
        for (i, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = || format!("{}:{}", path.display(), i + 1);
            let mut record: Map<String, Value> =
                serde_json::from_str(line).with_context(|| format!("{}: not a JSON object", at()))?;
            let text = record
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("{}: missing string field `text`", at()))?
                .to_string();
            let spans = tagger.predict(&text)?;
            let surfaces = |kind: EntityKind| -> Vec<String> {
                spans.iter().filter(|s| s.kind == kind).map(|s| s.surface(&text)).collect()
            };
            record.insert("methods".into(), json!(surfaces(EntityKind::M)));
            record.insert("datasets".into(), json!(surfaces(EntityKind::D)));
            record.insert("entities".into(), serde_json::to_value(&spans)?);
            writeln!(out, "{}", Value::Object(record))?;
        }
        self.write_text(output, &out)
    }

    fn augment(&self, input: &Path, output: &Path) -> Result<()> {
        let corpus = self.load(input)?;
        let glossary = build_glossaries(&corpus);
        let cfg = &self.run.augment;
        let enlarged = augment(&corpus, cfg.multiplier, &glossary, self.run.seed, cfg.allow_self)?;
        self.write_corpus(output, &enlarged)
    }

    fn mine(&self, input: &Path, out_dir: &Path) -> Result<()> {
        let cfg = &self.run.mining;
        let aliases = match &cfg.alias_file {
            Some(p) => AliasMap::load(&self.path(p))?,
            None => AliasMap::new(),
        };
        let exclusions = match &cfg.exclude_file {
            Some(p) => load_exclusions(&self.path(p))?,
            None => BTreeSet::new(),
        };
        let categories = match &cfg.categories_file {
            Some(p) => {
                let path = self.path(p);
                let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                Some(parse_categories(&text))
            }
            None => None,
        };
        let papers = read_papers(&self.path(input))?
            .iter()
            .map(|raw| canonical_paper(raw, &aliases, &exclusions))
            .collect::<mder::Result<Vec<PaperEntities>>>()?;

        let mut rankings = Vec::new();
        let mut frequency_csv = String::from("year,dataset,papers\n");
        let mut per_year = Map::new();
        for year in years(&papers) {
            let graph = build_graph(&papers, year);
            let scores = betweenness(&graph);
            let ranked = if scores.is_empty() { Vec::new() } else { top_k(&scores, cfg.top_k)? };
            let shown = filter_edges(&graph, cfg.min_edge_weight)?;
            let mut body = Map::new();
            body.insert("year".into(), json!(year));
            body.insert("min_edge_weight".into(), json!(cfg.min_edge_weight));
            body.insert("graph".into(), shown.to_node_link_json(Some(&scores), categories.as_ref()));
            self.write_json(&out_dir.join(format!("graph-{year}.json")), body)?;
            self.write_text(&out_dir.join(format!("graph-{year}.graphml")), &shown.to_graphml(categories.as_ref()))?;

            let freq = dataset_frequency(&papers, year);
            for (name, n) in &freq {
                writeln!(frequency_csv, "{year},{},{n}", csv_field(name))?;
            }
            per_year.insert(
                year.to_string(),
                json!({
                    "papers": papers.iter().filter(|p| p.year == year).count(),
                    "nodes": graph.nodes.len(),
                    "edges": graph.edges.len(),
                    "shown_edges": shown.edges.len(),
                    "top": ranked.iter().map(|(n, s)| json!({ "entity": n, "betweenness": s })).collect::<Vec<_>>(),
                    "datasets": freq,
                }),
            );
            rankings.push((year, ranked));
        }
        self.write_text(&out_dir.join("rankings.csv"), &rankings_csv(&rankings))?;
        self.write_text(&out_dir.join("datasets.csv"), &frequency_csv)?;
        let mut body = Map::new();
        body.insert("papers".into(), json!(papers.len()));
        body.insert("years".into(), Value::Object(per_year));
        self.write_json(&out_dir.join("summary.json"), body)
    }

    fn report(&self, inputs: &[PathBuf], output: &Path, csv: Option<&Path>) -> Result<()> {
        let mut runs = Vec::new();
        for p in inputs {
            let path = self.path(p);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            runs.extend(metrics_in(&value).with_context(|| format!("no metrics in {}", path.display()))?);
        }
        let summary = RepeatSummary::new(runs);
        if let Some(p) = csv {
            let mut out = String::from("run,precision,recall,f1\n");
            for (i, r) in summary.runs.iter().enumerate() {
                let s = &r.overall;
                writeln!(out, "{},{:.6},{:.6},{:.6}", i + 1, s.precision, s.recall, s.f1)?;
            }
            writeln!(
                out,
                "mean,{:.6},{:.6},{:.6}\nstd,,,{:.6}\nrecomputed,,,{:.6}",
                summary.mean_precision, summary.mean_recall, summary.mean_f1, summary.std_f1, summary.recomputed_f1
            )?;
            self.write_text(p, &out)?;
        }
        let mut body = Map::new();
        body.insert("inputs".into(), json!(inputs));
        body.insert("summary".into(), serde_json::to_value(&summary)?);
        self.write_json(output, body)
    }
}

/// Metrics reports in an `eval` or `train` output, or a bare report.
fn metrics_in(value: &Value) -> Result<Vec<MetricsReport>> {
    if let Some(m) = value.get("metrics") {
        return Ok(vec![serde_json::from_value(m.clone())?]);
    }
    if let Some(runs) = value.get("runs").and_then(Value::as_array) {
        let found: Vec<MetricsReport> = runs
            .iter()
            .filter_map(|r| r.get("test").filter(|t| !t.is_null()))
            .map(|t| serde_json::from_value(t.clone()))
            .collect::<serde_json::Result<_>>()?;
        if found.is_empty() {
            bail!("training report has no test scores");
        }
        return Ok(found);
    }
    Ok(vec![serde_json::from_value(value.clone())?])
}

/// Reads per-paper or per-sentence records and merges them by paper id.
fn read_papers(path: &Path) -> Result<Vec<RawPaper>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut merged: BTreeMap<String, RawPaper> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPaper = serde_json::from_str(line)
            .map_err(|e| mder::Error::Parse { path: path.display().to_string(), line: i + 1, message: e.to_string() })?;
        match merged.get_mut(&raw.paper_id) {
            Some(p) if p.year != raw.year => {
                bail!("{}:{}: paper {} has years {} and {}", path.display(), i + 1, raw.paper_id, p.year, raw.year)
            }
            Some(p) => {
                p.methods.extend(raw.methods);
                p.datasets.extend(raw.datasets);
            }
            None => {
                merged.insert(raw.paper_id.clone(), raw);
            }
        }
    }
    Ok(merged.into_values().collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into())
}

/// `model.json` with seed 3 becomes `model.seed3.json`.
fn seeded_path(p: &Path, seed: u64) -> PathBuf {
    let ext = p.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    p.with_file_name(format!("{}.seed{seed}{ext}", stem(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_paths() {
        assert_eq!(seeded_path(Path::new("out/model.json"), 3), PathBuf::from("out/model.seed3.json"));
        assert_eq!(seeded_path(Path::new("model"), 0), PathBuf::from("model.seed0"));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn sentence_records_merge_by_paper() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        fs::write(
            &path,
            "{\"paper_id\":\"a\",\"year\":2010,\"methods\":[\"SVM\"]}\n\
             {\"paper_id\":\"a\",\"year\":2010,\"methods\":[\"CRF\"],\"text\":\"x\"}\n\
             {\"paper_id\":\"b\",\"year\":2011}\n",
        )
        .unwrap();
        let papers = read_papers(&path).unwrap();
        assert_eq!(papers.len(), 2);
        assert_eq!(papers[0].methods, vec!["SVM".to_string(), "CRF".to_string()]);
        fs::write(&path, "{\"paper_id\":\"a\",\"year\":2010}\n{\"paper_id\":\"a\",\"year\":2012}\n").unwrap();
        assert!(read_papers(&path).is_err());
    }

    #[test]
    fn metrics_found_in_each_layout() {
        let m = json!({"precision":0.5,"recall":0.5,"f1":0.5,"identified":2,"correct":1,"annotated":2,"by_kind":{}});
        assert_eq!(metrics_in(&json!({ "metrics": m })).unwrap().len(), 1);
        assert_eq!(metrics_in(&json!({ "runs": [{ "test": m }, { "test": m }] })).unwrap().len(), 2);
        assert_eq!(metrics_in(&m).unwrap().len(), 1);
        assert!(metrics_in(&json!({ "runs": [{ "test": null }] })).is_err());
    }
}
