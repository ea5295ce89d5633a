//! Entity-level precision, recall and F1 with exact boundary and type
//! matching, plus cross-corpus and repeated-run aggregation.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{EntityKind, EntitySpan};
use crate::error::{Error, Result};

/// Counts exact `(start, end, kind)` matches between two span lists.
pub fn match_entities(pred: &[EntitySpan], gold: &[EntitySpan]) -> Result<usize> {
    for (name, spans) in [("predicted", pred), ("gold", gold)] {
        let mut sorted = spans.to_vec();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0].overlaps(&w[1])) {
            return Err(Error::Annotation(format!("{name} spans overlap")));
        }
    }
    let gold: HashSet<&EntitySpan> = gold.iter().collect();
    Ok(pred.iter().filter(|p| gold.contains(p)).count())
}

/// Precision, recall and F1 with every 0/0 taken as 0.
pub fn prf(identified: usize, correct: usize, annotated: usize) -> Result<(f64, f64, f64)> {
    if correct > identified || correct > annotated {
        return Err(Error::Counts(format!(
            "correct {correct} exceeds identified {identified} or annotated {annotated}"
        )));
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(correct, identified);
    let r = ratio(correct, annotated);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok((p, r, f))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub identified: usize,
    pub correct: usize,
    pub annotated: usize,
}

impl Scores {
    pub fn from_counts(identified: usize, correct: usize, annotated: usize) -> Result<Self> {
        let (precision, recall, f1) = prf(identified, correct, annotated)?;
        Ok(Scores {
            precision,
            recall,
            f1,
            identified,
            correct,
            annotated,
        })
    }
}

/// Micro-averaged scores over all entities plus a per-kind breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub overall: Scores,
    pub by_kind: BTreeMap<EntityKind, Scores>,
}

/// Accumulates counts sentence by sentence.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    counts: BTreeMap<EntityKind, [usize; 3]>,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &[EntitySpan], gold: &[EntitySpan]) -> Result<()> {
        for kind in EntityKind::ALL {
            let p: Vec<EntitySpan> = pred.iter().filter(|s| s.kind == kind).copied().collect();
            let g: Vec<EntitySpan> = gold.iter().filter(|s| s.kind == kind).copied().collect();
            let c = match_entities(&p, &g)?;
            let e = self.counts.entry(kind).or_default();
            e[0] += p.len();
            e[1] += c;
            e[2] += g.len();
        }
        Ok(())
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let mut total = [0; 3];
        let mut by_kind = BTreeMap::new();
        for kind in EntityKind::ALL {
            let c = self.counts.get(&kind).copied().unwrap_or_default();
            for i in 0..3 {
                total[i] += c[i];
            }
            by_kind.insert(kind, Scores::from_counts(c[0], c[1], c[2])?);
        }
        Ok(MetricsReport {
            overall: Scores::from_counts(total[0], total[1], total[2])?,
            by_kind,
        })
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summary of repeated runs. `mean_f1` averages the per-run F1 values;
/// `recomputed_f1` is the harmonic mean of the averaged P and R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub runs: Vec<MetricsReport>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub recomputed_f1: f64,
}

impl RepeatSummary {
    pub fn new(runs: Vec<MetricsReport>) -> Self {
        let col = |f: fn(&Scores) -> f64| runs.iter().map(|r| f(&r.overall)).collect::<Vec<_>>();
        let (mean_precision, _) = mean_std(&col(|s| s.precision));
        let (mean_recall, _) = mean_std(&col(|s| s.recall));
        let (mean_f1, std_f1) = mean_std(&col(|s| s.f1));
        let recomputed_f1 = if mean_precision + mean_recall == 0.0 {
            0.0
        } else {
            2.0 * mean_precision * mean_recall / (mean_precision + mean_recall)
        };
        RepeatSummary {
            runs,
            mean_precision,
            mean_recall,
            mean_f1,
            std_f1,
            recomputed_f1,
        }
    }
}

/// Cross-corpus F1 matrix: row `i` trains on corpus `i`, column `j` tests
/// on corpus `j`. Row statistics use the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub names: Vec<String>,
    pub f1: Vec<Vec<f64>>,
    pub row_mean: Vec<f64>,
    pub row_std: Vec<f64>,
}

impl GridReport {
    pub fn new(names: Vec<String>, f1: Vec<Vec<f64>>) -> Result<Self> {
        let n = names.len();
        if f1.len() != n || f1.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("grid must be {n}x{n}")));
        }
        let (row_mean, row_std) = f1.iter().map(|r| mean_std(r)).unzip();
        Ok(GridReport {
            names,
            f1,
            row_mean,
            row_std,
        })
    }

    /// Rows whose diagonal cell is not the row maximum.
    pub fn off_diagonal_maxima(&self) -> Vec<usize> {
        (0..self.names.len())
            .filter(|&i| {
                let d = self.f1[i][i];
                self.f1[i].iter().any(|&v| v > d)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("train\\test,{},mean,std\n", self.names.join(","));
        for (i, name) in self.names.iter().enumerate() {
            let cells: Vec<String> = self.f1[i].iter().map(|v| format!("{v:.4}")).collect();
            out.push_str(&format!(
                "{name},{},{:.4},{:.4}\n",
                cells.join(","),
                self.row_mean[i],
                self.row_std[i]
            ));
        }
        out
    }
}
