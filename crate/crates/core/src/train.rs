//! Mini-batch training with Adam, validation-based model selection and
//! early stopping, plus evaluation, tagging, and the cross-corpus grid.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntitySpan};
use crate::error::{Error, Result};
use crate::metrics::{GridReport, MetricsAccumulator, MetricsReport, RepeatSummary};
use crate::model::{
    forward, sequence_loss_and_grad, AblationFlags, CharVocabulary, Checkpoint, Decoder,
    EncodedSequence, ModelConfig, ModelParams,
};
use crate::optim::{clip_global_norm, Adam};
use crate::rules::RuleLexicon;
use crate::tagscheme::{decode_entities, encode_tags, Tag, TagSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
    pub ablation: AblationFlags,
    /// Stop as soon as validation F1 reaches this value.
    pub target_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 0.001,
            dropout: 0.5,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            clip_norm: 5.0,
            ablation: AblationFlags::FULL,
            target_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean negative log-likelihood per real character.
    pub train_loss: f64,
    pub val_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
    pub best_val_f1: f64,
    pub stopped_early: bool,
    pub total_seconds: f64,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

struct Example {
    seq: EncodedSequence,
    gold: Vec<usize>,
}

fn encode_corpus(
    corpus: &Corpus,
    vocab: &CharVocabulary,
    lexicon: &RuleLexicon,
    max_len: usize,
) -> Result<Vec<Example>> {
    corpus
        .sentences
        .iter()
        .filter(|s| !s.text.is_empty())
        .map(|s| {
            let seq = EncodedSequence::new(&s.text, vocab, lexicon, max_len);
            let mut gold = encode_tags(s)?.indices();
            gold.truncate(seq.len());
            Ok(Example { seq, gold })
        })
        .collect()
}

/// Groups shuffled examples into batches of similar length: pools of
/// `8 * batch` examples are sorted by length, cut into batches, and the
/// batch order is shuffled again.
fn make_batches(lengths: &[usize], batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    let mut batches = Vec::new();
    for pool in order.chunks(batch * 8) {
        let mut pool = pool.to_vec();
        pool.sort_by_key(|&i| lengths[i]);
        batches.extend(pool.chunks(batch).map(|c| c.to_vec()));
    }
    batches.shuffle(rng);
    batches
}

/// Tag indices for every character of `text`. Predicted padding reads as
/// O; characters beyond the length limit are O.
fn predict_tags(
    text: &str,
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &CharVocabulary,
    lexicon: &RuleLexicon,
) -> Result<TagSequence> {
    let n = text.chars().count();
    if n == 0 {
        return Ok(TagSequence(Vec::new()));
    }
    let seq = EncodedSequence::new(text, vocab, lexicon, config.max_len);
    let flags = params.flags();
    let z = forward(&seq, params, config, &flags)?;
    let path = Decoder::for_params(params).decode(&z, seq.len(), params)?;
    let mut tags: Vec<Tag> = path
        .into_iter()
        .map(|i| match Tag::from_index(i) {
            Some(Tag::Pad) | None => Tag::Outside,
            Some(t) => t,
        })
        .collect();
    tags.resize(n, Tag::Outside);
    Ok(TagSequence(tags))
}

fn evaluate_params(
    params: &ModelParams,
    config: &ModelConfig,
    vocab: &CharVocabulary,
    lexicon: &RuleLexicon,
    corpus: &Corpus,
) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new();
    for s in &corpus.sentences {
        let tags = predict_tags(&s.text, params, config, vocab, lexicon)?;
        let pred = decode_entities(&s.text, &tags)?;
        acc.add(&pred, &s.entities)?;
    }
    acc.report()
}

/// A trained model bound to the rule lexicon it was trained with.
#[derive(Debug, Clone)]
pub struct Tagger {
    pub checkpoint: Checkpoint,
    pub lexicon: RuleLexicon,
}

impl Tagger {
    pub fn new(checkpoint: Checkpoint, lexicon: RuleLexicon) -> Result<Self> {
        checkpoint.check_lexicon(&lexicon)?;
        Ok(Tagger { checkpoint, lexicon })
    }

    pub fn tag(&self, text: &str) -> Result<TagSequence> {
        let c = &self.checkpoint;
        predict_tags(text, &c.params, &c.config, &c.vocabulary, &self.lexicon)
    }

    pub fn predict(&self, text: &str) -> Result<Vec<EntitySpan>> {
        decode_entities(text, &self.tag(text)?)
    }

    pub fn evaluate(&self, corpus: &Corpus) -> Result<MetricsReport> {
        let c = &self.checkpoint;
        evaluate_params(&c.params, &c.config, &c.vocabulary, &self.lexicon, corpus)
    }
}

/// Entity-level scores of `checkpoint` on `corpus`.
pub fn evaluate(checkpoint: &Checkpoint, lexicon: &RuleLexicon, corpus: &Corpus) -> Result<MetricsReport> {
    evaluate_params(
        &checkpoint.params,
        &checkpoint.config,
        &checkpoint.vocabulary,
        lexicon,
        corpus,
    )
}

pub fn train(
    train: &Corpus,
    val: &Corpus,
    model_config: &ModelConfig,
    config: &TrainConfig,
    lexicon: &RuleLexicon,
) -> Result<(Checkpoint, TrainReport)> {
    train_with_log(train, val, model_config, config, lexicon, &mut |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with_log(
    train: &Corpus,
    val: &Corpus,
    model_config: &ModelConfig,
    config: &TrainConfig,
    lexicon: &RuleLexicon,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(Checkpoint, TrainReport)> {
    config.validate()?;
    let model_config = ModelConfig {
        dropout: config.dropout,
        ..model_config.clone()
    };
    let flags = config.ablation;
    model_config.validate(&flags)?;
    if train.is_empty() {
        return Err(Error::Config(format!("training corpus `{}` is empty", train.name)));
    }
    if val.is_empty() {
        return Err(Error::Config(format!("validation corpus `{}` is empty", val.name)));
    }
    let vocab = CharVocabulary::build(train);
    let examples = encode_corpus(train, &vocab, lexicon, model_config.max_len)?;
    let lengths: Vec<usize> = examples.iter().map(|e| e.seq.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(&model_config, &flags, vocab.len(), rng.gen())?;
    let mut opt = Adam::new(&params, config.learning_rate);
    let mut grads = params.zeros_like();

    let mut best = (f64::NEG_INFINITY, 0, params.clone());
    let mut epochs = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;
    let clock = Clock::start();
    for epoch in 1..=config.max_epochs {
        let t0 = Clock::start();
        let mut total_loss = 0.0;
        let mut total_chars = 0usize;
        for batch in make_batches(&lengths, config.batch_size, &mut rng) {
            grads.tensors_mut().into_iter().for_each(|(_, t)| t.fill(0.0));
            let mut loss = 0.0;
            let mut chars = 0;
            for &i in &batch {
                let ex = &examples[i];
                loss += sequence_loss_and_grad(
                    &ex.seq,
                    &ex.gold,
                    &params,
                    &model_config,
                    Some(&mut rng),
                    &mut grads,
                )?;
                chars += ex.seq.real_len();
            }
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite batch loss {loss}"),
                });
            }
            grads.scale(1.0 / chars as f64);
            clip_global_norm(&mut grads, config.clip_norm);
            opt.update(&mut params, &grads);
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "non-finite parameters after update".into(),
                });
            }
            total_loss += loss;
            total_chars += chars;
        }
        let val_f1 = evaluate_params(&params, &model_config, &vocab, lexicon, val)?.overall.f1;
        let log = EpochLog {
            epoch,
            train_loss: total_loss / total_chars as f64,
            val_f1,
            seconds: t0.seconds(),
        };
        log::info!(
            "epoch {epoch}: loss {:.5} val F1 {:.4}",
            log.train_loss,
            log.val_f1
        );
        on_epoch(&log);
        epochs.push(log);
        if val_f1 > best.0 {
            best = (val_f1, epoch, params.clone());
            since_best = 0;
            if config.target_f1.is_some_and(|t| val_f1 >= t) {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    let (best_val_f1, selected_epoch, best_params) = best;
    let report = TrainReport {
        epochs,
        selected_epoch,
        best_val_f1,
        stopped_early,
        total_seconds: clock.seconds(),
    };
    let checkpoint = Checkpoint {
        config: model_config,
        flags,
        vocabulary: vocab,
        lexicon_fingerprint: lexicon.fingerprint(),
        params: best_params,
        metadata: serde_json::Value::Null,
    };
    Ok((checkpoint, report))
}

/// Trains `repeats` times with seeds `seed, seed + 1, ...` and scores each
/// run on `test`.
pub fn train_repeats(
    train_set: &Corpus,
    val: &Corpus,
    test: &Corpus,
    model_config: &ModelConfig,
    config: &TrainConfig,
    lexicon: &RuleLexicon,
    repeats: usize,
) -> Result<RepeatSummary> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    let mut runs = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(r as u64),
            ..config.clone()
        };
        let (ckpt, _) = train(train_set, val, model_config, &cfg, lexicon)?;
        runs.push(evaluate(&ckpt, lexicon, test)?);
    }
    Ok(RepeatSummary::new(runs))
}

/// One corpus already split into train, validation and test folds.
#[derive(Debug, Clone)]
pub struct Folds {
    pub name: String,
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

/// Trains on each corpus's training fold and tests on every corpus's test
/// fold, giving an n x n F1 matrix.
pub fn cross_corpus_grid(
    folds: &[Folds],
    model_config: &ModelConfig,
    config: &TrainConfig,
    lexicon: &RuleLexicon,
) -> Result<GridReport> {
    let mut f1 = Vec::with_capacity(folds.len());
    for row in folds {
        let (ckpt, _) = train(&row.train, &row.val, model_config, config, lexicon)?;
        let mut cells = Vec::with_capacity(folds.len());
        for col in folds {
            cells.push(evaluate(&ckpt, lexicon, &col.test)?.overall.f1);
        }
        log::info!("grid row {}: {:?}", row.name, cells);
        f1.push(cells);
    }
    GridReport::new(folds.iter().map(|f| f.name.clone()).collect(), f1)
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Clock(std::time::Instant::now())
    }
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[cfg(target_arch = "wasm32")]
struct Clock;

#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Clock
    }
    fn seconds(&self) -> f64 {
        0.0
    }
}
