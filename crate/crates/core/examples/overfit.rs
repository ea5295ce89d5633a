use mder::corpus::{generate_synthetic, SyntheticSpec};
use mder::model::ModelConfig;
use mder::rules::RuleLexicon;
use mder::train::{evaluate, train_with_log, TrainConfig};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let get = |i: usize, d: usize| args.get(i).copied().unwrap_or(d);
    let config = ModelConfig {
        d_rule: get(0, 8),
        d_char: get(1, 16),
        d_hidden: get(2, 16),
        kernels: get(3, 8),
        d_query: get(4, 16),
        ..ModelConfig::default()
    };
    let epochs = get(5, 100);
    let seed = get(6, 0) as u64;
    let corpus = generate_synthetic(&SyntheticSpec::preset("nlp").unwrap(), 50, seed).unwrap();
    let lexicon = RuleLexicon::builtin();
    let mut ablation = mder::model::AblationFlags::FULL;
    if let Ok(a) = std::env::var("ABL") {
        ablation = ablation.with(&a).unwrap();
    }
    let learning_rate = std::env::var("LR").ok().and_then(|v| v.parse().ok()).unwrap_or(0.001);
    let cfg = TrainConfig { max_epochs: epochs, patience: epochs, seed, ablation, learning_rate, ..TrainConfig::default() };
    let (ckpt, report) = train_with_log(&corpus, &corpus, &config, &cfg, &lexicon, &mut |e| {
        println!("{} {:.4} {:.3} {:.2}s", e.epoch, e.train_loss, e.val_f1, e.seconds)
    })
    .unwrap();
    let m = evaluate(&ckpt, &lexicon, &corpus).unwrap();
    println!("selected {} f1 {:.3}", report.selected_epoch, m.overall.f1);
}
