//! Trains the full model and the no-phoneme-head ablation on the shipped
//! desk corpus and prints the loss curves and corruption metrics.
//!
//!     cargo run --release -p isni-core --example desk_run

use std::time::Instant;

use isni::corpus::{induce_vocab, parse_corpus, training_items_for_corpus};
use isni::eval::EvalReport;
use isni::generation::{corrupt_corpus, DecodeMode, PlanSource};
use isni::model::{Model, ModelConfig, SupervisionTable};
use isni::phonetics::PronouncingLexicon;
use isni::training::{prepare_items, train, TrainConfig};

fn main() -> isni::Result<()> {
    let lex = PronouncingLexicon::builtin();
    let pairs = parse_corpus(include_str!("../data/desk_corpus.tsv"))?;
    let texts: Vec<&str> = pairs.iter().flat_map(|p| [p.gt.as_str(), p.asr.as_str()]).collect();
    let vocab = induce_vocab(&texts, 256)?;
    let gt: Vec<&str> = pairs.iter().map(|p| p.gt.as_str()).collect();
    let arg = |i: usize, default: u64| std::env::args().nth(i).map_or(default, |s| s.parse().unwrap());
    let (epochs, seed) = (arg(1, 30) as usize, arg(2, 7));

    for (name, cfg) in [
        ("full", ModelConfig::desk(0, 0)),
        ("ablation", ModelConfig::desk(0, 0).without_phoneme_head()),
    ] {
        let start = Instant::now();
        let mut model = Model::new(cfg, vocab.clone(), &lex, seed)?;
        let (items, dropped) = prepare_items(training_items_for_corpus(&pairs, &model.vocab, &lex), &model);
        let sup = SupervisionTable::build(&model.vocab, &lex);
        let tc = TrainConfig { epochs, seed, ..TrainConfig::desk() };
        let log = train(&mut model, &items, &sup, &tc)?;
        println!("[{name}] items {} dropped {dropped} trained in {:.1?}", items.len(), start.elapsed());
        print!("{}", log.to_csv());
        let t = Instant::now();
        let mut refs = Vec::new();
        let mut hyps = Vec::new();
        for draw in 0..3u64 {
            let out = corrupt_corpus(&model, &gt, PlanSource::Interventional(0.45), seed * 10 + draw, DecodeMode::DEFAULT)?;
            println!("[{name} draw {draw}] spans {:?}", out.error_type_counts());
            refs.extend(gt.iter().map(|s| s.to_string()));
            hyps.extend(out.transcripts().iter().map(|s| s.to_string()));
        }
        let report = EvalReport::compute(&refs, &hyps, &lex)?;
        println!("[{name}] decode {:.1?}", t.elapsed());
        print!("{}", report.to_text());
    }
    Ok(())
}
