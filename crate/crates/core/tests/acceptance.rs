//! Acceptance run: one PASS/FAIL line per criterion.
//!
//!     cargo test --release -p isni-core --test acceptance

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isni::corpus::{detokenize, ParallelPair, SubwordVocab, BOS, EOS, UNK};
use isni::eval::{independence_report, EvalReport, IndependenceVerdict};
use isni::generation::{assemble, classify_error, corrupt_corpus, CorruptionOutput, DecodeMode, ErrorType, GeneratedSpan, PlanSource};
use isni::intervention::{sample_plan_conditional, sample_plan_interventional, ConditionalPriorTable, CorruptionPlan};
use isni::model::{backward_and_check, Model, ModelConfig, SupervisionTable};
use isni::phonetics::{phoneme_edit_distance, PronouncingLexicon};
use isni::training::{read_checkpoint, write_checkpoint};
use support::{desk_pairs, oracle_distance, small_fixture, train_desk};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let lex = PronouncingLexicon::builtin();
    let codes: Vec<_> = lex.words().iter().take(200).map(|w| lex.get(w).unwrap().clone()).collect();
    let mut mismatches = 0;
    let mut pairs = 0;
    for a in &codes {
        for b in &codes {
            pairs += 1;
            if phoneme_edit_distance(a, b) != oracle_distance(a, b) {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        codes.len() == 200 && mismatches == 0 && secs < 30.0,
        format!("{pairs} ordered pairs, {mismatches} mismatches, {secs:.1}s"),
    )
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let (model, items, sup) = small_fixture(16, 11);
    let (_, report) = backward_and_check(&model, &items, &sup, Some((50, 2024))).map_err(|e| e.to_string())?;
    let report = report.expect("check requested");
    let secs = start.elapsed().as_secs_f64();
    check(
        report.entries.len() == 50 && report.max_rel_error <= 1e-4 && secs < 60.0,
        format!("max relative error {:.2e} over 50 coordinates, {secs:.1}s", report.max_rel_error),
    )
}

fn normalization_suite() -> Outcome {
    let lex = PronouncingLexicon::builtin();
    let mut worst = 0.0f64;
    let mut passes = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for model_seed in 0..10 {
        let (mut model, _, _) = small_fixture(16, model_seed);
        if model_seed % 2 == 1 {
            model.config = model.config.without_phoneme_head();
        }
        let v = model.vocab.len();
        let eos = model.vocab.eos();
        let bos = model.vocab.bos();
        for _ in 0..100 {
            let len = rng.random_range(1..=model.config.max_len);
            let context: Vec<usize> = (0..len).map(|_| rng.random_range(0..v)).collect();
            let k = rng.random_range(0..len);
            let steps = rng.random_range(1..=model.config.max_gen_len);
            let mut prefix = vec![bos];
            prefix.extend((1..steps).map(|_| rng.random_range(0..v)));
            let enc = model.encode_tokens(&context).map_err(|e| e.to_string())?;
            let d = model.decoder_step(&enc, k, &prefix).map_err(|e| e.to_string())?;
            let s = model.step_distributions(&d);
            for p in [&s.p_n, &s.p_ph, &s.p_gen] {
                if p.iter().any(|&x| x.is_nan() || x < 0.0) {
                    return Err(format!("negative or NaN entry after {passes} passes"));
                }
                worst = worst.max((p.sum() - 1.0).abs());
            }
            if s.p_gen[eos].is_nan() || s.p_gen[eos] < 0.0 {
                return Err("bad eos mass".into());
            }
            passes += 1;
        }
    }
    let (model, _, _) = small_fixture(16, 0);
    let sup = SupervisionTable::build(&model.vocab, &lex);
    let mut rows = 0;
    for t in 0..model.vocab.len() {
        if let Some(r) = sup.distribution(t) {
            worst = worst.max((r.iter().sum::<f64>() - 1.0).abs());
            rows += 1;
        }
    }
    check(
        worst <= 1e-9 && rows > 0,
        format!("{passes} forward passes and {rows} R rows, worst |sum - 1| = {worst:.1e}"),
    )
}

fn independence() -> Outcome {
    // 1000 sentences of length 100 over 10 token ids: 10^4 draws per id.
    let sentences: Vec<Vec<usize>> = (0..1000).map(|s| (0..100).map(|k| (k + s) % 10).collect()).collect();
    let plans: Vec<CorruptionPlan> = sentences
        .iter()
        .enumerate()
        .map(|(i, t)| sample_plan_interventional(t, 0.45, 1000 + i as u64).unwrap())
        .collect();
    let inter = independence_report(&plans, &sentences).map_err(|e| e.to_string())?;
    let n: usize = plans.iter().map(|p| p.z.len()).sum();
    let hits: usize = plans.iter().map(|p| p.corrupted_count()).sum();
    let rate = hits as f64 / n as f64;

    let names: Vec<Vec<String>> = sentences.iter().map(|s| s.iter().map(|t| format!("t{t}")).collect()).collect();
    let table = ConditionalPriorTable::new(
        (0..10).map(|t| (format!("t{t}"), if t < 5 { 0.6 } else { 0.2 })).collect(),
        0.45,
    )
    .map_err(|e| e.to_string())?;
    let cond_plans: Vec<CorruptionPlan> = names
        .iter()
        .enumerate()
        .map(|(i, t)| sample_plan_conditional(t, &table, 1000 + i as u64))
        .collect();
    let cond = independence_report(&cond_plans, &names).map_err(|e| e.to_string())?;
    check(
        inter.verdict == IndependenceVerdict::Independent
            && cond.verdict == IndependenceVerdict::Dependent
            && n == 100_000
            && (rate - 0.45).abs() <= 0.005,
        format!(
            "interventional p={:.3}, conditional (3:1) p={:.1e}, rate {rate:.4} over {n} draws",
            inter.p_value, cond.p_value
        ),
    )
}

fn taxonomy() -> Outcome {
    let m_max = ModelConfig::desk(0, 0).max_gen_len;
    for m in 1..=m_max {
        let want = match m {
            1 => ErrorType::Deletion,
            2 => ErrorType::Substitution,
            _ => ErrorType::Insertion,
        };
        let got = classify_error(m, m_max).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("m={m}: {got} instead of {want}"));
        }
    }
    check(
        classify_error(0, m_max).is_err() && classify_error(m_max + 1, m_max).is_err(),
        format!("m = 1..={m_max} classified, 0 and {} rejected", m_max + 1),
    )
}

fn fixture_span(vocab: &SubwordVocab, position: usize, pieces: &[&str]) -> GeneratedSpan {
    let mut tokens: Vec<usize> = pieces.iter().map(|p| vocab.id(p).unwrap()).collect();
    tokens.push(vocab.eos());
    GeneratedSpan {
        position,
        original: String::new(),
        error_type: classify_error(tokens.len(), 5).unwrap(),
        tokens,
        pieces: pieces.iter().map(|s| s.to_string()).collect(),
        replacement: detokenize(pieces),
    }
}

fn fixture_plan(z: &[u8]) -> CorruptionPlan {
    CorruptionPlan {
        z: z.iter().map(|&b| b == 1).collect(),
        prior: None,
        seed: 0,
    }
}

fn fixture_replay() -> Outcome {
    let v = SubwordVocab::from_pieces([BOS, EOS, UNK, "as", "best", "##ial", "at"]).map_err(|e| e.to_string())?;
    let toks = v.tokenize("as bestial");
    let first = assemble(&toks, &fixture_plan(&[0, 0, 1]), &[fixture_span(&v, 2, &["at", "##ial"])]).map_err(|e| e.to_string())?;

    let v = SubwordVocab::from_pieces([BOS, EOS, UNK, "only", "labor", "##ed", "the", "gag", "##s"]).map_err(|e| e.to_string())?;
    let toks = v.tokenize("only labored the gags");
    let spans = [
        fixture_span(&v, 2, &["##ed", "labor"]),
        fixture_span(&v, 3, &["the", "##s"]),
        fixture_span(&v, 5, &[]),
    ];
    let second = assemble(&toks, &fixture_plan(&[0, 0, 1, 1, 0, 1]), &spans).map_err(|e| e.to_string())?;
    check(
        first == "as best atial" && second == "only labored labor thes gag",
        format!("{first:?}, {second:?}"),
    )
}

/// Three corruption draws of the ground-truth side, pooled into one report.
fn pooled_report(model: &Model, gt: &[&str], seed: u64) -> Result<(EvalReport, Vec<CorruptionOutput>), String> {
    let lex = PronouncingLexicon::builtin();
    let mut refs = Vec::new();
    let mut hyps = Vec::new();
    let mut outputs = Vec::new();
    for draw in 0..3 {
        let out = corrupt_corpus(model, gt, PlanSource::Interventional(0.45), seed * 10 + draw, DecodeMode::DEFAULT)
            .map_err(|e| e.to_string())?;
        refs.extend(gt.iter().map(|s| s.to_string()));
        hyps.extend(out.transcripts().iter().map(|s| s.to_string()));
        outputs.push(out);
    }
    let report = EvalReport::compute(&refs, &hyps, &lex).map_err(|e| e.to_string())?;
    Ok((report, outputs))
}

struct DeskRun {
    full: Model,
    ablation: Model,
    seconds: f64,
}

const DESK_SEED: u64 = 7;
const DESK_EPOCHS: usize = 30;

fn desk_run(pairs: &[ParallelPair]) -> DeskRun {
    let start = Instant::now();
    let (full, _) = train_desk(pairs, ModelConfig::desk(0, 0), DESK_SEED, DESK_EPOCHS);
    let (ablation, _) = train_desk(pairs, ModelConfig::desk(0, 0).without_phoneme_head(), DESK_SEED, DESK_EPOCHS);
    DeskRun {
        full,
        ablation,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn directional_ablation(run: &DeskRun, gt: &[&str]) -> Outcome {
    let start = Instant::now();
    let (full, _) = pooled_report(&run.full, gt, DESK_SEED)?;
    let (abl, _) = pooled_report(&run.ablation, gt, DESK_SEED)?;
    let secs = run.seconds + start.elapsed().as_secs_f64();
    let (f, a) = (full.phoneme_distance.mean, abl.phoneme_distance.mean);
    let gap = (a - f) / a;
    check(
        gap >= 0.05 && secs <= 600.0,
        format!("mean phoneme distance full {f:.3} vs ablation {a:.3} ({:.1}% lower), {secs:.0}s", 100.0 * gap),
    )
}

fn identity_composition(run: &DeskRun, gt: &[&str]) -> Outcome {
    let lex = PronouncingLexicon::builtin();
    let zero = corrupt_corpus(&run.full, gt, PlanSource::Interventional(0.0), DESK_SEED, DecodeMode::DEFAULT)
        .map_err(|e| e.to_string())?;
    let wer0 = EvalReport::compute(gt, &zero.transcripts(), &lex).map_err(|e| e.to_string())?.counts.wer();
    let out = corrupt_corpus(&run.full, gt, PlanSource::Interventional(0.45), DESK_SEED, DecodeMode::DEFAULT)
        .map_err(|e| e.to_string())?;
    let r = EvalReport::compute(gt, &out.transcripts(), &lex).map_err(|e| e.to_string())?;
    let spans = out.error_type_counts();
    let all_types = spans.iter().all(|&(_, n)| n > 0)
        && r.counts.insertions > 0
        && r.counts.deletions > 0
        && r.counts.substitutions > 0;
    check(
        wer0 == 0.0 && r.counts.wer() >= 0.9 * 0.45 && all_types,
        format!("WER {wer0} at p_z=0, {:.3} at p_z=0.45; spans {spans:?}", r.counts.wer()),
    )
}

/// Vocabulary, a short training run, checkpoint bytes, transcripts and
/// reports for the first 80 desk pairs.
fn small_end_to_end(pairs: &[ParallelPair]) -> (Vec<u8>, Vec<String>, String, String) {
    let lex = PronouncingLexicon::builtin();
    let (model, _) = train_desk(pairs, ModelConfig::desk(0, 0), 5, 2);
    let bytes = write_checkpoint(&model);
    let reloaded = read_checkpoint(&bytes).unwrap();
    let gt: Vec<&str> = pairs.iter().map(|p| p.gt.as_str()).collect();
    let out = corrupt_corpus(&reloaded, &gt, PlanSource::Interventional(0.45), 5, DecodeMode::DEFAULT).unwrap();
    let report = EvalReport::compute(&gt, &out.transcripts(), &lex).unwrap();
    let transcripts = out.transcripts().iter().map(|s| s.to_string()).collect();
    (bytes, transcripts, out.span_report_tsv(), report.to_csv() + &report.to_text())
}

fn determinism(pairs: &[ParallelPair]) -> Outcome {
    let a = small_end_to_end(&pairs[..80]);
    let b = small_end_to_end(&pairs[..80]);
    check(
        a == b,
        format!("checkpoint {} bytes, {} transcripts, reports identical: {}", a.0.len(), a.1.len(), a.3 == b.3),
    )
}

fn main() {
    let pairs = desk_pairs();
    let gt: Vec<&str> = pairs.iter().map(|p| p.gt.as_str()).collect();
    let run = desk_run(&pairs);

    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("gradient fidelity", Box::new(gradient_fidelity)),
        ("normalization", Box::new(normalization_suite)),
        ("independence", Box::new(independence)),
        ("error taxonomy", Box::new(taxonomy)),
        ("fixture replay", Box::new(fixture_replay)),
        ("directional ablation", Box::new(|| directional_ablation(&run, &gt))),
        ("identity composition", Box::new(|| identity_composition(&run, &gt))),
        ("determinism", Box::new(|| determinism(&pairs))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
