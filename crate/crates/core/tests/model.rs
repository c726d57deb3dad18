mod support;

use ndarray::{array, Array1, Array2};

use isni::model::{renormalized_product, ModelConfig, ParamId};
use isni::Error;
use support::small_fixture;

fn layer_norm(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        row.mapv_inplace(|v| (v - mean) / (var + 1e-5).sqrt());
    }
    out
}

#[test]
fn embedding_mixes_word_and_phoneme_rows() {
    let (model, items, _) = small_fixture(16, 3);
    let tokens = &items[0].context;
    let e = model.embed_sequence(tokens).unwrap();
    let p = &model.params;
    for (k, &t) in tokens.iter().enumerate() {
        let row = model.codes.row_of(t);
        for j in 0..16 {
            let want = 0.5 * p.get(ParamId::WordEmb)[[t, j]]
                + 0.5 * p.get(ParamId::PhEmb)[[row, j]]
                + p.get(ParamId::PosEmb)[[k, j]];
            assert!((e[[k, j]] - want).abs() < 1e-15);
        }
    }

    let mut word_only = model.clone();
    word_only.config = model.config.without_phoneme_head();
    let e = word_only.embed_sequence(tokens).unwrap();
    for (k, &t) in tokens.iter().enumerate() {
        let want = &p.get(ParamId::WordEmb).row(t) + &p.get(ParamId::PosEmb).row(k);
        assert!(e.row(k).iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}

#[test]
fn encoder_with_silent_sublayers_is_layer_norm() {
    let (mut model, items, _) = small_fixture(16, 5);
    for id in [ParamId::EncWo, ParamId::EncFf2W, ParamId::EncFf2B] {
        model.params.get_mut(id).fill(0.0);
    }
    let e = model.embed_sequence(&items[0].context).unwrap();
    let got = model.encode_embedded(&e);
    let want = layer_norm(&layer_norm(&e));
    assert_eq!(got.dim(), e.dim());
    assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn step_distributions_are_normalized_and_gated() {
    let (model, items, _) = small_fixture(16, 7);
    let eos = model.vocab.eos();
    let enc = model.encode_tokens(&items[0].context).unwrap();
    let prefix = [model.vocab.bos(), items[0].target[0]];
    let d = model.decoder_step(&enc, items[0].position, &prefix).unwrap();
    assert_eq!(d.len(), 16);
    let s = model.step_distributions(&d);
    for p in [&s.p_n, &s.p_ph, &s.p_gen] {
        assert!((p.sum() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
    assert_eq!(s.p_gen[eos], s.p_n[eos]);
    let rest: Array1<f64> = renormalized_product(&s.p_n, &s.p_ph);
    let scale = 1.0 - s.p_n[eos];
    let z: f64 = (0..rest.len()).filter(|&i| i != eos).map(|i| rest[i]).sum();
    for i in (0..rest.len()).filter(|&i| i != eos) {
        assert!((s.p_gen[i] - scale * rest[i] / z).abs() < 1e-12);
    }

    let mut ablation = model.clone();
    ablation.config = model.config.without_phoneme_head();
    let s = ablation.step_distributions(&d);
    assert_eq!(s.p_gen, s.p_n);
}

#[test]
fn product_of_four_token_distributions() {
    let p_n = array![0.1, 0.2, 0.3, 0.4];
    let p_ph = array![0.4, 0.3, 0.2, 0.1];
    let got = renormalized_product(&p_n, &p_ph);
    let want = [0.2, 0.3, 0.3, 0.2];
    assert!(got.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
}

#[test]
fn decoder_rejects_bad_prefixes() {
    let (model, items, _) = small_fixture(16, 7);
    let enc = model.encode_tokens(&items[0].context).unwrap();
    let bos = model.vocab.bos();
    assert!(model.decoder_step(&enc, 0, &[items[0].target[0]]).is_err());
    let long = vec![bos; model.config.max_gen_len + 1];
    assert!(matches!(model.decoder_step(&enc, 0, &long), Err(Error::PrefixTooLong { .. })));
    let too_long = vec![bos; model.config.max_len + 1];
    assert!(matches!(model.encode_tokens(&too_long), Err(Error::SequenceTooLong { .. })));
}

#[test]
fn zero_phoneme_weight_leaves_only_word_loss() {
    let (mut model, items, sup) = small_fixture(16, 9);
    model.config = ModelConfig {
        lambda_ph: 0.0,
        ..model.config.clone()
    };
    let loss = model.loss_total(&items, &sup).unwrap();
    assert_eq!(loss.total, loss.l_n);
    assert!(loss.l_ph > 0.0);
}

#[test]
fn initialization_is_seeded() {
    let (a, _, _) = small_fixture(16, 1);
    let (b, _, _) = small_fixture(16, 1);
    let (c, _, _) = small_fixture(16, 2);
    assert_eq!(a, b);
    assert_ne!(a.params, c.params);
}
