use mosnet::models::{Architecture, ModelConfig, MosNet, MosPrediction};
use mosnet::nn::gradcheck::max_relative_error;
use mosnet::nn::{Module, Real, Tensor};
use mosnet::rng::stream;
use mosnet::training::{make_batches, model_grad_check, mosnet_loss, utterance_objective_grad, Example};
use proptest::prelude::*;
use rand::Rng;

fn tiny(arch: Architecture) -> ModelConfig {
    let mut cfg = ModelConfig::new(arch);
    cfg.channels = vec![2, 3];
    cfg.blstm_hidden = 3;
    cfg.fc_hidden = 4;
    cfg.n_bins = 10;
    cfg
}

fn model<F: Real>(arch: Architecture, seed: u64) -> MosNet<F> {
    MosNet::new(tiny(arch), &mut stream(seed, "init", 0)).unwrap()
}

fn example<F: Real>(frames: usize, seed: u64) -> Example<F> {
    let mut rng = stream(seed, "example", 0);
    let data = (0..frames * 10).map(|_| F::lit(rng.random_range(0.0..1.5))).collect();
    Example {
        id: format!("u{seed}"),
        system_id: "s0".into(),
        features: Tensor::from_vec(&[frames, 10], data).unwrap(),
        target: F::lit(rng.random_range(1.0..5.0)),
    }
}

/// Direct transcription of the objective as a double loop.
fn oracle(frames: &[Vec<f64>], valid: &[usize], truth: &[f64], alpha: f64) -> f64 {
    let mut total = 0.0;
    for s in 0..frames.len() {
        let t = valid[s];
        let mut pooled = 0.0;
        for q in &frames[s][..t] {
            pooled += q;
        }
        pooled /= t as f64;
        let mut frame_term = 0.0;
        for q in &frames[s][..t] {
            frame_term += (truth[s] - q) * (truth[s] - q);
        }
        total += (truth[s] - pooled) * (truth[s] - pooled) + alpha / t as f64 * frame_term;
    }
    total / frames.len() as f64
}

fn prediction<F: Real>(scores: &[f64], valid: usize) -> MosPrediction<F> {
    let frame_scores: Vec<F> = scores.iter().map(|&v| F::lit(v)).collect();
    let pooled = frame_scores[..valid].iter().copied().sum::<F>() / F::lit(valid as f64);
    MosPrediction {
        frame_scores,
        utterance_score: pooled,
        valid_len: valid,
    }
}

fn case_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, Vec<f64>, f64)> {
    prop::collection::vec(
        (prop::collection::vec(0.0f64..6.0, 1..12), 0.0f64..1.0, 1.0f64..5.0),
        1..6,
    )
    .prop_flat_map(|utts| {
        let frames: Vec<Vec<f64>> = utts.iter().map(|u| u.0.clone()).collect();
        let valid: Vec<usize> = utts
            .iter()
            .map(|u| 1 + ((u.0.len() - 1) as f64 * u.1) as usize)
            .collect();
        let truth: Vec<f64> = utts.iter().map(|u| u.2).collect();
        (Just(frames), Just(valid), Just(truth), 0.0f64..3.0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn loss_matches_direct_summation((frames, valid, truth, alpha) in case_strategy()) {
        let expected = oracle(&frames, &valid, &truth, alpha);
        let p64: Vec<MosPrediction<f64>> = frames.iter().zip(&valid).map(|(f, &v)| prediction(f, v)).collect();
        let got64 = mosnet_loss(&p64, &truth, alpha).unwrap();
        prop_assert!((got64 - expected).abs() <= 1e-12 * expected.max(1.0));
        let p32: Vec<MosPrediction<f32>> = frames.iter().zip(&valid).map(|(f, &v)| prediction(f, v)).collect();
        let t32: Vec<f32> = truth.iter().map(|&t| t as f32).collect();
        let got32 = mosnet_loss(&p32, &t32, alpha as f32).unwrap() as f64;
        prop_assert!((got32 - expected).abs() <= 1e-6 * expected.max(1.0));
    }

    #[test]
    fn loss_is_non_negative_and_zero_only_on_exact_fit(
        (frames, valid, truth, alpha) in case_strategy(),
    ) {
        let preds: Vec<MosPrediction<f64>> = frames.iter().zip(&valid).map(|(f, &v)| prediction(f, v)).collect();
        let o = mosnet_loss(&preds, &truth, alpha).unwrap();
        prop_assert!(o >= 0.0);
        let exact: Vec<MosPrediction<f64>> = frames
            .iter()
            .zip(&valid)
            .zip(&truth)
            .map(|((f, &v), &t)| {
                let mut f = f.clone();
                f[..v].iter_mut().for_each(|q| *q = t);
                prediction(&f, v)
            })
            .collect();
        // Zero up to the rounding of the pooled mean of identical values.
        prop_assert!(mosnet_loss(&exact, &truth, alpha).unwrap() < 1e-24);
        let perturbed_truth: Vec<f64> = truth.iter().map(|t| t + 0.1).collect();
        prop_assert!(mosnet_loss(&exact, &perturbed_truth, alpha).unwrap() > 0.0);
    }
}

#[test]
fn batched_loss_equals_mean_of_individual_losses() {
    for arch in [Architecture::Blstm, Architecture::Cnn, Architecture::CnnBlstm] {
        let net = model::<f32>(arch, 1);
        let set: Vec<Example<f32>> = [7, 19, 12, 3]
            .iter()
            .enumerate()
            .map(|(i, &n)| example(n, i as u64))
            .collect();
        let single: Vec<f32> = set
            .iter()
            .map(|ex| {
                let p = net.predict(&ex.features, ex.n_frames()).unwrap();
                mosnet_loss(&[p], &[ex.target], 1.0).unwrap()
            })
            .collect();
        let expected = single.iter().sum::<f32>() / 4.0;
        let batches = make_batches(&set, 4, &mut stream(2, "shuffle", 0));
        let b = &batches[0];
        assert_eq!(b.padded_len(), 19);
        let preds: Vec<_> = (0..4)
            .map(|i| net.predict(&b.item(i), b.valid_lens[i]).unwrap())
            .collect();
        let batched = mosnet_loss(&preds, &b.targets, 1.0).unwrap();
        assert!((batched - expected).abs() < 1e-6, "{arch}: {batched} vs {expected}");
    }
}

fn padded(ex: &Example<f32>, extra: usize) -> Tensor<f32> {
    let mut data = ex.features.data().to_vec();
    data.resize((ex.n_frames() + extra) * 10, 0.0);
    Tensor::from_vec(&[ex.n_frames() + extra, 10], data).unwrap()
}

#[test]
fn masked_objective_ignores_padding_amount() {
    for arch in [Architecture::Blstm, Architecture::Cnn, Architecture::CnnBlstm] {
        let net = model::<f32>(arch, 3);
        let ex = example::<f32>(9, 5);
        let losses: Vec<f32> = [0, 10, 100]
            .iter()
            .map(|&pad| {
                let p = net.predict(&padded(&ex, pad), 9).unwrap();
                mosnet_loss(&[p], &[ex.target], 1.0).unwrap()
            })
            .collect();
        assert!((losses[1] - losses[0]).abs() < 1e-6, "{arch}: {losses:?}");
        assert!((losses[2] - losses[0]).abs() < 1e-6, "{arch}: {losses:?}");
    }
}

#[test]
fn unmasked_padding_is_observable() {
    let net = model::<f32>(Architecture::Blstm, 3);
    let ex = example::<f32>(9, 5);
    let masked = net.predict(&padded(&ex, 30), 9).unwrap();
    let unmasked = net.predict(&padded(&ex, 30), 39).unwrap();
    assert_ne!(masked.utterance_score, unmasked.utterance_score);
}

#[test]
fn full_model_gradients_in_f64() {
    for seed in 0..5 {
        for arch in [Architecture::Blstm, Architecture::Cnn, Architecture::CnnBlstm] {
            let err = model_grad_check(&tiny(arch), 6, 4, 1.0, seed).unwrap();
            assert!(err < 1e-4, "{arch} seed {seed}: {err}");
        }
    }
}

#[test]
fn f32_gradients_agree_with_f64() {
    let net64 = model::<f64>(Architecture::CnnBlstm, 7);
    let mut net32 = model::<f32>(Architecture::CnnBlstm, 7);
    for (p32, (_, p64)) in net32.params_mut().into_iter().zip(net64.params()) {
        p32.value = p64.value.cast();
    }
    let ex64 = example::<f64>(8, 9);
    let ex32 = Example {
        id: ex64.id.clone(),
        system_id: ex64.system_id.clone(),
        features: ex64.features.cast::<f32>(),
        target: ex64.target as f32,
    };
    let grads = |f: &dyn Fn() -> Vec<f64>| f();
    let g64 = grads(&|| {
        let (p, tape) = net64.forward(&ex64.features, 8, &mut mosnet::nn::Mode::Eval).unwrap();
        let mut g = net64.zero_grads();
        net64.backward(&tape, &utterance_objective_grad(&p, ex64.target, 1.0, 1), &mut g);
        g.0.iter().flat_map(|t| t.data().to_vec()).collect()
    });
    let g32 = grads(&|| {
        let (p, tape) = net32.forward(&ex32.features, 8, &mut mosnet::nn::Mode::Eval).unwrap();
        let mut g = net32.zero_grads();
        net32.backward(&tape, &utterance_objective_grad(&p, ex32.target, 1.0, 1), &mut g);
        g.0.iter()
            .flat_map(|t| t.data().iter().map(|&v| v as f64).collect::<Vec<_>>())
            .collect()
    });
    let err = max_relative_error(&g32, &g64);
    assert!(err < 1e-3, "{err}");
}
