use super::*;
use crate::corpus::{SentencePair, Vocabulary};

fn dims(h: usize, vs: usize, vt: usize) -> ModelDims {
    ModelDims {
        embed: 3,
        hidden: h,
        attention: 4,
        output: 5,
        src_vocab: vs,
        tgt_vocab: vt,
    }
}

fn random_model(seed: u64) -> ModelParams {
    let mut rng = Rng::new(seed);
    ModelParams::new(dims(4, 7, 6), 0.5, &mut rng).unwrap()
}

fn pair(src: &[u32], tgt: &[u32]) -> SentencePair<u32> {
    SentencePair::parallel(src.to_vec(), tgt.to_vec())
}

#[test]
fn single_token_source() {
    let m = random_model(1);
    let ann = m.encode(&[4]).unwrap();
    assert_eq!(ann.h.shape(), (1, 8));
    assert!(ann.h.is_finite());
    assert!(m.encode(&[]).is_err());
    assert!(m.encode(&[7]).is_err());
}

#[test]
fn zero_parameters_give_zero_annotations() {
    let mut rng = Rng::new(0);
    let mut m = ModelParams::new(dims(4, 7, 6), 0.1, &mut rng).unwrap();
    for p in m.params_mut() {
        p.value.fill(0.0);
    }
    let ann = m.encode(&[3, 4, 5]).unwrap();
    assert!(ann.h.data().iter().all(|&v| v == 0.0));
}

#[test]
fn reversal_swaps_direction_halves() {
    let mut m = random_model(2);
    // Make both directions the same cell so the halves are comparable.
    for k in 0..4 {
        let v = m.params()[slot::ENC_FWD + k].value.clone();
        m.params_mut()[slot::ENC_BWD + k].value = v;
    }
    let src = [3, 5, 1, 6];
    let rev: Vec<u32> = src.iter().rev().copied().collect();
    let a = m.encode(&src).unwrap();
    let b = m.encode(&rev).unwrap();
    let n = src.len();
    for j in 0..n {
        let (fa, ba) = a.h.row(j).split_at(4);
        let (fb, bb) = b.h.row(n - 1 - j).split_at(4);
        for i in 0..4 {
            assert!((fa[i] - bb[i]).abs() < 1e-15);
            assert!((ba[i] - fb[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn attention_cases() {
    let mut m = random_model(3);
    let ann = m.encode(&[2]).unwrap();
    let (alpha, c) = m.attend(&[0.1, -0.2, 0.3, 0.0], &ann);
    assert_eq!(alpha, vec![1.0]);
    assert_eq!(c, ann.h.row(0));

    m.params_mut()[slot::ATT_V].value.fill(0.0);
    let ann = m.encode(&[2, 3, 4]).unwrap();
    let (alpha, c) = m.attend(&[0.1, -0.2, 0.3, 0.0], &ann);
    for a in &alpha {
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
    }
    for k in 0..8 {
        let mean = (0..3).map(|j| ann.h.get(j, k)).sum::<f64>() / 3.0;
        assert!((c[k] - mean).abs() < 1e-15);
    }
}

#[test]
fn attention_one_hot_picks_row() {
    let mut m = random_model(4);
    let ann = m.encode(&[2, 3, 4]).unwrap();
    // Scores equal v . tanh(keys_j) with W_a = 0; scale v until one row wins.
    m.params_mut()[slot::ATT_W].value.fill(0.0);
    let mut crafted = ann.clone();
    crafted.keys.fill(0.0);
    crafted.keys.row_mut(1).fill(30.0);
    let v = &mut m.params_mut()[slot::ATT_V].value;
    v.fill(50.0);
    let (alpha, c) = m.attend(&[0.0; 4], &crafted);
    assert!((alpha[1] - 1.0).abs() < 1e-12);
    for k in 0..8 {
        assert!((c[k] - ann.h.get(1, k)).abs() < 1e-10);
    }
}

#[test]
fn decode_step_distribution_and_inference_determinism() {
    let m = random_model(5);
    let ann = m.encode(&[1, 2, 3]).unwrap();
    let s0 = m.initial_state(&ann);
    let (_, p) = m.decode_step(&s0, &ann, None);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(p.iter().all(|&x| x > 0.0));
    let mut r1 = Rng::new(1);
    let mut r2 = Rng::new(2);
    let mut d1 = Dropout { p: 0.5, rng: &mut r1 };
    let mut d2 = Dropout { p: 0.5, rng: &mut r2 };
    let (_, q1) = m.decode_step(&s0, &ann, Some(&mut d1));
    let (_, q2) = m.decode_step(&s0, &ann, Some(&mut d2));
    assert_ne!(q1, q2);
    let (_, p2) = m.decode_step(&s0, &ann, None);
    assert_eq!(p, p2);
}

#[test]
fn initial_state_formula() {
    let m = random_model(6);
    let ann = m.encode(&[4, 1, 2]).unwrap();
    let s0 = m.initial_state(&ann);
    let w = &m.params()[slot::DEC_INIT].value;
    let bwd1 = &ann.h.row(0)[4..];
    for i in 0..4 {
        let want = (0..4).map(|k| w.get(i, k) * bwd1[k]).sum::<f64>().tanh();
        assert!((s0.s[i] - want).abs() < 1e-15);
    }
    assert_eq!(s0.y_prev, None);
    // First step embeds nothing: the zero vector.
    let (alpha, c) = m.attend(&s0.s, &ann);
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let step = m.step_cached(&s0, &ann, None);
    assert!(step.out_in[4..7].iter().all(|&v| v == 0.0));
    assert_eq!(&step.out_in[7..], c.as_slice());
}

#[test]
fn uniform_output_gives_log_vocab_loss() {
    let mut m = random_model(7);
    m.params_mut()[slot::PROJ_W].value.fill(0.0);
    m.params_mut()[slot::PROJ_B].value.fill(0.0);
    let p = pair(&[3, 1], &[2, 4, Vocabulary::EOS]);
    let (loss, n) = m.sequence_nll(&p, None).unwrap();
    assert_eq!(n, 3);
    assert!((loss - 3.0 * 6f64.ln()).abs() < 1e-12);
}

#[test]
fn trace_loss_matches_sequence_nll() {
    let m = random_model(8);
    let p = pair(&[3, 4, 1], &[5, 2, Vocabulary::EOS]);
    let (loss, _) = m.sequence_nll(&p, None).unwrap();
    let trace = ForwardTrace::record(&m, &p, None).unwrap();
    assert_eq!(loss, trace.loss());
}

#[test]
fn rejects_target_without_eos() {
    let m = random_model(9);
    assert!(m.sequence_nll(&pair(&[3], &[4]), None).is_err());
}

#[test]
fn freeze_groups_by_origin() {
    let mut m = random_model(10);
    m.freeze_for_origin(Origin::MonoDummy);
    assert_eq!(m.frozen_groups(), MONO_FROZEN_GROUPS.to_vec());
    m.freeze_for_origin(Origin::Synthetic);
    assert!(m.frozen_groups().is_empty());
    m.freeze_for_origin(Origin::Parallel);
    assert!(m.frozen_groups().is_empty());
}

#[test]
fn every_parameter_in_one_group() {
    let m = random_model(11);
    assert_eq!(m.params().len(), slot::COUNT);
    for g in crate::nn::ParamGroup::ALL {
        assert!(m.params().iter().any(|p| p.group == g));
    }
}

#[test]
fn recurrent_blocks_are_orthogonal() {
    let m = random_model(12);
    let u = &m.params()[slot::DEC + 2].value;
    for a in 0..4 {
        for b in 0..4 {
            let d = crate::nn::dot(u.row(a), u.row(b));
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((d - want).abs() < 1e-12);
        }
    }
}

#[test]
fn linear_softmax_gradient_closed_form() {
    // Output projection gradient equals (probs - onehot) outer t.
    let m = random_model(13);
    let p = pair(&[2, 3], &[Vocabulary::EOS]);
    let mut grads = m.zero_grads();
    let trace = ForwardTrace::record(&m, &p, None).unwrap();
    trace.backward(&m, 1.0, &mut grads);
    let step = &trace.steps[0];
    let mut onehot = [0.0; 6];
    onehot[Vocabulary::EOS as usize] = 1.0;
    for r in 0..6 {
        for c in 0..5 {
            let want = (step.probs[r] - onehot[r]) * step.t[c];
            assert!((grads[slot::PROJ_W].get(r, c) - want).abs() < 1e-15);
        }
    }
}

/// Central differences over every parameter entry.
fn finite_difference_check(m: &ModelParams, pairs: &[SentencePair<u32>], dropout_seed: Option<u64>) {
    let loss_of = |model: &ModelParams| -> f64 {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| match dropout_seed {
                Some(s) => {
                    let mut rng = Rng::new(s + i as u64);
                    let mut d = Dropout { p: 0.3, rng: &mut rng };
                    model.sequence_nll(p, Some(&mut d)).unwrap().0
                }
                None => model.sequence_nll(p, None).unwrap().0,
            })
            .sum()
    };
    let mut grads = m.zero_grads();
    for (i, p) in pairs.iter().enumerate() {
        match dropout_seed {
            Some(s) => {
                let mut rng = Rng::new(s + i as u64);
                let mut d = Dropout { p: 0.3, rng: &mut rng };
                loss_and_gradients(m, p, Some(&mut d), 1.0, &mut grads).unwrap();
            }
            None => {
                loss_and_gradients(m, p, None, 1.0, &mut grads).unwrap();
            }
        }
    }
    let eps = 1e-5;
    let mut probe = m.clone();
    for k in 0..slot::COUNT {
        for idx in 0..m.params()[k].value.len() {
            let orig = m.params()[k].value.data()[idx];
            probe.params_mut()[k].value.data_mut()[idx] = orig + eps;
            let up = loss_of(&probe);
            probe.params_mut()[k].value.data_mut()[idx] = orig - eps;
            let down = loss_of(&probe);
            probe.params_mut()[k].value.data_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * eps);
            let an = grads[k].data()[idx];
            // Below 1e-5 the difference quotient is dominated by roundoff
            // in the loss itself, so the denominator is floored there.
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-5);
            assert!(
                rel < 1e-4,
                "{}[{idx}]: analytic {an} vs numeric {fd}",
                m.params()[k].name
            );
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let m = random_model(21);
    let pairs = vec![
        pair(&[3, 4, 5, Vocabulary::EOS], &[4, 3, Vocabulary::EOS]),
        pair(&[Vocabulary::NULL, Vocabulary::EOS], &[5, 5, 2, Vocabulary::EOS]),
    ];
    finite_difference_check(&m, &pairs, None);
}

#[test]
fn gradients_match_finite_differences_with_dropout() {
    let m = random_model(22);
    let pairs = vec![pair(&[6, 2, Vocabulary::EOS], &[3, 4, 2, Vocabulary::EOS])];
    finite_difference_check(&m, &pairs, Some(99));
}

