use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cef_core::bijective::{ActNorm, BijectiveLayer};
use cef_core::conformal::{Padding, Sct, Translation};
use cef_core::data::{sample_sphere_dataset, SphereDatasetConfig};
use cef_core::flow::CefModel;
use cef_core::par::ExecPolicy;
use cef_core::train::{batch_loss_and_grad, GradTarget, LossWeights, TrainConfig, Trainer};
use cef_core::verify::{tiny_data, tiny_model};
use cef_core::CefError;

fn setup(seed: u64) -> (CefModel, cef_core::linalg::Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = tiny_model(&mut rng);
    let data = tiny_data(&model, 40, &mut rng).unwrap();
    (model, data)
}

fn small_config() -> TrainConfig {
    TrainConfig { warmup_epochs: 2, main_epochs: 2, finetune_epochs: 2, batch_size: 10, ..Default::default() }
}

#[test]
fn sequential_epoch_leaves_g_alone() {
    let (mut model, data) = setup(1);
    let g0 = model.g_params();
    let h0 = model.h_params();
    let mut t = Trainer::new(small_config(), &model).unwrap();
    t.sequential_epoch(&mut model, &data).unwrap();
    assert_eq!(model.g_params(), g0);
    assert_ne!(model.h_params(), h0);
}

#[test]
fn warmup_epoch_leaves_h_alone() {
    let (mut model, data) = setup(2);
    let h0 = model.h_params();
    let g0 = model.g_params();
    let mut t = Trainer::new(small_config(), &model).unwrap();
    let m = t.warmup_epoch(&mut model, &data).unwrap();
    assert_eq!(model.h_params(), h0);
    assert_ne!(model.g_params(), g0);
    assert!(m.nll.is_nan());
}

#[test]
fn joint_epoch_moves_both() {
    let (mut model, data) = setup(3);
    let (g0, h0) = (model.g_params(), model.h_params());
    let mut t = Trainer::new(small_config(), &model).unwrap();
    t.joint_epoch(&mut model, &data).unwrap();
    assert_ne!(model.g_params(), g0);
    assert_ne!(model.h_params(), h0);
}

#[test]
fn zero_alpha_is_scaled_likelihood() {
    let (model, data) = setup(4);
    let beta = 0.37;
    let joint = batch_loss_and_grad(&model, &data, None, LossWeights { alpha: 0.0, beta_ll: beta }, GradTarget::Both, ExecPolicy::Sequential).unwrap();
    let seq = batch_loss_and_grad(&model, &data, None, LossWeights { alpha: 0.0, beta_ll: 1.0 }, GradTarget::Both, ExecPolicy::Sequential).unwrap();
    for (a, b) in joint.grad_h.iter().zip(&seq.grad_h) {
        assert!((a - beta * b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    for (a, b) in joint.grad_g.iter().zip(&seq.grad_g) {
        assert!((a - beta * b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn zero_beta_matches_warmup_exactly() {
    let (model, data) = setup(5);
    let w = LossWeights { alpha: 1.0, beta_ll: 0.0 };
    let both = batch_loss_and_grad(&model, &data, None, w, GradTarget::Both, ExecPolicy::Sequential).unwrap();
    let warm = batch_loss_and_grad(&model, &data, None, w, GradTarget::Embedding, ExecPolicy::Sequential).unwrap();
    assert_eq!(both.grad_g, warm.grad_g);
    assert!(both.grad_h.iter().all(|&v| v == 0.0));
    assert!(warm.grad_h.is_empty());
}

#[test]
fn loss_decomposes_into_reported_terms() {
    let (model, data) = setup(6);
    let w = LossWeights { alpha: 3.0, beta_ll: 0.25 };
    let ev = batch_loss_and_grad(&model, &data, None, w, GradTarget::Both, ExecPolicy::Sequential).unwrap();
    let reports: Vec<_> = model.log_prob_batch(&data, ExecPolicy::Sequential).into_iter().map(Result::unwrap).collect();
    let n = reports.len() as f64;
    let nll = -reports.iter().map(|r| r.log_prob).sum::<f64>() / n;
    let recon = reports.iter().map(|r| r.reconstruction_sq).sum::<f64>() / n;
    assert!((ev.nll - nll).abs() < 1e-12 * nll.abs().max(1.0));
    assert!((ev.recon - recon).abs() < 1e-12 * recon.abs().max(1e-3));
    assert!((ev.total - (w.beta_ll * ev.nll + w.alpha * ev.recon)).abs() < 1e-12 * ev.total.abs());
}

#[test]
fn fixed_seed_gives_identical_metrics_under_both_policies() {
    let run = |policy| {
        let (mut model, data) = setup(7);
        let mut t = Trainer::new(small_config(), &model).unwrap().with_policy(policy);
        let lines: Vec<String> = t.fit(&mut model, &data, |_| {}).unwrap().iter().map(|m| m.deterministic_line()).collect();
        (lines, model.g_params(), model.h_params())
    };
    let a = run(ExecPolicy::Parallel);
    let b = run(ExecPolicy::Parallel);
    let c = run(ExecPolicy::Sequential);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn warmup_reduces_reconstruction_on_the_sphere() {
    let data = sample_sphere_dataset(&SphereDatasetConfig { count: 200, seed: 1, ..Default::default() }).unwrap();
    let g = vec![
        Padding::new(2, 3).unwrap().into(),
        Sct::zeros(3).into(),
        Translation::zeros(3).into(),
    ];
    let mut model = CefModel::new(2, g, vec![]).unwrap();
    let cfg = TrainConfig { warmup_epochs: 20, main_epochs: 0, finetune_epochs: 0, learning_rate: 1e-2, batch_size: 50, ..Default::default() };
    let mut t = Trainer::new(cfg, &model).unwrap();
    let m = t.fit(&mut model, &data, |_| {}).unwrap();
    assert!(m.last().unwrap().recon < 0.75 * m[0].recon, "{} → {}", m[0].recon, m.last().unwrap().recon);
}

#[test]
fn zero_epochs_keep_initial_parameters() {
    let (mut model, data) = setup(8);
    let (g0, h0) = (model.g_params(), model.h_params());
    let cfg = TrainConfig { warmup_epochs: 0, main_epochs: 0, finetune_epochs: 0, ..Default::default() };
    let out = Trainer::new(cfg, &model).unwrap().fit(&mut model, &data, |_| {}).unwrap();
    assert!(out.is_empty());
    assert_eq!((model.g_params(), model.h_params()), (g0, h0));
}

#[test]
fn actnorm_is_initialized_before_likelihood_epochs() {
    let (mut model, data) = setup(9);
    model.h.insert(0, BijectiveLayer::from(ActNorm::new(2, 1)));
    assert!(matches!(model.log_prob(data.row(0)), Err(CefError::State(_))));
    let mut t = Trainer::new(small_config(), &model).unwrap();
    t.sequential_epoch(&mut model, &data).unwrap();
    assert!(!model.has_uninitialized_actnorm());
    model.log_prob(data.row(0)).unwrap();
}
