mod common;

use std::f64::consts::LN_2;

use edgan::autodiff::{Graph, Mode, Module, RngState, Stream, Tensor};
use edgan::models::Discriminator;
use edgan::training::{
    gradient_penalty, input_gradients, loss_discriminator, loss_generator_edgan, loss_wgan, penalty_at, Critic,
    DiscriminatorCritic, LinearCritic, PenaltyMode,
};
use proptest::prelude::*;

fn eval<F>(f: F) -> f64
where
    F: FnOnce(&mut Graph) -> edgan::Result<edgan::autodiff::Var>,
{
    let mut g = Graph::new(Mode::Eval);
    let v = f(&mut g).unwrap();
    g.value(v).item().unwrap()
}

fn vec_var(g: &mut Graph, x: &[f64]) -> edgan::autodiff::Var {
    g.constant(Tensor::vector(x.to_vec())).unwrap()
}

fn batch(b: usize, n: usize, seed: u64) -> Tensor {
    let mut r = common::rng(seed);
    common::uniform(&[b, n], -1.0, 1.0, &mut r)
}

#[test]
fn equilibrium_anchors() {
    for b in [1, 2, 7, 64] {
        let half = vec![0.5; b];
        let jd = eval(|g| {
            let p = vec_var(g, &half);
            loss_discriminator(g, p, p)
        });
        let jg = eval(|g| {
            let p = vec_var(g, &half);
            loss_generator_edgan(g, p, p, p, 1.0)
        });
        assert!((jd - 2.0 * LN_2).abs() < 1e-12, "{}", jd);
        assert!((jg - LN_2).abs() < 1e-12, "{}", jg);
    }
}

#[test]
fn unit_linear_critic_penalty_is_zero() {
    let dirs: [&[f64]; 4] = [&[1.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.6, 0.8, 0.0], &[0.0, 0.6, -0.8]];
    for (i, w) in dirs.iter().enumerate() {
        let c = LinearCritic::new(w.to_vec());
        for mode in [PenaltyMode::Interpolated, PenaltyMode::AroundReal { scale: 0.5 }] {
            let mut rng = RngState::new(i as u64, Stream::Penalty);
            let p = gradient_penalty(&c, &batch(6, 3, 1), &batch(6, 3, 2), mode, 10.0, &mut rng).unwrap();
            assert_eq!(p.value, 0.0);
        }
    }
}

#[test]
fn scaled_linear_critic_penalty() {
    for c in [0.0, 0.25, 2.0, 3.5, 10.0] {
        let critic = LinearCritic::new(vec![0.6 * c, 0.8 * c, 0.0]);
        let mut rng = RngState::new(3, Stream::Penalty);
        let p = gradient_penalty(&critic, &batch(5, 3, 4), &batch(5, 3, 5), PenaltyMode::Interpolated, 10.0, &mut rng)
            .unwrap();
        let want = 10.0 * (c - 1.0) * (c - 1.0);
        assert!((p.value - want).abs() <= 1e-12 * want.max(1.0), "c={}: {} vs {}", c, p.value, want);
    }
}

fn small_disc(seed: u64) -> (Discriminator, Tensor) {
    let cfg = common::small_discriminator(2);
    let mut r = common::rng(seed);
    let mut d = Discriminator::new(cfg.clone(), &mut r).unwrap();
    common::sweep::jitter(&mut d, &mut r);
    let x = common::uniform(&[4, cfg.sequence, cfg.channels], -1.0, 1.0, &mut r);
    (d, x)
}

#[test]
fn input_gradients_match_finite_differences() {
    for seed in 0..5 {
        let (d, x) = small_disc(seed);
        let critic = DiscriminatorCritic { disc: &d, probability: false };
        let analytic = input_gradients(&critic, &x).unwrap();
        let total = |t: &Tensor| {
            let mut g = Graph::new(Mode::Eval);
            let v = g.constant(t.clone()).unwrap();
            let s = critic.score(&mut g, v).unwrap();
            let s = g.sum(s).unwrap();
            g.value(s).item().unwrap()
        };
        let h = 1e-6;
        for i in 0..x.numel() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[i] += h;
            xm.data_mut()[i] -= h;
            let fd = (total(&xp) - total(&xm)) / (2.0 * h);
            let a = analytic.data()[i];
            assert!((a - fd).abs() <= 1e-6 * a.abs().max(1.0), "seed {} entry {}: {} vs {}", seed, i, a, fd);
        }
    }
}

/// Central difference of the penalty value in every critic parameter.
fn numeric_penalty_grads(d: &mut Discriminator, points: &Tensor, lambda: f64, h: f64) -> Vec<Tensor> {
    let shapes: Vec<Vec<usize>> = d.parameters().iter().map(|p| p.shape().to_vec()).collect();
    let mut out = Vec::new();
    for (k, shape) in shapes.iter().enumerate() {
        let mut t = Tensor::zeros(shape);
        for i in 0..t.numel() {
            let mut value_at = |delta: f64| {
                d.parameters_mut()[k].value.data_mut()[i] += delta;
                let v = penalty_at(&DiscriminatorCritic { disc: d, probability: false }, points, lambda)
                    .unwrap()
                    .value;
                d.parameters_mut()[k].value.data_mut()[i] -= delta;
                v
            };
            t.data_mut()[i] = (value_at(h) - value_at(-h)) / (2.0 * h);
        }
        out.push(t);
    }
    out
}

#[test]
fn penalty_parameter_gradient_matches_numeric_derivative() {
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let (mut d, x) = small_disc(100 + seed);
        let analytic = penalty_at(&DiscriminatorCritic { disc: &d, probability: false }, &x, 10.0).unwrap();
        let numeric = numeric_penalty_grads(&mut d, &x, 10.0, 1e-6);
        let scale = numeric
            .iter()
            .flat_map(|t| t.data())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for (a, n) in analytic.grads.iter().zip(&numeric) {
            worst = worst.max(a.max_abs_diff(n) / scale);
        }
    }
    assert!(worst < 1e-4, "penalty gradient relative error {}", worst);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_match_closed_forms(
        real in prop::collection::vec(0.01f64..0.99, 1..12),
        seed in 0u64..1000,
        mu in 0.0f64..5.0,
    ) {
        let n = real.len();
        let mut r = common::rng(seed);
        let fake: Vec<f64> = (0..n).map(|_| r.uniform_range(0.01, 0.99)).collect();
        let y: Vec<f64> = (0..n).map(|_| r.uniform_range(-1.0, 1.0)).collect();
        let yhat: Vec<f64> = (0..n).map(|_| r.uniform_range(-1.0, 1.0)).collect();
        let nf = n as f64;

        let jd = eval(|g| {
            let (a, b) = (vec_var(g, &real), vec_var(g, &fake));
            loss_discriminator(g, a, b)
        });
        let want_jd = -real.iter().map(|p| p.ln()).sum::<f64>() / nf - fake.iter().map(|p| (1.0 - p).ln()).sum::<f64>() / nf;
        prop_assert!((jd - want_jd).abs() < 1e-12);

        let jg = eval(|g| {
            let (d, p, t) = (vec_var(g, &fake), vec_var(g, &yhat), vec_var(g, &y));
            loss_generator_edgan(g, d, p, t, mu)
        });
        let mse = y.iter().zip(&yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / nf;
        let want_jg = -fake.iter().map(|p| p.ln()).sum::<f64>() / nf + mu * mse;
        prop_assert!((jg - want_jg).abs() < 1e-12);

        let (critic, gen) = {
            let mut g = Graph::new(Mode::Eval);
            let (a, b) = (vec_var(&mut g, &real), vec_var(&mut g, &fake));
            let (c, gl) = loss_wgan(&mut g, a, b).unwrap();
            (g.value(c).item().unwrap(), g.value(gl).item().unwrap())
        };
        let (mr, mf) = (real.iter().sum::<f64>() / nf, fake.iter().sum::<f64>() / nf);
        prop_assert!((critic - (mf - mr)).abs() < 1e-12);
        prop_assert!((gen + mf).abs() < 1e-12);
    }
}
