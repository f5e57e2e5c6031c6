//! Checks reverse-mode gradients against central differences, first for a
//! hand-written expression, then for every parameter of a small generator.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use chrono::NaiveDate;
use edgan::autodiff::{grad_check, grad_check_module, RngState, Stream, Tensor};
use edgan::dataset::WindowSample;
use edgan::models::{Batch, Generator, GeneratorConfig};

fn random(shape: &[usize], rng: &mut RngState) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.uniform_range(-1.0, 1.0);
    }
    t
}

fn main() -> edgan::Result<()> {
    let mut rng = RngState::new(42, Stream::Test);

    // f(x, w) = sum(tanh(x w) * sigmoid(x w))
    let inputs = [random(&[4, 3], &mut rng), random(&[3, 2], &mut rng)];
    let rep = grad_check(
        |g, v| {
            let z = g.matmul(v[0], v[1])?;
            let a = g.tanh(z)?;
            let b = g.sigmoid(z)?;
            let p = g.mul(a, b)?;
            g.sum(p)
        },
        &inputs,
        1e-5,
    )?;
    println!(
        "expression: {} entries, max rel error {:.2e}",
        rep.entries, rep.max_rel_error
    );

    let cfg = GeneratorConfig {
        encoder_hidden: 8,
        decoder_hidden: 8,
        temporal_hidden: 4,
        dropout: 0.0,
        ..GeneratorConfig::for_data(3, 1, 6, 2, 2)
    };
    let mut gen = Generator::new(cfg.clone(), &mut rng)?;
    let day = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
    let samples: Vec<WindowSample> = (0..4)
        .map(|_| WindowSample {
            lookback: random(&[3, 6], &mut rng),
            future_covariates: random(&[1, 2], &mut rng),
            static_vector: vec![1.0, 0.0],
            target: vec![0.0],
            anchor_date: day,
        })
        .collect();
    let refs: Vec<&WindowSample> = samples.iter().collect();
    let batch = Batch::from_samples(&refs, 3)?;
    let mut dropout = RngState::new(0, Stream::Dropout);
    let rep = grad_check_module(
        &mut gen,
        |m, g| {
            let y = m.forward(g, &batch, None, &mut dropout)?;
            let sq = g.mul(y, y)?;
            g.sum(sq)
        },
        1e-5,
    )?;
    println!(
        "generator: {} entries, {} skipped at ReLU kinks, max rel error {:.2e}",
        rep.entries,
        rep.skipped,
        rep.max_rel_error
    );
    Ok(())
}
