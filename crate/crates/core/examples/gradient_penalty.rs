//! Gradient penalties on linear critics, where the answer is known in
//! closed form, and on a discriminator in both sampling modes.
//!
//! ```text
//! cargo run --example gradient_penalty
//! ```

use edgan::autodiff::{RngState, Stream, Tensor};
use edgan::models::{Discriminator, DiscriminatorConfig};
use edgan::training::{gradient_penalty, DiscriminatorCritic, LinearCritic, PenaltyMode};

fn batch(b: usize, shape: &[usize], rng: &mut RngState) -> Tensor {
    let mut full = vec![b];
    full.extend_from_slice(shape);
    let mut t = Tensor::zeros(&full);
    for v in t.data_mut() {
        *v = rng.normal();
    }
    t
}

fn main() -> edgan::Result<()> {
    let mut rng = RngState::new(5, Stream::Penalty);
    let (real, fake) = (batch(8, &[3], &mut rng), batch(8, &[3], &mut rng));
    for c in [1.0, 0.5, 2.0] {
        let critic = LinearCritic::new(vec![0.6 * c, 0.8 * c, 0.0]);
        let p = gradient_penalty(&critic, &real, &fake, PenaltyMode::Interpolated, 10.0, &mut rng)?;
        println!(
            "linear critic |w| = {}: penalty {:.6} (10(c-1)^2 = {:.6}), dP/dw {:?}",
            c,
            p.value,
            10.0 * (c - 1.0) * (c - 1.0),
            p.grads[0].data()
        );
    }

    let cfg = DiscriminatorConfig::for_data(3, 1, 14, 2, true);
    let disc = Discriminator::new(cfg.clone(), &mut RngState::new(1, Stream::Init))?;
    let shape = [cfg.sequence, cfg.channels];
    let (real, fake) = (batch(16, &shape, &mut rng), batch(16, &shape, &mut rng));
    let modes = [
        ("wgan_gp", PenaltyMode::Interpolated, false),
        ("dragan", PenaltyMode::AroundReal { scale: 0.5 }, true),
    ];
    for (name, mode, probability) in modes {
        let critic = DiscriminatorCritic { disc: &disc, probability };
        let p = gradient_penalty(&critic, &real, &fake, mode, 10.0, &mut rng)?;
        let mean_norm = p.grad_norms.iter().sum::<f64>() / p.grad_norms.len() as f64;
        let grad_size: f64 = p.grads.iter().flat_map(|t| t.data()).map(|v| v * v).sum::<f64>().sqrt();
        println!(
            "{:8} penalty {:.4}, mean |grad_x D| {:.4}, |dP/dtheta| {:.4}",
            name, p.value, mean_norm, grad_size
        );
    }
    Ok(())
}
