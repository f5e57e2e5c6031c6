use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

fn check_nonempty(g: &Graph, v: Var, what: &str) -> Result<()> {
    if g.value(v).numel() == 0 {
        return Err(Error::Contract(format!("{}: empty batch", what)));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn mse(g: &mut Graph, prediction: Var, target: Var) -> Result<Var> {
    check_nonempty(g, prediction, "mse")?;
    let d = g.sub(prediction, target)?;
    let sq = g.mul(d, d)?;
    g.mean(sq)
}

/// `-mean(log d_fake) + μ · MSE(ŷ, y)`.
pub fn loss_generator_edgan(g: &mut Graph, d_fake: Var, prediction: Var, target: Var, mu: f64) -> Result<Var> {
    check_nonempty(g, d_fake, "generator loss")?;
    let log_d = g.log(d_fake)?;
    let adv = g.mean(log_d)?;
    let adv = g.scale(adv, -1.0)?;
    if mu == 0.0 {
        return Ok(adv);
    }
    let sup = mse(g, prediction, target)?;
    let sup = g.scale(sup, mu)?;
    g.add(adv, sup)
}

/// `-mean(log d_real) - mean(log(1 - d_fake))`.
pub fn loss_discriminator(g: &mut Graph, d_real: Var, d_fake: Var) -> Result<Var> {
    check_nonempty(g, d_real, "discriminator loss")?;
    check_nonempty(g, d_fake, "discriminator loss")?;
    let lr = g.log(d_real)?;
    let lr = g.mean(lr)?;
    let one_minus = g.scale(d_fake, -1.0)?;
    let one_minus = g.add_scalar(one_minus, 1.0)?;
    let lf = g.log(one_minus)?;
    let lf = g.mean(lf)?;
    let total = g.add(lr, lf)?;
    g.scale(total, -1.0)
}

/// Wasserstein losses on raw critic scores: `(mean(fake) - mean(real), -mean(fake))`.
/// The gradient penalty is added by the caller.
pub fn loss_wgan(g: &mut Graph, real_scores: Var, fake_scores: Var) -> Result<(Var, Var)> {
    check_nonempty(g, real_scores, "critic loss")?;
    check_nonempty(g, fake_scores, "critic loss")?;
    let mr = g.mean(real_scores)?;
    let mf = g.mean(fake_scores)?;
    let critic = g.sub(mf, mr)?;
    let gen = g.scale(mf, -1.0)?;
    Ok((critic, gen))
}
