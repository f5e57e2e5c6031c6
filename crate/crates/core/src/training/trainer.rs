use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::losses::{loss_discriminator, loss_generator_edgan, loss_wgan, mse};
use super::penalty::{gradient_penalty, DiscriminatorCritic, PenaltyMode};
use crate::autodiff::{adam_step, AdamConfig, AdamState, Graph, Mode, Module, RunRng, Tensor, Var};
use crate::dataset::{Dataset, Split, WindowSample};
use crate::error::{Error, Result};
use crate::models::{
    assemble_disc_input, context_channels, encode_checkpoint, Batch, DataShape, Discriminator, Generator,
    ModelConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Edgan,
    BasicGan,
    WganGp,
    Dragan,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Edgan, Variant::Dragan, Variant::WganGp, Variant::BasicGan];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Edgan => "edgan",
            Variant::BasicGan => "basic_gan",
            Variant::WganGp => "wgan_gp",
            Variant::Dragan => "dragan",
        }
    }

    pub fn default_critic_steps(self) -> usize {
        match self {
            Variant::Edgan | Variant::BasicGan => 1,
            Variant::WganGp | Variant::Dragan => 5,
        }
    }

    pub fn has_penalty(self) -> bool {
        matches!(self, Variant::WganGp | Variant::Dragan)
    }

    /// Whether the generator takes a noise vector.
    pub fn uses_noise(self) -> bool {
        self == Variant::BasicGan
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{}' (edgan, basic_gan, wgan_gp, dragan)", s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Penalty weight λ.
    pub penalty_weight: f64,
    /// Discriminator updates per generator update; the variant default when unset.
    pub critic_steps: Option<usize>,
    /// Supervised weight μ on the generator's MSE term.
    pub supervised_weight: f64,
    /// Noise scale `c` of the around-real penalty.
    pub dragan_scale: f64,
    pub seed: u64,
    /// Keep a checkpoint every this many epochs (0: final only).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Edgan,
            epochs: 1000,
            batch_size: 32,
            lr_generator: 1e-4,
            lr_discriminator: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            penalty_weight: 10.0,
            critic_steps: None,
            supervised_weight: 1.0,
            dragan_scale: 0.5,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        TrainConfig {
            variant,
            ..Default::default()
        }
    }

    pub fn critic_steps(&self) -> usize {
        self.critic_steps.unwrap_or_else(|| self.variant.default_critic_steps())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.critic_steps() == 0 {
            return bad("critic steps must be at least 1".into());
        }
        if self.penalty_weight < 0.0 || self.supervised_weight < 0.0 {
            return bad(format!(
                "penalty weight {} and supervised weight {} must be non-negative",
                self.penalty_weight, self.supervised_weight
            ));
        }
        if self.lr_generator < 0.0 || self.lr_discriminator < 0.0 {
            return bad("learning rates must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas ({}, {}) must lie in [0, 1)", self.beta1, self.beta2));
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    fn penalty_mode(&self) -> Option<PenaltyMode> {
        match self.variant {
            Variant::WganGp => Some(PenaltyMode::Interpolated),
            Variant::Dragan => Some(PenaltyMode::AroundReal { scale: self.dragan_scale }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub jg: f64,
    /// Mean discriminator loss over the critic steps, penalty included.
    pub jd: f64,
    pub penalty: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub jg: f64,
    pub jd: f64,
    pub val_mse: f64,
    pub penalty: Option<f64>,
    pub secs: f64,
}

impl EpochRecord {
    /// `key=value` log line without wall-clock time, so logs of equal runs
    /// are byte-identical.
    pub fn log_line(&self) -> String {
        let mut s = format!("epoch={} jg={} jd={} val_mse={}", self.epoch, self.jg, self.jd, self.val_mse);
        if let Some(p) = self.penalty {
            s.push_str(&format!(" penalty={}", p));
        }
        s
    }

    pub fn timing_line(&self) -> String {
        format!("epoch={} secs={:.6}", self.epoch, self.secs)
    }

    /// Parses a line produced by [`EpochRecord::log_line`]; `secs` is zero.
    pub fn parse_log_line(line: &str) -> Result<Self> {
        let mut rec = EpochRecord {
            epoch: 0,
            jg: f64::NAN,
            jd: f64::NAN,
            val_mse: f64::NAN,
            penalty: None,
            secs: 0.0,
        };
        let num = |k: &str, v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("log field {}='{}' is not a number", k, v)))
        };
        for pair in line.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("log field '{}' is not key=value", pair)))?;
            match k {
                "epoch" => {
                    rec.epoch = v
                        .parse()
                        .map_err(|_| Error::Format(format!("bad epoch '{}'", v)))?
                }
                "jg" => rec.jg = num(k, v)?,
                "jd" => rec.jd = num(k, v)?,
                "val_mse" => rec.val_mse = num(k, v)?,
                "penalty" => rec.penalty = Some(num(k, v)?),
                "secs" => rec.secs = num(k, v)?,
                other => return Err(Error::Format(format!("unknown log field '{}'", other))),
            }
        }
        if rec.epoch == 0 || rec.jg.is_nan() || rec.jd.is_nan() || rec.val_mse.is_nan() {
            return Err(Error::Format(format!("incomplete log line '{}'", line)));
        }
        Ok(rec)
    }
}

/// `(1 / (N·F)) · Σ ‖y - ŷ‖²` over `samples`, eval mode.
pub fn validate(generator: &Generator, samples: &[&WindowSample], price_column: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("validation needs at least one sample".into()));
    }
    let preds = generator.predict(samples, price_column)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, p) in samples.iter().zip(&preds) {
        for (y, yh) in s.target.iter().zip(p) {
            total += (y - yh).powi(2);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn abort(epoch: usize, batch: usize, term: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::NonFinite { op } => Error::TrainingAborted {
            epoch,
            batch,
            term: format!("{} (in {})", term, op),
        },
        other => other,
    }
}

fn check_finite(epoch: usize, batch: usize, term: &str, grads: &[Tensor], value: f64) -> Result<()> {
    if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::TrainingAborted {
            epoch,
            batch,
            term: term.to_string(),
        });
    }
    Ok(())
}

/// Generator, discriminator, their optimisers and the run's random streams.
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
    pub price_column: usize,
    rng: RunRng,
}

impl Trainer {
    pub fn new(model: &ModelConfig, shape: DataShape, config: TrainConfig, price_column: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = RunRng::new(config.seed);
        let generator = Generator::new(model.generator(shape, config.variant.uses_noise()), &mut rng.init)?;
        let discriminator = Discriminator::new(model.discriminator(shape), &mut rng.init)?;
        Ok(Trainer {
            gen_opt: AdamState::for_module(&generator),
            disc_opt: AdamState::for_module(&discriminator),
            config,
            generator,
            discriminator,
            price_column,
            rng,
        })
    }

    pub fn for_dataset(dataset: &Dataset, model: &ModelConfig, config: TrainConfig) -> Result<Self> {
        Trainer::new(model, DataShape::of(dataset), config, dataset.config.target_column)
    }

    fn noise(&mut self, batch: &Batch) -> Option<Tensor> {
        let n = self.generator.config.noise_dim;
        if n == 0 {
            return None;
        }
        let mut t = Tensor::zeros(&[batch.size, n]);
        for v in t.data_mut() {
            *v = self.rng.noise.normal();
        }
        Some(t)
    }

    fn disc_out(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if self.config.variant == Variant::WganGp {
            self.discriminator.logits(g, x)
        } else {
            self.discriminator.probability(g, x)
        }
    }

    fn critic_step(&mut self, batch: &Batch, context: &Tensor, epoch: usize, index: usize) -> Result<(f64, Option<f64>)> {
        let noise = self.noise(batch);
        let mut g = Graph::new(Mode::Train);
        g.freeze(&self.generator);
        let fake = self.generator.forward(&mut g, batch, noise.as_ref(), &mut self.rng.dropout)?;
        let ctx = g.constant(context.clone())?;
        let target = g.constant(batch.target.clone())?;
        let real_in = assemble_disc_input(&mut g, batch, ctx, target)?;
        let fake_in = assemble_disc_input(&mut g, batch, ctx, fake)?;
        let real_out = self.disc_out(&mut g, real_in)?;
        let fake_out = self.disc_out(&mut g, fake_in)?;
        let loss = if self.config.variant == Variant::WganGp {
            loss_wgan(&mut g, real_out, fake_out)?.0
        } else {
            loss_discriminator(&mut g, real_out, fake_out)?
        };
        g.backward(loss)?;
        let mut value = g.value(loss).item()?;
        let mut grads = g.module_grads(&self.discriminator);

        let mut penalty = None;
        if let Some(mode) = self.config.penalty_mode() {
            let critic = DiscriminatorCritic {
                disc: &self.discriminator,
                probability: self.config.variant == Variant::Dragan,
            };
            let p = gradient_penalty(
                &critic,
                g.value(real_in),
                g.value(fake_in),
                mode,
                self.config.penalty_weight,
                &mut self.rng.penalty,
            )
            .map_err(abort(epoch, index, "penalty"))?;
            for (acc, pg) in grads.iter_mut().zip(&p.grads) {
                for (a, b) in acc.data_mut().iter_mut().zip(pg.data()) {
                    *a += b;
                }
            }
            value += p.value;
            penalty = Some(p.value);
        }
        check_finite(epoch, index, "J_D", &grads, value)?;
        let mut params: Vec<&mut Tensor> = self
            .discriminator
            .parameters_mut()
            .into_iter()
            .map(|p| &mut p.value)
            .collect();
        adam_step(&mut params, &grads, &mut self.disc_opt, &self.config.adam(self.config.lr_discriminator))?;
        Ok((value, penalty))
    }

    fn generator_step(&mut self, batch: &Batch, context: &Tensor, epoch: usize, index: usize) -> Result<f64> {
        let noise = self.noise(batch);
        let mut g = Graph::new(Mode::Train);
        g.freeze(&self.discriminator);
        let fake = self.generator.forward(&mut g, batch, noise.as_ref(), &mut self.rng.dropout)?;
        let ctx = g.constant(context.clone())?;
        let target = g.constant(batch.target.clone())?;
        let fake_in = assemble_disc_input(&mut g, batch, ctx, fake)?;
        let fake_out = self.disc_out(&mut g, fake_in)?;
        let mu = self.config.supervised_weight;
        let loss = if self.config.variant == Variant::WganGp {
            let adv = g.mean(fake_out)?;
            let adv = g.scale(adv, -1.0)?;
            if mu == 0.0 {
                adv
            } else {
                let sup = mse(&mut g, fake, target)?;
                let sup = g.scale(sup, mu)?;
                g.add(adv, sup)?
            }
        } else {
            loss_generator_edgan(&mut g, fake_out, fake, target, mu)?
        };
        g.backward(loss)?;
        let value = g.value(loss).item()?;
        let grads = g.module_grads(&self.generator);
        check_finite(epoch, index, "J_G", &grads, value)?;
        let mut params: Vec<&mut Tensor> = self.generator.parameters_mut().into_iter().map(|p| &mut p.value).collect();
        adam_step(&mut params, &grads, &mut self.gen_opt, &self.config.adam(self.config.lr_generator))?;
        Ok(value)
    }

    /// `critic_steps` discriminator updates, each on a freshly generated
    /// fake batch, then one generator update.
    pub fn train_step(&mut self, batch: &Batch, epoch: usize, index: usize) -> Result<StepLosses> {
        let context = context_channels(batch, self.discriminator.config.include_context)?;
        let steps = self.config.critic_steps();
        let (mut jd, mut pen) = (0.0, 0.0);
        for _ in 0..steps {
            let (d, p) = self
                .critic_step(batch, &context, epoch, index)
                .map_err(abort(epoch, index, "J_D"))?;
            jd += d;
            pen += p.unwrap_or(0.0);
        }
        let jg = self
            .generator_step(batch, &context, epoch, index)
            .map_err(abort(epoch, index, "J_G"))?;
        Ok(StepLosses {
            jg,
            jd: jd / steps as f64,
            penalty: self.config.variant.has_penalty().then(|| pen / steps as f64),
        })
    }

    /// Runs the configured number of epochs. `on_epoch` sees each record
    /// after it is appended.
    pub fn fit(
        &mut self,
        train: &[&WindowSample],
        validation: &[&WindowSample],
        mut on_epoch: impl FnMut(&EpochRecord, &Trainer) -> Result<()>,
    ) -> Result<Vec<EpochRecord>> {
        let bs = self.config.batch_size;
        if train.len() < bs {
            return Err(Error::Config(format!(
                "{} training samples cannot fill one batch of {}",
                train.len(),
                bs
            )));
        }
        if validation.is_empty() {
            return Err(Error::Config("validation split is empty".into()));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut records = Vec::with_capacity(self.config.epochs);
        for epoch in 1..=self.config.epochs {
            let start = Instant::now();
            self.rng.shuffle.shuffle(&mut order);
            let (mut jg, mut jd, mut pen, mut n) = (0.0, 0.0, 0.0, 0usize);
            for (index, chunk) in order.chunks(bs).enumerate() {
                let samples: Vec<&WindowSample> = chunk.iter().map(|&i| train[i]).collect();
                let batch = Batch::from_samples(&samples, self.price_column)?;
                let l = self.train_step(&batch, epoch, index)?;
                jg += l.jg;
                jd += l.jd;
                pen += l.penalty.unwrap_or(0.0);
                n += 1;
            }
            let val_mse = validate(&self.generator, validation, self.price_column)
                .map_err(abort(epoch, n, "val_mse"))?;
            let rec = EpochRecord {
                epoch,
                jg: jg / n as f64,
                jd: jd / n as f64,
                val_mse,
                penalty: self.config.variant.has_penalty().then(|| pen / n as f64),
                secs: start.elapsed().as_secs_f64(),
            };
            if !(rec.jg.is_finite() && rec.jd.is_finite() && rec.val_mse.is_finite()) {
                return Err(Error::TrainingAborted {
                    epoch,
                    batch: n,
                    term: "epoch means".into(),
                });
            }
            records.push(rec);
            on_epoch(records.last().unwrap(), self)?;
        }
        Ok(records)
    }

    pub fn checkpoint(&self, with_optimizer: bool) -> Vec<u8> {
        let opt = with_optimizer.then_some((&self.gen_opt, &self.disc_opt));
        encode_checkpoint(&self.generator, &self.discriminator, opt)
    }
}

/// Result of [`train`].
pub struct TrainOutcome {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub records: Vec<EpochRecord>,
    /// `(epoch, checkpoint bytes)` at the configured cadence, always
    /// including the final epoch.
    pub checkpoints: Vec<(usize, Vec<u8>)>,
}

/// Trains on the dataset's training split, validating on its validation split.
pub fn train(dataset: &Dataset, model: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::for_dataset(dataset, model, config.clone())?;
    let train_set = dataset.samples(Split::Train);
    let val_set = dataset.samples(Split::Validation);
    let every = config.checkpoint_every;
    let last = config.epochs;
    let mut checkpoints = Vec::new();
    let records = trainer.fit(&train_set, &val_set, |rec, t| {
        if rec.epoch == last || (every > 0 && rec.epoch % every == 0) {
            checkpoints.push((rec.epoch, t.checkpoint(true)));
        }
        Ok(())
    })?;
    Ok(TrainOutcome {
        generator: trainer.generator,
        discriminator: trainer.discriminator,
        records,
        checkpoints,
    })
}
