//! One forward pass of the generator and discriminator at the default
//! architecture, then the linear special case: with every parameter but
//! the global residual map zeroed, the forecast is exactly `history · W`.
//!
//! ```text
//! cargo run --example generator_forward
//! ```

use edgan::autodiff::{Graph, Mode, Module, RngState, Stream};
use edgan::dataset::{synthesize, Dataset, DatasetConfig, Split, SynthKind, SynthParams};
use edgan::indicators::IndicatorConfig;
use edgan::models::{assemble_disc_input, context_channels, Batch, DataShape, Discriminator, Generator, ModelConfig};

fn main() -> edgan::Result<()> {
    let series = synthesize(SynthKind::Sine, &SynthParams::default(), 300, 0)?;
    let ds = Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default())?;
    let shape = DataShape::of(&ds);
    let model = ModelConfig::default();
    let mut rng = RngState::new(3, Stream::Init);
    let mut gen = Generator::new(model.generator(shape, false), &mut rng)?;
    let disc = Discriminator::new(model.discriminator(shape), &mut rng)?;
    println!(
        "generator {} parameters, discriminator {} parameters",
        gen.parameter_count(),
        disc.parameter_count()
    );

    let samples = ds.samples(Split::Test);
    let batch = Batch::from_samples(&samples[..4], ds.config.target_column)?;
    let mut g = Graph::new(Mode::Eval);
    let mut dropout = RngState::new(0, Stream::Dropout);
    let y = gen.forward(&mut g, &batch, None, &mut dropout)?;
    let ctx = g.constant(context_channels(&batch, disc.config.include_context)?)?;
    let fake = assemble_disc_input(&mut g, &batch, ctx, y)?;
    let p = disc.probability(&mut g, fake)?;
    println!("input {:?} -> forecast {:?}", samples[0].lookback.shape(), g.value(y).shape());
    println!("discriminator input {:?} -> D {:?}", g.value(fake).shape(), g.value(p).data());

    gen.zero_non_residual();
    let mut g = Graph::new(Mode::Eval);
    let y = gen.forward(&mut g, &batch, None, &mut dropout)?;
    let w = &gen.global_residual.value;
    for i in 0..batch.size {
        let linear: f64 = (0..batch.lookback).map(|j| batch.history.at2(i, j) * w.at2(j, 0)).sum();
        println!("zeroed: forecast {:+.6}  history·W {:+.6}", g.value(y).at2(i, 0), linear);
    }
    Ok(())
}
