#![allow(dead_code)]

use chrono::NaiveDate;
use edgan::autodiff::{Graph, RngState, Stream, Tensor, Var};
use edgan::dataset::{synthesize, Dataset, DatasetConfig, SynthKind, SynthParams, WindowSample};
use edgan::indicators::IndicatorConfig;
use edgan::models::{DiscriminatorConfig, GeneratorConfig, ModelConfig};

pub fn rng(seed: u64) -> RngState {
    RngState::new(seed, Stream::Test)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, r: &mut RngState) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = r.uniform_range(lo, hi);
    }
    t
}

/// `sum(x * w)` for a fixed random `w`, so every output entry carries a
/// distinct weight in the scalar under test.
pub fn weighted_sum(g: &mut Graph, x: Var, w: &Tensor) -> edgan::Result<Var> {
    let w = g.constant(w.clone())?;
    let p = g.mul(x, w)?;
    g.sum(p)
}

pub fn small_generator(static_width: usize) -> GeneratorConfig {
    GeneratorConfig {
        projection: 3,
        encoder_hidden: 6,
        decoder_hidden: 5,
        decoder_output: 4,
        temporal_hidden: 3,
        dropout: 0.0,
        ..GeneratorConfig::for_data(3, 2, 6, 2, static_width)
    }
}

pub fn small_discriminator(static_width: usize) -> DiscriminatorConfig {
    DiscriminatorConfig {
        conv_channels: vec![3, 4],
        mlp_hidden: vec![5, 4],
        ..DiscriminatorConfig::for_data(3, 2, 6, static_width, true)
    }
}

pub fn samples(cfg: &GeneratorConfig, n: usize, seed: u64) -> Vec<WindowSample> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| WindowSample {
            lookback: uniform(&[cfg.lookback, cfg.features], -1.0, 1.0, &mut r),
            future_covariates: uniform(&[cfg.horizon, cfg.future_width], -1.0, 1.0, &mut r),
            static_vector: uniform(&[cfg.static_width], -1.0, 1.0, &mut r).into_data(),
            target: uniform(&[cfg.horizon], -1.0, 1.0, &mut r).into_data(),
            anchor_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64),
        })
        .collect()
}

/// Compact architecture used by the multi-run tests.
pub fn compact_model() -> ModelConfig {
    ModelConfig {
        encoder_hidden: 16,
        decoder_hidden: 16,
        temporal_hidden: 8,
        conv_channels: vec![8, 8],
        mlp_hidden: vec![16, 8],
        ..ModelConfig::default()
    }
}

pub fn synthetic_dataset(kind: SynthKind, length: usize, seed: u64) -> Dataset {
    let series = synthesize(kind, &SynthParams::default(), length, seed).unwrap();
    Dataset::build(&[series], &IndicatorConfig::default(), &DatasetConfig::default()).unwrap()
}

pub mod oracles;

pub mod sweep {
    use super::*;
    use edgan::autodiff::{grad_check, grad_check_module, GradCheckReport, Module};
    use edgan::models::{BlockShape, Discriminator, Generator, ResidualBlock, Batch, LAYER_NORM_EPS};

    pub const STEP: f64 = 1e-4;
    /// Finer step for long sweeps, where O(h²) truncation at 1e-4 can
    /// reach the single-layer tolerance on rare seeds.
    pub const FINE_STEP: f64 = 2e-5;

    /// Worst relative error of one named check over a seed range.
    #[derive(Debug)]
    pub struct Worst {
        pub name: &'static str,
        pub composite: bool,
        pub max_rel_error: f64,
        pub seed: u64,
        pub entries: usize,
        pub skipped: usize,
    }

    fn track(out: &mut Vec<Worst>, name: &'static str, composite: bool, seed: u64, rep: &GradCheckReport) {
        let w = match out.iter_mut().position(|w| w.name == name) {
            Some(i) => &mut out[i],
            None => {
                out.push(Worst {
                    name,
                    composite,
                    max_rel_error: 0.0,
                    seed,
                    entries: 0,
                    skipped: 0,
                });
                out.last_mut().unwrap()
            }
        };
        if rep.max_rel_error > w.max_rel_error {
            w.max_rel_error = rep.max_rel_error;
            w.seed = seed;
        }
        w.entries += rep.entries;
        w.skipped += rep.skipped;
    }

    type Layer = fn(&mut Graph, &[Var], &Tensor) -> edgan::Result<Var>;

    fn layers() -> Vec<(&'static str, Vec<Vec<usize>>, (f64, f64), Vec<usize>, Layer)> {
        vec![
            ("matmul", vec![vec![3, 4], vec![4, 2]], (-1.0, 1.0), vec![3, 2], |g, x, w| {
                let y = g.matmul(x[0], x[1])?;
                weighted_sum(g, y, w)
            }),
            ("add", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), vec![2, 3], |g, x, w| {
                let y = g.add(x[0], x[1])?;
                weighted_sum(g, y, w)
            }),
            ("sub", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), vec![2, 3], |g, x, w| {
                let y = g.sub(x[0], x[1])?;
                weighted_sum(g, y, w)
            }),
            ("mul", vec![vec![2, 3], vec![2, 3]], (-1.0, 1.0), vec![2, 3], |g, x, w| {
                let y = g.mul(x[0], x[1])?;
                weighted_sum(g, y, w)
            }),
            ("relu", vec![vec![4, 3]], (-1.0, 1.0), vec![4, 3], |g, x, w| {
                let y = g.relu(x[0])?;
                weighted_sum(g, y, w)
            }),
            ("sigmoid", vec![vec![4, 3]], (-3.0, 3.0), vec![4, 3], |g, x, w| {
                let y = g.sigmoid(x[0])?;
                weighted_sum(g, y, w)
            }),
            ("tanh", vec![vec![4, 3]], (-2.0, 2.0), vec![4, 3], |g, x, w| {
                let y = g.tanh(x[0])?;
                weighted_sum(g, y, w)
            }),
            ("log", vec![vec![4, 3]], (0.2, 3.0), vec![4, 3], |g, x, w| {
                let y = g.log(x[0])?;
                weighted_sum(g, y, w)
            }),
            ("add_bias", vec![vec![3, 4], vec![4]], (-1.0, 1.0), vec![3, 4], |g, x, w| {
                let y = g.add_bias(x[0], x[1], 1)?;
                weighted_sum(g, y, w)
            }),
            ("conv1d", vec![vec![2, 3, 6], vec![4, 3, 2]], (-1.0, 1.0), vec![2, 4, 5], |g, x, w| {
                let y = g.conv1d(x[0], x[1], 1)?;
                weighted_sum(g, y, w)
            }),
            ("layer_norm", vec![vec![3, 5], vec![5], vec![5]], (-1.0, 1.0), vec![3, 5], |g, x, w| {
                let y = g.layer_norm(x[0], x[1], x[2], LAYER_NORM_EPS)?;
                weighted_sum(g, y, w)
            }),
            ("concat_slice_reshape", vec![vec![2, 3], vec![2, 2]], (-1.0, 1.0), vec![7, 2], |g, x, w| {
                let c = g.concat(&[x[0], x[1]], 1)?;
                let s = g.slice(c, 1, 1, 5)?;
                let t = g.swap_last(s)?;
                let r = g.reshape(t, &[2, 4])?;
                let back = g.concat(&[r, x[0]], 1)?;
                let y = g.reshape(back, &[7, 2])?;
                weighted_sum(g, y, w)
            }),
            ("mean_axis", vec![vec![3, 4]], (-1.0, 1.0), vec![3], |g, x, w| {
                let y = g.reduce(edgan::autodiff::Reduce::Mean, x[0], Some(1))?;
                weighted_sum(g, y, w)
            }),
        ]
    }

    /// Moves every parameter off its initial value (zero biases put ReLU
    /// units exactly on their kink).
    pub fn jitter(m: &mut dyn Module, r: &mut RngState) {
        for p in m.parameters_mut() {
            for v in p.value.data_mut() {
                *v += r.uniform_range(-0.2, 0.2);
            }
        }
    }

    /// Gradient checks of every layer and both full networks over `seeds`.
    pub fn run(seeds: std::ops::Range<u64>, step: f64) -> edgan::Result<Vec<Worst>> {
        let mut out = Vec::new();
        for seed in seeds {
            let mut r = rng(seed);
            for (name, shapes, (lo, hi), out_shape, f) in layers() {
                let inputs: Vec<Tensor> = shapes.iter().map(|s| uniform(s, lo, hi, &mut r)).collect();
                let w = uniform(&out_shape, -1.0, 1.0, &mut r);
                let rep = grad_check(|g, x| f(g, x, &w), &inputs, step)?;
                track(&mut out, name, false, seed, &rep);
            }

            for (name, gated) in [("residual_block", false), ("gated_residual_block", true)] {
                let shape = BlockShape {
                    input: 4,
                    hidden: 6,
                    output: 3,
                    dropout: 0.0,
                    gated,
                };
                let mut block = ResidualBlock::new(shape, &mut r)?;
                jitter(&mut block, &mut r);
                let x = uniform(&[5, 4], -1.0, 1.0, &mut r);
                let w = uniform(&[5, 3], -1.0, 1.0, &mut r);
                let mut fr = RngState::new(seed, Stream::Dropout);
                let rep = grad_check_module(
                    &mut block,
                    |m, g| {
                        let xv = g.constant(x.clone())?;
                        let y = m.forward(g, xv, &mut fr)?;
                        weighted_sum(g, y, &w)
                    },
                    step,
                )?;
                track(&mut out, name, false, seed, &rep);
            }

            let gcfg = small_generator(2);
            let mut gen = Generator::new(gcfg.clone(), &mut r)?;
            jitter(&mut gen, &mut r);
            let data = samples(&gcfg, 3, seed + 1000);
            let refs: Vec<&WindowSample> = data.iter().collect();
            let batch = Batch::from_samples(&refs, 0)?;
            let w = uniform(&[3, gcfg.horizon], -1.0, 1.0, &mut r);
            let mut fr = RngState::new(seed, Stream::Dropout);
            let rep = grad_check_module(
                &mut gen,
                |m, g| {
                    let y = m.forward(g, &batch, None, &mut fr)?;
                    weighted_sum(g, y, &w)
                },
                step,
            )?;
            track(&mut out, "generator", true, seed, &rep);

            let dcfg = small_discriminator(2);
            let mut disc = Discriminator::new(dcfg.clone(), &mut r)?;
            jitter(&mut disc, &mut r);
            let x = uniform(&[3, dcfg.sequence, dcfg.channels], -1.0, 1.0, &mut r);
            let w = uniform(&[3], -1.0, 1.0, &mut r);
            let rep = grad_check_module(
                &mut disc,
                |m, g| {
                    let xv = g.constant(x.clone())?;
                    let y = m.logits(g, xv)?;
                    weighted_sum(g, y, &w)
                },
                step,
            )?;
            track(&mut out, "discriminator_params", true, seed, &rep);
            let rep = grad_check(
                |g, xs| {
                    let y = disc.logits(g, xs[0])?;
                    weighted_sum(g, y, &w)
                },
                std::slice::from_ref(&x),
                step,
            )?;
            track(&mut out, "discriminator_input", true, seed, &rep);
        }
        Ok(out)
    }
}
