use serde::{Deserialize, Serialize};

use super::block::{BlockShape, ResidualBlock};
use crate::autodiff::{glorot, Graph, Mode, Module, Param, RngState, Stream, Tensor, Var};
use crate::dataset::WindowSample;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Lookback `H`.
    pub lookback: usize,
    /// Horizon `F`.
    pub horizon: usize,
    /// Dynamic covariate width `k`.
    pub features: usize,
    /// Trailing columns of each dynamic row that are known in advance.
    /// Zero disables future covariates: projected future rows become zeros.
    pub future_width: usize,
    /// Projected width `k̃`.
    pub projection: usize,
    pub static_width: usize,
    /// Extra noise inputs to the encoder (zero for the deterministic generator).
    pub noise_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    /// Decoded width `q` per horizon step.
    pub decoder_output: usize,
    pub temporal_hidden: usize,
    pub dropout: f64,
    pub gated: bool,
}

impl GeneratorConfig {
    /// Default widths for the given data shape.
    pub fn for_data(lookback: usize, horizon: usize, features: usize, future_width: usize, static_width: usize) -> Self {
        GeneratorConfig {
            lookback,
            horizon,
            features,
            future_width,
            projection: 4.min(features),
            static_width,
            noise_dim: 0,
            encoder_layers: 2,
            decoder_layers: 2,
            encoder_hidden: 64,
            decoder_hidden: 64,
            decoder_output: 8,
            temporal_hidden: 32,
            dropout: 0.1,
            gated: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("generator: {}", m)));
        if self.lookback == 0 || self.horizon == 0 {
            return bad(format!("lookback {} and horizon {} must be positive", self.lookback, self.horizon));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("encoder and decoder need at least one block".into());
        }
        if self.projection == 0 || self.projection > self.features {
            return bad(format!("projection width {} outside 1..={}", self.projection, self.features));
        }
        if self.future_width > self.features {
            return bad(format!("future width {} exceeds feature width {}", self.future_width, self.features));
        }
        if self.decoder_output == 0 || self.encoder_hidden == 0 || self.decoder_hidden == 0 || self.temporal_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} not in [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.lookback + self.horizon
    }

    /// Length of the flattened encoder input.
    pub fn encoder_input(&self) -> usize {
        self.window() * self.projection + self.static_width + self.lookback + self.noise_dim
    }
}

/// Model inputs for a batch of windows, laid out for batched evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub lookback: usize,
    pub horizon: usize,
    /// `[B, H]` historical target prices.
    pub history: Tensor,
    /// `[B·(H+F), k]` dynamic rows, sample-major. Future rows hold zeros
    /// except for the trailing known-in-advance columns.
    pub dynamic: Tensor,
    /// `[B, S]`.
    pub statics: Tensor,
    /// `[B, F]`.
    pub target: Tensor,
}

impl Batch {
    pub fn from_samples(samples: &[&WindowSample], price_column: usize) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Contract("batch needs at least one sample".into()))?;
        let (h, k) = (first.lookback.rows(), first.lookback.cols());
        let f = first.target.len();
        let kf = first.future_covariates.cols();
        let s = first.static_vector.len();
        if price_column >= k {
            return Err(Error::dim("batch", format!("price column {} of {} features", price_column, k)));
        }
        if kf > k {
            return Err(Error::dim("batch", format!("{} future columns exceed {} features", kf, k)));
        }
        let b = samples.len();
        let mut history = Vec::with_capacity(b * h);
        let mut dynamic = Vec::with_capacity(b * (h + f) * k);
        let mut statics = Vec::with_capacity(b * s);
        let mut target = Vec::with_capacity(b * f);
        for (i, x) in samples.iter().enumerate() {
            let consistent = x.lookback.shape() == [h, k]
                && x.future_covariates.shape() == [f, kf]
                && x.target.len() == f
                && x.static_vector.len() == s;
            if !consistent {
                return Err(Error::dim("batch", format!("sample {} differs in shape from sample 0", i)));
            }
            for r in 0..h {
                history.push(x.lookback.at2(r, price_column));
            }
            dynamic.extend_from_slice(x.lookback.data());
            for r in 0..f {
                dynamic.extend(std::iter::repeat_n(0.0, k - kf));
                dynamic.extend_from_slice(x.future_covariates.row(r));
            }
            statics.extend_from_slice(&x.static_vector);
            target.extend_from_slice(&x.target);
        }
        Ok(Batch {
            size: b,
            lookback: h,
            horizon: f,
            history: Tensor::new(vec![b, h], history)?,
            dynamic: Tensor::new(vec![b * (h + f), k], dynamic)?,
            statics: Tensor::new(vec![b, s], statics)?,
            target: Tensor::new(vec![b, f], target)?,
        })
    }

    pub fn features(&self) -> usize {
        self.dynamic.cols()
    }

    pub fn static_width(&self) -> usize {
        self.statics.cols()
    }
}

/// Lays out a flat decoder output `e` of length `F·q` as the `[q, F]`
/// matrix whose column `t` is the decoded vector for horizon step `t`:
/// `R[j, t] = e[t·q + j]`.
pub fn decoded_matrix(e: &[f64], q: usize, horizon: usize) -> Result<Tensor> {
    if e.len() != q * horizon {
        return Err(Error::dim("decoded_matrix", format!("{} values for q={} F={}", e.len(), q, horizon)));
    }
    let mut data = vec![0.0; e.len()];
    for t in 0..horizon {
        for j in 0..q {
            data[j * horizon + t] = e[t * q + j];
        }
    }
    Tensor::new(vec![q, horizon], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub projection: ResidualBlock,
    pub encoder: Vec<ResidualBlock>,
    pub decoder: Vec<ResidualBlock>,
    pub temporal: ResidualBlock,
    /// `[H, F]` linear map from historical prices to the forecast.
    pub global_residual: Param,
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let block = |input, hidden, output, rng: &mut RngState| {
            ResidualBlock::new(
                BlockShape {
                    input,
                    hidden,
                    output,
                    dropout: c.dropout,
                    gated: c.gated,
                },
                rng,
            )
        };
        let projection = block(c.features, c.encoder_hidden, c.projection, rng)?;
        let mut encoder = Vec::with_capacity(c.encoder_layers);
        for i in 0..c.encoder_layers {
            let input = if i == 0 { c.encoder_input() } else { c.encoder_hidden };
            encoder.push(block(input, c.encoder_hidden, c.encoder_hidden, rng)?);
        }
        let mut decoder = Vec::with_capacity(c.decoder_layers);
        for i in 0..c.decoder_layers {
            let input = if i == 0 { c.encoder_hidden } else { c.decoder_hidden };
            let output = if i + 1 == c.decoder_layers {
                c.horizon * c.decoder_output
            } else {
                c.decoder_hidden
            };
            decoder.push(block(input, c.decoder_hidden, output, rng)?);
        }
        let temporal = block(c.decoder_output + c.projection, c.temporal_hidden, 1, rng)?;
        let global_residual = Param::new(glorot(&[c.lookback, c.horizon], c.lookback, c.horizon, rng));
        Ok(Generator {
            config,
            projection,
            encoder,
            decoder,
            temporal,
            global_residual,
        })
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        let c = &self.config;
        if batch.lookback != c.lookback
            || batch.horizon != c.horizon
            || batch.features() != c.features
            || batch.static_width() != c.static_width
        {
            return Err(Error::dim(
                "generator",
                format!(
                    "batch H={} F={} k={} s={} for config H={} F={} k={} s={}",
                    batch.lookback,
                    batch.horizon,
                    batch.features(),
                    batch.static_width(),
                    c.lookback,
                    c.horizon,
                    c.features,
                    c.static_width
                ),
            ));
        }
        Ok(())
    }

    /// Applies the projection block to every dynamic row independently:
    /// `[B·(H+F), k]` → `[B, H+F, k̃]`. With future covariates disabled the
    /// projected future rows are zero.
    pub fn project_features(&self, g: &mut Graph, dynamic: Var, rng: &mut RngState) -> Result<Var> {
        let c = &self.config;
        let rows = g.shape(dynamic)[0];
        let (t, kp) = (c.window(), c.projection);
        if !rows.is_multiple_of(t) {
            return Err(Error::dim("project_features", format!("{} rows is not a multiple of {}", rows, t)));
        }
        let b = rows / t;
        let p = self.projection.forward(g, dynamic, rng)?;
        let p = g.reshape(p, &[b, t, kp])?;
        if c.future_width > 0 {
            return Ok(p);
        }
        let hist = g.slice(p, 1, 0, c.lookback)?;
        let zeros = g.constant(Tensor::zeros(&[b, c.horizon, kp]))?;
        g.concat(&[hist, zeros], 1)
    }

    /// Encoder over `concat[flatten(d̃); s; y_hist; noise]` → `[B, hidden]`.
    pub fn encode(
        &self,
        g: &mut Graph,
        history: Var,
        projected: Var,
        statics: Var,
        noise: Option<Var>,
        rng: &mut RngState,
    ) -> Result<Var> {
        let b = g.shape(history)[0];
        let flat = g.reshape(projected, &[b, self.config.window() * self.config.projection])?;
        let mut parts = vec![flat];
        if self.config.static_width > 0 {
            parts.push(statics);
        }
        parts.push(history);
        if let Some(n) = noise {
            parts.push(n);
        }
        let mut a = g.concat(&parts, 1)?;
        for block in &self.encoder {
            a = block.forward(g, a, rng)?;
        }
        Ok(a)
    }

    /// Dense decoder: `[B, hidden]` → `[B·F, q]`, row `b·F + t` holding the
    /// decoded vector `r_t` of sample `b`.
    pub fn decode_dense(&self, g: &mut Graph, encoded: Var, rng: &mut RngState) -> Result<Var> {
        let c = &self.config;
        let mut e = encoded;
        for block in &self.decoder {
            e = block.forward(g, e, rng)?;
        }
        let s = g.shape(e).to_vec();
        if s[1] != c.horizon * c.decoder_output {
            return Err(Error::Config(format!(
                "decoder width {} is not F·q = {}",
                s[1],
                c.horizon * c.decoder_output
            )));
        }
        g.reshape(e, &[s[0] * c.horizon, c.decoder_output])
    }

    /// Per-step head over `concat(r_t, x̃_{H+t})` with shared weights → `[B, F]`.
    pub fn temporal_decode(&self, g: &mut Graph, decoded: Var, projected: Var, rng: &mut RngState) -> Result<Var> {
        let c = &self.config;
        let b = g.shape(projected)[0];
        let future = g.slice(projected, 1, c.lookback, c.window())?;
        let future = g.reshape(future, &[b * c.horizon, c.projection])?;
        let x = g.concat(&[decoded, future], 1)?;
        let y = self.temporal.forward(g, x, rng)?;
        g.reshape(y, &[b, c.horizon])
    }

    /// Full forward pass; returns `[B, F]` forecasts in normalised units.
    /// `noise` is `[B, noise_dim]` and defaults to zeros.
    pub fn forward(&self, g: &mut Graph, batch: &Batch, noise: Option<&Tensor>, rng: &mut RngState) -> Result<Var> {
        self.check_batch(batch)?;
        let c = &self.config;
        let noise = match (c.noise_dim, noise) {
            (0, None) => None,
            (0, Some(_)) => return Err(Error::dim("generator", "noise given to a generator without noise inputs")),
            (n, Some(t)) if t.shape() == [batch.size, n] => Some(g.constant(t.clone())?),
            (n, Some(t)) => return Err(Error::dim("generator", format!("noise {:?}, expected [{}, {}]", t.shape(), batch.size, n))),
            (n, None) => Some(g.constant(Tensor::zeros(&[batch.size, n]))?),
        };
        let history = g.constant(batch.history.clone())?;
        let dynamic = g.constant(batch.dynamic.clone())?;
        let statics = g.constant(batch.statics.clone())?;

        let projected = self.project_features(g, dynamic, rng)?;
        let encoded = self.encode(g, history, projected, statics, noise, rng)?;
        let decoded = self.decode_dense(g, encoded, rng)?;
        let local = self.temporal_decode(g, decoded, projected, rng)?;
        let w = g.param(&self.global_residual)?;
        let linear = g.matmul(history, w)?;
        g.add(local, linear)
    }

    /// Eval-mode forecasts, one vector of length `F` per sample.
    pub fn predict(&self, samples: &[&WindowSample], price_column: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(samples.len());
        let mut rng = RngState::new(0, Stream::Dropout);
        for chunk in samples.chunks(256) {
            let batch = Batch::from_samples(chunk, price_column)?;
            let mut g = Graph::new(Mode::Eval);
            let y = self.forward(&mut g, &batch, None, &mut rng)?;
            out.extend(g.value(y).data().chunks(self.config.horizon).map(|r| r.to_vec()));
        }
        Ok(out)
    }

    /// Zeroes every parameter except the global residual map, leaving the
    /// pure linear-in-history forecaster.
    pub fn zero_non_residual(&mut self) {
        let keep = self.global_residual.id();
        for p in self.parameters_mut() {
            if p.id() != keep {
                p.value.data_mut().fill(0.0);
            }
        }
    }
}

impl Module for Generator {
    fn parameters(&self) -> Vec<&Param> {
        let mut v = self.projection.parameters();
        for b in self.encoder.iter().chain(&self.decoder) {
            v.extend(b.parameters());
        }
        v.extend(self.temporal.parameters());
        v.push(&self.global_residual);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.projection.parameters_mut();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.extend(b.parameters_mut());
        }
        v.extend(self.temporal.parameters_mut());
        v.push(&mut self.global_residual);
        v
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::NaiveDate;

    pub(crate) fn small_config() -> GeneratorConfig {
        GeneratorConfig {
            projection: 3,
            encoder_hidden: 6,
            decoder_hidden: 5,
            decoder_output: 4,
            temporal_hidden: 3,
            dropout: 0.0,
            ..GeneratorConfig::for_data(3, 2, 6, 2, 2)
        }
    }

    pub(crate) fn samples(cfg: &GeneratorConfig, n: usize, seed: u64) -> Vec<WindowSample> {
        let mut r = RngState::new(seed, Stream::Test);
        let mut t = |shape: &[usize]| {
            let mut x = Tensor::zeros(shape);
            for v in x.data_mut() {
                *v = r.uniform_range(-1.0, 1.0);
            }
            x
        };
        (0..n)
            .map(|_| WindowSample {
                lookback: t(&[cfg.lookback, cfg.features]),
                future_covariates: t(&[cfg.horizon, cfg.future_width]),
                static_vector: t(&[cfg.static_width]).into_data(),
                target: t(&[cfg.horizon]).into_data(),
                anchor_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            })
            .collect()
    }

    fn forward(gen: &Generator, batch: &Batch) -> Tensor {
        let mut g = Graph::new(Mode::Eval);
        let mut rng = RngState::new(0, Stream::Dropout);
        let y = gen.forward(&mut g, batch, None, &mut rng).unwrap();
        g.value(y).clone()
    }

    #[test]
    fn batch_layout() {
        let cfg = small_config();
        let s = samples(&cfg, 2, 1);
        let refs: Vec<_> = s.iter().collect();
        let b = Batch::from_samples(&refs, 3).unwrap();
        assert_eq!(b.dynamic.shape(), [10, 6]);
        assert_eq!(b.history.at2(1, 2), s[1].lookback.at2(2, 3));
        // future row of sample 1, step 1: zeros then the known columns
        assert_eq!(b.dynamic.row(9), &[0.0, 0.0, 0.0, 0.0, s[1].future_covariates.at2(1, 0), s[1].future_covariates.at2(1, 1)]);
    }

    #[test]
    fn decoded_matrix_layout() {
        let e: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let r = decoded_matrix(&e, 3, 2).unwrap();
        assert_eq!(r.shape(), [3, 2]);
        assert_eq!(r.at2(0, 1), 3.0);
        assert_eq!(r.at2(2, 0), 2.0);
        let one = decoded_matrix(&e[..3], 3, 1).unwrap();
        assert_eq!(one.data(), &e[..3]);
    }

    #[test]
    fn zeroed_generator_is_linear_in_history() {
        let cfg = small_config();
        let mut rng = RngState::new(3, Stream::Init);
        let mut gen = Generator::new(cfg.clone(), &mut rng).unwrap();
        gen.zero_non_residual();
        let s = samples(&cfg, 4, 2);
        let refs: Vec<_> = s.iter().collect();
        let batch = Batch::from_samples(&refs, 3).unwrap();
        let y = forward(&gen, &batch);
        let w = &gen.global_residual.value;
        for b in 0..4 {
            for t in 0..cfg.horizon {
                let expect: f64 = (0..cfg.lookback).map(|h| batch.history.at2(b, h) * w.at2(h, t)).sum();
                assert_eq!(y.at2(b, t), expect);
            }
        }
    }

    #[test]
    fn batched_matches_single() {
        let cfg = small_config();
        let mut rng = RngState::new(5, Stream::Init);
        let gen = Generator::new(cfg.clone(), &mut rng).unwrap();
        let s = samples(&cfg, 3, 4);
        let refs: Vec<_> = s.iter().collect();
        let all = forward(&gen, &Batch::from_samples(&refs, 0).unwrap());
        for (i, x) in refs.iter().enumerate() {
            let one = forward(&gen, &Batch::from_samples(&[*x], 0).unwrap());
            for t in 0..cfg.horizon {
                assert!((one.at2(0, t) - all.at2(i, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disabled_future_rows_are_zero() {
        let cfg = GeneratorConfig {
            future_width: 0,
            ..small_config()
        };
        let mut rng = RngState::new(5, Stream::Init);
        let gen = Generator::new(cfg.clone(), &mut rng).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let d = g.constant(Tensor::full(&[5, 6], 0.3)).unwrap();
        let p = gen.project_features(&mut g, d, &mut rng).unwrap();
        let v = g.value(p);
        assert_eq!(v.shape(), [1, 5, 3]);
        assert!(v.data()[9..].iter().all(|&x| x == 0.0));
        assert!(v.data()[..9].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut rng = RngState::new(0, Stream::Init);
        for cfg in [
            GeneratorConfig { encoder_layers: 0, ..small_config() },
            GeneratorConfig { projection: 7, ..small_config() },
            GeneratorConfig { projection: 0, ..small_config() },
            GeneratorConfig { decoder_output: 0, ..small_config() },
        ] {
            assert!(matches!(Generator::new(cfg, &mut rng), Err(Error::Config(_))));
        }
    }

    #[test]
    fn parameter_count_depends_only_on_config() {
        let cfg = small_config();
        let a = Generator::new(cfg.clone(), &mut RngState::new(1, Stream::Init)).unwrap();
        let b = Generator::new(cfg, &mut RngState::new(2, Stream::Init)).unwrap();
        assert_eq!(a.parameter_count(), b.parameter_count());
        assert_ne!(a, b);
    }
}
