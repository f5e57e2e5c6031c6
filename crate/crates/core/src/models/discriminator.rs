use serde::{Deserialize, Serialize};

use super::generator::Batch;
use crate::autodiff::{glorot, Graph, Module, Param, RngState, Tensor, Var};
use crate::dataset::WindowSample;
use crate::error::{Error, Result};

/// Probabilities are kept inside `[ε, 1-ε]` before taking logs.
pub const PROBABILITY_EPS: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Sequence length `H + F`.
    pub sequence: usize,
    /// Input channels: price, `k` dynamic features, and optionally the statics.
    pub channels: usize,
    pub conv_channels: Vec<usize>,
    pub kernel_width: usize,
    pub stride: usize,
    pub mlp_hidden: Vec<usize>,
    pub include_context: bool,
}

impl DiscriminatorConfig {
    pub fn for_data(lookback: usize, horizon: usize, features: usize, static_width: usize, include_context: bool) -> Self {
        DiscriminatorConfig {
            sequence: lookback + horizon,
            channels: disc_channels(features, static_width, include_context),
            conv_channels: vec![16, 32],
            kernel_width: 2,
            stride: 1,
            mlp_hidden: vec![64, 32],
            include_context,
        }
    }

    /// Time steps left after each convolution.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        if self.kernel_width == 0 || self.stride == 0 {
            return Err(Error::Config("discriminator kernel width and stride must be positive".into()));
        }
        let mut len = self.sequence;
        let mut out = Vec::with_capacity(self.conv_channels.len());
        for (i, _) in self.conv_channels.iter().enumerate() {
            if len < self.kernel_width {
                return Err(Error::Config(format!(
                    "sequence of {} steps is shorter than the receptive field at conv layer {} (width {})",
                    self.sequence,
                    i + 1,
                    self.kernel_width
                )));
            }
            len = (len - self.kernel_width) / self.stride + 1;
            out.push(len);
        }
        Ok(out)
    }
}

pub fn disc_channels(features: usize, static_width: usize, include_context: bool) -> usize {
    1 + features + if include_context { static_width } else { 0 }
}

/// 1-D convolutions over time followed by an MLP; emits one logit per sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub convs: Vec<(Param, Param)>,
    pub mlp: Vec<(Param, Param)>,
    pub head: (Param, Param),
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, rng: &mut RngState) -> Result<Self> {
        let lengths = config.conv_lengths()?;
        if config.channels == 0 || config.conv_channels.iter().chain(&config.mlp_hidden).any(|&c| c == 0) {
            return Err(Error::Config("discriminator widths must be positive".into()));
        }
        let w = config.kernel_width;
        let mut convs = Vec::new();
        let mut c_in = config.channels;
        for &c_out in &config.conv_channels {
            let k = glorot(&[c_out, c_in, w], c_in * w, c_out * w, rng);
            convs.push((Param::new(k), Param::new(Tensor::zeros(&[c_out]))));
            c_in = c_out;
        }
        let mut width = c_in * lengths.last().copied().unwrap_or(config.sequence);
        let mut mlp = Vec::new();
        for &h in &config.mlp_hidden {
            mlp.push((Param::new(glorot(&[width, h], width, h, rng)), Param::new(Tensor::zeros(&[h]))));
            width = h;
        }
        let head = (
            Param::new(glorot(&[width, 1], width, 1, rng)),
            Param::new(Tensor::zeros(&[1])),
        );
        Ok(Discriminator { config, convs, mlp, head })
    }

    /// Raw scores `[B]` for inputs `[B, H+F, c]`.
    pub fn logits(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        if s.len() != 3 || s[1] != self.config.sequence || s[2] != self.config.channels {
            return Err(Error::dim(
                "discriminator",
                format!(
                    "input {:?}, expected [B, {}, {}]",
                    s, self.config.sequence, self.config.channels
                ),
            ));
        }
        let b = s[0];
        let mut h = g.swap_last(x)?;
        for (k, bias) in &self.convs {
            let k = g.param(k)?;
            let bias = g.param(bias)?;
            h = g.conv1d(h, k, self.config.stride)?;
            h = g.add_bias(h, bias, 1)?;
            h = g.relu(h)?;
        }
        let mut h = g.flatten(h, 1)?;
        for (w, bias) in &self.mlp {
            let w = g.param(w)?;
            let bias = g.param(bias)?;
            h = g.linear(h, w, bias)?;
            h = g.relu(h)?;
        }
        let w = g.param(&self.head.0)?;
        let bias = g.param(&self.head.1)?;
        let out = g.linear(h, w, bias)?;
        g.reshape(out, &[b])
    }

    /// Probability of "real" per sequence, clamped to `[ε, 1-ε]`.
    pub fn probability(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let z = self.logits(g, x)?;
        let p = g.sigmoid(z)?;
        g.clamp(p, PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)
    }

    pub fn zero_head(&mut self) {
        self.head.0.value.data_mut().fill(0.0);
        self.head.1.value.data_mut().fill(0.0);
    }
}

impl Module for Discriminator {
    fn parameters(&self) -> Vec<&Param> {
        let mut v = Vec::new();
        for (w, b) in self.convs.iter().chain(&self.mlp) {
            v.extend([w, b]);
        }
        v.extend([&self.head.0, &self.head.1]);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        let mut v = Vec::new();
        for (w, b) in self.convs.iter_mut().chain(self.mlp.iter_mut()) {
            v.extend([w, b]);
        }
        v.extend([&mut self.head.0, &mut self.head.1]);
        v
    }
}

/// Covariate channels of the discriminator input, `[B, H+F, k (+ S)]`:
/// the dynamic rows of the batch, with the static vector repeated on every
/// step when `include_context` is set.
pub fn context_channels(batch: &Batch, include_context: bool) -> Result<Tensor> {
    let t = batch.lookback + batch.horizon;
    let k = batch.features();
    let s = if include_context { batch.static_width() } else { 0 };
    let mut data = Vec::with_capacity(batch.size * t * (k + s));
    for b in 0..batch.size {
        let statics = batch.statics.row(b);
        for r in 0..t {
            data.extend_from_slice(batch.dynamic.row(b * t + r));
            if include_context {
                data.extend_from_slice(statics);
            }
        }
    }
    Tensor::new(vec![batch.size, t, k + s], data)
}

/// Time-major discriminator input `[B, H+F, c]` on the graph. Channel 0
/// holds the historical prices followed by `horizon` (`[B, F]`, either the
/// targets or generated values); `context` comes from [`context_channels`].
pub fn assemble_disc_input(g: &mut Graph, batch: &Batch, context: Var, horizon: Var) -> Result<Var> {
    let b = batch.size;
    let hs = g.shape(horizon).to_vec();
    if hs != [b, batch.horizon] {
        return Err(Error::dim("assemble_disc_input", format!("horizon {:?}, expected [{}, {}]", hs, b, batch.horizon)));
    }
    let hist = g.constant(batch.history.clone())?;
    let hist = g.reshape(hist, &[b, batch.lookback, 1])?;
    let fut = g.reshape(horizon, &[b, batch.horizon, 1])?;
    let price = g.concat(&[hist, fut], 1)?;
    g.concat(&[price, context], 2)
}

/// Single-sample assembly without a graph: `[H+F, c]`.
pub fn disc_input_matrix(
    sample: &WindowSample,
    horizon_values: &[f64],
    price_column: usize,
    include_context: bool,
) -> Result<Tensor> {
    if horizon_values.len() != sample.target.len() {
        return Err(Error::dim(
            "assemble_disc_input",
            format!("{} horizon values for F={}", horizon_values.len(), sample.target.len()),
        ));
    }
    let batch = Batch::from_samples(&[sample], price_column)?;
    let ctx = context_channels(&batch, include_context)?;
    let (t, w) = (ctx.shape()[1], ctx.shape()[2]);
    let mut data = Vec::with_capacity(t * (w + 1));
    for r in 0..t {
        let price = if r < batch.lookback {
            batch.history.data()[r]
        } else {
            horizon_values[r - batch.lookback]
        };
        data.push(price);
        data.extend_from_slice(&ctx.data()[r * w..(r + 1) * w]);
    }
    Tensor::new(vec![t, w + 1], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Mode, Stream};
    use chrono::NaiveDate;

    fn sample(h: usize, f: usize, k: usize, kf: usize, s: usize, seed: u64) -> WindowSample {
        let mut r = RngState::new(seed, Stream::Test);
        let mut v = |n: usize| (0..n).map(|_| r.uniform_range(-1.0, 1.0)).collect::<Vec<_>>();
        WindowSample {
            lookback: Tensor::new(vec![h, k], v(h * k)).unwrap(),
            future_covariates: Tensor::new(vec![f, kf], v(f * kf)).unwrap(),
            static_vector: v(s),
            target: v(f),
            anchor_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        }
    }

    #[test]
    fn default_window_has_four_rows() {
        let s = sample(3, 1, 14, 2, 2, 1);
        for ctx in [false, true] {
            let m = disc_input_matrix(&s, &s.target, 3, ctx).unwrap();
            assert_eq!(m.rows(), 4);
            assert_eq!(m.cols(), disc_channels(14, 2, ctx));
        }
    }

    #[test]
    fn real_and_fake_differ_only_in_horizon_price() {
        let s = sample(3, 2, 5, 2, 3, 2);
        let real = disc_input_matrix(&s, &s.target, 0, true).unwrap();
        let fake = disc_input_matrix(&s, &[9.0, -9.0], 0, true).unwrap();
        for r in 0..5 {
            for c in 0..real.cols() {
                let same = real.at2(r, c) == fake.at2(r, c);
                assert_eq!(same, !(r >= 3 && c == 0), "row {} col {}", r, c);
            }
        }
    }

    #[test]
    fn graph_assembly_matches_matrix() {
        let samples: Vec<_> = (0..3).map(|i| sample(3, 2, 5, 2, 3, 10 + i)).collect();
        let refs: Vec<_> = samples.iter().collect();
        let batch = Batch::from_samples(&refs, 1).unwrap();
        let mut g = Graph::new(Mode::Eval);
        let ctx = g.constant(context_channels(&batch, true).unwrap()).unwrap();
        let hor = g.constant(batch.target.clone()).unwrap();
        let x = assemble_disc_input(&mut g, &batch, ctx, hor).unwrap();
        let v = g.value(x);
        let per = v.numel() / 3;
        for (i, s) in samples.iter().enumerate() {
            let m = disc_input_matrix(s, &s.target, 1, true).unwrap();
            assert_eq!(&v.data()[i * per..(i + 1) * per], m.data());
        }
    }

    #[test]
    fn zero_head_gives_half() {
        let cfg = DiscriminatorConfig::for_data(3, 1, 4, 2, true);
        let mut d = Discriminator::new(cfg.clone(), &mut RngState::new(1, Stream::Init)).unwrap();
        d.zero_head();
        let mut g = Graph::new(Mode::Eval);
        let x = g.constant(Tensor::full(&[2, 4, cfg.channels], 0.7)).unwrap();
        let p = d.probability(&mut g, x).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5]);
    }

    #[test]
    fn output_is_a_probability_for_extreme_inputs() {
        let cfg = DiscriminatorConfig::for_data(3, 1, 4, 2, false);
        let d = Discriminator::new(cfg.clone(), &mut RngState::new(2, Stream::Init)).unwrap();
        for scale in [0.0, 1.0, 1e3, 1e8] {
            let mut g = Graph::new(Mode::Eval);
            let x = g.constant(Tensor::full(&[1, 4, cfg.channels], scale)).unwrap();
            let p = d.probability(&mut g, x).unwrap();
            let v = g.value(p).data()[0];
            assert!(v > 0.0 && v < 1.0, "{}", v);
        }
    }

    #[test]
    fn short_sequence_is_a_config_error() {
        let cfg = DiscriminatorConfig {
            sequence: 2,
            ..DiscriminatorConfig::for_data(1, 1, 4, 0, false)
        };
        assert!(matches!(
            Discriminator::new(cfg, &mut RngState::new(0, Stream::Init)),
            Err(Error::Config(_))
        ));
    }
}
