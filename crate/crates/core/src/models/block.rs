use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot, Graph, Module, Param, RngState, Tensor, Var};
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub dropout: f64,
    pub gated: bool,
}

/// Dense residual unit:
///
/// ```text
/// main = Dropout(W2 · ReLU(W1 · x + b1) + b2)
/// skip = Ws · x
/// y    = LayerNorm(main + skip)                    (ungated)
/// y    = LayerNorm(z ⊙ main + (1 - z) ⊙ skip)      (gated, z = σ(Wz · x + bz))
/// ```
///
/// Layer normalisation of a single output would pin it to the norm bias,
/// so width-1 blocks skip it.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBlock {
    pub shape: BlockShape,
    pub hidden_w: Param,
    pub hidden_b: Param,
    pub out_w: Param,
    pub out_b: Param,
    pub skip_w: Param,
    pub gate: Option<(Param, Param)>,
    pub norm: Option<(Param, Param)>,
}

impl ResidualBlock {
    pub fn new(shape: BlockShape, rng: &mut RngState) -> Result<Self> {
        let BlockShape {
            input,
            hidden,
            output,
            dropout,
            gated,
        } = shape;
        if input == 0 || hidden == 0 || output == 0 {
            return Err(Error::Config(format!("degenerate residual block {:?}", shape)));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::Config(format!("dropout rate {} not in [0, 1)", dropout)));
        }
        let p = |t: Tensor| Param::new(t);
        let hidden_w = p(glorot(&[input, hidden], input, hidden, rng));
        let out_w = p(glorot(&[hidden, output], hidden, output, rng));
        let skip_w = p(glorot(&[input, output], input, output, rng));
        let gate = if gated {
            Some((
                p(glorot(&[input, output], input, output, rng)),
                p(Tensor::zeros(&[output])),
            ))
        } else {
            None
        };
        let norm = (output > 1).then(|| (p(Tensor::full(&[output], 1.0)), p(Tensor::zeros(&[output]))));
        Ok(ResidualBlock {
            shape,
            hidden_w,
            hidden_b: p(Tensor::zeros(&[hidden])),
            out_w,
            out_b: p(Tensor::zeros(&[output])),
            skip_w,
            gate,
            norm,
        })
    }

    /// Applies the block to each row of `x` (`[n, input]` → `[n, output]`).
    pub fn forward(&self, g: &mut Graph, x: Var, rng: &mut RngState) -> Result<Var> {
        let s = g.shape(x);
        if s.len() != 2 || s[1] != self.shape.input {
            return Err(Error::dim(
                "residual_block",
                format!("input {:?} for block expecting width {}", s, self.shape.input),
            ));
        }
        let w1 = g.param(&self.hidden_w)?;
        let b1 = g.param(&self.hidden_b)?;
        let w2 = g.param(&self.out_w)?;
        let b2 = g.param(&self.out_b)?;
        let ws = g.param(&self.skip_w)?;

        let h = g.linear(x, w1, b1)?;
        let h = g.relu(h)?;
        let main = g.linear(h, w2, b2)?;
        let main = g.dropout(main, self.shape.dropout, rng)?;
        let skip = g.matmul(x, ws)?;

        let mixed = match &self.gate {
            None => g.add(main, skip)?,
            Some((wz, bz)) => {
                let wz = g.param(wz)?;
                let bz = g.param(bz)?;
                let z = g.linear(x, wz, bz)?;
                let z = g.sigmoid(z)?;
                // z * main + (1 - z) * skip == skip + z * (main - skip)
                let diff = g.sub(main, skip)?;
                let gated = g.mul(z, diff)?;
                g.add(skip, gated)?
            }
        };
        match &self.norm {
            None => Ok(mixed),
            Some((gain, bias)) => {
                let gain = g.param(gain)?;
                let bias = g.param(bias)?;
                g.layer_norm(mixed, gain, bias, LAYER_NORM_EPS)
            }
        }
    }

    /// Zeroes the hidden and output layers so the block reduces to its skip path.
    pub fn zero_main_path(&mut self) {
        for p in [&mut self.hidden_w, &mut self.hidden_b, &mut self.out_w, &mut self.out_b] {
            p.value.data_mut().fill(0.0);
        }
    }

    pub fn zero_all(&mut self) {
        for p in self.parameters_mut() {
            p.value.data_mut().fill(0.0);
        }
    }
}

impl Module for ResidualBlock {
    fn parameters(&self) -> Vec<&Param> {
        let mut v = vec![&self.hidden_w, &self.hidden_b, &self.out_w, &self.out_b, &self.skip_w];
        if let Some((w, b)) = &self.gate {
            v.extend([w, b]);
        }
        if let Some((gain, bias)) = &self.norm {
            v.extend([gain, bias]);
        }
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.out_w,
            &mut self.out_b,
            &mut self.skip_w,
        ];
        if let Some((w, b)) = &mut self.gate {
            v.extend([w, b]);
        }
        if let Some((gain, bias)) = &mut self.norm {
            v.extend([gain, bias]);
        }
        v
    }
}
