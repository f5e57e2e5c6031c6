//! Central-difference gradient checking.

use super::graph::{Graph, Mode, Var};
use super::tensor::{Module, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor index, entry index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
    /// Entries left out because `x ± h` switched a ReLU or clamp branch,
    /// where a central difference does not estimate the derivative.
    pub skipped: usize,
}

impl GradCheckReport {
    fn new() -> Self {
        GradCheckReport {
            max_rel_error: 0.0,
            worst: (0, 0),
            analytic: 0.0,
            numeric: 0.0,
            entries: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, at: (usize, usize), analytic: f64, numeric: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        self.entries += 1;
        if rel > self.max_rel_error || self.entries == 1 {
            self.max_rel_error = rel;
            self.worst = at;
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }
}

fn scalar_of(g: &Graph, v: Var) -> Result<(f64, u64)> {
    let t = g.value(v);
    if t.numel() != 1 {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar function, got shape {:?}",
            t.shape()
        )));
    }
    Ok((t.data()[0], g.kink_signature()))
}

/// Compares backward gradients of `f` with respect to each input against
/// `(f(x+h) - f(x-h)) / 2h`, entry by entry. Graphs are built in eval mode.
/// Entries whose perturbation changes the graph's kink signature are
/// counted in `skipped` instead of compared.
pub fn grad_check<F>(mut f: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Config("gradient check step must be positive".into()));
    }
    let mut g = Graph::new(Mode::Eval);
    let vars = inputs
        .iter()
        .map(|t| g.input(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut g, &vars)?;
    let (_, base) = scalar_of(&g, out)?;
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut eval = |xs: &[Tensor]| -> Result<(f64, u64)> {
        let mut g = Graph::new(Mode::Eval);
        let vars = xs
            .iter()
            .map(|t| g.constant(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut g, &vars)?;
        scalar_of(&g, out)
    };

    let mut report = GradCheckReport::new();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for ti in 0..inputs.len() {
        for ei in 0..inputs[ti].numel() {
            let x0 = inputs[ti].data()[ei];
            work[ti].data_mut()[ei] = x0 + step;
            let plus = eval(&work)?;
            work[ti].data_mut()[ei] = x0 - step;
            let minus = eval(&work)?;
            work[ti].data_mut()[ei] = x0;
            if plus.1 != base || minus.1 != base {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus.0 - minus.0) / (2.0 * step);
            report.record((ti, ei), analytic[ti].data()[ei], numeric);
        }
    }
    Ok(report)
}

/// Gradient check over every parameter of a module. `f` builds the scalar
/// loss from the module on a fresh graph.
pub fn grad_check_module<M, F>(module: &mut M, mut f: F, step: f64) -> Result<GradCheckReport>
where
    M: Module,
    F: FnMut(&M, &mut Graph) -> Result<Var>,
{
    if step <= 0.0 {
        return Err(Error::Config("gradient check step must be positive".into()));
    }
    let mut g = Graph::new(Mode::Eval);
    let out = f(module, &mut g)?;
    let (_, base) = scalar_of(&g, out)?;
    g.backward(out)?;
    let analytic = g.module_grads(module);

    let mut report = GradCheckReport::new();
    let count = module.parameters().len();
    for pi in 0..count {
        let n = module.parameters()[pi].value.numel();
        for ei in 0..n {
            let x0 = module.parameters()[pi].value.data()[ei];
            let mut at = |m: &mut M, x: f64| -> Result<(f64, u64)> {
                m.parameters_mut()[pi].value.data_mut()[ei] = x;
                let mut g = Graph::new(Mode::Eval);
                let out = f(m, &mut g)?;
                scalar_of(&g, out)
            };
            let plus = at(module, x0 + step)?;
            let minus = at(module, x0 - step)?;
            module.parameters_mut()[pi].value.data_mut()[ei] = x0;
            if plus.1 != base || minus.1 != base {
                report.skipped += 1;
                continue;
            }
            report.record((pi, ei), analytic[pi].data()[ei], (plus.0 - minus.0) / (2.0 * step));
        }
    }
    Ok(report)
}
