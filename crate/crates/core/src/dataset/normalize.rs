use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Per-column min-max scaling onto `[-1, 1]`, fitted on training rows.
///
/// Values outside the fitted range map outside `[-1, 1]`; nothing is clipped.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target_column: usize,
}

/// Fits per-column ranges on a `[rows, cols]` training matrix.
pub fn fit_normalizer(train: &Tensor, target_column: usize) -> Result<NormalizationSpec> {
    fit_normalizer_named(train, target_column, &[])
}

/// As [`fit_normalizer`], naming the offending column in errors when
/// `names` covers it.
pub fn fit_normalizer_named(
    train: &Tensor,
    target_column: usize,
    names: &[&str],
) -> Result<NormalizationSpec> {
    if train.ndim() != 2 {
        return Err(Error::dim("fit_normalizer", format!("shape {:?}", train.shape())));
    }
    let (rows, cols) = (train.rows(), train.cols());
    if rows < 2 {
        return Err(Error::Input(format!(
            "normalizer needs at least 2 rows, got {}",
            rows
        )));
    }
    if target_column >= cols {
        return Err(Error::Config(format!(
            "target column {} outside {} columns",
            target_column, cols
        )));
    }
    let mut min = vec![f64::INFINITY; cols];
    let mut max = vec![f64::NEG_INFINITY; cols];
    for r in 0..rows {
        for (c, &v) in train.row(r).iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    for c in 0..cols {
        if !(max[c] > min[c]) {
            let name = names.get(c).copied().unwrap_or("unnamed");
            return Err(Error::Config(format!(
                "feature column {} ({}) is constant on the training rows",
                c, name
            )));
        }
    }
    Ok(NormalizationSpec {
        min,
        max,
        target_column,
    })
}

impl NormalizationSpec {
    pub fn columns(&self) -> usize {
        self.min.len()
    }

    pub fn normalize_value(&self, col: usize, v: f64) -> f64 {
        2.0 * (v - self.min[col]) / (self.max[col] - self.min[col]) - 1.0
    }

    pub fn denormalize_value(&self, col: usize, v: f64) -> f64 {
        (v + 1.0) / 2.0 * (self.max[col] - self.min[col]) + self.min[col]
    }

    /// Half the fitted range of the target column: the factor between
    /// normalised and price-scale errors.
    pub fn target_half_range(&self) -> f64 {
        (self.max[self.target_column] - self.min[self.target_column]) / 2.0
    }

    fn apply(&self, x: &Tensor, f: impl Fn(usize, f64) -> f64) -> Result<Tensor> {
        if x.ndim() != 2 || x.cols() != self.columns() {
            return Err(Error::dim(
                "normalize",
                format!("matrix {:?} vs {} fitted columns", x.shape(), self.columns()),
            ));
        }
        let cols = self.columns();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % cols, v))
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    pub fn normalize(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, |c, v| self.normalize_value(c, v))
    }

    pub fn denormalize(&self, x: &Tensor) -> Result<Tensor> {
        self.apply(x, |c, v| self.denormalize_value(c, v))
    }
}
