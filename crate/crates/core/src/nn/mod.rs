//! Two-layer MLP feature transform trained through a fixed propagation.
//!
//! Propagation maps are symmetric in `H`, so the gradient with respect to the
//! MLP output is the loss gradient propagated once more: `G_H = P(G_Z)`.

mod train;

pub use train::{train, trial_seed, Metrics, TrainConfig};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{normalize, NormalizedOperators};
use crate::numerics::{DenseMatrix, Rng};
use crate::propagation::{propagate, PropagationConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w0: DenseMatrix,
    pub b0: Vec<f64>,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(num_features: usize, hidden: usize, num_classes: usize, rng: &mut Rng) -> Self {
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.uniform_range(-limit, limit))
        };
        let w0 = glorot(num_features, hidden);
        let w1 = glorot(hidden, num_classes);
        Self {
            w0,
            b0: vec![0.0; hidden],
            w1,
            b1: vec![0.0; num_classes],
        }
    }

    pub fn zeros(num_features: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            w0: DenseMatrix::zeros(num_features, hidden),
            b0: vec![0.0; hidden],
            w1: DenseMatrix::zeros(hidden, num_classes),
            b1: vec![0.0; num_classes],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b0.len()
    }

    pub fn num_classes(&self) -> usize {
        self.b1.len()
    }

    fn check(&self) -> Result<()> {
        let (f, h) = self.w0.shape();
        if self.b0.len() != h || self.w1.num_rows() != h || self.w1.num_cols() != self.b1.len() {
            return Err(Error::shape(format!(
                "inconsistent MLP parameters: w0 {f}x{h}, b0 {}, w1 {:?}, b1 {}",
                self.b0.len(),
                self.w1.shape(),
                self.b1.len()
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.w0.as_slice().len() + self.b0.len() + self.w1.as_slice().len() + self.b1.len()
    }

    /// All parameters in the order `w0, b0, w1, b1` (weights column-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.w0.as_slice());
        v.extend_from_slice(&self.b0);
        v.extend_from_slice(self.w1.as_slice());
        v.extend_from_slice(&self.b1);
        v
    }

    /// Mutable views in the same order as [`MlpParams::to_flat`].
    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w0.as_mut_slice(),
            &mut self.b0,
            self.w1.as_mut_slice(),
            &mut self.b1,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

fn add_row_bias(m: &mut DenseMatrix, bias: &[f64]) {
    for (col, b) in m.columns_mut().zip(bias) {
        col.iter_mut().for_each(|v| *v += b);
    }
}

fn column_sums(m: &DenseMatrix) -> Vec<f64> {
    m.columns().map(|c| c.iter().sum()).collect()
}

struct ForwardCache {
    pre: DenseMatrix,
    hidden: DenseMatrix,
    out: DenseMatrix,
}

fn forward_cached(
    params: &MlpParams,
    x: &DenseMatrix,
    mask: Option<&DenseMatrix>,
) -> Result<ForwardCache> {
    params.check()?;
    let mut pre = x.matmul(&params.w0)?;
    add_row_bias(&mut pre, &params.b0);
    let mut hidden = pre.map(|v| v.max(0.0));
    if let Some(mask) = mask {
        if mask.shape() != hidden.shape() {
            return Err(Error::shape(format!(
                "dropout mask {:?} does not match hidden layer {:?}",
                mask.shape(),
                hidden.shape()
            )));
        }
        hidden
            .as_mut_slice()
            .iter_mut()
            .zip(mask.as_slice())
            .for_each(|(h, m)| *h *= m);
    }
    let mut out = hidden.matmul(&params.w1)?;
    add_row_bias(&mut out, &params.b1);
    Ok(ForwardCache { pre, hidden, out })
}

/// `ReLU(X·W0 + b0)·W1 + b1`; `mask` multiplies the hidden activation
/// elementwise (inverted dropout: entries are `0` or `1/(1 − d)`).
pub fn forward(
    params: &MlpParams,
    x: &DenseMatrix,
    mask: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    Ok(forward_cached(params, x, mask)?.out)
}

/// Inverted-dropout mask for an `n × hidden` activation.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut Rng) -> DenseMatrix {
    let keep = 1.0 - rate;
    DenseMatrix::from_fn(rows, cols, |_, _| {
        if rng.uniform() < keep {
            1.0 / keep
        } else {
            0.0
        }
    })
}

/// Mean softmax cross-entropy over `rows` and the gradient with respect to
/// the logits (zero outside `rows`).
pub fn cross_entropy(
    logits: &DenseMatrix,
    labels: &[usize],
    rows: &[usize],
) -> Result<(f64, DenseMatrix)> {
    if rows.is_empty() {
        return Err(Error::Dataset(
            "cross-entropy over an empty index set".into(),
        ));
    }
    let c = logits.num_cols();
    let scale = 1.0 / rows.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.num_rows(), c);
    let mut loss = 0.0;
    for &i in rows {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[labels[i]];
        for (j, v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            let target = if j == labels[i] { 1.0 } else { 0.0 };
            grad[(i, j)] = scale * (p - target);
        }
    }
    Ok((loss * scale, grad))
}

fn penalty(params: &MlpParams, weight_decay: f64) -> f64 {
    weight_decay * params.w0.as_slice().iter().map(|v| v * v).sum::<f64>()
}

/// Operator context reused across epochs.
pub(crate) struct Problem<'a> {
    pub dataset: &'a Dataset,
    pub ops: NormalizedOperators,
    pub propagation: PropagationConfig,
}

impl<'a> Problem<'a> {
    pub fn new(dataset: &'a Dataset, propagation: PropagationConfig) -> Result<Self> {
        propagation.validate()?;
        Ok(Self {
            dataset,
            ops: normalize(&dataset.graph),
            propagation,
        })
    }

    pub fn logits(&self, params: &MlpParams) -> Result<DenseMatrix> {
        let h = forward(params, &self.dataset.features, None)?;
        propagate(&self.propagation, &self.ops, &h)
    }

    pub fn loss_and_grad(
        &self,
        params: &MlpParams,
        weight_decay: f64,
        mask: Option<&DenseMatrix>,
    ) -> Result<(f64, MlpParams)> {
        let d = self.dataset;
        if d.splits.train.is_empty() {
            return Err(Error::Dataset("train split is empty".into()));
        }
        let cache = forward_cached(params, &d.features, mask)?;
        let z = propagate(&self.propagation, &self.ops, &cache.out)?;
        let (ce, g_z) = cross_entropy(&z, &d.labels, &d.splits.train)?;
        let g_h = propagate(&self.propagation, &self.ops, &g_z)?;

        let g_w1 = cache.hidden.t_matmul(&g_h)?;
        let g_b1 = column_sums(&g_h);
        let mut g_pre = g_h.matmul_t(&params.w1)?;
        for (idx, g) in g_pre.as_mut_slice().iter_mut().enumerate() {
            let active = cache.pre.as_slice()[idx] > 0.0;
            let m = mask.map_or(1.0, |m| m.as_slice()[idx]);
            *g = if active { *g * m } else { 0.0 };
        }
        let mut g_w0 = d.features.t_matmul(&g_pre)?;
        g_w0.axpy(2.0 * weight_decay, &params.w0)?;
        let g_b0 = column_sums(&g_pre);

        let loss = ce + penalty(params, weight_decay);
        Ok((
            loss,
            MlpParams {
                w0: g_w0,
                b0: g_b0,
                w1: g_w1,
                b1: g_b1,
            },
        ))
    }
}

/// Training loss (cross-entropy on the train split plus the first-layer
/// penalty) and its gradient, without dropout.
pub fn loss_and_grad(
    params: &MlpParams,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(f64, MlpParams)> {
    Problem::new(dataset, cfg.propagation)?.loss_and_grad(
        params,
        cfg.weight_decay_first_layer,
        None,
    )
}

/// Fraction of `indices` whose row argmax equals the label; ties go to the
/// lowest class index.
pub fn accuracy(z: &DenseMatrix, labels: &[usize], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Dataset("accuracy over an empty index set".into()));
    }
    let mut correct = 0;
    for &i in indices {
        if i >= z.num_rows() || i >= labels.len() {
            return Err(Error::Dataset(format!("index {i} out of range")));
        }
        let row = z.row(i);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_sbm, SbmConfig};
    use crate::propagation::Mode;

    fn small_sbm(seed: u64) -> Dataset {
        generate_sbm(&SbmConfig {
            num_nodes: 10,
            num_classes: 2,
            p_in: 0.6,
            p_out: 0.1,
            feature_dim: 3,
            train_per_class: 2,
            seed,
            ..SbmConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let x = DenseMatrix::from_fn(5, 4, |i, j| (i as f64) - (j as f64));
        let p = MlpParams::zeros(4, 3, 2);
        assert_eq!(forward(&p, &x, None).unwrap(), DenseMatrix::zeros(5, 2));
    }

    #[test]
    fn identity_network_passes_nonnegative_input() {
        let x = DenseMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.5);
        let p = MlpParams {
            w0: DenseMatrix::identity(3),
            b0: vec![0.0; 3],
            w1: DenseMatrix::identity(3),
            b1: vec![0.0; 3],
        };
        assert_eq!(forward(&p, &x, None).unwrap(), x);
    }

    #[test]
    fn shape_errors() {
        let p = MlpParams::zeros(4, 3, 2);
        let x = DenseMatrix::zeros(5, 3);
        assert!(matches!(forward(&p, &x, None), Err(Error::Shape(_))));
        let x = DenseMatrix::zeros(5, 4);
        assert!(forward(&p, &x, Some(&DenseMatrix::zeros(5, 2))).is_err());
    }

    #[test]
    fn uniform_logits_loss() {
        let d = small_sbm(1);
        let cfg = TrainConfig::default();
        let (loss, _) = loss_and_grad(&MlpParams::zeros(3, 4, 2), &d, &cfg).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_is_additive() {
        let d = small_sbm(2);
        let p = MlpParams::init(3, 4, 2, &mut Rng::new(5));
        let norm2: f64 = p.w0.as_slice().iter().map(|v| v * v).sum();
        let base = TrainConfig::default();
        let doubled = TrainConfig {
            weight_decay_first_layer: 2.0 * base.weight_decay_first_layer,
            ..base
        };
        let (l1, _) = loss_and_grad(&p, &d, &base).unwrap();
        let (l2, _) = loss_and_grad(&p, &d, &doubled).unwrap();
        assert!((l2 - l1 - base.weight_decay_first_layer * norm2).abs() < 1e-14);
    }

    fn finite_difference_check(d: &Dataset, cfg: &TrainConfig, p: &MlpParams) -> f64 {
        let (_, grad) = loss_and_grad(p, d, cfg).unwrap();
        let analytic = grad.to_flat();
        let step = 1e-6;
        let mut worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let eval = |delta: f64| {
                let mut q = p.clone();
                let mut offset = k;
                for s in q.slices_mut() {
                    if offset < s.len() {
                        s[offset] += delta;
                        break;
                    }
                    offset -= s.len();
                }
                loss_and_grad(&q, d, cfg).unwrap().0
            };
            let fd = (eval(step) - eval(-step)) / (2.0 * step);
            let denom = a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max((fd - a).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = small_sbm(3);
        for (i, prop) in [
            PropagationConfig::gnn_lf(0.2, 0.7).iter(5),
            PropagationConfig::gnn_hf(0.3, 0.5).with_mode(Mode::Closed),
            PropagationConfig::ppnp(0.1),
        ]
        .into_iter()
        .enumerate()
        {
            let cfg = TrainConfig {
                hidden: 4,
                propagation: prop,
                ..TrainConfig::default()
            };
            let p = MlpParams::init(3, 4, 2, &mut Rng::new(i as u64));
            let err = finite_difference_check(&d, &cfg, &p);
            assert!(err <= 1e-4, "{:?}: {err}", prop.model());
        }
    }

    #[test]
    fn accuracy_contract() {
        let labels = vec![0, 1, 2, 1];
        let one_hot = DenseMatrix::from_fn(4, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
        let idx = [0, 1, 2, 3];
        assert_eq!(accuracy(&one_hot, &labels, &idx).unwrap(), 1.0);
        assert_eq!(accuracy(&one_hot.scaled(-1.0), &labels, &idx).unwrap(), 0.0);
        assert_eq!(
            accuracy(&DenseMatrix::zeros(4, 3), &[0, 0, 0, 0], &idx).unwrap(),
            1.0
        );
        assert!(matches!(
            accuracy(&one_hot, &labels, &[]),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn dropout_mask_values() {
        let m = dropout_mask(50, 20, 0.5, &mut Rng::new(0));
        assert!(m.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = m.as_slice().iter().filter(|&&v| v > 0.0).count();
        assert!((400..600).contains(&kept), "{kept}");
    }
}
