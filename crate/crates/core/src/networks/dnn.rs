//! Fully connected regression baseline.

use log::debug;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{batches, mean_abs_error, EpochRecord, LayerSpec, NetworkParameters, OptimizerSettings, TrainingHistory};
use crate::autodiff::{Activation, Tape, Var};
use crate::datasets::SplitData;
use crate::error::{Error, Result};
use crate::init;
use crate::optim::Adam;
use crate::seeded_rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnnSpec {
    pub input_dim: usize,
    /// Hidden widths; a linear 1-wide output layer follows.
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Standard deviation of the normal weight initializer.
    pub init_std: f64,
    pub optimizer: OptimizerSettings,
    pub epochs: usize,
    pub batch_size: usize,
}

impl DnnSpec {
    /// Published baseline: 500-500-500-100-100-50-1, ReLU, dropout after
    /// every hidden activation.
    pub fn preset(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: vec![500, 500, 500, 100, 100, 50],
            dropout: 0.5,
            init_std: 0.05,
            optimizer: OptimizerSettings::new(1e-3, 0.1),
            epochs: 100,
            batch_size: 100,
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut width = self.input_dim;
        for (i, &h) in self.hidden.iter().enumerate() {
            let mut layer = LayerSpec::new(format!("dense.{i}"), width, h, Some(Activation::Relu));
            layer.dropout = self.dropout;
            layers.push(layer);
            width = h;
        }
        layers.push(LayerSpec::new("output", width, 1, None));
        layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Spec("epochs and batch size must be at least 1".into()));
        }
        if self.init_std.is_nan() || self.init_std <= 0.0 {
            return Err(Error::Spec(format!("init std {} must be positive", self.init_std)));
        }
        Ok(())
    }
}

pub fn build_dnn<R: Rng + ?Sized>(spec: &DnnSpec, rng: &mut R) -> Result<NetworkParameters> {
    spec.validate()?;
    NetworkParameters::for_layers(&spec.layers(), |i, o| init::normal(i, o, spec.init_std, rng))
}

/// `batch x 1` prediction. Dropout is active only when `training`.
pub fn dnn_forward<'t, R: Rng + ?Sized>(
    spec: &DnnSpec,
    params: &[Var<'t>],
    x: &Var<'t>,
    training: bool,
    rng: &mut R,
) -> Result<Var<'t>> {
    let layers = spec.layers();
    if params.len() != 2 * layers.len() {
        return Err(Error::Spec(format!(
            "expected {} parameter tensors, found {}",
            2 * layers.len(),
            params.len()
        )));
    }
    let mut h = *x;
    for (i, layer) in layers.iter().enumerate() {
        h = layer.apply(&h, &params[2 * i], &params[2 * i + 1])?;
        if layer.dropout > 0.0 {
            h = h.dropout(layer.dropout, training, rng)?;
        }
    }
    Ok(h)
}

/// Inference-mode prediction.
pub fn dnn_predict(spec: &DnnSpec, params: &NetworkParameters, x: &Tensor) -> Result<Tensor> {
    params.check_layers(&spec.layers())?;
    let tape = Tape::new();
    let p = params.bind(&tape, false);
    let xv = tape.constant(x.clone());
    // dropout is inactive outside training, so this stream is never drawn from
    let mut unused = seeded_rng(0);
    Ok(dnn_forward(spec, &p, &xv, false, &mut unused)?.value())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedDnn {
    pub spec: DnnSpec,
    pub params: NetworkParameters,
    pub history: TrainingHistory,
}

impl TrainedDnn {
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        dnn_predict(&self.spec, &self.params, x)
    }
}

/// Minibatch Adam on mean squared error.
pub fn train_dnn(data: &SplitData, spec: &DnnSpec, seed: u64) -> Result<TrainedDnn> {
    spec.validate()?;
    if data.features() != spec.input_dim {
        return Err(Error::Spec(format!(
            "spec expects {} features, data has {}",
            spec.input_dim,
            data.features()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut params = build_dnn(spec, &mut rng)?;
    let mut opt = Adam::new(spec.optimizer.adam(), params.tensors());
    let mut order: Vec<usize> = (0..data.train_x.rows()).collect();
    let mut history = TrainingHistory::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut count) = (0.0, 0usize);
        for (batch, idx) in batches(&order, spec.batch_size).enumerate() {
            let tape = Tape::new();
            let p = params.bind(&tape, true);
            let x = tape.constant(data.train_x.select_rows(idx)?);
            let y = tape.constant(data.train_y.select_rows(idx)?);
            let y_hat = dnn_forward(spec, &p, &x, true, &mut rng)?;
            let diff = y_hat.sub(&y)?;
            let loss = diff.mul(&diff)?.mean_all();
            let value = loss.value().item()?;
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    detail: format!("mse = {value}"),
                });
            }
            let grads = loss.backward()?;
            let grads: Vec<Tensor> = p.iter().map(|v| grads.wrt(v)).collect();
            opt.step(params.tensors_mut(), &grads)?;
            loss_sum += value;
            count += 1;
        }
        if !params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: count,
                detail: "non-finite parameter after update".into(),
            });
        }
        let y_hat = dnn_predict(spec, &params, &data.test_x)?;
        let record = EpochRecord {
            epoch,
            loss: loss_sum / count as f64,
            discriminator_loss: None,
            validation_nmae: mean_abs_error(&y_hat, &data.test_y),
        };
        debug!(
            "dnn epoch {epoch}: mse {:.6} val nmae {:.5}",
            record.loss, record.validation_nmae
        );
        history.push(record);
    }

    Ok(TrainedDnn {
        spec: spec.clone(),
        params,
        history,
    })
}
