//! Network definitions and training loops.
//!
//! - [`gan`]: the regression CGAN. The generator maps `(x, z)` to `y_hat`;
//!   the discriminator scores `(x, y)` pairs. Either head can be widened to
//!   `N` outputs and passed through the fuzzy pipeline.
//! - [`dnn`]: the fully connected baseline trained on MSE.
//! - [`checkpoint`]: versioned JSON parameter files.

pub mod checkpoint;
pub mod dnn;
pub mod gan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Tape, Var};
use crate::error::{Error, Result};
use crate::init;
use crate::tensor::Tensor;

pub use checkpoint::Checkpoint;
pub use dnn::{build_dnn, dnn_forward, dnn_predict, train_dnn, DnnSpec, TrainedDnn};
pub use gan::{
    build_discriminator, build_generator, discriminator_forward, discriminator_loss, gan_losses,
    generator_forward, generator_loss, predict, train_cgan, GanSpec, GeneratorHead, GeneratorLoss,
    TrainedGan, LOG_CLAMP,
};

/// Where the fuzzy pipeline is attached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InjectionMode {
    /// Plain CGAN.
    #[default]
    #[serde(rename = "none")]
    None,
    /// Fuzzy head on the generator (regression injection).
    #[serde(rename = "fri")]
    Regression,
    /// Fuzzy head on the discriminator (classification injection).
    #[serde(rename = "fci")]
    Classification,
    /// Both heads fuzzy.
    #[serde(rename = "fdi")]
    Double,
}

impl InjectionMode {
    pub const ALL: [InjectionMode; 4] = [
        InjectionMode::None,
        InjectionMode::Regression,
        InjectionMode::Classification,
        InjectionMode::Double,
    ];

    pub fn fuzzy_generator(&self) -> bool {
        matches!(self, InjectionMode::Regression | InjectionMode::Double)
    }

    pub fn fuzzy_discriminator(&self) -> bool {
        matches!(self, InjectionMode::Classification | InjectionMode::Double)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InjectionMode::None => "none",
            InjectionMode::Regression => "fri",
            InjectionMode::Classification => "fci",
            InjectionMode::Double => "fdi",
        }
    }
}

impl fmt::Display for InjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "plain" => Ok(InjectionMode::None),
            "fri" | "regression" => Ok(InjectionMode::Regression),
            "fci" | "classification" => Ok(InjectionMode::Classification),
            "fdi" | "double" => Ok(InjectionMode::Double),
            other => Err(Error::Config(format!("unknown injection mode {other:?}"))),
        }
    }
}

/// Learning rate and inverse-time decay for one network's Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
    pub decay: f64,
}

impl OptimizerSettings {
    pub fn new(learning_rate: f64, decay: f64) -> Self {
        Self {
            learning_rate,
            decay,
        }
    }

    pub fn adam(&self) -> crate::optim::AdamConfig {
        crate::optim::AdamConfig::new(self.learning_rate, self.decay)
    }
}

/// One fully connected layer: `in x out` weights and a `1 x out` bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub input: usize,
    pub output: usize,
    /// `None` for a linear layer.
    pub activation: Option<Activation>,
    /// Dropout after the activation; 0 disables it.
    pub dropout: f64,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, input: usize, output: usize, activation: Option<Activation>) -> Self {
        Self {
            name: name.into(),
            input,
            output,
            activation,
            dropout: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 {
            return Err(Error::Spec(format!(
                "layer {} has a zero width ({} -> {})",
                self.name, self.input, self.output
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Spec(format!(
                "layer {} dropout {} outside [0, 1)",
                self.name, self.dropout
            )));
        }
        Ok(())
    }

    /// `activation(x W + b)`, without dropout.
    fn apply<'t>(&self, x: &Var<'t>, weight: &Var<'t>, bias: &Var<'t>) -> Result<Var<'t>> {
        let z = x.matmul(weight)?.add(bias)?;
        match self.activation {
            Some(kind) => z.activation(kind),
            None => Ok(z),
        }
    }
}

/// Ordered, named weight and bias tensors of one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkParameters {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl NetworkParameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.names.push(name.into());
        self.tensors.push(tensor);
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    /// Records every tensor on `tape`, tracked when `trainable`.
    pub fn bind<'t>(&self, tape: &'t Tape, trainable: bool) -> Vec<Var<'t>> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    /// Weights and biases for `layers`, with weights from `init_weight` and
    /// zero biases.
    pub(crate) fn for_layers(
        layers: &[LayerSpec],
        mut init_weight: impl FnMut(usize, usize) -> Result<Tensor>,
    ) -> Result<Self> {
        let mut params = Self::new();
        for layer in layers {
            layer.validate()?;
            params.push(format!("{}.weight", layer.name), init_weight(layer.input, layer.output)?);
            params.push(format!("{}.bias", layer.name), Tensor::zeros(1, layer.output));
        }
        Ok(params)
    }

    /// Checks names and shapes against `layers`.
    pub fn check_layers(&self, layers: &[LayerSpec]) -> Result<()> {
        if self.len() != 2 * layers.len() {
            return Err(Error::Spec(format!(
                "expected {} parameter tensors, found {}",
                2 * layers.len(),
                self.len()
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            let w = &self.tensors[2 * i];
            let b = &self.tensors[2 * i + 1];
            if w.shape() != (layer.input, layer.output) || b.shape() != (1, layer.output) {
                return Err(Error::Spec(format!(
                    "layer {} expects {}x{} weights, found {:?} / bias {:?}",
                    layer.name,
                    layer.input,
                    layer.output,
                    w.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }
}

/// Two input branches (features and a conditioning column) concatenated
/// and followed by a dense stack and a linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBranchLayout {
    pub x_dim: usize,
    pub cond_dim: usize,
    pub branch_width: usize,
    pub hidden: Vec<usize>,
    pub head_width: usize,
    pub activation: Activation,
}

impl TwoBranchLayout {
    /// Layers in parameter order: x branch, conditioning branch, hidden
    /// stack, head.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let act = Some(self.activation);
        let mut layers = vec![
            LayerSpec::new("x_branch", self.x_dim, self.branch_width, act),
            LayerSpec::new("cond_branch", self.cond_dim, self.branch_width, act),
        ];
        let mut width = 2 * self.branch_width;
        for (i, &h) in self.hidden.iter().enumerate() {
            layers.push(LayerSpec::new(format!("hidden.{i}"), width, h, act));
            width = h;
        }
        layers.push(LayerSpec::new("head", width, self.head_width, None));
        layers
    }

    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<NetworkParameters> {
        NetworkParameters::for_layers(&self.layers(), |i, o| init::he_normal(i, o, rng))
    }

    /// Raw (pre-activation) head output, `batch x head_width`.
    pub fn forward<'t>(&self, params: &[Var<'t>], x: &Var<'t>, cond: &Var<'t>) -> Result<Var<'t>> {
        let layers = self.layers();
        if params.len() != 2 * layers.len() {
            return Err(Error::Spec(format!(
                "expected {} parameter tensors, found {}",
                2 * layers.len(),
                params.len()
            )));
        }
        let xb = layers[0].apply(x, &params[0], &params[1])?;
        let cb = layers[1].apply(cond, &params[2], &params[3])?;
        let mut h = xb.concat_cols(&cb)?;
        for (i, layer) in layers.iter().enumerate().skip(2) {
            h = layer.apply(&h, &params[2 * i], &params[2 * i + 1])?;
        }
        Ok(h)
    }
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean generator loss (CGAN) or mean training MSE (DNN).
    pub loss: f64,
    /// Mean discriminator loss; absent for the DNN.
    pub discriminator_loss: Option<f64>,
    /// NMAE on the held-out split after the epoch.
    pub validation_nmae: f64,
}

pub type TrainingHistory = Vec<EpochRecord>;

/// Mean absolute difference between two equally shaped tensors.
pub(crate) fn mean_abs_error(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.len() as f64
}

/// Batch boundaries over a shuffled order; the last batch may be short.
pub(crate) fn batches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(batch_size)
}
