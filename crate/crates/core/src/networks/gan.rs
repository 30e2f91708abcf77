//! Regression CGAN with optional fuzzy heads.

use log::debug;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    batches, mean_abs_error, EpochRecord, InjectionMode, NetworkParameters, OptimizerSettings,
    TrainingHistory, TwoBranchLayout,
};
use crate::autodiff::{Activation, Tape, Var};
use crate::datasets::{DatasetKind, SplitData};
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzy_forward, FuzzyPartition};
use crate::init;
use crate::optim::Adam;
use crate::seeded_rng;
use crate::tensor::Tensor;

/// Scores are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-7;

/// Output activation of a generator without a fuzzy head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorHead {
    #[default]
    Sigmoid,
    Linear,
}

/// Generator objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `-mean(log D(x, G(x, z)))`.
    #[default]
    NonSaturating,
    /// `mean(log(1 - D(x, G(x, z))))`.
    Saturating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanSpec {
    pub input_dim: usize,
    pub noise_dim: usize,
    /// Width of each pre-concatenation branch.
    pub branch_width: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub injection: InjectionMode,
    pub partition: FuzzyPartition,
    pub generator_optimizer: OptimizerSettings,
    pub discriminator_optimizer: OptimizerSettings,
    pub epochs: usize,
    pub batch_size: usize,
    pub generator_head: GeneratorHead,
    pub generator_loss: GeneratorLoss,
    /// Noise draws averaged per prediction.
    pub noise_draws: usize,
}

impl GanSpec {
    /// Published hyperparameters for `kind`.
    pub fn preset(kind: DatasetKind, injection: InjectionMode) -> Self {
        let small = (vec![50; 5], vec![50; 4]);
        let large = (vec![100, 75, 75, 75, 75, 50], vec![50, 50, 50, 50, 25]);
        let (layers, g_opt, d_opt) = match kind {
            DatasetKind::Abalone => (small, (1e-3, 1e-3), (1e-3, 0.0)),
            DatasetKind::Ailerons => (small, (1e-4, 0.0), (5e-4, 0.0)),
            DatasetKind::Bank => (large, (1e-3, 1e-3), (1e-3, 0.0)),
            DatasetKind::Census => (small, (1e-3, 1e-4), (1e-3, 0.0)),
            DatasetKind::Pumadyn => (large, (1e-3, 1e-3), (1e-3, 1e-3)),
        };
        Self {
            input_dim: kind.features(),
            noise_dim: 1,
            branch_width: 100,
            generator_hidden: layers.0,
            discriminator_hidden: layers.1,
            injection,
            partition: FuzzyPartition::default(),
            generator_optimizer: OptimizerSettings::new(g_opt.0, g_opt.1),
            discriminator_optimizer: OptimizerSettings::new(d_opt.0, d_opt.1),
            epochs: 500,
            batch_size: 100,
            generator_head: GeneratorHead::Sigmoid,
            generator_loss: GeneratorLoss::NonSaturating,
            noise_draws: 1,
        }
    }

    pub fn generator_layout(&self) -> TwoBranchLayout {
        TwoBranchLayout {
            x_dim: self.input_dim,
            cond_dim: self.noise_dim,
            branch_width: self.branch_width,
            hidden: self.generator_hidden.clone(),
            head_width: if self.injection.fuzzy_generator() {
                self.partition.width()
            } else {
                1
            },
            activation: Activation::Elu,
        }
    }

    pub fn discriminator_layout(&self) -> TwoBranchLayout {
        TwoBranchLayout {
            x_dim: self.input_dim,
            cond_dim: 1,
            branch_width: self.branch_width,
            hidden: self.discriminator_hidden.clone(),
            head_width: if self.injection.fuzzy_discriminator() {
                self.partition.width()
            } else {
                1
            },
            activation: Activation::Elu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.noise_dim == 0 || self.branch_width == 0 {
            return Err(Error::Spec("input, noise and branch widths must be at least 1".into()));
        }
        if self.generator_hidden.contains(&0) || self.discriminator_hidden.contains(&0) {
            return Err(Error::Spec("hidden widths must be at least 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.noise_draws == 0 {
            return Err(Error::Spec("epochs, batch size and noise draws must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn build_generator<R: Rng + ?Sized>(spec: &GanSpec, rng: &mut R) -> Result<NetworkParameters> {
    spec.validate()?;
    spec.generator_layout().init(rng)
}

pub fn build_discriminator<R: Rng + ?Sized>(spec: &GanSpec, rng: &mut R) -> Result<NetworkParameters> {
    spec.validate()?;
    spec.discriminator_layout().init(rng)
}

/// `y_hat` for features `x` and noise `z`, as `batch x 1`.
pub fn generator_forward<'t>(
    spec: &GanSpec,
    params: &[Var<'t>],
    x: &Var<'t>,
    z: &Var<'t>,
) -> Result<Var<'t>> {
    let head = spec.generator_layout().forward(params, x, z)?;
    if spec.injection.fuzzy_generator() {
        fuzzy_forward(&head.sigmoid(), &spec.partition)
    } else {
        match spec.generator_head {
            GeneratorHead::Sigmoid => Ok(head.sigmoid()),
            GeneratorHead::Linear => Ok(head),
        }
    }
}

/// Probability that `(x, y)` is a real pair, as `batch x 1`.
pub fn discriminator_forward<'t>(
    spec: &GanSpec,
    params: &[Var<'t>],
    x: &Var<'t>,
    y: &Var<'t>,
) -> Result<Var<'t>> {
    let head = spec.discriminator_layout().forward(params, x, y)?.sigmoid();
    if spec.injection.fuzzy_discriminator() {
        fuzzy_forward(&head, &spec.partition)
    } else {
        Ok(head)
    }
}

fn check_scores(scores: &Var<'_>) -> Result<()> {
    if scores.value().all_finite() {
        Ok(())
    } else {
        Err(Error::domain("gan_losses", "non-finite discriminator score"))
    }
}

fn clamped_log<'t>(v: &Var<'t>) -> Result<Var<'t>> {
    v.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP).ln()
}

/// `-mean(log real) - mean(log(1 - fake))`.
pub fn discriminator_loss<'t>(real: &Var<'t>, fake: &Var<'t>) -> Result<Var<'t>> {
    check_scores(real)?;
    check_scores(fake)?;
    let real_term = clamped_log(real)?.mean_all();
    let fake_term = clamped_log(&fake.one_minus())?.mean_all();
    Ok(real_term.add(&fake_term)?.neg())
}

pub fn generator_loss<'t>(fake: &Var<'t>, kind: GeneratorLoss) -> Result<Var<'t>> {
    check_scores(fake)?;
    match kind {
        GeneratorLoss::NonSaturating => Ok(clamped_log(fake)?.mean_all().neg()),
        GeneratorLoss::Saturating => Ok(clamped_log(&fake.one_minus())?.mean_all()),
    }
}

/// Discriminator and generator losses for one set of scores.
pub fn gan_losses<'t>(
    real: &Var<'t>,
    fake: &Var<'t>,
    kind: GeneratorLoss,
) -> Result<(Var<'t>, Var<'t>)> {
    Ok((discriminator_loss(real, fake)?, generator_loss(fake, kind)?))
}

/// Mean of `draws` generator outputs, each with fresh noise.
pub fn predict<R: Rng + ?Sized>(
    spec: &GanSpec,
    generator: &NetworkParameters,
    x: &Tensor,
    draws: usize,
    rng: &mut R,
) -> Result<Tensor> {
    if draws == 0 {
        return Err(Error::Config("at least one noise draw is required".into()));
    }
    generator.check_layers(&spec.generator_layout().layers())?;
    let mut sum = Tensor::zeros(x.rows(), 1);
    for _ in 0..draws {
        let tape = Tape::new();
        let params = generator.bind(&tape, false);
        let xv = tape.constant(x.clone());
        let z = tape.constant(init::uniform(x.rows(), spec.noise_dim, rng));
        sum.add_assign(&generator_forward(spec, &params, &xv, &z)?.value());
    }
    Ok(sum.map(|v| v / draws as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedGan {
    pub spec: GanSpec,
    pub generator: NetworkParameters,
    pub discriminator: NetworkParameters,
    pub history: TrainingHistory,
}

impl TrainedGan {
    pub fn predict<R: Rng + ?Sized>(&self, x: &Tensor, rng: &mut R) -> Result<Tensor> {
        predict(&self.spec, &self.generator, x, self.spec.noise_draws, rng)
    }
}

/// Seed offset for the evaluation noise stream, kept apart from training.
const EVAL_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Alternating minibatch training: one discriminator step then one
/// generator step per batch. The generator sees no regression loss.
pub fn train_cgan(data: &SplitData, spec: &GanSpec, seed: u64) -> Result<TrainedGan> {
    spec.validate()?;
    if data.features() != spec.input_dim {
        return Err(Error::Spec(format!(
            "spec expects {} features, data has {}",
            spec.input_dim,
            data.features()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut eval_rng = seeded_rng(seed ^ EVAL_STREAM);
    let mut generator = build_generator(spec, &mut rng)?;
    let mut discriminator = build_discriminator(spec, &mut rng)?;
    let mut g_opt = Adam::new(spec.generator_optimizer.adam(), generator.tensors());
    let mut d_opt = Adam::new(spec.discriminator_optimizer.adam(), discriminator.tensors());

    let n = data.train_x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainingHistory::with_capacity(spec.epochs);

    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let (mut d_sum, mut g_sum, mut count) = (0.0, 0.0, 0usize);
        for (batch, idx) in batches(&order, spec.batch_size).enumerate() {
            let diverged = |e: Error| match e {
                Error::Domain { detail, .. } => Error::Diverged {
                    epoch,
                    batch,
                    detail,
                },
                other => other,
            };
            let x = data.train_x.select_rows(idx)?;
            let y = data.train_y.select_rows(idx)?;

            let d_loss = {
                let tape = Tape::new();
                let g_params = generator.bind(&tape, false);
                let d_params = discriminator.bind(&tape, true);
                let xv = tape.constant(x.clone());
                let z = tape.constant(init::uniform(idx.len(), spec.noise_dim, &mut rng));
                let fake = generator_forward(spec, &g_params, &xv, &z)?;
                let real_scores = discriminator_forward(spec, &d_params, &xv, &tape.constant(y))?;
                let fake_scores = discriminator_forward(spec, &d_params, &xv, &fake)?;
                let loss = discriminator_loss(&real_scores, &fake_scores).map_err(diverged)?;
                let grads = loss.backward()?;
                let grads: Vec<Tensor> = d_params.iter().map(|p| grads.wrt(p)).collect();
                d_opt.step(discriminator.tensors_mut(), &grads)?;
                loss.value().item()?
            };

            let g_loss = {
                let tape = Tape::new();
                let g_params = generator.bind(&tape, true);
                let d_params = discriminator.bind(&tape, false);
                let xv = tape.constant(x);
                let z = tape.constant(init::uniform(idx.len(), spec.noise_dim, &mut rng));
                let fake = generator_forward(spec, &g_params, &xv, &z)?;
                let fake_scores = discriminator_forward(spec, &d_params, &xv, &fake)?;
                let loss = generator_loss(&fake_scores, spec.generator_loss).map_err(diverged)?;
                let grads = loss.backward()?;
                let grads: Vec<Tensor> = g_params.iter().map(|p| grads.wrt(p)).collect();
                g_opt.step(generator.tensors_mut(), &grads)?;
                loss.value().item()?
            };

            if !d_loss.is_finite() || !g_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch,
                    detail: format!("d_loss = {d_loss}, g_loss = {g_loss}"),
                });
            }
            d_sum += d_loss;
            g_sum += g_loss;
            count += 1;
        }

        if !generator.all_finite() || !discriminator.all_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: count,
                detail: "non-finite parameter after update".into(),
            });
        }
        let y_hat = predict(spec, &generator, &data.test_x, spec.noise_draws, &mut eval_rng)?;
        let record = EpochRecord {
            epoch,
            loss: g_sum / count as f64,
            discriminator_loss: Some(d_sum / count as f64),
            validation_nmae: mean_abs_error(&y_hat, &data.test_y),
        };
        debug!(
            "cgan epoch {epoch}: d_loss {:.5} g_loss {:.5} val nmae {:.5}",
            d_sum / count as f64,
            record.loss,
            record.validation_nmae
        );
        history.push(record);
    }

    Ok(TrainedGan {
        spec: spec.clone(),
        generator,
        discriminator,
        history,
    })
}
