//! Binary cross-entropy training with deterministic minibatch gradient
//! descent plus momentum; backpropagation through time for frame models.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::lstm::{lstm_step_cached, sigmoid, StepCache};
use crate::model::{Layout, ModelInput, Normalizer, SequenceModel};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optional overrides for frame (LSTM) models.
    pub frame_epochs: Option<usize>,
    pub frame_learning_rate: Option<f64>,
    /// Optional override for fusion-head training.
    pub head_epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            epochs: 100,
            frame_epochs: None,
            frame_learning_rate: None,
            head_epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn epochs_for(&self, frame_model: bool) -> usize {
        if frame_model {
            self.frame_epochs.unwrap_or(self.epochs)
        } else {
            self.epochs
        }
    }

    pub(crate) fn lr_for(&self, frame_model: bool) -> f64 {
        if frame_model {
            self.frame_learning_rate.unwrap_or(self.learning_rate)
        } else {
            self.learning_rate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.accuracy)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable binary cross-entropy from the pre-sigmoid activation.
pub(crate) fn bce_from_logit(u: f64, target: f64) -> f64 {
    target * softplus(-u) + (1.0 - target) * softplus(u)
}

/// Forward one sample, accumulate its parameter gradients into `grads`
/// (layout order), and return (loss, correctly classified).
pub(crate) fn backprop_sample(
    model: &SequenceModel,
    layout: &Layout,
    input: &ModelInput,
    target: f64,
    grads: &mut [f64],
) -> Result<(f64, bool)> {
    let frames = input.frames();
    let mut buf = Vec::new();

    struct Tape {
        xs: Vec<f64>,
        hs: Vec<f64>,
        cs: Vec<f64>,
        caches: Vec<StepCache>,
    }

    let (branch_in, tape) = match &model.lstm {
        Some(params) => {
            let hd = params.hidden_dim;
            let id = params.input_dim;
            let mut xs = Vec::with_capacity(frames * id);
            let mut hs = vec![0.0; (frames + 1) * hd];
            let mut cs = vec![0.0; (frames + 1) * hd];
            let mut caches = Vec::with_capacity(frames);
            for t in 0..frames {
                model.normalized_row(input.row(t), &mut buf);
                xs.extend_from_slice(&buf);
                let (h, c, cache) = lstm_step_cached(
                    params,
                    &xs[t * id..(t + 1) * id],
                    &hs[t * hd..(t + 1) * hd],
                    &cs[t * hd..(t + 1) * hd],
                );
                hs[(t + 1) * hd..(t + 2) * hd].copy_from_slice(&h);
                cs[(t + 1) * hd..(t + 2) * hd].copy_from_slice(&c);
                caches.push(cache);
            }
            let final_h = hs[frames * hd..(frames + 1) * hd].to_vec();
            (
                final_h,
                Some(Tape {
                    xs,
                    hs,
                    cs,
                    caches,
                }),
            )
        }
        None => {
            model.normalized_row(input.row(0), &mut buf);
            (buf.clone(), None)
        }
    };

    let (z1, e) = model.branch.forward_cached(&branch_in);
    let u = model.head.forward(&e)[0];
    if !u.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite head activation {u} in a {} model",
            model.kind.name()
        )));
    }
    let p = sigmoid(u);
    let loss = bce_from_logit(u, target);
    let correct = (p >= 0.5) == (target >= 0.5);

    // head
    let du = p - target;
    {
        let gw = &mut grads[layout.head_w.clone()];
        for (g, ek) in gw.iter_mut().zip(&e) {
            *g += du * ek;
        }
        grads[layout.head_b.start] += du;
    }
    let de: Vec<f64> = model.head.weights.iter().map(|w| w * du).collect();

    // final branch, second layer
    let dpre2: Vec<f64> = de.iter().zip(&e).map(|(d, ev)| d * (1.0 - ev * ev)).collect();
    let fc2 = &model.branch.fc2;
    for (r, d) in dpre2.iter().enumerate() {
        let row = layout.fc2_w.start + r * fc2.in_dim;
        let gw = &mut grads[row..row + fc2.in_dim];
        for (g, z) in gw.iter_mut().zip(&z1) {
            *g += d * z;
        }
        grads[layout.fc2_b.start + r] += d;
    }
    let dz1 = fc2.backward_input(&dpre2);

    // first layer
    let dpre1: Vec<f64> = dz1.iter().zip(&z1).map(|(d, z)| d * (1.0 - z * z)).collect();
    let fc1 = &model.branch.fc1;
    for (r, d) in dpre1.iter().enumerate() {
        let row = layout.fc1_w.start + r * fc1.in_dim;
        let gw = &mut grads[row..row + fc1.in_dim];
        for (g, x) in gw.iter_mut().zip(&branch_in) {
            *g += d * x;
        }
        grads[layout.fc1_b.start + r] += d;
    }
    let d_branch_in = fc1.backward_input(&dpre1);

    // backpropagation through time
    if let (Some(params), Some(tape), Some(lstm_layout)) =
        (&model.lstm, tape.as_ref(), layout.lstm.as_ref())
    {
        let hd = params.hidden_dim;
        let id = params.input_dim;
        let mut dh = d_branch_in;
        let mut dc = vec![0.0; hd];
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hd]);
        let mut dh_prev = vec![0.0; hd];
        for t in (0..frames).rev() {
            let cache = &tape.caches[t];
            let h_prev = &tape.hs[t * hd..(t + 1) * hd];
            let c_prev = &tape.cs[t * hd..(t + 1) * hd];
            let x_t = &tape.xs[t * id..(t + 1) * id];
            for h in 0..hd {
                let i = cache.gate_i[h];
                let f = cache.gate_f[h];
                let g = cache.gate_g[h];
                let o = cache.gate_o[h];
                let tc = cache.tanh_c[h];
                let dct = dh[h] * o * (1.0 - tc * tc) + dc[h];
                da[0][h] = dct * g * i * (1.0 - i);
                da[1][h] = dct * c_prev[h] * f * (1.0 - f);
                da[2][h] = dct * i * (1.0 - g * g);
                da[3][h] = dh[h] * tc * o * (1.0 - o);
                dc[h] = dct * f;
            }
            dh_prev.iter_mut().for_each(|v| *v = 0.0);
            for gate in 0..4 {
                let ranges = &lstm_layout.gates[gate];
                let weights_h = &params.gates[gate].w_h;
                for h in 0..hd {
                    let d = da[gate][h];
                    let wx_row = ranges.w_x.start + h * id;
                    let gw = &mut grads[wx_row..wx_row + id];
                    for (g, x) in gw.iter_mut().zip(x_t) {
                        *g += d * x;
                    }
                    let wh_row = ranges.w_h.start + h * hd;
                    let gw = &mut grads[wh_row..wh_row + hd];
                    for (g, hp) in gw.iter_mut().zip(h_prev) {
                        *g += d * hp;
                    }
                    grads[ranges.bias.start + h] += d;
                    let w_row = &weights_h[h * hd..(h + 1) * hd];
                    for (acc, w) in dh_prev.iter_mut().zip(w_row) {
                        *acc += w * d;
                    }
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
    }

    Ok((loss, correct))
}

/// Train a model in place. Deterministic for a fixed seed: initialization
/// happened at model construction, shuffling uses its own derived stream,
/// and batch gradients accumulate in sample order.
pub fn train(
    model: &mut SequenceModel,
    data: &[(ModelInput, f64)],
    hp: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training dataset".into()));
    }
    for (input, target) in data {
        model.check_input(input)?;
        if !(0.0..=1.0).contains(target) {
            return Err(Error::InvalidArgument(format!(
                "training targets must lie in [0, 1], got {target}"
            )));
        }
    }
    if model.normalize && model.normalizer.is_none() {
        let dim = model.input_dim();
        let rows = data
            .iter()
            .flat_map(|(input, _)| (0..input.frames()).map(move |t| input.row(t)));
        model.normalizer = Some(Normalizer::fit(rows, dim));
    }

    let frame_model = model.kind.is_frame();
    let epochs = hp.epochs_for(frame_model);
    let lr = hp.lr_for(frame_model);
    let layout = model.layout();
    let mut velocity = vec![0.0; layout.total];
    let mut grads = vec![0.0; layout.total];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "train-shuffle", 0));
    let mut history = TrainHistory::default();

    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(hp.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &idx in batch {
                let (input, target) = &data[idx];
                let (loss, ok) = backprop_sample(model, &layout, input, *target, &mut grads)
                    .map_err(|e| match e {
                        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}: {m}")),
                        other => other,
                    })?;
                loss_sum += loss;
                correct += ok as usize;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut cursor = 0usize;
            model.for_each_slice_mut(|s| {
                for v in s.iter_mut() {
                    let g = grads[cursor] * scale;
                    velocity[cursor] = hp.momentum * velocity[cursor] + g;
                    *v -= lr * velocity[cursor];
                    cursor += 1;
                }
            });
        }
        let loss = loss_sum / data.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became non-finite at epoch {epoch}"
            )));
        }
        history.epochs.push(EpochStats {
            loss,
            accuracy: 100.0 * correct as f64 / data.len() as f64,
        });
    }

    model.meta.epochs_trained += epochs;
    model.meta.hyperparams = Some(hp.clone());
    model.meta.seed = seed;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureCatalog, FeatureFamily, FeatureVector};
    use crate::model::testutil::deep_matrix;
    use crate::model::{ModelConfig, ModelKind};
    use rand::Rng;
    use std::sync::Arc;

    fn small_vector_dataset(n: usize, dim: usize, seed: u64) -> Vec<(FeatureVector, f64)> {
        let catalog = Arc::new(FeatureCatalog {
            family: FeatureFamily::AuWise,
            names: (0..dim).map(|i| format!("f{i}")).collect(),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as f64;
                let shift = if label > 0.5 { 1.0 } else { -1.0 };
                let values: Vec<f64> = (0..dim)
                    .map(|_| shift + 0.3 * rng.gen_range(-1.0..1.0))
                    .collect();
                (FeatureVector::new(values, Arc::clone(&catalog)).unwrap(), label)
            })
            .collect()
    }

    fn cfg() -> ModelConfig {
        ModelConfig {
            hidden_dim: 6,
            branch_hidden: 10,
            embedding_dim: 5,
            normalize_inputs: true,
        }
    }

    #[test]
    fn separable_vectors_reach_high_accuracy() {
        let data = small_vector_dataset(200, 8, 3);
        let samples: Vec<(ModelInput, f64)> = data
            .iter()
            .map(|(v, y)| (ModelInput::Vector(v), *y))
            .collect();
        let mut model = SequenceModel::new(ModelKind::AuWise, 8, &cfg(), 5).unwrap();
        let hp = TrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &samples, &hp, 17).unwrap();
        assert_eq!(history.epochs.len(), 200);
        assert!(
            history.final_accuracy().unwrap() >= 99.0,
            "accuracy {:?}",
            history.final_accuracy()
        );
    }

    #[test]
    fn zero_learning_rate_is_a_fixed_point() {
        let data = small_vector_dataset(16, 6, 1);
        let samples: Vec<(ModelInput, f64)> = data
            .iter()
            .map(|(v, y)| (ModelInput::Vector(v), *y))
            .collect();
        let mut model = SequenceModel::new(ModelKind::AuWise, 6, &cfg(), 5).unwrap();
        let before = model.flatten_params();
        let hp = TrainConfig {
            learning_rate: 0.0,
            epochs: 7,
            ..TrainConfig::default()
        };
        train(&mut model, &samples, &hp, 2).unwrap();
        assert_eq!(model.flatten_params(), before);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let data = small_vector_dataset(40, 6, 9);
        let samples: Vec<(ModelInput, f64)> = data
            .iter()
            .map(|(v, y)| (ModelInput::Vector(v), *y))
            .collect();
        let hp = TrainConfig {
            learning_rate: 0.02,
            epochs: 15,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = SequenceModel::new(ModelKind::AuWise, 6, &cfg(), 5).unwrap();
            train(&mut model, &samples, &hp, 11).unwrap();
            model.flatten_params()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_dataset_is_invalid() {
        let mut model = SequenceModel::new(ModelKind::AuWise, 6, &cfg(), 5).unwrap();
        let err = train(&mut model, &[], &TrainConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn nan_parameters_surface_as_numeric_failure_naming_the_epoch() {
        let data = small_vector_dataset(8, 6, 1);
        let samples: Vec<(ModelInput, f64)> = data
            .iter()
            .map(|(v, y)| (ModelInput::Vector(v), *y))
            .collect();
        let mut model = SequenceModel::new(ModelKind::AuWise, 6, &cfg(), 5).unwrap();
        model.head.bias[0] = f64::NAN;
        match train(&mut model, &samples, &TrainConfig::default(), 2) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("epoch 0"), "{msg}"),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn frame_model_trains_on_variable_length_sequences() {
        let mats: Vec<(crate::features::FeatureMatrix, f64)> = (0..20)
            .map(|i| {
                let frames = 5 + (i % 4);
                let m = deep_matrix(frames, 4, i as u64);
                (m, (i % 2) as f64)
            })
            .collect();
        let samples: Vec<(ModelInput, f64)> = mats
            .iter()
            .map(|(m, y)| (ModelInput::Frames(m), *y))
            .collect();
        let mut model = SequenceModel::new(ModelKind::DeepFrame, 4, &cfg(), 5).unwrap();
        let hp = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &samples, &hp, 1).unwrap();
        assert_eq!(history.epochs.len(), 3);
        assert!(history.final_loss().unwrap().is_finite());
    }
}
