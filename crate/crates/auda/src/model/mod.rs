//! Sequence classifiers: LSTM models over per-frame features, dense models
//! over phase-wise features, and the late-fusion head, all trained from
//! scratch with gradient-checked backpropagation.

mod dense;
mod fusion;
mod gradcheck;
mod io;
mod lstm;
mod train;

pub use dense::{DenseLayer, FinalBranch};
pub use fusion::{fuse_forward, train_fusion_head, FusionHead};
pub use gradcheck::gradient_check;
pub use io::{load_model, save_fusion_head, save_model, LoadedModel};
pub use lstm::{lstm_step, GateParams, LstmParams, LstmState, GATE_NAMES};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureMatrix, FeatureVector};
use crate::util::{derive_seed, fnv1a64, hash_f64s};

/// Architecture hyperparameters shared by all model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub branch_hidden: usize,
    pub embedding_dim: usize,
    /// Standardize inputs with statistics fitted on the training split.
    pub normalize_inputs: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 64,
            branch_hidden: 128,
            embedding_dim: 64,
            normalize_inputs: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DeepFrame,
    AudaFrame,
    AuWise,
    CrossAu,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::DeepFrame,
        ModelKind::AudaFrame,
        ModelKind::AuWise,
        ModelKind::CrossAu,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::DeepFrame => "deep_frame",
            ModelKind::AudaFrame => "auda_frame",
            ModelKind::AuWise => "au_wise",
            ModelKind::CrossAu => "cross_au",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "deep_frame" => Ok(ModelKind::DeepFrame),
            "auda_frame" => Ok(ModelKind::AudaFrame),
            "au_wise" => Ok(ModelKind::AuWise),
            "cross_au" => Ok(ModelKind::CrossAu),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind '{other}'"
            ))),
        }
    }

    /// Frame kinds run an LSTM over per-frame rows; the others consume one
    /// vector per sequence.
    pub fn is_frame(&self) -> bool {
        matches!(self, ModelKind::DeepFrame | ModelKind::AudaFrame)
    }

    pub fn expected_family(&self) -> FeatureFamily {
        match self {
            ModelKind::DeepFrame => FeatureFamily::Deep,
            ModelKind::AudaFrame => FeatureFamily::FrameWise,
            ModelKind::AuWise => FeatureFamily::AuWise,
            ModelKind::CrossAu => FeatureFamily::CrossAu,
        }
    }

    /// Fixed concatenation rank for fusion.
    pub fn fusion_rank(&self) -> usize {
        match self {
            ModelKind::DeepFrame => 0,
            ModelKind::AudaFrame => 1,
            ModelKind::AuWise => 2,
            ModelKind::CrossAu => 3,
        }
    }
}

/// Classifier output: probability that the smile is spontaneous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub decision: bool,
}

impl Prediction {
    pub fn from_probability(p: f64) -> Self {
        Prediction {
            probability: p,
            decision: p >= 0.5,
        }
    }
}

/// Model input: per-frame rows for frame kinds, one vector otherwise.
#[derive(Debug, Clone, Copy)]
pub enum ModelInput<'a> {
    Frames(&'a FeatureMatrix),
    Vector(&'a FeatureVector),
}

impl<'a> ModelInput<'a> {
    pub fn family(&self) -> FeatureFamily {
        match self {
            ModelInput::Frames(m) => m.family(),
            ModelInput::Vector(v) => v.family(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelInput::Frames(m) => m.dim(),
            ModelInput::Vector(v) => v.len(),
        }
    }

    pub fn frames(&self) -> usize {
        match self {
            ModelInput::Frames(m) => m.frames(),
            ModelInput::Vector(_) => 1,
        }
    }

    pub(crate) fn row(&self, t: usize) -> &'a [f64] {
        match self {
            ModelInput::Frames(m) => m.row(t),
            ModelInput::Vector(v) => v.values(),
        }
    }
}

/// Per-dimension standardization fitted on training data; stored with the
/// model so saved models evaluate identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Normalizer {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        let n = count.max(1) as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, m), v) in var.iter_mut().zip(&mean).zip(row) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(1e-8))
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply_into(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }
}

/// Training provenance kept alongside the parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_trained: usize,
    pub fold: Option<usize>,
    pub hyperparams: Option<TrainConfig>,
}

/// One classification model: optional LSTM, final branch, sigmoid head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub kind: ModelKind,
    pub lstm: Option<LstmParams>,
    pub branch: FinalBranch,
    pub head: DenseLayer,
    pub normalize: bool,
    pub normalizer: Option<Normalizer>,
    pub meta: TrainingMeta,
}

impl SequenceModel {
    pub fn new(kind: ModelKind, input_dim: usize, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        if input_dim == 0 || cfg.hidden_dim == 0 || cfg.branch_hidden == 0 || cfg.embedding_dim == 0
        {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            "model-init",
            kind.fusion_rank() as u64,
        ));
        let (lstm, branch_in) = if kind.is_frame() {
            (
                Some(LstmParams::init(input_dim, cfg.hidden_dim, &mut rng)),
                cfg.hidden_dim,
            )
        } else {
            (None, input_dim)
        };
        Ok(SequenceModel {
            kind,
            lstm,
            branch: FinalBranch::init(branch_in, cfg.branch_hidden, cfg.embedding_dim, &mut rng),
            head: DenseLayer::init(cfg.embedding_dim, 1, &mut rng),
            normalize: cfg.normalize_inputs,
            normalizer: None,
            meta: TrainingMeta {
                seed,
                ..TrainingMeta::default()
            },
        })
    }

    pub fn input_dim(&self) -> usize {
        match &self.lstm {
            Some(l) => l.input_dim,
            None => self.branch.fc1.in_dim,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.branch.embedding_dim()
    }

    pub(crate) fn check_input(&self, input: &ModelInput) -> Result<()> {
        if input.family() != self.kind.expected_family() {
            return Err(Error::InvalidArgument(format!(
                "family mismatch: a {} model cannot consume {} features",
                self.kind.name(),
                input.family().name()
            )));
        }
        if input.dim() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "input dimension {} does not match the {} model's input dimension {}",
                input.dim(),
                self.kind.name(),
                self.input_dim()
            )));
        }
        if self.kind.is_frame() {
            if !matches!(input, ModelInput::Frames(_)) {
                return Err(Error::InvalidArgument(format!(
                    "{} model needs per-frame input rows",
                    self.kind.name()
                )));
            }
            if input.frames() == 0 {
                return Err(Error::InsufficientData(
                    "frame model needs at least one frame".into(),
                ));
            }
        } else if !matches!(input, ModelInput::Vector(_)) {
            return Err(Error::InvalidArgument(format!(
                "{} model consumes one feature vector per sequence",
                self.kind.name()
            )));
        }
        Ok(())
    }

    pub(crate) fn normalized_row(&self, row: &[f64], buf: &mut Vec<f64>) {
        match &self.normalizer {
            Some(nz) => {
                buf.resize(row.len(), 0.0);
                nz.apply_into(row, buf);
            }
            None => {
                buf.clear();
                buf.extend_from_slice(row);
            }
        }
    }

    /// Embedding and pre-sigmoid head activation.
    pub(crate) fn forward_raw(&self, input: &ModelInput) -> Result<(Vec<f64>, f64)> {
        self.check_input(input)?;
        let mut buf = Vec::new();
        let branch_in: Vec<f64> = match &self.lstm {
            Some(params) => {
                let mut state = LstmState::zeros(params.hidden_dim);
                for t in 0..input.frames() {
                    self.normalized_row(input.row(t), &mut buf);
                    let (h, c, _) = lstm::lstm_step_cached(params, &buf, &state.hidden, &state.cell);
                    state.hidden = h;
                    state.cell = c;
                }
                state.hidden
            }
            None => {
                self.normalized_row(input.row(0), &mut buf);
                buf.clone()
            }
        };
        let (_, embedding) = self.branch.forward_cached(&branch_in);
        let u = self.head.forward(&embedding)[0];
        Ok((embedding, u))
    }

    /// Run the model on one sequence, returning the final-branch embedding
    /// and the genuineness prediction.
    pub fn forward(&self, input: &ModelInput) -> Result<(Vec<f64>, Prediction)> {
        let (embedding, u) = self.forward_raw(input)?;
        let p = lstm::sigmoid(u);
        if !p.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite probability from the {} model on a {}-frame input",
                self.kind.name(),
                input.frames()
            )));
        }
        Ok((embedding, Prediction::from_probability(p)))
    }

    /// Final-branch embedding only (the fusion input).
    pub fn embed(&self, input: &ModelInput) -> Result<Vec<f64>> {
        Ok(self.forward_raw(input)?.0)
    }

    pub(crate) fn layout(&self) -> Layout {
        let mut cursor = 0usize;
        let mut take = |len: usize| -> Range<usize> {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let lstm = self.lstm.as_ref().map(|l| LstmLayout {
            gates: std::array::from_fn(|g| GateRanges {
                w_x: take(l.gates[g].w_x.len()),
                w_h: take(l.gates[g].w_h.len()),
                bias: take(l.gates[g].bias.len()),
            }),
        });
        let fc1_w = take(self.branch.fc1.weights.len());
        let fc1_b = take(self.branch.fc1.bias.len());
        let fc2_w = take(self.branch.fc2.weights.len());
        let fc2_b = take(self.branch.fc2.bias.len());
        let head_w = take(self.head.weights.len());
        let head_b = take(self.head.bias.len());
        Layout {
            lstm,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            head_w,
            head_b,
            total: cursor,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    fn for_each_slice(&self, mut f: impl FnMut(&[f64])) {
        if let Some(l) = &self.lstm {
            for g in &l.gates {
                f(&g.w_x);
                f(&g.w_h);
                f(&g.bias);
            }
        }
        f(&self.branch.fc1.weights);
        f(&self.branch.fc1.bias);
        f(&self.branch.fc2.weights);
        f(&self.branch.fc2.bias);
        f(&self.head.weights);
        f(&self.head.bias);
    }

    pub(crate) fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        if let Some(l) = &mut self.lstm {
            for g in &mut l.gates {
                f(&mut g.w_x);
                f(&mut g.w_h);
                f(&mut g.bias);
            }
        }
        f(&mut self.branch.fc1.weights);
        f(&mut self.branch.fc1.bias);
        f(&mut self.branch.fc2.weights);
        f(&mut self.branch.fc2.bias);
        f(&mut self.head.weights);
        f(&mut self.head.bias);
    }

    /// All parameters in the canonical layout order.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.for_each_slice(|s| flat.extend_from_slice(s));
        flat
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters cannot fill a model of {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut cursor = 0usize;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&flat[cursor..cursor + s.len()]);
            cursor += s.len();
        });
        Ok(())
    }

    /// Fingerprint over kind, parameters, and normalizer.
    pub fn param_hash(&self) -> u64 {
        let mut h = fnv1a64(self.kind.name().as_bytes());
        h = hash_f64s(h, &self.flatten_params());
        if let Some(nz) = &self.normalizer {
            h = hash_f64s(h, &nz.mean);
            h = hash_f64s(h, &nz.std);
        }
        h
    }
}

pub(crate) struct GateRanges {
    pub w_x: Range<usize>,
    pub w_h: Range<usize>,
    pub bias: Range<usize>,
}

pub(crate) struct LstmLayout {
    pub gates: [GateRanges; 4],
}

/// Flat index ranges of every parameter block, in canonical order.
pub(crate) struct Layout {
    pub lstm: Option<LstmLayout>,
    pub fc1_w: Range<usize>,
    pub fc1_b: Range<usize>,
    pub fc2_w: Range<usize>,
    pub fc2_b: Range<usize>,
    pub head_w: Range<usize>,
    pub head_b: Range<usize>,
    pub total: usize,
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn zero_head_predicts_one_half() {
        let mut model =
            SequenceModel::new(ModelKind::AuWise, 476, &ModelConfig::default(), 3).unwrap();
        model.head.weights.iter_mut().for_each(|w| *w = 0.0);
        model.head.bias[0] = 0.0;
        let v = au_vector(1);
        let (_, pred) = model.forward(&ModelInput::Vector(&v)).unwrap();
        assert_eq!(pred.probability, 0.5);
        assert!(pred.decision);
    }

    #[test]
    fn au_wise_model_rejects_cross_au_features() {
        let model =
            SequenceModel::new(ModelKind::AuWise, 476, &ModelConfig::default(), 3).unwrap();
        let good = au_vector(1);
        assert!(model.forward(&ModelInput::Vector(&good)).is_ok());
        let bad = cross_vector(1);
        match model.forward(&ModelInput::Vector(&bad)) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("family"), "{msg}"),
            other => panic!("expected family mismatch, got {other:?}"),
        }
    }

    #[test]
    fn single_frame_forward_composes_from_parts() {
        let cfg = small_config();
        let model = SequenceModel::new(ModelKind::DeepFrame, 5, &cfg, 11).unwrap();
        let m = deep_matrix(1, 5, 2);
        let (embedding, pred) = model.forward(&ModelInput::Frames(&m)).unwrap();

        // manual composition: one LSTM step from zeros, then branch and head
        let params = model.lstm.as_ref().unwrap();
        let state = lstm_step(m.row(0), &LstmState::zeros(cfg.hidden_dim), params).unwrap();
        let e = model.branch.forward(&state.hidden);
        let u = model.head.forward(&e)[0];
        let p = 1.0 / (1.0 + (-u).exp());
        assert_eq!(embedding, e);
        assert!((pred.probability - p).abs() < 1e-15);
    }

    #[test]
    fn flatten_assign_round_trip() {
        let model =
            SequenceModel::new(ModelKind::AudaFrame, 7, &small_config(), 5).unwrap();
        let flat = model.flatten_params();
        assert_eq!(flat.len(), model.param_count());
        let mut other =
            SequenceModel::new(ModelKind::AudaFrame, 7, &small_config(), 99).unwrap();
        assert_ne!(other.flatten_params(), flat);
        other.assign_params(&flat).unwrap();
        assert_eq!(other.flatten_params(), flat);
        assert_eq!(other.param_hash(), model.param_hash());
        assert!(other.assign_params(&flat[1..]).is_err());
    }

    #[test]
    fn variable_sequence_lengths_are_accepted() {
        let model =
            SequenceModel::new(ModelKind::DeepFrame, 5, &small_config(), 11).unwrap();
        for frames in [1, 2, 17, 60] {
            let m = deep_matrix(frames, 5, 3);
            let (_, pred) = model.forward(&ModelInput::Frames(&m)).unwrap();
            assert!(pred.probability.is_finite());
            assert!((0.0..=1.0).contains(&pred.probability));
        }
    }

    #[test]
    fn normalizer_statistics() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 10.0], vec![3.0, 10.0]];
        let nz = Normalizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(nz.mean, vec![2.0, 10.0]);
        assert!((nz.std[0] - 1.0).abs() < 1e-12);
        assert_eq!(nz.std[1], 1e-8); // floored for constant columns
        let mut out = vec![0.0; 2];
        nz.apply_into(&[3.0, 10.0], &mut out);
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert_eq!(out[1], 0.0);
    }
}
