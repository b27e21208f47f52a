//! Late fusion: concatenate the final-branch embeddings of pre-trained
//! models and classify with a single dense sigmoid layer. Only the head is
//! trainable; contributing models are borrowed immutably and never change.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::lstm::sigmoid;
use crate::model::train::{bce_from_logit, TrainConfig, TrainHistory};
use crate::model::{
    DenseLayer, EpochStats, ModelInput, ModelKind, Prediction, SequenceModel, TrainingMeta,
};
use crate::util::{derive_seed, fnv1a64, hash_f64s};

/// Dense sigmoid layer over the concatenated embeddings of the contributing
/// models, in fixed (deep_frame, auda_frame, au_wise, cross_au) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionHead {
    pub layer: DenseLayer,
    /// Contributing model kinds and their embedding dimensions, in
    /// concatenation order.
    pub contributing: Vec<(ModelKind, usize)>,
    pub meta: TrainingMeta,
}

impl FusionHead {
    /// Build a head over the given pre-trained models. Models must be
    /// supplied in fusion order (deep_frame, auda_frame, au_wise, cross_au;
    /// absent kinds skipped) with no duplicates.
    pub fn new(models: &[&SequenceModel], seed: u64) -> Result<Self> {
        check_order(models)?;
        if models.len() < 2 {
            return Err(Error::InvalidArgument(
                "fusion needs at least two contributing models".into(),
            ));
        }
        let contributing: Vec<(ModelKind, usize)> = models
            .iter()
            .map(|m| (m.kind, m.embedding_dim()))
            .collect();
        let input_dim = contributing.iter().map(|(_, d)| d).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "fusion-init", 0));
        Ok(FusionHead {
            layer: DenseLayer::init(input_dim, 1, &mut rng),
            contributing,
            meta: TrainingMeta {
                seed,
                ..TrainingMeta::default()
            },
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer.in_dim
    }

    pub fn param_hash(&self) -> u64 {
        let mut h = fnv1a64(b"fusion");
        for (kind, dim) in &self.contributing {
            h = fnv1a64(&[h.to_le_bytes(), (*dim as u64).to_le_bytes()].concat());
            h = fnv1a64(&[&h.to_le_bytes()[..], kind.name().as_bytes()].concat());
        }
        h = hash_f64s(h, &self.layer.weights);
        hash_f64s(h, &self.layer.bias)
    }

    fn check_models(&self, models: &[&SequenceModel]) -> Result<()> {
        if models.len() != self.contributing.len() {
            return Err(Error::InvalidArgument(format!(
                "fusion head expects {} models, got {}",
                self.contributing.len(),
                models.len()
            )));
        }
        for (model, (kind, dim)) in models.iter().zip(&self.contributing) {
            if model.kind != *kind {
                return Err(Error::InvalidArgument(format!(
                    "expected a {} model in this position, got {}",
                    kind.name(),
                    model.kind.name()
                )));
            }
            if model.embedding_dim() != *dim {
                return Err(Error::InvalidArgument(format!(
                    "{} model embeds into {} dimensions, head expects {dim}",
                    model.kind.name(),
                    model.embedding_dim()
                )));
            }
        }
        Ok(())
    }

    fn concat_embeddings(
        &self,
        models: &[&SequenceModel],
        inputs: &[ModelInput],
    ) -> Result<Vec<f64>> {
        if inputs.len() != models.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs for {} models",
                inputs.len(),
                models.len()
            )));
        }
        let mut z = Vec::with_capacity(self.input_dim());
        for (model, input) in models.iter().zip(inputs) {
            z.extend(model.embed(input)?);
        }
        Ok(z)
    }
}

fn check_order(models: &[&SequenceModel]) -> Result<()> {
    for pair in models.windows(2) {
        if pair[0].kind.fusion_rank() >= pair[1].kind.fusion_rank() {
            return Err(Error::InvalidArgument(format!(
                "models must be in fusion order without duplicates, got {} before {}",
                pair[0].kind.name(),
                pair[1].kind.name()
            )));
        }
    }
    Ok(())
}

/// Fused prediction for one sequence; `inputs` align with the head's
/// contributing models.
pub fn fuse_forward(
    head: &FusionHead,
    models: &[&SequenceModel],
    inputs: &[ModelInput],
) -> Result<Prediction> {
    head.check_models(models)?;
    let z = head.concat_embeddings(models, inputs)?;
    let u = head.layer.forward(&z)[0];
    let p = sigmoid(u);
    if !p.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite fused probability (pre-sigmoid {u})"
        )));
    }
    Ok(Prediction::from_probability(p))
}

/// Train only the head on frozen contributing models. Embeddings are
/// computed once up front; model parameters are untouched by construction.
pub fn train_fusion_head(
    head: &mut FusionHead,
    models: &[&SequenceModel],
    data: &[(Vec<ModelInput>, f64)],
    hp: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    hp.validate()?;
    head.check_models(models)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training dataset".into()));
    }
    let mut embeddings = Vec::with_capacity(data.len());
    let mut targets = Vec::with_capacity(data.len());
    for (inputs, target) in data {
        if !(0.0..=1.0).contains(target) {
            return Err(Error::InvalidArgument(format!(
                "training targets must lie in [0, 1], got {target}"
            )));
        }
        embeddings.push(head.concat_embeddings(models, inputs)?);
        targets.push(*target);
    }

    let epochs = hp.head_epochs.unwrap_or(hp.epochs);
    let lr = hp.learning_rate;
    let dim = head.input_dim();
    let mut vel_w = vec![0.0; dim];
    let mut vel_b = 0.0;
    let mut grad_w = vec![0.0; dim];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "fusion-shuffle", 0));
    let mut history = TrainHistory::default();

    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(hp.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &idx in batch {
                let z = &embeddings[idx];
                let y = targets[idx];
                let u = head.layer.forward(z)[0];
                if !u.is_finite() {
                    return Err(Error::Numeric(format!(
                        "epoch {epoch}: non-finite fusion head activation {u}"
                    )));
                }
                let p = sigmoid(u);
                loss_sum += bce_from_logit(u, y);
                correct += ((p >= 0.5) == (y >= 0.5)) as usize;
                let du = p - y;
                for (g, zk) in grad_w.iter_mut().zip(z) {
                    *g += du * zk;
                }
                grad_b += du;
            }
            let scale = 1.0 / batch.len() as f64;
            for ((w, v), g) in head
                .layer
                .weights
                .iter_mut()
                .zip(vel_w.iter_mut())
                .zip(&grad_w)
            {
                *v = hp.momentum * *v + g * scale;
                *w -= lr * *v;
            }
            vel_b = hp.momentum * vel_b + grad_b * scale;
            head.layer.bias[0] -= lr * vel_b;
        }
        let loss = loss_sum / data.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "fusion head loss became non-finite at epoch {epoch}"
            )));
        }
        history.epochs.push(EpochStats {
            loss,
            accuracy: 100.0 * correct as f64 / data.len() as f64,
        });
    }

    head.meta.epochs_trained += epochs;
    head.meta.hyperparams = Some(hp.clone());
    head.meta.seed = seed;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::{au_vector, cross_vector, deep_matrix, small_config};
    use crate::model::ModelConfig;

    fn four_models() -> Vec<SequenceModel> {
        let cfg = small_config();
        vec![
            SequenceModel::new(ModelKind::DeepFrame, 5, &cfg, 1).unwrap(),
            SequenceModel::new(ModelKind::AudaFrame, 7, &cfg, 2).unwrap(),
            SequenceModel::new(ModelKind::AuWise, 476, &cfg, 3).unwrap(),
            SequenceModel::new(ModelKind::CrossAu, 4352, &cfg, 4).unwrap(),
        ]
    }

    #[test]
    fn default_dims_concatenate_to_256() {
        let cfg = ModelConfig::default();
        let models = vec![
            SequenceModel::new(ModelKind::DeepFrame, 16, &cfg, 1).unwrap(),
            SequenceModel::new(ModelKind::AudaFrame, 144, &cfg, 2).unwrap(),
            SequenceModel::new(ModelKind::AuWise, 476, &cfg, 3).unwrap(),
            SequenceModel::new(ModelKind::CrossAu, 4352, &cfg, 4).unwrap(),
        ];
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let head = FusionHead::new(&refs, 9).unwrap();
        assert_eq!(head.input_dim(), 256);
    }

    #[test]
    fn auda_only_fusion_has_three_streams() {
        let cfg = ModelConfig::default();
        let models = vec![
            SequenceModel::new(ModelKind::AudaFrame, 144, &cfg, 2).unwrap(),
            SequenceModel::new(ModelKind::AuWise, 476, &cfg, 3).unwrap(),
            SequenceModel::new(ModelKind::CrossAu, 4352, &cfg, 4).unwrap(),
        ];
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let head = FusionHead::new(&refs, 9).unwrap();
        assert_eq!(head.input_dim(), 192);
    }

    #[test]
    fn zero_head_predicts_one_half() {
        let models = four_models();
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let mut head = FusionHead::new(&refs, 9).unwrap();
        head.layer.weights.iter_mut().for_each(|w| *w = 0.0);
        head.layer.bias[0] = 0.0;
        let deep = deep_matrix(4, 5, 1);
        let frame = deep_matrix(4, 7, 2);
        // repackage as frame-wise family for the auda_frame model
        let frame = crate::features::FeatureMatrix::new(
            frame.values().to_vec(),
            4,
            std::sync::Arc::new(crate::features::FeatureCatalog {
                family: crate::features::FeatureFamily::FrameWise,
                names: (0..7).map(|i| format!("x{i}")).collect(),
            }),
        )
        .unwrap();
        let au = au_vector(3);
        let cross = cross_vector(4);
        let inputs = vec![
            ModelInput::Frames(&deep),
            ModelInput::Frames(&frame),
            ModelInput::Vector(&au),
            ModelInput::Vector(&cross),
        ];
        let pred = fuse_forward(&head, &refs, &inputs).unwrap();
        assert_eq!(pred.probability, 0.5);
    }

    #[test]
    fn out_of_order_or_duplicate_models_are_rejected() {
        let models = four_models();
        let bad: Vec<&SequenceModel> = vec![&models[1], &models[0]];
        assert!(FusionHead::new(&bad, 9).is_err());
        let dup: Vec<&SequenceModel> = vec![&models[2], &models[2]];
        assert!(FusionHead::new(&dup, 9).is_err());
    }

    #[test]
    fn missing_model_is_rejected_at_forward() {
        let models = four_models();
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let head = FusionHead::new(&refs, 9).unwrap();
        let three: Vec<&SequenceModel> = refs[..3].to_vec();
        let au = au_vector(3);
        let inputs = vec![ModelInput::Vector(&au)];
        assert!(fuse_forward(&head, &three, &inputs).is_err());
    }

    #[test]
    fn head_training_learns_separable_embeddings_and_freezes_models() {
        let cfg = small_config();
        let models = vec![
            SequenceModel::new(ModelKind::AuWise, 6, &cfg, 3).unwrap(),
            SequenceModel::new(ModelKind::CrossAu, 6, &cfg, 4).unwrap(),
        ];
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let hashes: Vec<u64> = refs.iter().map(|m| m.param_hash()).collect();

        let catalog_au = std::sync::Arc::new(crate::features::FeatureCatalog {
            family: crate::features::FeatureFamily::AuWise,
            names: (0..6).map(|i| format!("a{i}")).collect(),
        });
        let catalog_cross = std::sync::Arc::new(crate::features::FeatureCatalog {
            family: crate::features::FeatureFamily::CrossAu,
            names: (0..6).map(|i| format!("c{i}")).collect(),
        });
        let vectors: Vec<(crate::features::FeatureVector, crate::features::FeatureVector, f64)> =
            (0..60)
                .map(|i| {
                    let y = (i % 2) as f64;
                    let shift = if y > 0.5 { 1.2 } else { -1.2 };
                    let mk = |x: f64| vec![shift + 0.1 * x; 6];
                    (
                        crate::features::FeatureVector::new(
                            mk((i % 7) as f64 / 7.0),
                            std::sync::Arc::clone(&catalog_au),
                        )
                        .unwrap(),
                        crate::features::FeatureVector::new(
                            mk((i % 5) as f64 / 5.0),
                            std::sync::Arc::clone(&catalog_cross),
                        )
                        .unwrap(),
                        y,
                    )
                })
                .collect();
        let data: Vec<(Vec<ModelInput>, f64)> = vectors
            .iter()
            .map(|(a, c, y)| (vec![ModelInput::Vector(a), ModelInput::Vector(c)], *y))
            .collect();

        let mut head = FusionHead::new(&refs, 9).unwrap();
        let hp = TrainConfig {
            learning_rate: 0.1,
            epochs: 150,
            ..TrainConfig::default()
        };
        let history = train_fusion_head(&mut head, &refs, &data, &hp, 21).unwrap();
        assert!(
            history.final_accuracy().unwrap() >= 99.0,
            "accuracy {:?}",
            history.final_accuracy()
        );
        // contributing models are bit-identical
        for (m, h) in refs.iter().zip(&hashes) {
            assert_eq!(m.param_hash(), *h);
        }
    }

    #[test]
    fn zero_epochs_leave_the_head_unchanged() {
        let models = four_models();
        let refs: Vec<&SequenceModel> = models.iter().collect();
        let mut head = FusionHead::new(&refs, 9).unwrap();
        let before = head.param_hash();
        let hp = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let au = au_vector(3);
        let cross = cross_vector(4);
        let deep = deep_matrix(4, 5, 1);
        let frame = crate::features::FeatureMatrix::new(
            deep_matrix(4, 7, 2).values().to_vec(),
            4,
            std::sync::Arc::new(crate::features::FeatureCatalog {
                family: crate::features::FeatureFamily::FrameWise,
                names: (0..7).map(|i| format!("x{i}")).collect(),
            }),
        )
        .unwrap();
        let data = vec![(
            vec![
                ModelInput::Frames(&deep),
                ModelInput::Frames(&frame),
                ModelInput::Vector(&au),
                ModelInput::Vector(&cross),
            ],
            1.0,
        )];
        train_fusion_head(&mut head, &refs, &data, &hp, 3).unwrap();
        assert_eq!(head.param_hash(), before);
    }
}
