//! Finite-difference validation of the analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::train::{backprop_sample, bce_from_logit};
use crate::model::{ModelInput, SequenceModel};
use crate::util::derive_seed;

/// Central-difference step.
const STEP: f64 = 1e-5;
/// Entries where both gradients are this small are compared absolutely.
const NEAR_ZERO: f64 = 1e-8;

fn forward_loss(model: &SequenceModel, input: &ModelInput, target: f64) -> Result<f64> {
    let (_, u) = model.forward_raw(input)?;
    Ok(bce_from_logit(u, target))
}

/// Compare analytic gradients against central finite differences on a random
/// subsample of at least `samples` parameters (all of them for small models).
/// Returns the maximum relative error; near-zero entries are compared by
/// absolute error. The model is restored bit-exactly before returning.
pub fn gradient_check(
    model: &mut SequenceModel,
    input: &ModelInput,
    target: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    model.check_input(input)?;
    let layout = model.layout();
    let mut analytic = vec![0.0; layout.total];
    backprop_sample(model, &layout, input, target, &mut analytic)?;

    let mut flat = model.flatten_params();
    let n = flat.len();
    let indices: Vec<usize> = if n <= samples {
        (0..n).collect()
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            "gradient-check",
            0,
        )));
        idx.truncate(samples);
        idx
    };

    let mut max_err = 0.0_f64;
    for &i in &indices {
        let original = flat[i];
        flat[i] = original + STEP;
        model.assign_params(&flat)?;
        let loss_plus = forward_loss(model, input, target)?;
        flat[i] = original - STEP;
        model.assign_params(&flat)?;
        let loss_minus = forward_loss(model, input, target)?;
        flat[i] = original;

        let numeric = (loss_plus - loss_minus) / (2.0 * STEP);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs());
        let err = if denom < NEAR_ZERO {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / denom
        };
        max_err = max_err.max(err);
    }
    model.assign_params(&flat)?;
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureCatalog, FeatureFamily, FeatureMatrix, FeatureVector};
    use crate::model::{ModelConfig, ModelKind};
    use std::sync::Arc;

    fn cfg() -> ModelConfig {
        ModelConfig {
            hidden_dim: 5,
            branch_hidden: 7,
            embedding_dim: 4,
            normalize_inputs: false,
        }
    }

    fn frame_input(family: FeatureFamily, frames: usize, dim: usize) -> FeatureMatrix {
        let catalog = Arc::new(FeatureCatalog {
            family,
            names: (0..dim).map(|i| format!("x{i}")).collect(),
        });
        let mut v = 0.3_f64;
        let data: Vec<f64> = (0..frames * dim)
            .map(|_| {
                v = (v * 1.7 + 0.13).sin();
                v
            })
            .collect();
        FeatureMatrix::new(data, frames, catalog).unwrap()
    }

    fn vector_input(family: FeatureFamily, dim: usize) -> FeatureVector {
        let catalog = Arc::new(FeatureCatalog {
            family,
            names: (0..dim).map(|i| format!("x{i}")).collect(),
        });
        let mut v = 0.7_f64;
        let values: Vec<f64> = (0..dim)
            .map(|_| {
                v = (v * 2.1 + 0.41).sin();
                v
            })
            .collect();
        FeatureVector::new(values, catalog).unwrap()
    }

    #[test]
    fn frame_model_gradients_match_finite_differences() {
        let mut model = SequenceModel::new(ModelKind::AudaFrame, 6, &cfg(), 3).unwrap();
        let m = frame_input(FeatureFamily::FrameWise, 9, 6);
        let err = gradient_check(&mut model, &ModelInput::Frames(&m), 1.0, 250, 7).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn phase_model_gradients_match_finite_differences() {
        let mut model = SequenceModel::new(ModelKind::CrossAu, 12, &cfg(), 3).unwrap();
        let v = vector_input(FeatureFamily::CrossAu, 12);
        let err = gradient_check(&mut model, &ModelInput::Vector(&v), 0.0, 250, 7).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn dead_units_fall_back_to_absolute_comparison() {
        let mut model = SequenceModel::new(ModelKind::AuWise, 8, &cfg(), 3).unwrap();
        // zero the head: every branch gradient dies, leaving near-zero entries
        model.head.weights.iter_mut().for_each(|w| *w = 0.0);
        let v = vector_input(FeatureFamily::AuWise, 8);
        let err = gradient_check(&mut model, &ModelInput::Vector(&v), 1.0, 250, 7).unwrap();
        assert!(err < 1e-4, "max error {err}");
    }

    #[test]
    fn model_is_restored_after_check() {
        let mut model = SequenceModel::new(ModelKind::AuWise, 8, &cfg(), 3).unwrap();
        let before = model.flatten_params();
        let v = vector_input(FeatureFamily::AuWise, 8);
        gradient_check(&mut model, &ModelInput::Vector(&v), 1.0, 50, 7).unwrap();
        assert_eq!(model.flatten_params(), before);
    }
}
