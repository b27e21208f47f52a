//! Synthetic smile dataset generator.
//!
//! Sequences are trapezoidal smile-intensity profiles with correlated AU
//! tracks. Class structure: spontaneous smiles rise slowly, hold longer, and
//! co-activate AU06 with AU12; posed smiles rise fast and barely engage
//! AU06. With zero noise the onset rise rates of the two classes occupy
//! disjoint ranges, so a single-feature threshold separates them exactly. A
//! synthetic "deep" per-frame stream (a fixed random projection of the smile
//! and AU tracks) stands in for an external frame encoder.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AUSignalSet, Dataset, Label, SequenceRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureCatalog, FeatureMatrix, DEFAULT_AU_NAMES, DEFAULT_SMILE_NAME};
use crate::series::TimeSeries;
use crate::util::derive_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sequences_per_class: usize,
    pub fps: f64,
    /// Standard deviation of the per-frame Gaussian noise on the smile
    /// track; AU tracks get twice this. 0 disables noise.
    pub noise: f64,
    /// Dimension of the synthetic deep feature stream; 0 disables it.
    pub deep_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sequences_per_class: 100,
            fps: 50.0,
            noise: 0.05,
            deep_dim: 16,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequences_per_class == 0 {
            return Err(Error::InvalidArgument(
                "sequences_per_class must be at least 1".into(),
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Box-Muller standard normal draw.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

struct Profile {
    lead: usize,
    rise: usize,
    hold: usize,
    fall: usize,
    tail: usize,
}

impl Profile {
    fn frames(&self) -> usize {
        self.lead + self.rise + self.hold + self.fall + self.tail
    }

    /// Trapezoid in [0, amp]: flat lead, linear rise, hold, linear fall, tail.
    fn curve(&self, amp: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.frames());
        v.extend(std::iter::repeat(0.0).take(self.lead));
        for i in 0..self.rise {
            v.push(amp * (i + 1) as f64 / self.rise as f64);
        }
        v.extend(std::iter::repeat(amp).take(self.hold));
        for i in 0..self.fall {
            v.push(amp * (1.0 - (i + 1) as f64 / self.fall as f64));
        }
        v.extend(std::iter::repeat(0.0).take(self.tail));
        v
    }
}

fn sample_profile(rng: &mut ChaCha8Rng, label: Label) -> Profile {
    let spontaneous = label == Label::Spontaneous;
    Profile {
        lead: rng.gen_range(5..=15),
        rise: if spontaneous {
            rng.gen_range(40..=55)
        } else {
            rng.gen_range(8..=12)
        },
        hold: if spontaneous {
            rng.gen_range(30..=45)
        } else {
            rng.gen_range(15..=30)
        },
        fall: rng.gen_range(18..=30),
        tail: rng.gen_range(5..=15),
    }
}

/// Generate a labeled dataset of `sequences_per_class` smiles per class.
/// Deterministic per seed; every sequence gets its own subject id.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let deep_catalog = Arc::new(FeatureCatalog::deep(cfg.deep_dim));
    // fixed projection shared by the whole dataset, like a frozen encoder
    let projection: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-projection", 0));
        (0..cfg.deep_dim * 6).map(|_| 0.6 * gaussian(&mut rng)).collect()
    };

    let mut sequences = Vec::with_capacity(cfg.sequences_per_class * 2);
    for i in 0..cfg.sequences_per_class {
        for label in [Label::Posed, Label::Spontaneous] {
            let g = sequences.len() as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-sequence", g));
            let profile = sample_profile(&mut rng, label);
            let n = profile.frames();
            let amp = rng.gen_range(0.8..=1.0);
            let smile_base = profile.curve(amp);

            let au12_gain = 4.0;
            let au06_gain = if label == Label::Spontaneous {
                rng.gen_range(2.5..=3.5)
            } else {
                rng.gen_range(0.2..=0.8)
            };

            fn noisy(
                rng: &mut ChaCha8Rng,
                noise: f64,
                base: &[f64],
                scale: f64,
                sigma: f64,
            ) -> Vec<f64> {
                base.iter()
                    .map(|v| v * scale + sigma * noise * gaussian(rng))
                    .collect()
            }

            let smile = noisy(&mut rng, cfg.noise, &smile_base, 1.0, 1.0);
            let au12 = noisy(&mut rng, cfg.noise, &smile_base, au12_gain, 2.0);
            let au06 = noisy(&mut rng, cfg.noise, &smile_base, au06_gain, 2.0);

            let mut signals: Vec<(String, Vec<f64>)> = Vec::with_capacity(18);
            for name in DEFAULT_AU_NAMES {
                let track = match name {
                    "AU12_r" => au12.clone(),
                    "AU06_r" => au06.clone(),
                    _ => {
                        let base = rng.gen_range(0.1..=0.5);
                        noisy(&mut rng, cfg.noise, &vec![base; n], 1.0, 2.0)
                    }
                };
                signals.push((name.to_string(), track));
            }
            signals.push((DEFAULT_SMILE_NAME.to_string(), smile.clone()));

            let deep = if cfg.deep_dim > 0 {
                Some(deep_stream(
                    cfg,
                    &deep_catalog,
                    &projection,
                    &smile,
                    &au06,
                    &au12,
                    &mut rng,
                )?)
            } else {
                None
            };

            let series = signals
                .into_iter()
                .map(|(name, values)| Ok((name, TimeSeries::from_values(values, cfg.fps)?)))
                .collect::<Result<Vec<_>>>()?;
            let aus = AUSignalSet::new(
                format!("{}_{i:04}", label.as_str()),
                Some(format!("subj_{g:04}")),
                label,
                series,
            )?;
            sequences.push(SequenceRecord { signals: aus, deep });
        }
    }
    Ok(Dataset { sequences })
}

fn deep_stream(
    cfg: &SynthConfig,
    catalog: &Arc<FeatureCatalog>,
    projection: &[f64],
    smile: &[f64],
    au06: &[f64],
    au12: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<FeatureMatrix> {
    let n = smile.len();
    let dim = cfg.deep_dim;
    let mut data = Vec::with_capacity(n * dim);
    for t in 0..n {
        let prev = t.saturating_sub(1);
        let basis = [
            smile[t],
            au06[t] * 0.3,
            au12[t] * 0.3,
            (smile[t] - smile[prev]) * 10.0,
            (au06[t] - au06[prev]) * 3.0,
            (au12[t] - au12[prev]) * 3.0,
        ];
        for j in 0..dim {
            let mut acc = 0.0;
            for (k, b) in basis.iter().enumerate() {
                acc += projection[j * 6 + k] * b;
            }
            data.push((acc + 0.1 * gaussian(rng)).tanh());
        }
    }
    FeatureMatrix::new(data, n, Arc::clone(catalog))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            sequences_per_class: 5,
            ..SynthConfig::default()
        };
        let a = synth_generate(&cfg, 7).unwrap();
        let b = synth_generate(&cfg, 7).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.sequences.iter().zip(&b.sequences) {
            assert_eq!(x.signals.id(), y.signals.id());
            for (name, series) in x.signals.iter() {
                assert_eq!(series.values(), y.signals.signal(name).unwrap().values());
            }
            assert_eq!(
                x.deep.as_ref().unwrap().values(),
                y.deep.as_ref().unwrap().values()
            );
        }
        let c = synth_generate(&cfg, 8).unwrap();
        assert_ne!(
            a.sequences[0].signals.signal("smile_intensity").unwrap().values(),
            c.sequences[0].signals.signal("smile_intensity").unwrap().values()
        );
    }

    #[test]
    fn one_per_class_gives_two_sequences_two_subjects() {
        let cfg = SynthConfig {
            sequences_per_class: 1,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg, 3).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.subjects().len(), 2);
        let (posed, spont, unlabeled) = ds.class_counts();
        assert_eq!((posed, spont, unlabeled), (1, 1, 0));
        assert!(ds.has_deep());
    }

    #[test]
    fn sequences_are_long_enough_for_default_windows() {
        let cfg = SynthConfig {
            sequences_per_class: 20,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg, 11).unwrap();
        for s in &ds.sequences {
            assert!(s.signals.frames() >= 27, "{}", s.signals.frames());
            assert_eq!(s.deep.as_ref().unwrap().frames(), s.signals.frames());
        }
    }

    #[test]
    fn zero_noise_disjoint_rise_rates() {
        let cfg = SynthConfig {
            sequences_per_class: 15,
            noise: 0.0,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg, 5).unwrap();
        // crude per-sequence max first-difference of the smile track
        let mut posed_min = f64::INFINITY;
        let mut spont_max = f64::NEG_INFINITY;
        for s in &ds.sequences {
            let v = s.signals.signal("smile_intensity").unwrap().values();
            let steep = v
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            match s.signals.label() {
                Label::Posed => posed_min = posed_min.min(steep),
                Label::Spontaneous => spont_max = spont_max.max(steep),
                Label::Unlabeled => {}
            }
        }
        assert!(
            spont_max < posed_min,
            "rise rates overlap: spont {spont_max} vs posed {posed_min}"
        );
    }
}
