//! The handcrafted feature families: frame-wise descriptor rows, per-AU
//! per-phase statistics, and per-AU-pair per-phase relational statistics.
//!
//! All extraction is name-keyed against the configuration, so the order in
//! which signals arrive never affects a feature's value, and every output is
//! audited against its catalog for length and finiteness.

mod catalog;

pub use catalog::{
    feature_catalog, FeatureCatalog, FeatureConfig, FeatureFamily, DEFAULT_AU_NAMES,
    DEFAULT_SMILE_NAME,
};

use std::sync::Arc;

use crate::data::AUSignalSet;
use crate::dynamics::{extrema_timing, pairwise_delta_diff, pearson, DynamicsBundle};
use crate::error::{Error, Result};
use crate::phase::{phase_slice, segment_phases, PhaseKind, PhaseSegmentation};

/// One sequence-level feature vector with its catalog.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    values: Vec<f64>,
    catalog: Arc<FeatureCatalog>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, catalog: Arc<FeatureCatalog>) -> Result<Self> {
        if values.len() != catalog.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a catalog of {} names",
                values.len(),
                catalog.len()
            )));
        }
        Ok(FeatureVector { values, catalog })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn catalog(&self) -> &Arc<FeatureCatalog> {
        &self.catalog
    }

    pub fn family(&self) -> FeatureFamily {
        self.catalog.family
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.catalog.index_of(name).map(|i| self.values[i])
    }
}

/// Per-frame feature rows (frames x catalog dimension, row-major).
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    frames: usize,
    catalog: Arc<FeatureCatalog>,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, frames: usize, catalog: Arc<FeatureCatalog>) -> Result<Self> {
        if data.len() != frames * catalog.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot form {} rows of dimension {}",
                data.len(),
                frames,
                catalog.len()
            )));
        }
        Ok(FeatureMatrix {
            data,
            frames,
            catalog,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.catalog.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.data[t * d..(t + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim().max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn catalog(&self) -> &Arc<FeatureCatalog> {
        &self.catalog
    }

    pub fn family(&self) -> FeatureFamily {
        self.catalog.family
    }
}

/// All handcrafted features of one sequence plus the phase segmentation
/// they were computed under.
#[derive(Debug, Clone)]
pub struct SequenceFeatures {
    pub frame_wise: FeatureMatrix,
    pub au_wise: FeatureVector,
    pub cross_au: FeatureVector,
    pub segmentation: PhaseSegmentation,
}

/// Reusable extractor: catalogs are built once per configuration and shared
/// across sequences.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    frame_catalog: Arc<FeatureCatalog>,
    au_catalog: Arc<FeatureCatalog>,
    cross_catalog: Arc<FeatureCatalog>,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let frame_catalog = Arc::new(FeatureCatalog::frame_wise(&cfg)?);
        let au_catalog = Arc::new(FeatureCatalog::au_wise(&cfg)?);
        let cross_catalog = Arc::new(FeatureCatalog::cross_au(&cfg)?);
        Ok(FeatureExtractor {
            cfg,
            frame_catalog,
            au_catalog,
            cross_catalog,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn frame_catalog(&self) -> &Arc<FeatureCatalog> {
        &self.frame_catalog
    }

    pub fn au_catalog(&self) -> &Arc<FeatureCatalog> {
        &self.au_catalog
    }

    pub fn cross_catalog(&self) -> &Arc<FeatureCatalog> {
        &self.cross_catalog
    }

    fn check_length(&self, aus: &AUSignalSet) -> Result<()> {
        let need = self.cfg.largest_window();
        if aus.frames() < need {
            return Err(Error::InsufficientData(format!(
                "sequence '{}' has {} frames, need at least the largest window {need}",
                aus.id(),
                aus.frames()
            )));
        }
        Ok(())
    }

    fn bundle_for(&self, aus: &AUSignalSet, name: &str) -> Result<DynamicsBundle> {
        let series = aus.signal(name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "sequence '{}' is missing signal '{name}'",
                aus.id()
            ))
        })?;
        DynamicsBundle::compute(series, &self.cfg.windows)
    }

    /// Phase segmentation from the smile-intensity dynamics.
    pub fn segment(&self, aus: &AUSignalSet) -> Result<PhaseSegmentation> {
        self.check_length(aus)?;
        let smile = aus.signal(&self.cfg.smile_name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "sequence '{}' is missing smile signal '{}'",
                aus.id(),
                self.cfg.smile_name
            ))
        })?;
        let bundle = DynamicsBundle::compute(smile, &self.cfg.windows)?;
        segment_phases(&bundle, smile, &self.cfg.phase)
    }

    /// Extract all three families, computing each signal's dynamics once.
    pub fn extract(&self, aus: &AUSignalSet) -> Result<SequenceFeatures> {
        self.check_length(aus)?;
        let segmentation = self.segment(aus)?;
        let au_bundles = self
            .cfg
            .au_names
            .iter()
            .map(|name| Ok((name.as_str(), self.bundle_for(aus, name)?)))
            .collect::<Result<Vec<_>>>()?;
        let frame_wise = self.assemble_frame_wise(aus, &au_bundles)?;
        let au_wise = self.assemble_au_wise(aus, &au_bundles, &segmentation)?;
        let cross_au = self.assemble_cross_au(aus, &au_bundles, &segmentation)?;
        Ok(SequenceFeatures {
            frame_wise,
            au_wise,
            cross_au,
            segmentation,
        })
    }

    pub fn frame_wise(&self, aus: &AUSignalSet) -> Result<FeatureMatrix> {
        self.check_length(aus)?;
        let bundles = self
            .cfg
            .au_names
            .iter()
            .map(|name| Ok((name.as_str(), self.bundle_for(aus, name)?)))
            .collect::<Result<Vec<_>>>()?;
        self.assemble_frame_wise(aus, &bundles)
    }

    pub fn au_wise(&self, aus: &AUSignalSet, phases: &PhaseSegmentation) -> Result<FeatureVector> {
        self.check_length(aus)?;
        let bundles = self
            .cfg
            .au_names
            .iter()
            .map(|name| Ok((name.as_str(), self.bundle_for(aus, name)?)))
            .collect::<Result<Vec<_>>>()?;
        self.assemble_au_wise(aus, &bundles, phases)
    }

    pub fn cross_au(&self, aus: &AUSignalSet, phases: &PhaseSegmentation) -> Result<FeatureVector> {
        self.check_length(aus)?;
        let bundles = self
            .cfg
            .au_names
            .iter()
            .map(|name| Ok((name.as_str(), self.bundle_for(aus, name)?)))
            .collect::<Result<Vec<_>>>()?;
        self.assemble_cross_au(aus, &bundles, phases)
    }

    fn assemble_frame_wise(
        &self,
        aus: &AUSignalSet,
        au_bundles: &[(&str, DynamicsBundle)],
    ) -> Result<FeatureMatrix> {
        let n = aus.frames();
        let smile_bundle = if self.cfg.include_smile_frame_wise {
            Some(self.bundle_for(aus, &self.cfg.smile_name)?)
        } else {
            None
        };
        let mut columns: Vec<(&str, &DynamicsBundle)> = au_bundles
            .iter()
            .map(|(name, b)| (*name, b))
            .collect();
        if let Some(b) = smile_bundle.as_ref() {
            columns.push((self.cfg.smile_name.as_str(), b));
        }

        let dim = self.frame_catalog.len();
        let mut data = Vec::with_capacity(n * dim);
        for t in 0..n {
            for (name, bundle) in &columns {
                let series = aus.signal(name).expect("checked above");
                data.push(series.values()[t]);
                for w in &self.cfg.windows {
                    let track = bundle.track(*w).expect("bundle holds configured windows");
                    data.push(track.slope[t]);
                    data.push(track.coeff[t]);
                    data.push(track.adjusted[t]);
                }
                data.push(bundle.second_order().slope[t]);
            }
        }
        let matrix = FeatureMatrix::new(data, n, Arc::clone(&self.frame_catalog))?;
        audit_finite(matrix.values(), &matrix.catalog, Some(matrix.frames))?;
        Ok(matrix)
    }

    fn assemble_au_wise(
        &self,
        aus: &AUSignalSet,
        au_bundles: &[(&str, DynamicsBundle)],
        phases: &PhaseSegmentation,
    ) -> Result<FeatureVector> {
        let n = aus.frames();
        let mut values = Vec::with_capacity(self.au_catalog.len());
        for kind in PhaseKind::ALL {
            let interval = phases.phase(kind);
            for (name, bundle) in au_bundles {
                let series = aus.signal(name).expect("checked above");
                let adj = phase_slice(&bundle.smallest().adjusted, interval)?;
                let accel = phase_slice(&bundle.second_order().slope, interval)?;
                let vals = phase_slice(series.values(), interval)?;
                values.push(mean(adj));
                values.push(max_or_zero(adj));
                values.push(min_or_zero(adj));
                values.push(mean(accel));
                values.push(mean(vals));
                values.push(amplitude(vals));
                values.push(interval.len() as f64 / n as f64);
            }
        }
        let vector = FeatureVector::new(values, Arc::clone(&self.au_catalog))?;
        audit_finite(vector.values(), &vector.catalog, None)?;
        Ok(vector)
    }

    fn assemble_cross_au(
        &self,
        aus: &AUSignalSet,
        au_bundles: &[(&str, DynamicsBundle)],
        phases: &PhaseSegmentation,
    ) -> Result<FeatureVector> {
        let fps = aus.fps();
        let lookup = |name: &str| -> &DynamicsBundle {
            &au_bundles
                .iter()
                .find(|(n, _)| *n == name)
                .expect("pair names come from the same config")
                .1
        };
        let pairs = self.cfg.au_pairs();
        // full-track |δ_a - δ_b| once per pair, sliced per phase below
        let ddiffs = pairs
            .iter()
            .map(|(a, b)| {
                pairwise_delta_diff(&lookup(a).smallest().slope, &lookup(b).smallest().slope)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut values = Vec::with_capacity(self.cross_catalog.len());
        for kind in PhaseKind::ALL {
            let interval = phases.phase(kind);
            for (pair_idx, (a, b)) in pairs.iter().enumerate() {
                let ta = lookup(a);
                let tb = lookup(b);
                let ddiff = phase_slice(&ddiffs[pair_idx], interval)?;
                let slope_a = phase_slice(&ta.smallest().slope, interval)?;
                let slope_b = phase_slice(&tb.smallest().slope, interval)?;
                let adj_a = phase_slice(&ta.smallest().adjusted, interval)?;
                let adj_b = phase_slice(&tb.smallest().adjusted, interval)?;
                values.push(mean(ddiff));
                values.push(max_or_zero(ddiff));
                values.push(std_pop(ddiff));
                values.push(pearson(slope_a, slope_b));
                if adj_a.is_empty() {
                    values.push(0.0);
                    values.push(0.0);
                } else {
                    let et = extrema_timing(adj_a, adj_b, fps)?;
                    values.push(et.rise_lag);
                    values.push(et.fall_lag);
                }
                values.push(max_or_zero(adj_a) - max_or_zero(adj_b));
                values.push(min_or_zero(adj_a) - min_or_zero(adj_b));
            }
        }
        let vector = FeatureVector::new(values, Arc::clone(&self.cross_catalog))?;
        audit_finite(vector.values(), &vector.catalog, None)?;
        Ok(vector)
    }
}

/// Frame-wise descriptor rows of one sequence.
pub fn frame_wise_features(aus: &AUSignalSet, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    FeatureExtractor::new(cfg.clone())?.frame_wise(aus)
}

/// Per-AU, per-phase statistics of one sequence.
pub fn au_wise_features(
    aus: &AUSignalSet,
    phases: &PhaseSegmentation,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    FeatureExtractor::new(cfg.clone())?.au_wise(aus, phases)
}

/// Per-AU-pair, per-phase relational statistics of one sequence.
pub fn cross_au_features(
    aus: &AUSignalSet,
    phases: &PhaseSegmentation,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    FeatureExtractor::new(cfg.clone())?.cross_au(aus, phases)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn max_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn min_or_zero(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

fn amplitude(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        max_or_zero(xs) - min_or_zero(xs)
    }
}

/// Population standard deviation (divide by n); 0 for empty slices.
fn std_pop(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.max(0.0).sqrt()
}

fn audit_finite(values: &[f64], catalog: &FeatureCatalog, frames: Option<usize>) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            let d = catalog.len();
            let name = &catalog.names[i % d];
            let at = match frames {
                Some(_) => format!(" at frame {}", i / d),
                None => String::new(),
            };
            return Err(Error::Numeric(format!(
                "non-finite value {v} for feature '{name}'{at}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AUSignalSet, Label};
    use crate::phase::FrameInterval;
    use crate::series::TimeSeries;

    const FPS: f64 = 50.0;

    fn set_with(n: usize, overrides: &[(&str, Vec<f64>)]) -> AUSignalSet {
        let cfg = FeatureConfig::default();
        let mut signals = Vec::new();
        for name in cfg.frame_signals() {
            let values = overrides
                .iter()
                .find(|(o, _)| *o == name)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| vec![0.0; n]);
            signals.push((name, TimeSeries::from_values(values, FPS).unwrap()));
        }
        AUSignalSet::new("test".into(), None, Label::Unlabeled, signals).unwrap()
    }

    fn global_only(n: usize) -> PhaseSegmentation {
        PhaseSegmentation {
            onset: FrameInterval::EMPTY,
            apex: FrameInterval::EMPTY,
            offset: FrameInterval::EMPTY,
            global_phase: FrameInterval::new(0, n),
        }
    }

    fn trapezoid(n: usize, rise: usize, plateau: usize, fall: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        for i in 0..rise {
            v.push(i as f64 / rise as f64);
        }
        v.extend(std::iter::repeat(1.0).take(plateau));
        for i in 0..fall {
            v.push(1.0 - (i + 1) as f64 / fall as f64);
        }
        v.resize(n, 0.0);
        v
    }

    #[test]
    fn default_dimensions_are_audited() {
        let n = 60;
        let aus = set_with(n, &[]);
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let feats = ext.extract(&aus).unwrap();
        assert_eq!(feats.frame_wise.dim(), 144);
        assert_eq!(feats.frame_wise.frames(), n);
        assert_eq!(feats.au_wise.len(), 476);
        assert_eq!(feats.cross_au.len(), 4352);
    }

    #[test]
    fn all_zero_signals_produce_all_zero_features() {
        let aus = set_with(40, &[]);
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let feats = ext.extract(&aus).unwrap();
        assert!(feats.frame_wise.values().iter().all(|v| *v == 0.0));
        assert!(feats.au_wise.values().iter().all(|v| v.is_finite()));
        assert!(feats.cross_au.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ramp_signal_owns_the_nonzero_columns() {
        let n = 60;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 * 0.02).collect();
        let aus = set_with(n, &[("AU12_r", ramp)]);
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let m = ext.frame_wise(&aus).unwrap();
        let cat = m.catalog();
        let slope_col = cat.index_of("AU12_r.slope_w9").unwrap();
        let value_col = cat.index_of("AU12_r.value").unwrap();
        for t in 0..n {
            let row = m.row(t);
            for (i, v) in row.iter().enumerate() {
                let name = &cat.names[i];
                if name.starts_with("AU12_r.") {
                    continue;
                }
                assert_eq!(*v, 0.0, "column '{name}' should be zero at frame {t}");
            }
            assert!((row[slope_col] - 0.02 * FPS).abs() < 1e-9);
            if t > 0 {
                assert!(row[value_col] > 0.0);
            }
        }
    }

    #[test]
    fn trapezoid_au_has_positive_onset_and_negative_offset_dynamics() {
        let n = 150;
        let shape = trapezoid(n, 50, 50, 50);
        let aus = set_with(
            n,
            &[
                ("AU06_r", shape.clone()),
                ("smile_intensity", shape.clone()),
            ],
        );
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let feats = ext.extract(&aus).unwrap();
        let onset_mean = feats.au_wise.get("AU06_r.onset.adj_mean_w9").unwrap();
        let offset_mean = feats.au_wise.get("AU06_r.offset.adj_mean_w9").unwrap();
        assert!(onset_mean > 0.0, "onset mean {onset_mean}");
        assert!(offset_mean < 0.0, "offset mean {offset_mean}");
        // phases were actually detected
        assert!(!feats.segmentation.onset.is_empty());
        assert!(!feats.segmentation.offset.is_empty());
    }

    #[test]
    fn identical_pair_collapses_relational_descriptors() {
        let n = 80;
        let bump: Vec<f64> = (0..n)
            .map(|i| (-((i as f64 - 40.0) / 8.0).powi(2)).exp())
            .collect();
        let cfg = FeatureConfig {
            au_names: vec!["AU06_r".into(), "AU12_r".into()],
            ..FeatureConfig::default()
        };
        let mut signals = vec![
            (
                "AU06_r".to_string(),
                TimeSeries::from_values(bump.clone(), FPS).unwrap(),
            ),
            (
                "AU12_r".to_string(),
                TimeSeries::from_values(bump, FPS).unwrap(),
            ),
            (
                "smile_intensity".to_string(),
                TimeSeries::from_values(vec![0.0; n], FPS).unwrap(),
            ),
        ];
        signals.rotate_left(1);
        let aus = AUSignalSet::new("dup".into(), None, Label::Unlabeled, signals).unwrap();
        let ext = FeatureExtractor::new(cfg).unwrap();
        let v = ext.cross_au(&aus, &global_only(n)).unwrap();
        assert_eq!(v.get("AU06_r-AU12_r.global.ddiff_mean_w9").unwrap(), 0.0);
        assert_eq!(v.get("AU06_r-AU12_r.global.ddiff_max_w9").unwrap(), 0.0);
        assert_eq!(v.get("AU06_r-AU12_r.global.ddiff_std_w9").unwrap(), 0.0);
        assert!((v.get("AU06_r-AU12_r.global.slope_corr_w9").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(v.get("AU06_r-AU12_r.global.rise_lag_w9").unwrap(), 0.0);
        assert_eq!(v.get("AU06_r-AU12_r.global.fall_lag_w9").unwrap(), 0.0);
        assert_eq!(v.get("AU06_r-AU12_r.global.adj_max_diff_w9").unwrap(), 0.0);
        assert_eq!(v.get("AU06_r-AU12_r.global.adj_min_diff_w9").unwrap(), 0.0);
    }

    #[test]
    fn shifted_peaks_give_exact_rise_lag() {
        let n = 120;
        let bump = |c: f64| -> Vec<f64> {
            (0..n)
                .map(|i| (-((i as f64 - c) / 8.0).powi(2)).exp())
                .collect()
        };
        let cfg = FeatureConfig {
            au_names: vec!["AU06_r".into(), "AU12_r".into()],
            ..FeatureConfig::default()
        };
        let aus = AUSignalSet::new(
            "lag".into(),
            None,
            Label::Unlabeled,
            vec![
                (
                    "AU06_r".to_string(),
                    TimeSeries::from_values(bump(40.0), FPS).unwrap(),
                ),
                (
                    "AU12_r".to_string(),
                    TimeSeries::from_values(bump(60.0), FPS).unwrap(),
                ),
                (
                    "smile_intensity".to_string(),
                    TimeSeries::from_values(vec![0.0; n], FPS).unwrap(),
                ),
            ],
        )
        .unwrap();
        let ext = FeatureExtractor::new(cfg).unwrap();
        let v = ext.cross_au(&aus, &global_only(n)).unwrap();
        // AU06 peaks 20 frames before AU12 at 50 fps
        let lag = v.get("AU06_r-AU12_r.global.rise_lag_w9").unwrap();
        assert!((lag + 0.4).abs() < 1e-9, "rise lag {lag}");
    }

    #[test]
    fn empty_phase_contributes_a_zero_block() {
        let n = 60;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let aus = set_with(n, &[("AU06_r", ramp)]);
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let seg = PhaseSegmentation {
            onset: FrameInterval::EMPTY,
            apex: FrameInterval::new(10, 20),
            offset: FrameInterval::EMPTY,
            global_phase: FrameInterval::new(0, n),
        };
        let v = ext.au_wise(&aus, &seg).unwrap();
        for (name, value) in v.catalog().names.iter().zip(v.values()) {
            if name.contains(".onset.") || name.contains(".offset.") {
                assert_eq!(*value, 0.0, "'{name}' should be zero for an empty phase");
            }
        }
        // non-empty phases still carry signal
        assert!(v.get("AU06_r.apex.value_mean").unwrap() > 0.0);
    }

    #[test]
    fn extraction_is_input_order_invariant() {
        let n = 60;
        let ramp: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).sin()).collect();
        let aus = set_with(n, &[("AU06_r", ramp.clone()), ("smile_intensity", ramp)]);
        let mut signals: Vec<(String, TimeSeries)> = aus
            .iter()
            .map(|(n, s)| (n.to_string(), s.clone()))
            .collect();
        signals.reverse();
        let reordered =
            AUSignalSet::new("test".into(), None, Label::Unlabeled, signals).unwrap();
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        let a = ext.extract(&aus).unwrap();
        let b = ext.extract(&reordered).unwrap();
        assert_eq!(a.frame_wise.values(), b.frame_wise.values());
        assert_eq!(a.au_wise.values(), b.au_wise.values());
        assert_eq!(a.cross_au.values(), b.cross_au.values());
    }

    #[test]
    fn too_short_sequence_is_insufficient() {
        let aus = set_with(20, &[]);
        let ext = FeatureExtractor::new(FeatureConfig::default()).unwrap();
        assert!(matches!(
            ext.extract(&aus),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn missing_signal_is_named() {
        let n = 40;
        let cfg = FeatureConfig::default();
        let mut signals: Vec<(String, TimeSeries)> = Vec::new();
        for name in cfg.frame_signals() {
            if name == "AU12_r" {
                continue;
            }
            signals.push((name, TimeSeries::from_values(vec![0.0; n], FPS).unwrap()));
        }
        let aus = AUSignalSet::new("partial".into(), None, Label::Unlabeled, signals).unwrap();
        let ext = FeatureExtractor::new(cfg).unwrap();
        match ext.extract(&aus) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("AU12_r")),
            other => panic!("expected invalid-argument, got {other:?}"),
        }
    }
}
