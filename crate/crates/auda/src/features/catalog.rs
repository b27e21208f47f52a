//! Feature configuration and the named, audited feature catalogs.
//!
//! Every emitted feature has a stable, unique name of the form
//! `signal.descriptor`, `au.phase.descriptor`, or `auA-auB.phase.descriptor`,
//! so family dimensionalities are derivable from the catalog alone and
//! cached features can be matched back to their definition by hash.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{PhaseConfig, PhaseKind};
use crate::util::fnv1a64;

/// The 17 AU intensity columns produced by OpenFace.
pub const DEFAULT_AU_NAMES: [&str; 17] = [
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r", "AU10_r", "AU12_r",
    "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r", "AU25_r", "AU26_r", "AU45_r",
];

pub const DEFAULT_SMILE_NAME: &str = "smile_intensity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    FrameWise,
    AuWise,
    CrossAu,
    Deep,
}

impl FeatureFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureFamily::FrameWise => "frame_wise",
            FeatureFamily::AuWise => "au_wise",
            FeatureFamily::CrossAu => "cross_au",
            FeatureFamily::Deep => "deep",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "frame_wise" => Ok(FeatureFamily::FrameWise),
            "au_wise" => Ok(FeatureFamily::AuWise),
            "cross_au" => Ok(FeatureFamily::CrossAu),
            "deep" => Ok(FeatureFamily::Deep),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Regression window sizes (frames), ascending. The smallest drives
    /// second-order dynamics, phase detection, and the phase-wise families.
    pub windows: Vec<usize>,
    /// Participating AU signal names.
    pub au_names: Vec<String>,
    /// Smile intensity signal name; used for phase detection and, when
    /// enabled, as one more frame-wise signal.
    pub smile_name: String,
    pub include_smile_frame_wise: bool,
    pub phase: PhaseConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            windows: vec![9, 27],
            au_names: DEFAULT_AU_NAMES.iter().map(|s| s.to_string()).collect(),
            smile_name: DEFAULT_SMILE_NAME.to_string(),
            include_smile_frame_wise: true,
            phase: PhaseConfig::default(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::InvalidArgument("windows must not be empty".into()));
        }
        for w in &self.windows {
            if *w < 3 || *w % 2 == 0 {
                return Err(Error::InvalidArgument(format!(
                    "window sizes must be odd and >= 3, got {w}"
                )));
            }
        }
        if !self.windows.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidArgument(
                "windows must be strictly ascending".into(),
            ));
        }
        if self.au_names.is_empty() {
            return Err(Error::InvalidArgument("au_names must not be empty".into()));
        }
        let mut sorted = self.au_names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.au_names.len() {
            return Err(Error::InvalidArgument("au_names contains duplicates".into()));
        }
        if self.au_names.iter().any(|a| *a == self.smile_name) {
            return Err(Error::InvalidArgument(format!(
                "smile signal '{}' must not appear in au_names",
                self.smile_name
            )));
        }
        Ok(())
    }

    pub fn smallest_window(&self) -> usize {
        *self.windows.iter().min().expect("validated non-empty")
    }

    pub fn largest_window(&self) -> usize {
        *self.windows.iter().max().expect("validated non-empty")
    }

    /// Frame-wise signal list: the AUs plus, when enabled, smile intensity.
    pub fn frame_signals(&self) -> Vec<String> {
        let mut names = self.au_names.clone();
        if self.include_smile_frame_wise {
            names.push(self.smile_name.clone());
        }
        names
    }

    /// AU names in canonical (sorted) order; fixes cross-AU pair signs.
    pub fn sorted_au_names(&self) -> Vec<String> {
        let mut names = self.au_names.clone();
        names.sort();
        names
    }

    /// Unordered AU pairs, canonically ordered by name.
    pub fn au_pairs(&self) -> Vec<(String, String)> {
        let sorted = self.sorted_au_names();
        let mut pairs = Vec::with_capacity(sorted.len() * (sorted.len().saturating_sub(1)) / 2);
        for i in 0..sorted.len() {
            for j in (i + 1)..sorted.len() {
                pairs.push((sorted[i].clone(), sorted[j].clone()));
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCatalog {
    pub family: FeatureFamily,
    pub names: Vec<String>,
}

impl FeatureCatalog {
    /// Per-frame descriptors: for each signal, the raw value, then
    /// (slope, coeff, adjusted) per window, then the second-order slope.
    pub fn frame_wise(cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let w0 = cfg.smallest_window();
        let mut names = Vec::new();
        for sig in cfg.frame_signals() {
            names.push(format!("{sig}.value"));
            for w in &cfg.windows {
                names.push(format!("{sig}.slope_w{w}"));
                names.push(format!("{sig}.coeff_w{w}"));
                names.push(format!("{sig}.adjusted_w{w}"));
            }
            names.push(format!("{sig}.accel_w{w0}"));
        }
        Ok(FeatureCatalog {
            family: FeatureFamily::FrameWise,
            names,
        })
    }

    /// Per-AU, per-phase statistics (7 descriptors); phase-major order.
    /// An empty phase contributes zeros, with duration_ratio = 0 marking it.
    pub fn au_wise(cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let w = cfg.smallest_window();
        let mut names = Vec::new();
        for phase in PhaseKind::ALL {
            let p = phase.name();
            for au in &cfg.au_names {
                names.push(format!("{au}.{p}.adj_mean_w{w}"));
                names.push(format!("{au}.{p}.adj_max_w{w}"));
                names.push(format!("{au}.{p}.adj_min_w{w}"));
                names.push(format!("{au}.{p}.accel_mean_w{w}"));
                names.push(format!("{au}.{p}.value_mean"));
                names.push(format!("{au}.{p}.amplitude"));
                names.push(format!("{au}.{p}.duration_ratio"));
            }
        }
        Ok(FeatureCatalog {
            family: FeatureFamily::AuWise,
            names,
        })
    }

    /// Per-AU-pair, per-phase relational statistics (8 descriptors);
    /// phase-major order, pairs canonically ordered by AU name.
    pub fn cross_au(cfg: &FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let w = cfg.smallest_window();
        let pairs = cfg.au_pairs();
        let mut names = Vec::new();
        for phase in PhaseKind::ALL {
            let p = phase.name();
            for (a, b) in &pairs {
                names.push(format!("{a}-{b}.{p}.ddiff_mean_w{w}"));
                names.push(format!("{a}-{b}.{p}.ddiff_max_w{w}"));
                names.push(format!("{a}-{b}.{p}.ddiff_std_w{w}"));
                names.push(format!("{a}-{b}.{p}.slope_corr_w{w}"));
                names.push(format!("{a}-{b}.{p}.rise_lag_w{w}"));
                names.push(format!("{a}-{b}.{p}.fall_lag_w{w}"));
                names.push(format!("{a}-{b}.{p}.adj_max_diff_w{w}"));
                names.push(format!("{a}-{b}.{p}.adj_min_diff_w{w}"));
            }
        }
        Ok(FeatureCatalog {
            family: FeatureFamily::CrossAu,
            names,
        })
    }

    /// Catalog for externally supplied per-frame deep feature vectors.
    pub fn deep(dim: usize) -> Self {
        FeatureCatalog {
            family: FeatureFamily::Deep,
            names: (0..dim).map(|i| format!("deep.d{i:03}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Content fingerprint over family and names; stable across runs.
    pub fn hash(&self) -> u64 {
        let mut buf = String::with_capacity(self.names.len() * 24);
        buf.push_str(self.family.name());
        for n in &self.names {
            buf.push('\n');
            buf.push_str(n);
        }
        fnv1a64(buf.as_bytes())
    }
}

/// Build the catalog of one feature family under a configuration.
pub fn feature_catalog(cfg: &FeatureConfig, family: FeatureFamily) -> Result<FeatureCatalog> {
    match family {
        FeatureFamily::FrameWise => FeatureCatalog::frame_wise(cfg),
        FeatureFamily::AuWise => FeatureCatalog::au_wise(cfg),
        FeatureFamily::CrossAu => FeatureCatalog::cross_au(cfg),
        FeatureFamily::Deep => Err(Error::InvalidArgument(
            "deep feature catalogs are defined by the input file dimension".into(),
        )),
    }
}
