//! Uniformly sampled scalar time series.

use crate::error::{Error, Result};

/// Relative tolerance on frame spacing vs 1/fps.
pub const SPACING_REL_TOL: f64 = 1e-9;

/// One scalar signal (an AU intensity or the smile intensity) sampled at a
/// fixed frame rate. Construction validates uniform sampling and finiteness;
/// downstream code relies on both.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Vec<f64>,
    fps: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, timestamps: Vec<f64>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fps must be positive and finite, got {fps}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InsufficientData("series has no samples".into()));
        }
        if values.len() != timestamps.len() {
            return Err(Error::InvalidArgument(format!(
                "values ({}) and timestamps ({}) differ in length",
                values.len(),
                timestamps.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data {
                    row: i,
                    message: format!("non-finite sample {v}"),
                });
            }
        }
        let dt = 1.0 / fps;
        for i in 1..timestamps.len() {
            let gap = timestamps[i] - timestamps[i - 1];
            if gap <= 0.0 {
                return Err(Error::Data {
                    row: i,
                    message: format!(
                        "timestamps not strictly increasing ({} after {})",
                        timestamps[i],
                        timestamps[i - 1]
                    ),
                });
            }
            if ((gap - dt) / dt).abs() > SPACING_REL_TOL {
                return Err(Error::Data {
                    row: i,
                    message: format!("non-uniform frame spacing {gap} (expected {dt})"),
                });
            }
        }
        Ok(TimeSeries {
            values,
            timestamps,
            fps,
        })
    }

    /// Build a series with synthesized timestamps i/fps.
    pub fn from_values(values: Vec<f64>, fps: f64) -> Result<Self> {
        let timestamps = (0..values.len()).map(|i| i as f64 / fps).collect();
        TimeSeries::new(values, timestamps, fps)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Frame spacing in seconds, estimated from the endpoints (equals 1/fps
    /// up to the validated tolerance).
    pub fn frame_spacing(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            1.0 / self.fps
        } else {
            (self.timestamps[n - 1] - self.timestamps[0]) / (n - 1) as f64
        }
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_uniform_series() {
        let s = TimeSeries::from_values(vec![0.0, 1.0, 2.0], 50.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s.frame_spacing() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_monotone_timestamps() {
        let err = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.02, 0.02], 50.0).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, .. }));
    }

    #[test]
    fn rejects_non_uniform_spacing() {
        let err = TimeSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.02, 0.05], 50.0).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, .. }));
    }

    #[test]
    fn rejects_nan_sample() {
        let err = TimeSeries::from_values(vec![0.0, f64::NAN, 2.0], 50.0).unwrap_err();
        assert!(matches!(err, Error::Data { row: 1, .. }));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(TimeSeries::from_values(vec![], 50.0).is_err());
        assert!(TimeSeries::new(vec![1.0], vec![0.0, 0.02], 50.0).is_err());
    }

    #[test]
    fn spacing_within_tolerance_is_accepted() {
        let dt = 0.02;
        let ts = vec![0.0, dt, dt + dt * (1.0 + 4e-10)];
        assert!(TimeSeries::new(vec![0.0; 3], ts, 50.0).is_ok());
    }
}
