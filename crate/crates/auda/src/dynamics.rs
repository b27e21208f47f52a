//! Sliding-window regression dynamics of scalar signals.
//!
//! For every frame, a least-squares line is fitted to the signal over a
//! window of `window` frames centered on that frame. The fit yields the
//! trend-line slope δ (signal units per second) and the regression
//! coefficient r (the Pearson correlation between signal and time, in
//! [-1, 1]). The r-adjusted slope δ̂ = δ·|r| suppresses slope estimates from
//! poorly linear windows. Windows shrink symmetrically near the sequence
//! edges so every track has the same length as its source signal; the two
//! boundary frames fall back to the nearest 3 frames.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Sliding sums are re-accumulated from scratch this often to bound
/// floating-point drift in long sequences.
const REACCUMULATE_INTERVAL: usize = 4096;

/// δ, r, and δ̂ tracks of one signal for one window size.
#[derive(Debug, Clone)]
pub struct DynamicsTrack {
    pub window: usize,
    pub slope: Vec<f64>,
    pub coeff: Vec<f64>,
    pub adjusted: Vec<f64>,
}

impl DynamicsTrack {
    pub fn compute(series: &TimeSeries, window: usize) -> Result<Self> {
        let (slope, coeff) = slope_coeff_tracks(series.values(), series.frame_spacing(), window)?;
        let adjusted = r_adjusted(&slope, &coeff)?;
        Ok(DynamicsTrack {
            window,
            slope,
            coeff,
            adjusted,
        })
    }

    pub fn len(&self) -> usize {
        self.slope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slope.is_empty()
    }
}

/// First-order tracks for every configured window size plus the second-order
/// track (dynamics of the δ signal of the smallest window).
#[derive(Debug, Clone)]
pub struct DynamicsBundle {
    tracks: Vec<DynamicsTrack>,
    second_order: DynamicsTrack,
}

impl DynamicsBundle {
    pub fn compute(series: &TimeSeries, windows: &[usize]) -> Result<Self> {
        let mut sizes: Vec<usize> = windows.to_vec();
        sizes.sort_unstable();
        sizes.dedup();
        if sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one window size is required".into(),
            ));
        }
        let tracks = sizes
            .iter()
            .map(|&w| DynamicsTrack::compute(series, w))
            .collect::<Result<Vec<_>>>()?;
        let smallest = &tracks[0];
        let (slope2, coeff2) =
            slope_coeff_tracks(&smallest.slope, series.frame_spacing(), smallest.window)?;
        let adjusted2 = r_adjusted(&slope2, &coeff2)?;
        let second_order = DynamicsTrack {
            window: smallest.window,
            slope: slope2,
            coeff: coeff2,
            adjusted: adjusted2,
        };
        Ok(DynamicsBundle {
            tracks,
            second_order,
        })
    }

    pub fn tracks(&self) -> &[DynamicsTrack] {
        &self.tracks
    }

    pub fn track(&self, window: usize) -> Option<&DynamicsTrack> {
        self.tracks.iter().find(|t| t.window == window)
    }

    /// Track of the smallest configured window.
    pub fn smallest(&self) -> &DynamicsTrack {
        &self.tracks[0]
    }

    pub fn second_order(&self) -> &DynamicsTrack {
        &self.second_order
    }

    pub fn len(&self) -> usize {
        self.tracks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks[0].is_empty()
    }
}

/// Extremum timing of two r-adjusted tracks: where each signal rises and
/// falls fastest, and the lag between the two signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaTiming {
    pub t_max_a: f64,
    pub t_min_a: f64,
    pub t_max_b: f64,
    pub t_min_b: f64,
    /// t_max_a - t_max_b: lag between the steepest rises, seconds.
    pub rise_lag: f64,
    /// t_min_a - t_min_b: lag between the steepest falls, seconds.
    pub fall_lag: f64,
}

fn validate_window(window: usize) -> Result<usize> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "window must be an odd integer >= 3, got {window}"
        )));
    }
    Ok(window / 2)
}

fn validate_length(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 frames, got {n}"
        )));
    }
    Ok(())
}

/// Window around frame `i`: symmetric and shrunk to the available frames,
/// except at the sequence ends where the nearest 3 frames are used so every
/// window spans at least 3 frames.
fn window_bounds(i: usize, n: usize, half: usize) -> (usize, usize) {
    let sym = half.min(i).min(n - 1 - i);
    if sym >= 1 {
        (i - sym, i + sym)
    } else if i == 0 {
        (0, 2)
    } else {
        (n - 3, n - 1)
    }
}

/// Direct least-squares fit over values[lo..=hi] against the frame grid,
/// centered on the window's own mean time. Returns (slope, coeff).
fn regress_window(values: &[f64], lo: usize, hi: usize, i: usize, dt: f64) -> (f64, f64) {
    let m = (hi - lo + 1) as f64;
    // lo+hi is even for every window this module produces
    let kbar = (lo + hi) as f64 / 2.0 - i as f64;
    let mut vbar = 0.0;
    for v in &values[lo..=hi] {
        vbar += *v;
    }
    vbar /= m;
    let (mut skv, mut skk, mut svv) = (0.0, 0.0, 0.0);
    for (j, v) in values[lo..=hi].iter().enumerate() {
        let k = (lo + j) as f64 - i as f64 - kbar;
        let dv = *v - vbar;
        skv += k * dv;
        skk += k * k;
        svv += dv * dv;
    }
    let slope = skv / (skk * dt);
    let coeff = if svv > 0.0 {
        (skv / (skk * svv).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (slope, coeff)
}

/// Slope and regression-coefficient tracks in a single pass.
///
/// Interior frames use incrementally maintained window sums (O(1) per frame),
/// periodically re-accumulated; edge frames are evaluated directly. Values
/// are centered at the first sample before accumulation, which leaves δ and
/// r unchanged but keeps the sums well conditioned for signals with a large
/// constant offset.
pub(crate) fn slope_coeff_tracks(
    values: &[f64],
    dt: f64,
    window: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let half = validate_window(window)?;
    let n = values.len();
    validate_length(n)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frame spacing must be positive, got {dt}"
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

    let base = values[0];
    let u: Vec<f64> = values.iter().map(|v| v - base).collect();

    let mut slope = vec![0.0; n];
    let mut coeff = vec![0.0; n];

    if n >= window {
        let first = half;
        let last = n - 1 - half;
        let m = window as f64;
        // sum of k^2 for k in -half..=half
        let skk = (half * (half + 1) * (2 * half + 1)) as f64 / 3.0;
        let denom_slope = skk * dt;

        let accumulate = |center: usize| -> (f64, f64, f64) {
            let (mut sv, mut sq, mut sw) = (0.0, 0.0, 0.0);
            for (j, v) in u[center - half..=center + half].iter().enumerate() {
                let k = j as f64 - half as f64;
                sv += *v;
                sq += *v * *v;
                sw += k * *v;
            }
            (sv, sq, sw)
        };

        let (mut sv, mut sq, mut sw) = accumulate(first);
        for i in first..=last {
            let step = i - first;
            if step > 0 && step % REACCUMULATE_INTERVAL == 0 {
                let fresh = accumulate(i);
                sv = fresh.0;
                sq = fresh.1;
                sw = fresh.2;
            }
            let svv = sq - sv * sv / m;
            slope[i] = sw / denom_slope;
            coeff[i] = if svv > 0.0 {
                (sw / (skk * svv).sqrt()).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            if i < last {
                let leaving = u[i - half];
                let entering = u[i + half + 1];
                sw = sw - sv + (half + 1) as f64 * leaving + half as f64 * entering;
                sv = sv - leaving + entering;
                sq = sq - leaving * leaving + entering * entering;
            }
        }
        for i in 0..first {
            let (lo, hi) = window_bounds(i, n, half);
            let (s, c) = regress_window(&u, lo, hi, i, dt);
            slope[i] = s;
            coeff[i] = c;
        }
        for i in (last + 1)..n {
            let (lo, hi) = window_bounds(i, n, half);
            let (s, c) = regress_window(&u, lo, hi, i, dt);
            slope[i] = s;
            coeff[i] = c;
        }
    } else {
        // series shorter than the window: every frame is an edge frame
        for i in 0..n {
            let (lo, hi) = window_bounds(i, n, half);
            let (s, c) = regress_window(&u, lo, hi, i, dt);
            slope[i] = s;
            coeff[i] = c;
        }
    }

    Ok((slope, coeff))
}

/// Per-frame trend-line slope δ of a series, signal units per second.
pub fn sliding_slope(series: &TimeSeries, window: usize) -> Result<Vec<f64>> {
    Ok(slope_coeff_tracks(series.values(), series.frame_spacing(), window)?.0)
}

/// Per-frame regression coefficient r of a series, in [-1, 1]; windows with
/// zero value variance yield r = 0.
pub fn sliding_regression_coeff(series: &TimeSeries, window: usize) -> Result<Vec<f64>> {
    Ok(slope_coeff_tracks(series.values(), series.frame_spacing(), window)?.1)
}

/// Element-wise r-adjusted slope: δ̂_i = δ_i·|r_i|.
pub fn r_adjusted(slope: &[f64], coeff: &[f64]) -> Result<Vec<f64>> {
    if slope.len() != coeff.len() {
        return Err(Error::InvalidArgument(format!(
            "slope ({}) and coeff ({}) tracks differ in length",
            slope.len(),
            coeff.len()
        )));
    }
    Ok(slope
        .iter()
        .zip(coeff)
        .map(|(d, r)| d * r.abs())
        .collect())
}

/// Dynamics of a δ track: the sliding slope applied to the slope signal
/// itself, in signal units per second squared.
pub fn second_order_dynamics(slope_track: &[f64], fps: f64, window: usize) -> Result<Vec<f64>> {
    let series = TimeSeries::from_values(slope_track.to_vec(), fps)?;
    sliding_slope(&series, window)
}

/// Per-frame absolute difference between two slope tracks.
pub fn pairwise_delta_diff(slope_a: &[f64], slope_b: &[f64]) -> Result<Vec<f64>> {
    if slope_a.len() != slope_b.len() {
        return Err(Error::InvalidArgument(format!(
            "tracks differ in length ({} vs {})",
            slope_a.len(),
            slope_b.len()
        )));
    }
    Ok(slope_a
        .iter()
        .zip(slope_b)
        .map(|(a, b)| (a - b).abs())
        .collect())
}

/// Locate the extrema of two r-adjusted tracks and the time lags between
/// them. Ties go to the earliest frame.
pub fn extrema_timing(adjusted_a: &[f64], adjusted_b: &[f64], fps: f64) -> Result<ExtremaTiming> {
    if adjusted_a.is_empty() || adjusted_b.is_empty() {
        return Err(Error::InsufficientData(
            "extrema timing needs non-empty tracks".into(),
        ));
    }
    if adjusted_a.len() != adjusted_b.len() {
        return Err(Error::InvalidArgument(format!(
            "tracks differ in length ({} vs {})",
            adjusted_a.len(),
            adjusted_b.len()
        )));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fps must be positive, got {fps}"
        )));
    }
    let scan = |track: &[f64]| -> (usize, usize) {
        let (mut imax, mut imin) = (0usize, 0usize);
        for (i, v) in track.iter().enumerate().skip(1) {
            if *v > track[imax] {
                imax = i;
            }
            if *v < track[imin] {
                imin = i;
            }
        }
        (imax, imin)
    };
    let (amax, amin) = scan(adjusted_a);
    let (bmax, bmin) = scan(adjusted_b);
    let t = |i: usize| i as f64 / fps;
    Ok(ExtremaTiming {
        t_max_a: t(amax),
        t_min_a: t(amin),
        t_max_b: t(bmax),
        t_min_b: t(bmin),
        rise_lag: t(amax) - t(bmax),
        fall_lag: t(amin) - t(bmin),
    })
}

/// Pearson correlation of two equal-length slices with the zero-variance
/// convention r = 0. Empty slices also yield 0.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let m = n as f64;
    let abar = a.iter().sum::<f64>() / m;
    let bbar = b.iter().sum::<f64>() / m;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let da = x - abar;
        let db = y - bbar;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa > 0.0 && sbb > 0.0 {
        (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}
