//! Spectral analysis of PCC-length time series: one-sided amplitude
//! spectral density, accumulated RMS, and projection of a length RMS to an
//! equivalent speed-meter detuning.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::model::{DerivedRates, PhysicalConstants};
use crate::{Error, Result};

/// Welch estimator configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Samples per segment; even, >= 8.
    pub segment_length: usize,
    /// Overlap fraction in [0, 1).
    pub overlap: f64,
    pub window: Window,
    /// Remove each segment's mean before windowing.
    pub detrend: bool,
    /// Frequency at which the accumulated RMS is read out in summaries, Hz.
    pub readout_freq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            segment_length: 4096,
            overlap: 0.5,
            window: Window::Hann,
            detrend: true,
            readout_freq: 0.02,
        }
    }
}

impl SpectrumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 8 || self.segment_length % 2 != 0 {
            return Err(Error::InvalidParam(format!(
                "segment_length = {} must be even and >= 8",
                self.segment_length
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParam(format!(
                "overlap = {} outside [0, 1)",
                self.overlap
            )));
        }
        Ok(())
    }
}

/// One-sided ASD with its accumulated-RMS curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Bin centers, Hz (DC excluded, Nyquist included).
    pub freqs: Vec<f64>,
    /// m/sqrt(Hz)
    pub asd: Vec<f64>,
    /// RMS integrated downward from the top frequency, m.
    pub cum_rms: Vec<f64>,
    /// Accumulated RMS at the lowest bin, m.
    pub total_rms: f64,
}

impl SpectrumResult {
    /// Accumulated RMS at the first bin at or above `f` (clamped to the
    /// grid, so a readout below the lowest bin returns the total RMS).
    pub fn rms_at(&self, f: f64) -> f64 {
        match self.freqs.iter().position(|&fi| fi >= f) {
            Some(i) => self.cum_rms[i],
            None => *self.cum_rms.last().unwrap_or(&0.0),
        }
    }
}

fn window_coefficient(window: Window, i: usize, n: usize) -> f64 {
    match window {
        Window::Rectangular => 1.0,
        // periodic Hann
        Window::Hann => 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()),
    }
}

/// Welch-averaged one-sided ASD of a uniformly sampled series.
///
/// Density normalization: a white series of variance σ² comes out flat at
/// σ·sqrt(2/rate), and the integral of asd² over the band recovers the
/// series variance.
pub fn estimate_asd(series: &[f64], rate: f64, cfg: &SpectrumConfig) -> Result<SpectrumResult> {
    cfg.validate()?;
    if !(rate > 0.0) {
        return Err(Error::InvalidParam(format!("rate = {rate} must be > 0")));
    }
    let n = cfg.segment_length;
    if series.len() < n {
        return Err(Error::SeriesTooShort {
            got: series.len(),
            min: n,
        });
    }

    let hop = ((n as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
    let n_segments = (series.len() - n) / hop + 1;
    let window: Vec<f64> = (0..n).map(|i| window_coefficient(cfg.window, i, n)).collect();
    let s2: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let half = n / 2;
    let mut psd_acc = vec![0.0; half]; // bins 1..=n/2
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    for seg in 0..n_segments {
        let chunk = &series[seg * hop..seg * hop + n];
        let mean = if cfg.detrend {
            chunk.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new((chunk[i] - mean) * window[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 1..=half {
            psd_acc[k - 1] += buf[k].norm_sqr();
        }
    }

    let df = rate / n as f64;
    let freqs: Vec<f64> = (1..=half).map(|k| k as f64 * df).collect();
    let asd: Vec<f64> = psd_acc
        .iter()
        .enumerate()
        .map(|(i, &acc)| {
            // one-sided doubling applies to interior bins, not Nyquist
            let onesided = if i + 1 == half { 1.0 } else { 2.0 };
            (acc / n_segments as f64 * onesided / (rate * s2)).sqrt()
        })
        .collect();
    let cum_rms = accumulate_rms(&asd, &freqs)?;
    let total_rms = cum_rms[0];
    Ok(SpectrumResult {
        freqs,
        asd,
        cum_rms,
        total_rms,
    })
}

/// Accumulated RMS integrated from the highest frequency downward:
/// `cum_rms(f) = sqrt(Σ_{f' >= f} asd(f')²·Δf')`.
pub fn accumulate_rms(asd: &[f64], freqs: &[f64]) -> Result<Vec<f64>> {
    if asd.len() != freqs.len() {
        return Err(Error::GridMismatch(format!(
            "{} asd values vs {} frequencies",
            asd.len(),
            freqs.len()
        )));
    }
    if asd.is_empty() {
        return Ok(Vec::new());
    }
    let n = asd.len();
    let bin_width = |i: usize| -> f64 {
        if n == 1 {
            freqs[0]
        } else if i + 1 < n {
            freqs[i + 1] - freqs[i]
        } else {
            freqs[n - 1] - freqs[n - 2]
        }
    };
    let mut cum = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += asd[i] * asd[i] * bin_width(i);
        cum[i] = acc.sqrt();
    }
    Ok(cum)
}

/// Phase-per-length convention for converting a length fluctuation into a
/// circulation-phase fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseConvention {
    /// δφ = 2π·δl/λ₀
    SinglePass,
    /// δφ = 4π·δl/λ₀
    RoundTrip,
}

/// Convert a length fluctuation into a circulation-phase fluctuation, rad.
pub fn length_to_phase(length: f64, lambda0: f64, convention: PhaseConvention) -> f64 {
    let factor = match convention {
        PhaseConvention::SinglePass => 2.0 * std::f64::consts::PI,
        PhaseConvention::RoundTrip => 4.0 * std::f64::consts::PI,
    };
    factor * length / lambda0
}

/// Project a PCC length RMS to the equivalent detuning γ₁·δφ/2, in Hz.
pub fn project_detuning(
    rms_length: f64,
    consts: &PhysicalConstants,
    rates: &DerivedRates,
    convention: PhaseConvention,
) -> f64 {
    let dphi = length_to_phase(rms_length, consts.lambda0, convention);
    rates.gamma1 * dphi / 2.0 / (2.0 * std::f64::consts::PI)
}
