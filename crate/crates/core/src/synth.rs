//! Synthetic measured-transfer-function datasets and shaped noise time
//! series with known ground truth.
//!
//! The measured raw data behind the speed-meter characterization is not
//! available, so fitting and spectral-analysis acceptance rests on data
//! generated here: the model response perturbed by an analyzer-style noise
//! model (multiplicative in amplitude, additive in phase), and Gaussian
//! time series shaped in the frequency domain to a prescribed one-sided
//! amplitude spectral density. Everything is deterministic in the seed.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;

use crate::model::{
    observable_h, position_response, speed_response_exact, ComplexResponse, DerivedRates,
    PccParams,
};
use crate::{Error, Result};

/// Frequency-grid specification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyGrid {
    /// Lowest frequency, Hz.
    pub f_min: f64,
    /// Highest frequency, Hz.
    pub f_max: f64,
    /// Number of points, endpoints included.
    pub n_points: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        // measurement band of the transfer-function characterization
        Self {
            f_min: 4e3,
            f_max: 2e6,
            n_points: 200,
            spacing: Spacing::Log,
        }
    }
}

/// Materialize a grid: `n_points` strictly increasing frequencies with both
/// endpoints included.
pub fn make_grid(spec: &FrequencyGrid) -> Result<Vec<f64>> {
    if spec.n_points < 2 {
        return Err(Error::InvalidParam(format!(
            "grid needs n_points >= 2, got {}",
            spec.n_points
        )));
    }
    if !(spec.f_min < spec.f_max) {
        return Err(Error::InvalidParam(format!(
            "grid needs f_min < f_max, got [{}, {}]",
            spec.f_min, spec.f_max
        )));
    }
    match spec.spacing {
        Spacing::Log => {
            if spec.f_min <= 0.0 {
                return Err(Error::InvalidParam(format!(
                    "log spacing needs f_min > 0, got {}",
                    spec.f_min
                )));
            }
            let (a, b) = (spec.f_min.ln(), spec.f_max.ln());
            let n = spec.n_points;
            let mut grid: Vec<f64> = (0..n)
                .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
                .collect();
            grid[0] = spec.f_min;
            grid[n - 1] = spec.f_max;
            Ok(grid)
        }
        Spacing::Linear => {
            if spec.f_min < 0.0 {
                return Err(Error::InvalidParam(format!(
                    "linear spacing needs f_min >= 0, got {}",
                    spec.f_min
                )));
            }
            let n = spec.n_points;
            let mut grid: Vec<f64> = (0..n)
                .map(|k| {
                    spec.f_min + (spec.f_max - spec.f_min) * k as f64 / (n - 1) as f64
                })
                .collect();
            grid[n - 1] = spec.f_max;
            Ok(grid)
        }
    }
}

/// Analyzer-style perturbation of a ratio measurement: each point is
/// multiplied by `(1 + a)·e^{iφ}` with `a ~ N(0, rel_amplitude_sigma)` and
/// `φ ~ N(0, phase_sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementNoiseModel {
    pub rel_amplitude_sigma: f64,
    /// rad
    pub phase_sigma: f64,
    pub seed: u64,
}

impl Default for MeasurementNoiseModel {
    fn default() -> Self {
        Self {
            rel_amplitude_sigma: 0.02,
            phase_sigma: 0.0,
            seed: 42,
        }
    }
}

impl MeasurementNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if self.rel_amplitude_sigma < 0.0 || self.phase_sigma < 0.0 {
            return Err(Error::InvalidParam("noise sigmas must be >= 0".into()));
        }
        Ok(())
    }

    /// Same noise law, different seed.
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Which response the synthetic dataset follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TfModel {
    /// Closed-form ratio of the speed and position transfer functions.
    Ratio { include_detuning: bool },
    /// Pointwise ratio of the exact two-pass response to the position
    /// response, with the circulation phase taken from the PCC parameters.
    ExactRatio,
}

/// Evaluate the chosen model on a frequency grid, noiselessly.
pub fn eval_tf_model(
    rates: &DerivedRates,
    pcc: &PccParams,
    model: TfModel,
    freqs: &[f64],
) -> Result<ComplexResponse> {
    let values: Vec<Complex64> = freqs
        .iter()
        .map(|&f| match model {
            TfModel::Ratio { include_detuning } => observable_h(rates, f, include_detuning),
            TfModel::ExactRatio => {
                let omega = 2.0 * std::f64::consts::PI * f;
                speed_response_exact(rates, pcc, pcc.phase_offset(), omega)
                    / position_response(rates, omega)
            }
        })
        .collect();
    ComplexResponse::new(freqs.to_vec(), values)
}

/// Synthesize a measured transfer function: model evaluation perturbed per
/// point by the noise model, deterministically in the seed.
pub fn synth_tf(
    rates: &DerivedRates,
    pcc: &PccParams,
    model: TfModel,
    freqs: &[f64],
    noise: &MeasurementNoiseModel,
) -> Result<ComplexResponse> {
    noise.validate()?;
    let clean = eval_tf_model(rates, pcc, model, freqs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let amp = Normal::new(0.0, noise.rel_amplitude_sigma)
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    let phase =
        Normal::new(0.0, noise.phase_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let values: Vec<Complex64> = clean
        .values()
        .iter()
        .map(|&v| {
            let a = amp.sample(&mut rng);
            let p = phase.sample(&mut rng);
            v * Complex64::from_polar(1.0 + a, p)
        })
        .collect();
    ComplexResponse::new(freqs.to_vec(), values)
}

/// One piece of a piecewise power-law one-sided ASD specification:
/// `asd(f) = amplitude · (f/f_ref)^exponent` on `[f_lo, f_hi]`, where
/// `f_ref = f_lo` (or `f_hi` when the segment starts at DC).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsdSegment {
    /// Hz
    pub f_lo: f64,
    /// Hz
    pub f_hi: f64,
    /// m/sqrt(Hz) at the reference frequency
    pub amplitude: f64,
    #[serde(default)]
    pub exponent: f64,
}

impl AsdSegment {
    /// Frequency-independent segment.
    pub fn flat(f_lo: f64, f_hi: f64, amplitude: f64) -> Self {
        Self {
            f_lo,
            f_hi,
            amplitude,
            exponent: 0.0,
        }
    }

    fn contains(&self, f: f64) -> bool {
        f >= self.f_lo && f <= self.f_hi
    }

    fn value(&self, f: f64) -> f64 {
        if self.exponent == 0.0 {
            return self.amplitude;
        }
        let f_ref = if self.f_lo > 0.0 { self.f_lo } else { self.f_hi };
        self.amplitude * (f / f_ref).powf(self.exponent)
    }
}

/// Flat spec over the whole band `(0, rate/2]` whose integrated power gives
/// the requested total RMS.
pub fn flat_spec_with_total_rms(total_rms: f64, rate: f64) -> Vec<AsdSegment> {
    vec![AsdSegment::flat(0.0, rate / 2.0, total_rms / (rate / 2.0).sqrt())]
}

fn asd_at(spec: &[AsdSegment], f: f64) -> Result<f64> {
    spec.iter()
        .find(|s| s.contains(f))
        .map(|s| s.value(f))
        .ok_or_else(|| {
            Error::InvalidParam(format!(
                "ASD spec does not cover {f} Hz; segments must cover (0, rate/2]"
            ))
        })
}

/// Gaussian time series whose one-sided ASD follows the segment list,
/// built by frequency-domain shaping of white noise. Deterministic in the
/// seed.
pub fn synth_noise_timeseries(
    spec: &[AsdSegment],
    duration: f64,
    rate: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if spec.is_empty() {
        return Err(Error::InvalidParam("empty ASD spec".into()));
    }
    if !(rate > 0.0) {
        return Err(Error::InvalidParam(format!("rate = {rate} must be > 0")));
    }
    let n = (duration * rate).round() as usize;
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "duration*rate = {} gives fewer than 2 samples",
            duration * rate
        )));
    }
    for s in spec {
        if s.amplitude < 0.0 || !(s.f_lo < s.f_hi) {
            return Err(Error::InvalidParam(format!(
                "bad ASD segment [{}, {}] amplitude {}",
                s.f_lo, s.f_hi, s.amplitude
            )));
        }
    }

    let df = rate / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    // One-sided PSD target: E|X_k|^2 = psd * n * rate / 2 for interior bins,
    // twice that at Nyquist (no one-sided doubling there).
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    let interior_end = if n % 2 == 0 { half } else { half + 1 };
    for k in 1..interior_end {
        let psd = {
            let a = asd_at(spec, k as f64 * df)?;
            a * a
        };
        let scale = (psd * n as f64 * rate / 2.0).sqrt() / 2.0f64.sqrt();
        let re: f64 = unit.sample(&mut rng);
        let im: f64 = unit.sample(&mut rng);
        spectrum[k] = Complex64::new(re * scale, im * scale);
        spectrum[n - k] = spectrum[k].conj();
    }
    if n % 2 == 0 {
        let psd = {
            let a = asd_at(spec, half as f64 * df)?;
            a * a
        };
        let x: f64 = unit.sample(&mut rng);
        spectrum[half] = Complex64::new(x * (psd * n as f64 * rate).sqrt(), 0.0);
    }

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spectrum);
    Ok(spectrum.iter().map(|v| v.re / n as f64).collect())
}
