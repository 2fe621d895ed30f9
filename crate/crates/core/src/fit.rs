//! Recovery of the cavity round-trip loss and overall gain from a complex
//! transfer function.
//!
//! The measurement is modeled as `H_m(f) = g · H(f; L_cav)` where `g` is an
//! overall complex gain calibrated on the top of the measurement band and
//! `L_cav` is the only free model parameter. The fit alternates gain
//! calibration with a bounded one-dimensional minimization of the summed
//! squared modulus of the residual; a joint mode with the gain at its
//! least-squares optimum over all points is provided as a cross-check.

use num_complex::Complex64;

use crate::model::{
    derive_rates, observable_h, ComplexResponse, MainCavityParams, PccParams, PhysicalConstants,
};
use crate::{Error, Result};

/// Fit configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Band used for gain calibration, Hz.
    pub anchor_band: [f64; 2],
    /// Starting loss for the first gain calibration.
    pub init_loss: f64,
    /// Search interval for the loss.
    pub loss_bounds: [f64; 2],
    /// Relative cost-change tolerance between outer iterations.
    pub tol: f64,
    /// Maximum outer iterations.
    pub max_iters: usize,
    /// Keep the fixed detuning term in the fitted model.
    pub include_detuning: bool,
    /// Only points inside this band enter the cost; defaults to everything.
    /// Useful to exclude the low-frequency region where measured points
    /// deviate near the control band.
    pub fit_band: [f64; 2],
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            anchor_band: [1.5e6, 2e6],
            init_loss: 1e-4,
            loss_bounds: [0.0, 1e-3],
            tol: 1e-10,
            max_iters: 100,
            include_detuning: false,
            fit_band: [0.0, f64::INFINITY],
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.loss_bounds;
        if !(0.0 <= lo && lo < hi && hi < 1.0) {
            return Err(Error::InvalidParam(format!(
                "loss_bounds [{lo}, {hi}] must satisfy 0 <= lo < hi < 1"
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tol = {} must be > 0",
                self.tol
            )));
        }
        if !(self.anchor_band[0] < self.anchor_band[1]) {
            return Err(Error::InvalidParam(format!(
                "anchor_band [{}, {}] is empty",
                self.anchor_band[0], self.anchor_band[1]
            )));
        }
        if !(self.fit_band[0] < self.fit_band[1]) {
            return Err(Error::InvalidParam(format!(
                "fit_band [{}, {}] is empty",
                self.fit_band[0], self.fit_band[1]
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fit outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Recovered round-trip loss.
    pub loss_cav_hat: f64,
    /// Recovered complex gain.
    pub gain_hat: Complex64,
    /// Summed squared residual modulus at the optimum.
    pub final_cost: f64,
    /// Outer iterations used.
    pub n_iters: usize,
    pub converged: bool,
    /// The loss landed on a search bound (degenerate or mis-bounded model).
    pub at_boundary: bool,
    /// Per-point residual `H_m - g·H`.
    pub residuals: ComplexResponse,
}

/// The fixed part of the fitted model: everything except `loss_cav`.
#[derive(Debug, Clone, Copy)]
pub struct FitProblem {
    pub consts: PhysicalConstants,
    pub cav: MainCavityParams,
    pub pcc: PccParams,
    pub include_detuning: bool,
}

impl FitProblem {
    pub fn new(
        consts: PhysicalConstants,
        cav: MainCavityParams,
        pcc: PccParams,
        include_detuning: bool,
    ) -> Self {
        Self {
            consts,
            cav,
            pcc,
            include_detuning,
        }
    }

    /// Model values `H(f; loss)` on a grid.
    pub fn eval(&self, loss_cav: f64, freqs: &[f64]) -> Result<Vec<Complex64>> {
        let mut cav = self.cav;
        cav.loss_cav = loss_cav;
        let rates = derive_rates(&self.consts, &cav, &self.pcc)?;
        Ok(freqs
            .iter()
            .map(|&f| observable_h(&rates, f, self.include_detuning))
            .collect())
    }
}

/// Mean of `data/model` over the calibration band.
pub fn calibrate_gain(
    data: &ComplexResponse,
    model: &[Complex64],
    band: [f64; 2],
) -> Result<Complex64> {
    if data.len() != model.len() {
        return Err(Error::GridMismatch(format!(
            "{} data points vs {} model points",
            data.len(),
            model.len()
        )));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for ((f, d), m) in data.iter().zip(model) {
        if f >= band[0] && f <= band[1] {
            sum += d / m;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyBand(band[0], band[1]));
    }
    Ok(sum / count as f64)
}

/// Summed per-point cost `Σ |H_m - g·H|²` over the grid.
pub fn cost(data: &ComplexResponse, gain: Complex64, model: &[Complex64]) -> Result<f64> {
    if data.len() != model.len() {
        return Err(Error::GridMismatch(format!(
            "{} data points vs {} model points",
            data.len(),
            model.len()
        )));
    }
    Ok(data
        .values()
        .iter()
        .zip(model)
        .map(|(d, m)| (d - gain * m).norm_sqr())
        .sum())
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
fn golden_section_minimize(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    max_evals: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while evals < max_evals && (b - a).abs() > x_tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn loss_search_tol(bounds: [f64; 2]) -> f64 {
    // resolve the loss to ~1e-10 of the interval, floored near f64 granularity
    ((bounds[1] - bounds[0]) * 1e-10).max(1e-16)
}

fn band_select(data: &ComplexResponse, band: [f64; 2]) -> Result<ComplexResponse> {
    let kept: Vec<(f64, Complex64)> = data
        .iter()
        .filter(|&(f, _)| f >= band[0] && f <= band[1])
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyBand(band[0], band[1]));
    }
    ComplexResponse::new(
        kept.iter().map(|&(f, _)| f).collect(),
        kept.iter().map(|&(_, v)| v).collect(),
    )
}

#[allow(clippy::too_many_arguments)]
fn build_result(
    data: &ComplexResponse,
    problem: &FitProblem,
    config: &FitConfig,
    loss: f64,
    gain: Complex64,
    final_cost: f64,
    n_iters: usize,
    converged: bool,
) -> Result<FitResult> {
    let model = problem.eval(loss, data.freqs())?;
    let residuals: Vec<Complex64> = data
        .values()
        .iter()
        .zip(&model)
        .map(|(d, m)| d - gain * m)
        .collect();
    let [lo, hi] = config.loss_bounds;
    let edge = 1e-3 * (hi - lo);
    Ok(FitResult {
        loss_cav_hat: loss,
        gain_hat: gain,
        final_cost,
        n_iters,
        converged,
        at_boundary: (loss - lo) < edge || (hi - loss) < edge,
        residuals: ComplexResponse::new(data.freqs().to_vec(), residuals)?,
    })
}

/// Two-stage fit: alternate gain calibration on the anchor band with a
/// bounded golden-section minimization of the cost over the loss, until the
/// relative cost change falls below `config.tol`.
pub fn fit_loss(
    data: &ComplexResponse,
    config: &FitConfig,
    problem: &FitProblem,
) -> Result<FitResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParam("empty dataset".into()));
    }
    let fitted = band_select(data, config.fit_band)?;
    let [lo, hi] = config.loss_bounds;
    let x_tol = loss_search_tol(config.loss_bounds);
    let mut loss = config.init_loss.clamp(lo, hi);
    let mut gain = Complex64::new(1.0, 0.0);
    let mut prev_cost = f64::INFINITY;
    let mut final_cost = f64::INFINITY;
    let mut converged = false;
    let mut n_iters = 0;

    while n_iters < config.max_iters {
        let model = problem.eval(loss, fitted.freqs())?;
        gain = calibrate_gain(&fitted, &model, config.anchor_band)?;
        let (best_loss, best_cost) = golden_section_minimize(
            |l| {
                problem
                    .eval(l, fitted.freqs())
                    .and_then(|m| cost(&fitted, gain, &m))
                    .unwrap_or(f64::INFINITY)
            },
            lo,
            hi,
            x_tol,
            200,
        );
        loss = best_loss;
        final_cost = best_cost;
        n_iters += 1;
        if prev_cost.is_finite() {
            let denom = prev_cost.abs().max(f64::MIN_POSITIVE);
            if (prev_cost - best_cost).abs() <= config.tol * denom {
                converged = true;
                break;
            }
        }
        prev_cost = best_cost;
    }

    build_result(data, problem, config, loss, gain, final_cost, n_iters, converged)
}

/// Joint variant: single golden-section pass over the loss with the gain at
/// its least-squares optimum over all grid points for each candidate loss.
pub fn fit_loss_joint(
    data: &ComplexResponse,
    config: &FitConfig,
    problem: &FitProblem,
) -> Result<FitResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParam("empty dataset".into()));
    }
    let fitted = band_select(data, config.fit_band)?;
    let ls_gain = |model: &[Complex64]| -> Complex64 {
        let num: Complex64 = fitted
            .values()
            .iter()
            .zip(model)
            .map(|(d, m)| m.conj() * d)
            .sum();
        let den: f64 = model.iter().map(|m| m.norm_sqr()).sum();
        num / den
    };
    let [lo, hi] = config.loss_bounds;
    let (loss, final_cost) = golden_section_minimize(
        |l| match problem.eval(l, fitted.freqs()) {
            Ok(m) => cost(&fitted, ls_gain(&m), &m).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        },
        lo,
        hi,
        loss_search_tol(config.loss_bounds),
        400,
    );
    let gain = ls_gain(&problem.eval(loss, fitted.freqs())?);
    build_result(data, problem, config, loss, gain, final_cost, 1, true)
}
