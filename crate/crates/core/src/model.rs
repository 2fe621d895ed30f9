//! Closed-form optical response of the single-cavity speed meter.
//!
//! The carrier resonates in a two-mirror cavity whose reflectivity for an
//! audio sideband at Ω is `r(Ω) = (γ₁ − γ₂ + iΩ)/(γ₁ + γ₂ − iΩ)`, with γ₁
//! set by the input-coupler transmissivity and γ₂ by the round-trip loss.
//! The polarization circulation adds a second, sign-flipped pass whose
//! imperfections (circulation-cavity loss, wave-plate retardation error,
//! residual phase fluctuation) leave a low-frequency floor γ_cut below which
//! the device degrades to a position meter. Both the exact two-pass response
//! and its first-order expansion are provided so the approximation error is
//! itself measurable.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Fundamental constants of the setup.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Speed of light, m/s.
    pub c: f64,
    /// Main (infrared) wavelength, m.
    pub lambda0: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            c: SPEED_OF_LIGHT,
            lambda0: 1.064e-6,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.lambda0 > 0.0) {
            return Err(Error::InvalidParam(
                "physical constants must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Static parameters of the main cavity.
///
/// Transmissivities and losses are power fractions in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MainCavityParams {
    /// ITM power transmissivity.
    pub t_itm: f64,
    /// ETM power transmissivity.
    pub t_etm: f64,
    /// Round-trip power loss of the main cavity.
    pub loss_cav: f64,
    /// Cavity length, m.
    pub l_cav: f64,
}

impl Default for MainCavityParams {
    fn default() -> Self {
        Self {
            t_itm: 4000e-6,
            t_etm: 35e-6,
            loss_cav: 85e-6,
            l_cav: 0.15,
        }
    }
}

impl MainCavityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_itm", self.t_itm),
            ("t_etm", self.t_etm),
            ("loss_cav", self.loss_cav),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "main_cavity.{name} = {v} outside [0, 1)"
                )));
            }
        }
        if !(self.l_cav > 0.0) {
            return Err(Error::InvalidParam(format!(
                "main_cavity.l_cav = {} must be > 0",
                self.l_cav
            )));
        }
        Ok(())
    }

    /// Soft diagnostics: conditions that are physical but unusual.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.t_itm <= self.loss_cav {
            w.push(format!(
                "cavity is not over-coupled: t_itm = {} <= loss_cav = {}",
                self.t_itm, self.loss_cav
            ));
        }
        w
    }
}

/// Parameters of the polarization circulation cavity (PCC).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PccParams {
    /// PCM power transmissivity.
    pub t_pcm: f64,
    /// Loss in the quarter-wave plate.
    pub loss_qwp: f64,
    /// PBS transmissivity for s-polarization.
    pub t_spbs: f64,
    /// PBS reflectivity for p-polarization.
    pub r_ppbs: f64,
    /// Misalignment loss.
    pub loss_align: f64,
    /// Mode-mismatch loss.
    pub loss_mis: f64,
    /// Wave-plate retardation error at the main wavelength, rad.
    pub dphi_ret: f64,
    /// RMS phase fluctuation of the PCC, rad.
    pub dphi_pcc: f64,
    /// Mean PCC length, m.
    pub l_pcc: f64,
    /// Directly measured total PCC loss; used instead of the component sum
    /// when present. In config files a negative value selects the
    /// component sum.
    #[serde(
        deserialize_with = "de_loss_override",
        skip_serializing_if = "Option::is_none"
    )]
    pub loss_pcc_override: Option<f64>,
}

fn de_loss_override<'de, D>(d: D) -> std::result::Result<Option<f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = <f64 as serde::Deserialize>::deserialize(d)?;
    Ok((v >= 0.0).then_some(v))
}

impl Default for PccParams {
    fn default() -> Self {
        Self {
            t_pcm: 0.01,
            loss_qwp: 0.0,
            t_spbs: 0.0,
            r_ppbs: 0.0,
            loss_align: 0.0,
            loss_mis: 0.0,
            dphi_ret: 2.0 * PI * 7e-3,
            dphi_pcc: 0.0,
            l_pcc: 0.38,
            loss_pcc_override: Some(0.03),
        }
    }
}

impl PccParams {
    pub fn validate(&self) -> Result<()> {
        let mut fields = vec![
            ("t_pcm", self.t_pcm),
            ("loss_qwp", self.loss_qwp),
            ("t_spbs", self.t_spbs),
            ("r_ppbs", self.r_ppbs),
            ("loss_align", self.loss_align),
            ("loss_mis", self.loss_mis),
        ];
        if let Some(o) = self.loss_pcc_override {
            fields.push(("loss_pcc_override", o));
        }
        for (name, v) in fields {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParam(format!(
                    "pcc.{name} = {v} outside [0, 1)"
                )));
            }
        }
        if !(self.l_pcc > 0.0) {
            return Err(Error::InvalidParam(format!(
                "pcc.l_pcc = {} must be > 0",
                self.l_pcc
            )));
        }
        if self.dphi_ret < 0.0 || self.dphi_pcc < 0.0 {
            return Err(Error::InvalidParam(
                "pcc.dphi_ret and pcc.dphi_pcc must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Total controlled-phase deviation from the π operating point, rad.
    pub fn phase_offset(&self) -> f64 {
        self.dphi_ret + self.dphi_pcc
    }
}

/// Effective round-trip power loss of the PCC.
///
/// Returns the measured override when present, otherwise the component sum
/// `2(L_qwp + T_spbs + R_ppbs) + T_pcm + L_align + L_mis`. The result is
/// clamped to `[0, 1)`; the boolean reports whether clamping occurred.
pub fn effective_pcc_loss_detailed(pcc: &PccParams) -> (f64, bool) {
    let raw = match pcc.loss_pcc_override {
        Some(total) => total,
        None => {
            2.0 * (pcc.loss_qwp + pcc.t_spbs + pcc.r_ppbs)
                + pcc.t_pcm
                + pcc.loss_align
                + pcc.loss_mis
        }
    };
    let clamped = raw.clamp(0.0, 1.0 - f64::EPSILON);
    (clamped, clamped != raw)
}

/// Effective round-trip power loss of the PCC, clamped to `[0, 1)`.
pub fn effective_pcc_loss(pcc: &PccParams) -> f64 {
    effective_pcc_loss_detailed(pcc).0
}

/// Bandwidths, detunings and derived figures of the cavity system.
///
/// Angular rates are in rad/s; `f_c` is in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    /// Input-coupling half-bandwidth γ₁ = c·T_itm/(4·l_cav), rad/s.
    pub gamma1: f64,
    /// Loss half-bandwidth γ₂ = c·L_cav/(4·l_cav), rad/s.
    pub gamma2: f64,
    /// Speed-response cutoff γ_cut = γ₂ + L_pcc·γ₁/2, rad/s.
    pub gamma_cut: f64,
    /// Detuning from the retardation error, γ₁·δφ_ret/2, rad/s.
    pub delta_ret: f64,
    /// Detuning from PCC phase fluctuation, γ₁·δφ_pcc/2, rad/s.
    pub delta_pcc: f64,
    /// Main-cavity finesse 2π/(T_itm + L_cav).
    pub finesse: f64,
    /// Storage time τ = 2π/γ₁, s.
    pub tau: f64,
    /// Cavity pole frequency γ₁/(2π), Hz.
    pub f_c: f64,
}

impl DerivedRates {
    /// Total detuning Δ = Δ_ret + Δ_pcc, rad/s.
    pub fn delta_total(&self) -> f64 {
        self.delta_ret + self.delta_pcc
    }

    /// γ_cut > γ₁: the loss floor exceeds the cavity bandwidth.
    pub fn is_overdamped(&self) -> bool {
        self.gamma_cut > self.gamma1
    }
}

/// Compute all derived rates from the static parameters.
pub fn derive_rates(
    consts: &PhysicalConstants,
    cav: &MainCavityParams,
    pcc: &PccParams,
) -> Result<DerivedRates> {
    consts.validate()?;
    cav.validate()?;
    pcc.validate()?;
    if cav.t_itm == 0.0 {
        return Err(Error::InvalidParam(
            "t_itm = 0 gives a degenerate cavity (gamma1 = 0)".into(),
        ));
    }
    let gamma1 = consts.c * cav.t_itm / (4.0 * cav.l_cav);
    let gamma2 = consts.c * cav.loss_cav / (4.0 * cav.l_cav);
    let l_pcc_loss = effective_pcc_loss(pcc);
    Ok(DerivedRates {
        gamma1,
        gamma2,
        gamma_cut: gamma2 + l_pcc_loss * gamma1 / 2.0,
        delta_ret: gamma1 * pcc.dphi_ret / 2.0,
        delta_pcc: gamma1 * pcc.dphi_pcc / 2.0,
        finesse: 2.0 * PI / (cav.t_itm + cav.loss_cav),
        tau: 2.0 * PI / gamma1,
        f_c: gamma1 / (2.0 * PI),
    })
}

/// Cavity amplitude reflectivity at sideband frequency ω (rad/s).
pub fn reflectivity(rates: &DerivedRates, omega: f64) -> Complex64 {
    Complex64::new(rates.gamma1 - rates.gamma2, omega)
        / Complex64::new(rates.gamma1 + rates.gamma2, -omega)
}

/// Position-meter response γ₁/(γ₁ − iω), normalized to 1 at DC.
pub fn position_response(rates: &DerivedRates, omega: f64) -> Complex64 {
    Complex64::new(rates.gamma1, 0.0) / Complex64::new(rates.gamma1, -omega)
}

/// Factor acquired by the second circulation through the PCC:
/// `e^{iφ}·(1 − L_pcc)·r(ω)`, with φ the total phase deviation from π.
pub fn circulation_factor(
    rates: &DerivedRates,
    pcc: &PccParams,
    phi_offset: f64,
    omega: f64,
) -> Complex64 {
    let loss = effective_pcc_loss(pcc);
    Complex64::from_polar(1.0 - loss, phi_offset) * reflectivity(rates, omega)
}

/// Speed-meter response without small-parameter approximation:
/// `(1 − ρ(ω))/2 · f_pm(ω)`.
pub fn speed_response_exact(
    rates: &DerivedRates,
    pcc: &PccParams,
    phi_offset: f64,
    omega: f64,
) -> Complex64 {
    let rho = circulation_factor(rates, pcc, phi_offset, omega);
    (Complex64::new(1.0, 0.0) - rho) / 2.0 * position_response(rates, omega)
}

/// First-order speed-meter response:
/// `(γ_cut − i(Δ + ω))/(γ₁ − iω) · f_pm(ω)` with Δ = Δ_ret + Δ_pcc.
pub fn speed_response_firstorder(rates: &DerivedRates, omega: f64) -> Complex64 {
    let num = Complex64::new(rates.gamma_cut, -(rates.delta_total() + omega));
    let den = Complex64::new(rates.gamma1, -omega);
    num / den * position_response(rates, omega)
}

/// Sine-quadrature content of a response sampled at ±ω:
/// `ψ = (f(+ω) − f*(−ω))/(2i)`.
pub fn quadrature_point(f_plus: Complex64, f_minus: Complex64) -> Complex64 {
    (f_plus - f_minus.conj()) / Complex64::new(0.0, 2.0)
}

/// Ratio of the speed and position transfer functions at frequency f (Hz).
///
/// Without detuning this is `(γ_cut/2π − if)/(γ₁/2π − if)`; with detuning
/// the numerator becomes `γ_cut/2π − i(Δ/2π + f)`.
pub fn observable_h(rates: &DerivedRates, f: f64, include_detuning: bool) -> Complex64 {
    let two_pi = 2.0 * PI;
    let delta = if include_detuning {
        rates.delta_total() / two_pi
    } else {
        0.0
    };
    Complex64::new(rates.gamma_cut / two_pi, -(delta + f)) / Complex64::new(rates.f_c, -f)
}

/// A frequency grid with complex transfer-function values.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponse {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexResponse {
    /// Build a response, enforcing equal lengths, strictly increasing
    /// frequencies, and finite values.
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} frequencies vs {} values",
                freqs.len(),
                values.len()
            )));
        }
        for w in freqs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParam(format!(
                    "frequencies not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if freqs.iter().any(|f| !f.is_finite())
            || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidParam(
                "response contains non-finite entries".into(),
            ));
        }
        Ok(Self { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.freqs.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at frequency `f`, matched to relative tolerance 1e-9.
    pub fn value_at(&self, f: f64) -> Option<Complex64> {
        let tol = 1e-9 * f.abs().max(1e-300);
        let idx = self
            .freqs
            .binary_search_by(|probe| probe.partial_cmp(&f).unwrap())
            .unwrap_or_else(|i| i);
        for i in [idx.saturating_sub(1), idx, idx + 1] {
            if let Some(&fi) = self.freqs.get(i) {
                if (fi - f).abs() <= tol {
                    return Some(self.values[i]);
                }
            }
        }
        None
    }
}

/// Quadrature map of a two-sided response at frequency ω (rad/s or Hz,
/// matching the grid). Errors when either ±ω is absent from the grid.
pub fn quadrature_map(two_sided: &ComplexResponse, omega: f64) -> Result<Complex64> {
    let f_plus = two_sided.value_at(omega).ok_or_else(|| {
        Error::InvalidParam(format!("response has no sample at +{omega}"))
    })?;
    let f_minus = two_sided.value_at(-omega).ok_or_else(|| {
        Error::InvalidParam(format!("response has no sample at -{omega}"))
    })?;
    Ok(quadrature_point(f_plus, f_minus))
}
