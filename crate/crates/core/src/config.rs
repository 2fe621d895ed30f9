//! One coherent configuration document covering every subsystem.
//!
//! The on-disk format is TOML with one section per parameter group.
//! Parsing is strict: any key not recognized by its section is an error
//! that names the offending key. Several files can be layered; later files
//! override earlier ones key by key, so a small experiment-specific file
//! can sit on top of the shipped parameter tables.

use std::path::Path;

use crate::fit::FitConfig;
use crate::lockacq::{GreenParams, LockSimConfig, ServoConfig};
use crate::model::{MainCavityParams, PccParams, PhysicalConstants};
use crate::noise::SpectrumConfig;
use crate::synth::{AsdSegment, FrequencyGrid, MeasurementNoiseModel};
use crate::{Error, Result};

/// Seeds for the three stochastic workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Transfer-function synthesis.
    pub synth: u64,
    /// Lock-acquisition disturbance.
    pub lock: u64,
    /// Noise time-series synthesis.
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            synth: 42,
            lock: 1,
            noise: 7,
        }
    }
}

/// Target spectrum for synthetic PCC-length noise.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSynthConfig {
    /// s
    pub duration: f64,
    /// Hz
    pub rate: f64,
    /// When set, a flat spectrum engineered to this total RMS (m) replaces
    /// `segments`. In config files a negative value selects `segments`.
    #[serde(
        deserialize_with = "de_total_rms",
        skip_serializing_if = "Option::is_none"
    )]
    pub total_rms: Option<f64>,
    pub segments: Vec<AsdSegment>,
}

impl Default for NoiseSynthConfig {
    fn default() -> Self {
        Self {
            duration: 256.0,
            rate: 256.0,
            total_rms: Some(1e-10),
            segments: Vec::new(),
        }
    }
}

fn de_total_rms<'de, D>(d: D) -> std::result::Result<Option<f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = <f64 as serde::Deserialize>::deserialize(d)?;
    Ok((v >= 0.0).then_some(v))
}

impl NoiseSynthConfig {
    /// The ASD segments to synthesize from.
    pub fn effective_segments(&self) -> Result<Vec<AsdSegment>> {
        if let Some(rms) = self.total_rms {
            return Ok(crate::synth::flat_spec_with_total_rms(rms, self.rate));
        }
        if self.segments.is_empty() {
            return Err(Error::Config(
                "noise_synth needs total_rms or at least one segment".into(),
            ));
        }
        Ok(self.segments.clone())
    }
}

/// Everything a command needs, in one document.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub constants: PhysicalConstants,
    pub main_cavity: MainCavityParams,
    pub pcc: PccParams,
    pub green: GreenParams,
    pub grid: FrequencyGrid,
    pub measurement_noise: MeasurementNoiseModel,
    pub fit: FitConfig,
    pub servo: ServoConfig,
    pub lock: LockSimConfig,
    pub spectrum: SpectrumConfig,
    pub noise_synth: NoiseSynthConfig,
    pub seeds: Seeds,
}

impl RunConfig {
    /// Parse a single TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load one or more files, later ones overriding earlier ones.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("no config file given".into()));
        }
        let mut merged = toml::Table::new();
        for p in paths {
            let path = p.as_ref();
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?;
            let table: toml::Table = toml::from_str(&text).map_err(|e| {
                Error::Config(format!("{}: {e}", path.display()))
            })?;
            merge_tables(&mut merged, table);
        }
        let cfg: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.main_cavity.validate()?;
        self.pcc.validate()?;
        self.measurement_noise.validate()?;
        self.fit.validate()?;
        self.servo.validate()?;
        self.lock.validate()?;
        self.spectrum.validate()?;
        Ok(())
    }

    /// Soft warnings worth surfacing to a user.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = self.main_cavity.warnings();
        let (_, clamped) = crate::model::effective_pcc_loss_detailed(&self.pcc);
        if clamped {
            w.push("effective PCC loss clamped to [0, 1)".into());
        }
        if let Ok(rates) =
            crate::model::derive_rates(&self.constants, &self.main_cavity, &self.pcc)
        {
            if rates.is_overdamped() {
                w.push(format!(
                    "gamma_cut = {:.3e} rad/s exceeds gamma1 = {:.3e} rad/s (overdamped)",
                    rates.gamma_cut, rates.gamma1
                ));
            }
        }
        w
    }
}

fn merge_tables(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => {
                merge_tables(dst, src);
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}
