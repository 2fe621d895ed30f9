//! Discrete-time simulation of the four-loop control system and the
//! green-locking lock-acquisition sequence.
//!
//! The plant is quasi-static: cavity transmissions respond instantly to the
//! round-trip phases, and each servo is a single integrator. The controlled
//! degrees of freedom are the main-laser frequency (held to the main cavity
//! by a PDH loop), the PCC length (held to the green beam, later handed
//! over to the infrared error signal), and the phase-lock-loop local
//! oscillator whose offset tunes where the green lock places the PCC.
//! The signal-beam phase loop plays no role in acquisition ordering and is
//! modeled as ideally locked.
//!
//! Acquisition runs through a fixed forward-only sequence:
//! `Idle → MainLocked → PccScanning → PccGrLocked → PllTuning → SpeedMeter`,
//! with a fall back to `Idle` from any state on lock loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

use crate::model::{MainCavityParams, PccParams, PhysicalConstants};
use crate::{Error, Result};

/// Acquisition state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LockState {
    Idle,
    MainLocked,
    PccScanning,
    PccGrLocked,
    PllTuning,
    SpeedMeter,
}

impl LockState {
    /// Forward-only chain, plus any-state -> Idle.
    pub fn may_transition_to(self, next: LockState) -> bool {
        use LockState::*;
        matches!(
            (self, next),
            (Idle, MainLocked)
                | (MainLocked, PccScanning)
                | (PccScanning, PccGrLocked)
                | (PccGrLocked, PllTuning)
                | (PllTuning, SpeedMeter)
        ) || next == Idle
    }

    pub fn name(self) -> &'static str {
        match self {
            LockState::Idle => "Idle",
            LockState::MainLocked => "MainLocked",
            LockState::PccScanning => "PccScanning",
            LockState::PccGrLocked => "PccGrLocked",
            LockState::PllTuning => "PllTuning",
            LockState::SpeedMeter => "SpeedMeter",
        }
    }
}

/// Instantaneous plant readouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Main-cavity round-trip phase error, rad.
    pub main_detuning: f64,
    /// Physical PCC length (control plus disturbance), m.
    pub pcc_length: f64,
    /// PLL local-oscillator offset applied to the green frequency, Hz.
    pub gr_freq_offset: f64,
    /// Normalized IR transmission at DCPD2.
    pub ir_trans: f64,
    /// Normalized GR transmission at RFPD2's DC readout.
    pub gr_trans: f64,
    /// Normalized power at the detection port.
    pub dcpd1: f64,
    /// s
    pub t: f64,
}

/// Additive plant disturbance for one sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct Disturbance {
    /// Offset added to the PCC length, m.
    pub pcc_length: f64,
    /// Offset added to the main round-trip phase, rad.
    pub main_phase: f64,
}

/// One feedback loop: integrator gain plus its trigger/capture settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoLoop {
    /// Integrator gain, 1/s (closed-loop pole; invented default, the
    /// experiment reports no loop shapes).
    pub gain: f64,
    /// Transmission level that must be exceeded to claim lock.
    pub threshold: f64,
    /// Detuning window for the trigger, rad.
    pub capture_range: f64,
}

/// A triangular scan of one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Scan speed (units of the scanned DOF per second).
    pub rate: f64,
    /// Full peak-to-peak scan width, centered on the start value.
    pub span: f64,
}

/// Hill-climb schedule for the PLL local-oscillator tuning phase.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoScanConfig {
    /// Initial ramp rate, Hz/s.
    pub rate: f64,
    /// Maximum total offset excursion, Hz (peak to peak).
    pub span: f64,
    /// Interval between climb decisions, s.
    pub settle: f64,
    /// Terminate once the rate has been halved below `rate * min_rate_fraction`.
    pub min_rate_fraction: f64,
}

/// The four control degrees of freedom and their scan schedules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServoConfig {
    /// Loop A: main-laser frequency to main-cavity length (PDH).
    pub main: ServoLoop,
    /// Loop B: PCC length to the green frequency (PDH).
    pub gr: ServoLoop,
    /// PCC length to the infrared error signal after handover.
    pub ir: ServoLoop,
    /// Main frequency scan used to find the first resonance, rad/s and rad.
    pub main_scan: ScanConfig,
    /// PCC length scan of phase (ii), m/s and m.
    pub pcc_scan: ScanConfig,
    /// LO tuning of phase (iv).
    pub lo_scan: LoScanConfig,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            main: ServoLoop {
                gain: 3000.0,
                threshold: 0.2,
                capture_range: 2.0 * PI / 1500.0,
            },
            gr: ServoLoop {
                gain: 4000.0,
                threshold: 0.5,
                capture_range: PI / 50.0,
            },
            ir: ServoLoop {
                gain: 800.0,
                threshold: 0.5,
                capture_range: 0.5,
            },
            main_scan: ScanConfig {
                rate: 0.2,
                span: 0.2,
            },
            pcc_scan: ScanConfig {
                rate: 2e-6,
                span: 1.5e-6,
            },
            lo_scan: LoScanConfig {
                rate: 3e8,
                span: 2e9,
                settle: 8e-3,
                min_rate_fraction: 1.0 / 64.0,
            },
        }
    }
}

impl ServoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, loop_) in [("main", &self.main), ("gr", &self.gr), ("ir", &self.ir)] {
            if !(loop_.gain > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "servo.{name}.gain must be > 0"
                )));
            }
            if !(loop_.threshold > 0.0 && loop_.threshold < 1.0) {
                return Err(Error::InvalidParam(format!(
                    "servo.{name}.threshold must be in (0, 1)"
                )));
            }
            if loop_.capture_range < 0.0 {
                return Err(Error::InvalidParam(format!(
                    "servo.{name}.capture_range must be >= 0"
                )));
            }
        }
        if !(self.lo_scan.settle > 0.0) || !(self.lo_scan.min_rate_fraction > 0.0) {
            return Err(Error::InvalidParam(
                "lo_scan.settle and min_rate_fraction must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Green-beam parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenParams {
    /// m
    pub lambda_gr: f64,
    /// ITM transmissivity at the green wavelength.
    pub t_itm_gr: f64,
    /// PCM transmissivity at the green wavelength.
    pub t_pcm_gr: f64,
    /// PCC finesse for the green beam.
    pub finesse_gr: f64,
}

impl Default for GreenParams {
    fn default() -> Self {
        Self {
            lambda_gr: 532e-9,
            t_itm_gr: 500e-6,
            t_pcm_gr: 0.01,
            finesse_gr: 50.0,
        }
    }
}

/// Band-limited disturbance on the PCC length.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceSpec {
    /// Stationary RMS, m.
    pub rms: f64,
    /// First-order corner frequency, Hz.
    pub corner_hz: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self {
            rms: 1e-10,
            corner_hz: 20.0,
        }
    }
}

/// Timing, initial conditions and bookkeeping for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockSimConfig {
    /// Sample interval, s.
    pub dt: f64,
    /// Simulated duration, s.
    pub duration: f64,
    /// Time a trigger condition must hold before a transition fires, s
    /// (invented default, the experiment's trigger logic is unreported).
    pub hold_time: f64,
    /// Pause between a confirmed lock and starting the next phase, s.
    pub dwell_time: f64,
    /// Starting main round-trip phase error, rad.
    pub initial_main_detuning: f64,
    /// Starting PCC length offset from the nominal mean length, m.
    pub initial_pcc_offset: f64,
    pub disturbance: DisturbanceSpec,
    /// Residual IR reaching the green photodetector when the main cavity
    /// reflects it; reproduces the green-power drop at main lock.
    pub ir_crosstalk: f64,
    /// Keep every n-th sample in the trace.
    pub trace_decim: usize,
    /// Lock is declared lost when a loop's detuning exceeds
    /// `unlock_factor * capture_range`.
    pub unlock_factor: f64,
}

impl Default for LockSimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            duration: 8.0,
            hold_time: 2e-3,
            dwell_time: 0.2,
            initial_main_detuning: 0.05,
            initial_pcc_offset: 3e-7,
            disturbance: DisturbanceSpec::default(),
            ir_crosstalk: 0.05,
            trace_decim: 10,
            unlock_factor: 3.0,
        }
    }
}

impl LockSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidParam("lock.dt and lock.duration must be > 0".into()));
        }
        if self.trace_decim == 0 {
            return Err(Error::InvalidParam("lock.trace_decim must be >= 1".into()));
        }
        if self.disturbance.rms < 0.0 || self.disturbance.corner_hz < 0.0 {
            return Err(Error::InvalidParam("lock.disturbance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Airy transmission of a two-mirror cavity versus round-trip phase.
pub fn airy_transmission(round_trip_phase: f64, finesse: f64) -> f64 {
    let coeff = 2.0 * finesse / PI;
    let s = (round_trip_phase / 2.0).sin();
    1.0 / (1.0 + coeff * coeff * s * s)
}

/// Dispersion-shaped PDH error signal: zero-crossing at resonance, unit
/// slope near zero, extrema at the linewidth.
pub fn pdh_error(detuning: f64, linewidth: f64) -> f64 {
    let x = detuning / linewidth;
    detuning / (1.0 + x * x)
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Uniformly sampled acquisition record.
#[derive(Debug, Clone)]
pub struct LockTrace {
    pub samples: Vec<PlantState>,
    pub states: Vec<LockState>,
    /// (new state, time it fired)
    pub transitions: Vec<(LockState, f64)>,
    pub final_state: LockState,
    pub reached_speed_meter: bool,
    pub diagnostic: Option<String>,
}

impl LockTrace {
    /// Sample indices spent in `state`.
    pub fn indices_in(&self, state: LockState) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == state).then_some(i))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ClimbPhase {
    Probing,
    Done,
}

/// Full simulation state: plant, controller bookkeeping and configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    // plant constants
    lambda0: f64,
    nu_gr: f64,
    c: f64,
    finesse_main: f64,
    finesse_gr: f64,
    servos: ServoConfig,
    cfg: LockSimConfig,
    // controlled variables
    main_phase: f64,
    l_ctl: f64,
    lo_offset: f64,
    // controller bookkeeping
    lock: LockState,
    main_engaged: bool,
    gr_engaged: bool,
    ir_engaged: bool,
    hold: usize,
    dwell: usize,
    scan_dir: f64,
    scan_origin: f64,
    lo_dir: f64,
    lo_rate: f64,
    lo_origin: f64,
    climb: ClimbPhase,
    climb_prev: Option<f64>,
    climb_reversals: usize,
    settle_acc: f64,
    settle_n: usize,
    unlock: usize,
    step_index: u64,
    plant: PlantState,
}

impl Simulator {
    pub fn new(
        consts: &PhysicalConstants,
        cav: &MainCavityParams,
        pcc: &PccParams,
        green: &GreenParams,
        servos: &ServoConfig,
        cfg: &LockSimConfig,
    ) -> Result<Self> {
        consts.validate()?;
        cav.validate()?;
        pcc.validate()?;
        servos.validate()?;
        cfg.validate()?;
        if !(green.lambda_gr > 0.0) || !(green.finesse_gr > 0.0) {
            return Err(Error::InvalidParam(
                "green.lambda_gr and green.finesse_gr must be > 0".into(),
            ));
        }
        let l0 = pcc.l_pcc + cfg.initial_pcc_offset;
        if !(l0 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "initial PCC length {l0} m must be > 0"
            )));
        }
        let mut sim = Self {
            lambda0: consts.lambda0,
            nu_gr: consts.c / green.lambda_gr,
            c: consts.c,
            finesse_main: 2.0 * PI / (cav.t_itm + cav.loss_cav),
            finesse_gr: green.finesse_gr,
            servos: *servos,
            cfg: *cfg,
            main_phase: cfg.initial_main_detuning,
            l_ctl: l0,
            lo_offset: 0.0,
            lock: LockState::Idle,
            main_engaged: false,
            gr_engaged: false,
            ir_engaged: false,
            hold: 0,
            dwell: 0,
            scan_dir: -1.0,
            scan_origin: cfg.initial_main_detuning,
            lo_dir: 1.0,
            lo_rate: servos.lo_scan.rate,
            lo_origin: 0.0,
            climb: ClimbPhase::Probing,
            climb_prev: None,
            climb_reversals: 0,
            settle_acc: 0.0,
            settle_n: 0,
            unlock: 0,
            step_index: 0,
            plant: PlantState {
                main_detuning: cfg.initial_main_detuning,
                pcc_length: l0,
                gr_freq_offset: 0.0,
                ir_trans: 0.0,
                gr_trans: 0.0,
                dcpd1: 0.0,
                t: 0.0,
            },
        };
        sim.refresh_readouts(0.0);
        Ok(sim)
    }

    pub fn lock_state(&self) -> LockState {
        self.lock
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    /// Place the simulator at an operating point, with the servos that the
    /// given state implies already engaged.
    pub fn set_operating_point(&mut self, main_phase: f64, pcc_length: f64, lock: LockState) {
        self.main_phase = main_phase;
        self.l_ctl = pcc_length;
        self.lock = lock;
        self.main_engaged = lock != LockState::Idle;
        self.gr_engaged = matches!(lock, LockState::PccGrLocked | LockState::PllTuning);
        self.ir_engaged = lock == LockState::SpeedMeter;
        self.hold = 0;
        self.dwell = 0;
        self.unlock = 0;
        self.refresh_readouts(0.0);
    }

    fn phi_gr(&self, l: f64) -> f64 {
        wrap_phase(4.0 * PI * l * (self.nu_gr + self.lo_offset) / self.c)
    }

    fn phi_ir(&self, l: f64) -> f64 {
        (2.0 * PI * l / self.lambda0).rem_euclid(2.0 * PI)
    }

    fn refresh_readouts(&mut self, pcc_disturbance: f64) {
        let l = self.l_ctl + pcc_disturbance;
        let airy_main = airy_transmission(self.main_phase, self.finesse_main);
        let gr_raw = airy_transmission(self.phi_gr(l), self.finesse_gr);
        let phi_ir = self.phi_ir(l);
        let ir_factor = 0.5 * (1.0 - phi_ir.cos());
        self.plant.main_detuning = self.main_phase;
        self.plant.pcc_length = l;
        self.plant.gr_freq_offset = self.lo_offset;
        self.plant.ir_trans = airy_main * (0.5 + 0.5 * ir_factor);
        self.plant.gr_trans = gr_raw + self.cfg.ir_crosstalk * (1.0 - airy_main);
        self.plant.dcpd1 = airy_main * 0.5 * (1.0 + phi_ir.cos());
    }

    fn transition(&mut self, next: LockState, transitions: Option<&mut Vec<(LockState, f64)>>) {
        debug_assert!(self.lock.may_transition_to(next));
        self.lock = next;
        self.hold = 0;
        self.dwell = 0;
        if let Some(list) = transitions {
            list.push((next, self.plant.t));
        }
    }

    fn reset_to_idle(&mut self, transitions: Option<&mut Vec<(LockState, f64)>>) {
        self.main_engaged = false;
        self.gr_engaged = false;
        self.ir_engaged = false;
        self.unlock = 0;
        self.scan_origin = self.main_phase;
        self.scan_dir = -self.main_phase.signum();
        self.lo_rate = self.servos.lo_scan.rate;
        self.lo_dir = 1.0;
        self.climb = ClimbPhase::Probing;
        self.climb_prev = None;
        self.climb_reversals = 0;
        self.settle_acc = 0.0;
        self.settle_n = 0;
        self.transition(LockState::Idle, transitions);
    }

    /// Advance one sample. Returns the updated plant readouts and state.
    pub fn step(&mut self, disturbance: Disturbance) -> Result<(PlantState, LockState)> {
        self.step_traced(disturbance, &mut None)
    }

    fn step_traced(
        &mut self,
        disturbance: Disturbance,
        transitions: &mut Option<&mut Vec<(LockState, f64)>>,
    ) -> Result<(PlantState, LockState)> {
        let dt = self.cfg.dt;
        let hold_steps = (self.cfg.hold_time / dt).round() as usize;
        let dwell_steps = (self.cfg.dwell_time / dt).round() as usize;
        let lw_main = 2.0 * PI / self.finesse_main;
        let lw_gr = 2.0 * PI / self.finesse_gr;

        self.main_phase += disturbance.main_phase;
        let l_phys = self.l_ctl + disturbance.pcc_length;
        let err_gr = self.phi_gr(l_phys);
        let err_ir = wrap_phase(self.phi_ir(l_phys) - PI);

        // servo feedback (single integrator per loop)
        if self.main_engaged {
            self.main_phase -= self.servos.main.gain * pdh_error(self.main_phase, lw_main) * dt;
        }
        if self.gr_engaged {
            let dl_per_rad = self.c / (4.0 * PI * (self.nu_gr + self.lo_offset));
            self.l_ctl -= self.servos.gr.gain * pdh_error(err_gr, lw_gr) * dl_per_rad * dt;
        }
        if self.ir_engaged {
            let dl_per_rad = self.lambda0 / (2.0 * PI);
            self.l_ctl -= self.servos.ir.gain * err_ir * dl_per_rad * dt;
        }

        // phase-dependent scans and sequencing
        match self.lock {
            LockState::Idle => {
                if !self.main_engaged {
                    self.triangle_scan_main(dt);
                    let near = self.main_phase.abs() < self.servos.main.capture_range
                        && self.plant.ir_trans > self.servos.main.threshold;
                    if near {
                        self.main_engaged = true;
                    }
                }
                if self.main_engaged {
                    let held = self.main_phase.abs() < self.servos.main.capture_range
                        && self.plant.ir_trans > self.servos.main.threshold;
                    self.hold = if held { self.hold + 1 } else { 0 };
                    if self.hold >= hold_steps {
                        self.transition(LockState::MainLocked, transitions.as_deref_mut());
                    }
                }
            }
            LockState::MainLocked => {
                self.dwell += 1;
                if self.dwell >= dwell_steps {
                    self.scan_origin = self.l_ctl;
                    self.scan_dir = 1.0;
                    self.transition(LockState::PccScanning, transitions.as_deref_mut());
                }
            }
            LockState::PccScanning => {
                if !self.gr_engaged {
                    self.triangle_scan_pcc(dt);
                    let near = err_gr.abs() < self.servos.gr.capture_range
                        && airy_transmission(err_gr, self.finesse_gr) > self.servos.gr.threshold;
                    if near {
                        self.gr_engaged = true;
                    }
                }
                if self.gr_engaged {
                    let held = err_gr.abs() < self.servos.gr.capture_range
                        && airy_transmission(err_gr, self.finesse_gr) > self.servos.gr.threshold;
                    self.hold = if held { self.hold + 1 } else { 0 };
                    if self.hold >= hold_steps {
                        self.transition(LockState::PccGrLocked, transitions.as_deref_mut());
                    }
                }
            }
            LockState::PccGrLocked => {
                self.dwell += 1;
                if self.dwell >= dwell_steps {
                    self.lo_origin = self.lo_offset;
                    self.lo_rate = self.servos.lo_scan.rate;
                    self.lo_dir = 1.0;
                    self.climb = ClimbPhase::Probing;
                    self.climb_prev = None;
                    self.climb_reversals = 0;
                    self.settle_acc = 0.0;
                    self.settle_n = 0;
                    self.transition(LockState::PllTuning, transitions.as_deref_mut());
                }
            }
            LockState::PllTuning => {
                self.hill_climb(dt);
                if self.climb == ClimbPhase::Done {
                    self.gr_engaged = false;
                    self.ir_engaged = true;
                    self.transition(LockState::SpeedMeter, transitions.as_deref_mut());
                }
            }
            LockState::SpeedMeter => {}
        }

        // lock-loss supervision
        let mut lost = false;
        if self.main_engaged
            && self.main_phase.abs() > self.cfg.unlock_factor * self.servos.main.capture_range
        {
            lost = true;
        }
        if self.gr_engaged
            && err_gr.abs() > self.cfg.unlock_factor * self.servos.gr.capture_range
        {
            lost = true;
        }
        if self.ir_engaged
            && err_ir.abs() > self.cfg.unlock_factor * self.servos.ir.capture_range
        {
            lost = true;
        }
        if lost {
            self.unlock += 1;
        } else {
            self.unlock = 0;
        }
        if self.lock != LockState::Idle && self.unlock >= hold_steps.max(1) {
            self.reset_to_idle(transitions.as_deref_mut());
        }

        self.step_index += 1;
        self.plant.t = self.step_index as f64 * dt;
        self.refresh_readouts(disturbance.pcc_length);

        for (name, v) in [
            ("main_detuning", self.plant.main_detuning),
            ("pcc_length", self.plant.pcc_length),
            ("gr_freq_offset", self.plant.gr_freq_offset),
            ("ir_trans", self.plant.ir_trans),
            ("gr_trans", self.plant.gr_trans),
            ("dcpd1", self.plant.dcpd1),
        ] {
            if !v.is_finite() {
                return Err(Error::Diverged(format!(
                    "{name} is not finite at t = {}",
                    self.plant.t
                )));
            }
        }
        Ok((self.plant, self.lock))
    }

    fn triangle_scan_main(&mut self, dt: f64) {
        let half = self.servos.main_scan.span / 2.0;
        self.main_phase += self.scan_dir * self.servos.main_scan.rate * dt;
        if self.main_phase > self.scan_origin + half {
            self.scan_dir = -1.0;
        } else if self.main_phase < self.scan_origin - half {
            self.scan_dir = 1.0;
        }
    }

    fn triangle_scan_pcc(&mut self, dt: f64) {
        let half = self.servos.pcc_scan.span / 2.0;
        self.l_ctl += self.scan_dir * self.servos.pcc_scan.rate * dt;
        if self.l_ctl > self.scan_origin + half {
            self.scan_dir = -1.0;
        } else if self.l_ctl < self.scan_origin - half {
            self.scan_dir = 1.0;
        }
    }

    /// Phase (iv): ramp the LO while watching the IR transmission; reverse
    /// and slow down when it stops improving, stop once the rate is spent.
    ///
    /// The transmission is quadratic around its peak, so the improvement
    /// threshold bounds the final offset at sqrt(8*eps) of circulation
    /// phase; 1e-5 parks within ~9 mrad while staying well above the
    /// averaged readout noise.
    fn hill_climb(&mut self, dt: f64) {
        const IMPROVE_EPS: f64 = 1e-5;
        let lo = &self.servos.lo_scan;
        self.lo_offset += self.lo_dir * self.lo_rate * dt;
        let half = lo.span / 2.0;
        if (self.lo_offset - self.lo_origin).abs() > half {
            self.lo_dir = -self.lo_dir; // bounce without slowing
            self.climb_prev = None;
        }
        self.settle_acc += self.plant.ir_trans;
        self.settle_n += 1;
        let settle_steps = (lo.settle / dt).round().max(1.0) as usize;
        if self.settle_n < settle_steps {
            return;
        }
        let ir_avg = self.settle_acc / self.settle_n as f64;
        self.settle_acc = 0.0;
        self.settle_n = 0;
        match self.climb_prev {
            Some(prev) if ir_avg <= prev + IMPROVE_EPS => {
                self.lo_dir = -self.lo_dir;
                if self.climb_reversals > 0 {
                    self.lo_rate *= 0.5;
                }
                self.climb_reversals += 1;
                // the next window retraces old ground; compare after that
                self.climb_prev = None;
            }
            _ => self.climb_prev = Some(ir_avg),
        }
        if self.lo_rate < lo.rate * lo.min_rate_fraction {
            self.climb = ClimbPhase::Done;
        }
    }

    /// Execute the acquisition sequence for the configured duration.
    /// The PLL between the two lasers is treated as already locked.
    pub fn run(&mut self, seed: u64) -> Result<LockTrace> {
        let n_steps = (self.cfg.duration / self.cfg.dt).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let alpha = (-2.0 * PI * self.cfg.disturbance.corner_hz * self.cfg.dt).exp();
        let beta = self.cfg.disturbance.rms * (1.0 - alpha * alpha).sqrt();
        let mut d = 0.0;

        let mut samples = Vec::with_capacity(n_steps / self.cfg.trace_decim + 2);
        let mut states = Vec::with_capacity(samples.capacity());
        let mut transitions = Vec::new();
        samples.push(self.plant);
        states.push(self.lock);

        for i in 0..n_steps {
            d = alpha * d + beta * unit.sample(&mut rng);
            let (plant, lock) = self.step_traced(
                Disturbance {
                    pcc_length: d,
                    main_phase: 0.0,
                },
                &mut Some(&mut transitions),
            )?;
            if (i + 1) % self.cfg.trace_decim == 0 || i + 1 == n_steps {
                samples.push(plant);
                states.push(lock);
            }
        }

        let reached = self.lock == LockState::SpeedMeter;
        Ok(LockTrace {
            samples,
            states,
            transitions,
            final_state: self.lock,
            reached_speed_meter: reached,
            diagnostic: (!reached).then(|| {
                format!(
                    "did not reach SpeedMeter within {} s (ended in {})",
                    self.cfg.duration,
                    self.lock.name()
                )
            }),
        })
    }
}

/// Build a simulator from the parameter set and run the full sequence.
pub fn run_acquisition(
    consts: &PhysicalConstants,
    cav: &MainCavityParams,
    pcc: &PccParams,
    green: &GreenParams,
    servos: &ServoConfig,
    cfg: &LockSimConfig,
    seed: u64,
) -> Result<LockTrace> {
    Simulator::new(consts, cav, pcc, green, servos, cfg)?.run(seed)
}
