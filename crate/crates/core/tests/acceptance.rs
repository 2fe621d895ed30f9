//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the summary lines and measured margins.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speedmeter_core::config::RunConfig;
use speedmeter_core::fit::{cost, fit_loss, FitProblem};
use speedmeter_core::lockacq::{run_acquisition, LockState};
use speedmeter_core::noise::{
    accumulate_rms, estimate_asd, project_detuning, PhaseConvention, SpectrumConfig,
};
use speedmeter_core::synth::{
    eval_tf_model, flat_spec_with_total_rms, make_grid, synth_noise_timeseries, synth_tf,
    FrequencyGrid, MeasurementNoiseModel, TfModel,
};
use speedmeter_core::{
    derive_rates, observable_h, position_response, quadrature_point, reflectivity,
    speed_response_exact, speed_response_firstorder, ComplexResponse, DerivedRates,
    MainCavityParams, PccParams, PhysicalConstants,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn table1_config() -> RunConfig {
    RunConfig::load(&[fixture("table1.cfg")]).expect("table1 fixture parses")
}

fn lock_config() -> RunConfig {
    RunConfig::load(&[fixture("table1.cfg"), fixture("table2.cfg")])
        .expect("table1+table2 fixtures parse")
}

fn fit_config() -> RunConfig {
    RunConfig::load(&[fixture("table1.cfg"), fixture("fit.cfg")])
        .expect("table1+fit fixtures parse")
}

fn table1_rates() -> DerivedRates {
    let cfg = table1_config();
    derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap()
}

/// Least-squares slope of log10|H| against log10 f.
fn loglog_slope(rates: &DerivedRates, f_lo: f64, f_hi: f64, n: usize) -> f64 {
    let (mut su, mut sy, mut suu, mut suy) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let f = f_lo * (f_hi / f_lo).powf(k as f64 / (n - 1) as f64);
        let u = f.log10();
        let y = observable_h(rates, f, false).norm().log10();
        su += u;
        sy += y;
        suu += u * u;
        suy += u * y;
    }
    let nf = n as f64;
    (nf * suy - su * sy) / (nf * suu - su * su)
}

#[test]
fn criterion_1_cavity_pole() {
    let start = Instant::now();
    let rates = table1_rates();
    let rel = (rates.f_c - 3.2e5).abs() / 3.2e5;
    assert!(rel < 0.01, "f_c = {} Hz is {:.2}% from 3.2e5", rates.f_c, 100.0 * rel);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS criterion 1: cavity pole f_c = {:.4e} Hz ({:.2}% from 3.2e5, runtime {:?})",
        rates.f_c,
        100.0 * rel,
        elapsed
    );
}

#[test]
fn criterion_2_finesse() {
    let rates = table1_rates();
    let rel = (rates.finesse - 1500.0).abs() / 1500.0;
    assert!(rel < 0.05, "finesse = {} is {:.2}% from 1500", rates.finesse, 100.0 * rel);
    println!(
        "PASS criterion 2: finesse = {:.1} ({:.2}% from 1500)",
        rates.finesse,
        100.0 * rel
    );
}

#[test]
fn criterion_3_retardation_detuning() {
    let rates = table1_rates();
    let f_ret = rates.delta_ret / (2.0 * PI);
    let rel = (f_ret - 7.1e3).abs() / 7.1e3;
    assert!(rel < 0.03, "delta_ret/2pi = {f_ret} Hz is {:.2}% from 7.1 kHz", 100.0 * rel);
    println!(
        "PASS criterion 3: retardation detuning = {:.1} Hz ({:.2}% from 7.1 kHz)",
        f_ret,
        100.0 * rel
    );
}

#[test]
fn criterion_4_speed_meter_signature() {
    // fit synthetic data, then examine |H| built from the fitted parameters
    let cfg = fit_config();
    let rates_true = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
    let freqs = make_grid(&cfg.grid).unwrap();
    let data = synth_tf(
        &rates_true,
        &cfg.pcc,
        TfModel::Ratio {
            include_detuning: false,
        },
        &freqs,
        &cfg.measurement_noise,
    )
    .unwrap();
    let problem = FitProblem::new(cfg.constants, cfg.main_cavity, cfg.pcc, false);
    let result = fit_loss(&data, &cfg.fit, &problem).unwrap();
    assert!(result.converged);

    let mut fitted_cav = cfg.main_cavity;
    fitted_cav.loss_cav = result.loss_cav_hat;
    let rates = derive_rates(&cfg.constants, &fitted_cav, &cfg.pcc).unwrap();

    let slope = loglog_slope(&rates, 20e3, 200e3, 60);
    assert!(
        (slope - 1.0).abs() < 0.1,
        "slope = {slope} outside 1.0 +- 0.1"
    );
    // plateau: the response levels off at 1 at the top of the band
    let plateau = observable_h(&rates, 2e6, false).norm();
    assert!(
        (plateau - 1.0).abs() < 0.02,
        "|H(2 MHz)| = {plateau} outside 1 +- 2%"
    );
    println!(
        "PASS criterion 4: slope {:.3} dec/dec over [20k, 200k], |H(2 MHz)| = {:.4}",
        slope, plateau
    );
}

#[test]
fn criterion_5_exact_vs_firstorder() {
    let cfg = table1_config();
    let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
    let phi = cfg.pcc.phase_offset();
    let mut worst = 0.0f64;
    let mut worst_f = 0.0;
    for k in 0..400 {
        let f = 4e3 * (2e6f64 / 4e3).powf(k as f64 / 399.0);
        let omega = 2.0 * PI * f;
        let ex = speed_response_exact(&rates, &cfg.pcc, phi, omega);
        let fo = speed_response_firstorder(&rates, omega);
        let rel = (ex - fo).norm() / fo.norm();
        if rel > worst {
            worst = rel;
            worst_f = f;
        }
    }
    assert!(
        worst <= 0.05,
        "max relative deviation {worst} at {worst_f} Hz exceeds 5%"
    );
    println!(
        "PASS criterion 5: max exact-vs-first-order deviation {:.2}% at {:.1} kHz",
        100.0 * worst,
        worst_f / 1e3
    );
}

#[test]
fn criterion_6_fit_recovery() {
    let start = Instant::now();
    let cfg = fit_config();
    let true_loss = cfg.main_cavity.loss_cav;
    assert_eq!(true_loss, 85e-6);
    let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
    let freqs = make_grid(&FrequencyGrid {
        n_points: 200,
        ..cfg.grid
    })
    .unwrap();
    let problem = FitProblem::new(cfg.constants, cfg.main_cavity, cfg.pcc, false);
    let model = TfModel::Ratio {
        include_detuning: false,
    };

    // noiseless round trip
    let clean = synth_tf(
        &rates,
        &cfg.pcc,
        model,
        &freqs,
        &MeasurementNoiseModel {
            rel_amplitude_sigma: 0.0,
            phase_sigma: 0.0,
            seed: 0,
        },
    )
    .unwrap();
    let result = fit_loss(&clean, &cfg.fit, &problem).unwrap();
    let noiseless_err_ppm = (result.loss_cav_hat - true_loss).abs() * 1e6;
    assert!(
        noiseless_err_ppm < 0.1,
        "noiseless recovery off by {noiseless_err_ppm} ppm"
    );

    // 20-seed Monte Carlo at 2% amplitude noise
    let mut errors_ppm: Vec<f64> = (0..20)
        .map(|seed| {
            let noise = MeasurementNoiseModel {
                rel_amplitude_sigma: 0.02,
                phase_sigma: 0.0,
                seed,
            };
            let data = synth_tf(&rates, &cfg.pcc, model, &freqs, &noise).unwrap();
            let r = fit_loss(&data, &cfg.fit, &problem).unwrap();
            assert!(r.converged, "seed {seed} did not converge");
            (r.loss_cav_hat - true_loss).abs() * 1e6
        })
        .collect();
    errors_ppm.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (errors_ppm[9] + errors_ppm[10]);
    assert!(median < 10.0, "median error {median} ppm exceeds 10 ppm");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "PASS criterion 6: noiseless error {:.2e} ppm, median MC error {:.2} ppm (runtime {:?})",
        noiseless_err_ppm, median, elapsed
    );
}

#[test]
fn criterion_7_lock_acquisition() {
    let start = Instant::now();
    let cfg = lock_config();
    let trace = run_acquisition(
        &cfg.constants,
        &cfg.main_cavity,
        &cfg.pcc,
        &cfg.green,
        &cfg.servo,
        &cfg.lock,
        cfg.seeds.lock,
    )
    .unwrap();
    assert!(trace.reached_speed_meter, "{:?}", trace.diagnostic);
    let seq: Vec<LockState> = trace.transitions.iter().map(|&(s, _)| s).collect();
    assert_eq!(
        seq,
        vec![
            LockState::MainLocked,
            LockState::PccScanning,
            LockState::PccGrLocked,
            LockState::PllTuning,
            LockState::SpeedMeter
        ],
        "acquisition did not follow the (i)-(iv) sequence"
    );

    // phase (iv): green stays put while the infrared swings
    let idx = trace.indices_in(LockState::PllTuning);
    let gr_max = idx.iter().map(|&i| trace.samples[i].gr_trans).fold(0.0, f64::max);
    let gr_min = idx
        .iter()
        .map(|&i| trace.samples[i].gr_trans)
        .fold(f64::INFINITY, f64::min);
    assert!(
        gr_min > 0.99 * gr_max,
        "GR transmission dipped to {gr_min} against peak {gr_max} during LO tuning"
    );
    let ir_max = idx.iter().map(|&i| trace.samples[i].ir_trans).fold(0.0, f64::max);
    let ir_min = idx
        .iter()
        .map(|&i| trace.samples[i].ir_trans)
        .fold(f64::INFINITY, f64::min);
    assert!(
        ir_max - ir_min > 0.10 * ir_max,
        "IR transmission varied only {:.3} of {:.3}",
        ir_max - ir_min,
        ir_max
    );

    let dcpd1_peak = trace.samples.iter().map(|s| s.dcpd1).fold(0.0, f64::max);
    let dcpd1_final = trace.samples.last().unwrap().dcpd1;
    assert!(
        dcpd1_final < 1e-3 * dcpd1_peak,
        "detection port ended at {dcpd1_final} vs peak {dcpd1_peak}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "PASS criterion 7: sequence complete, GR held to {:.2}% of peak, IR swung {:.0}%, \
         dark port at {:.1e} of peak (runtime {:?})",
        100.0 * (1.0 - gr_min / gr_max),
        100.0 * (ir_max - ir_min) / ir_max,
        dcpd1_final / dcpd1_peak.max(f64::MIN_POSITIVE),
        elapsed
    );
}

#[test]
fn criterion_8_noise_pipeline() {
    let cfg = lock_config();
    let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
    let rate = 256.0;
    let n = 1 << 16;
    let spectrum_cfg = SpectrumConfig::default();

    for (target, seed) in [(1e-10, 31u64), (7e-10, 32u64)] {
        let spec_in = flat_spec_with_total_rms(target, rate);
        let series = synth_noise_timeseries(&spec_in, n as f64 / rate, rate, seed).unwrap();
        let spec = estimate_asd(&series, rate, &spectrum_cfg).unwrap();
        let rel = (spec.total_rms / target - 1.0).abs();
        assert!(
            rel < 0.10,
            "recovered RMS {} off target {} by {:.1}%",
            spec.total_rms,
            target,
            100.0 * rel
        );

        // Parseval: band-integrated power equals the series variance
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / series.len() as f64;
        let integral = spec.total_rms * spec.total_rms;
        assert!(
            (integral / var - 1.0).abs() < 0.10,
            "Parseval mismatch: {integral} vs {var}"
        );
    }

    let proj = project_detuning(7e-10, &cfg.constants, &rates, PhaseConvention::SinglePass);
    let rel = (proj - 700.0).abs() / 700.0;
    assert!(rel < 0.10, "projection {proj} Hz is {:.1}% from 700 Hz", 100.0 * rel);
    println!(
        "PASS criterion 8: RMS fixtures recovered within 10%, Parseval holds, \
         projected detuning {:.1} Hz ({:.1}% from 700 Hz)",
        proj,
        100.0 * rel
    );
}

#[test]
fn criterion_9_invariant_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let consts = PhysicalConstants::default();

    // model: passivity of the cavity reflectivity
    for _ in 0..200 {
        let cav = MainCavityParams {
            t_itm: rng.gen_range(1e-6..0.1),
            loss_cav: rng.gen_range(0.0..0.1),
            l_cav: rng.gen_range(0.01..10.0),
            t_etm: 0.0,
        };
        let rates = derive_rates(&consts, &cav, &PccParams::default()).unwrap();
        let omega = 10f64.powf(rng.gen_range(0.0..8.0));
        let r = reflectivity(&rates, omega).norm();
        assert!(r <= 1.0 + 1e-12, "|r| = {r} violates passivity");
    }

    // model: DC null of the ideal speed meter
    for _ in 0..100 {
        let cav = MainCavityParams {
            t_itm: rng.gen_range(1e-4..0.01),
            loss_cav: 0.0,
            l_cav: rng.gen_range(0.05..2.0),
            t_etm: 0.0,
        };
        let pcc = PccParams {
            loss_pcc_override: Some(0.0),
            dphi_ret: 0.0,
            dphi_pcc: 0.0,
            ..PccParams::default()
        };
        let rates = derive_rates(&consts, &cav, &pcc).unwrap();
        assert_eq!(speed_response_exact(&rates, &pcc, 0.0, 0.0).norm(), 0.0);
    }

    // model: first-order consistency over the small-imperfection domain
    // (expansion ratios gamma2/gamma1, L_pcc and phases all <= 1e-2)
    for _ in 0..100 {
        let t_itm = rng.gen_range(1e-3..0.01);
        let cav = MainCavityParams {
            t_itm,
            loss_cav: rng.gen_range(0.0..0.01) * t_itm,
            l_cav: 0.15,
            t_etm: 0.0,
        };
        let pcc = PccParams {
            loss_pcc_override: Some(rng.gen_range(0.0..0.01)),
            dphi_ret: rng.gen_range(0.0..0.005),
            dphi_pcc: rng.gen_range(0.0..0.005),
            ..PccParams::default()
        };
        let rates = derive_rates(&consts, &cav, &pcc).unwrap();
        for k in 0..40 {
            let f = 1e3 * (1e7f64 / 1e3).powf(k as f64 / 39.0);
            let omega = 2.0 * PI * f;
            let ex = speed_response_exact(&rates, &pcc, pcc.phase_offset(), omega);
            let fo = speed_response_firstorder(&rates, omega);
            let rel = (ex - fo).norm() / fo.norm();
            assert!(rel <= 0.05, "first-order deviation {rel} at {f} Hz");
        }
    }

    // model: the closed-form ratio equals first-order over position
    for _ in 0..100 {
        let cav = MainCavityParams {
            t_itm: rng.gen_range(1e-3..0.01),
            loss_cav: rng.gen_range(0.0..1e-4),
            l_cav: rng.gen_range(0.05..1.0),
            t_etm: 0.0,
        };
        let pcc = PccParams {
            dphi_ret: rng.gen_range(0.0..0.05),
            ..PccParams::default()
        };
        let rates = derive_rates(&consts, &cav, &pcc).unwrap();
        let f = 10f64.powf(rng.gen_range(2.0..7.0));
        let omega = 2.0 * PI * f;
        let ratio = speed_response_firstorder(&rates, omega) / position_response(&rates, omega);
        let h = observable_h(&rates, f, true);
        assert!((ratio - h).norm() <= 1e-12 * h.norm());
    }

    // model: quadrature map nulls conjugate-symmetric responses
    for _ in 0..100 {
        let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        assert!(quadrature_point(v, v.conj()).norm() < 1e-15);
    }

    // model: |H| non-decreasing when the detuning vanishes
    for _ in 0..100 {
        let cav = MainCavityParams {
            t_itm: rng.gen_range(1e-3..0.01),
            loss_cav: rng.gen_range(0.0..1e-4),
            l_cav: 0.15,
            t_etm: 0.0,
        };
        let pcc = PccParams {
            dphi_ret: 0.0,
            dphi_pcc: 0.0,
            ..PccParams::default()
        };
        let rates = derive_rates(&consts, &cav, &pcc).unwrap();
        if rates.gamma_cut >= rates.gamma1 {
            continue;
        }
        let mut prev = observable_h(&rates, 0.0, false).norm();
        for k in 1..60 {
            let f = 10f64.powf(k as f64 / 59.0 * 8.0);
            let mag = observable_h(&rates, f, false).norm();
            assert!(mag + 1e-12 >= prev, "|H| decreased at {f} Hz");
            prev = mag;
        }
    }

    // model: doubling the length halves both bandwidths
    for _ in 0..100 {
        let cav = MainCavityParams {
            t_itm: rng.gen_range(1e-4..0.01),
            loss_cav: rng.gen_range(0.0..1e-3),
            l_cav: rng.gen_range(0.05..2.0),
            t_etm: 0.0,
        };
        let doubled = MainCavityParams {
            l_cav: 2.0 * cav.l_cav,
            ..cav
        };
        let pcc = PccParams::default();
        let a = derive_rates(&consts, &cav, &pcc).unwrap();
        let b = derive_rates(&consts, &doubled, &pcc).unwrap();
        assert!((b.gamma1 - a.gamma1 / 2.0).abs() <= 1e-9 * a.gamma1);
        assert!((b.gamma2 - a.gamma2 / 2.0).abs() <= 1e-9 * a.gamma2.max(1e-300));
        if a.gamma2 > 0.0 {
            let ratio_a = a.gamma2 / a.gamma1;
            let ratio_b = b.gamma2 / b.gamma1;
            assert!((ratio_a - ratio_b).abs() <= 1e-12);
        }
    }

    // synth: determinism and noiseless pass-through on random grids
    for case in 0..100 {
        let cfg = table1_config();
        let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
        let grid = FrequencyGrid {
            f_min: rng.gen_range(1e3..1e4),
            f_max: rng.gen_range(1e5..1e7),
            n_points: rng.gen_range(2..50),
            ..FrequencyGrid::default()
        };
        let freqs = make_grid(&grid).unwrap();
        let noise = MeasurementNoiseModel {
            rel_amplitude_sigma: 0.05,
            phase_sigma: 0.01,
            seed: case,
        };
        let model = TfModel::Ratio {
            include_detuning: false,
        };
        let a = synth_tf(&rates, &cfg.pcc, model, &freqs, &noise).unwrap();
        let b = synth_tf(&rates, &cfg.pcc, model, &freqs, &noise).unwrap();
        assert_eq!(a, b, "synth_tf not deterministic for seed {case}");

        let silent = MeasurementNoiseModel {
            rel_amplitude_sigma: 0.0,
            phase_sigma: 0.0,
            seed: case,
        };
        let clean = synth_tf(&rates, &cfg.pcc, model, &freqs, &silent).unwrap();
        let reference = eval_tf_model(&rates, &cfg.pcc, model, &freqs).unwrap();
        for (c, r) in clean.values().iter().zip(reference.values()) {
            assert!((c - r).norm() <= 1e-12 * r.norm());
        }
    }

    // synth: Parseval for shaped noise at 2^16 samples
    for case in 0..100 {
        let rate = 256.0;
        let rms = 10f64.powf(rng.gen_range(-11.0..-9.0));
        let spec = flat_spec_with_total_rms(rms, rate);
        let n = 1 << 16;
        let series = synth_noise_timeseries(&spec, n as f64 / rate, rate, 5000 + case).unwrap();
        let mean = series.iter().sum::<f64>() / n as f64;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(
            (var / (rms * rms) - 1.0).abs() < 0.10,
            "case {case}: variance {var} vs target {}",
            rms * rms
        );
    }

    // fit: the cost vanishes exactly on g*model and not otherwise
    {
        let cfg = fit_config();
        let freqs = make_grid(&cfg.grid).unwrap();
        let problem = FitProblem::new(cfg.constants, cfg.main_cavity, cfg.pcc, false);
        for case in 0..100 {
            let loss = rng.gen_range(1e-6..5e-4);
            let g = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0 * PI));
            let model_vals = problem.eval(loss, &freqs).unwrap();
            let exact = ComplexResponse::new(
                freqs.clone(),
                model_vals.iter().map(|m| g * m).collect(),
            )
            .unwrap();
            assert_eq!(cost(&exact, g, &model_vals).unwrap(), 0.0);

            let mut perturbed_vals: Vec<Complex64> =
                model_vals.iter().map(|m| g * m).collect();
            let idx = rng.gen_range(0..perturbed_vals.len());
            perturbed_vals[idx] += Complex64::new(1e-6, 0.0);
            let perturbed = ComplexResponse::new(freqs.clone(), perturbed_vals).unwrap();
            assert!(
                cost(&perturbed, g, &model_vals).unwrap() > 0.0,
                "case {case}: perturbed data must have positive cost"
            );
        }
    }

    // fit: cost invariance under a global unit-modulus rotation
    {
        let cfg = fit_config();
        let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
        let freqs = make_grid(&cfg.grid).unwrap();
        let problem = FitProblem::new(cfg.constants, cfg.main_cavity, cfg.pcc, false);
        let model_vals = problem.eval(85e-6, &freqs).unwrap();
        for case in 0..100 {
            let noise = MeasurementNoiseModel {
                rel_amplitude_sigma: 0.02,
                phase_sigma: 0.01,
                seed: 1000 + case,
            };
            let data = synth_tf(
                &rates,
                &cfg.pcc,
                TfModel::Ratio {
                    include_detuning: false,
                },
                &freqs,
                &noise,
            )
            .unwrap();
            let g = Complex64::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5));
            let theta = rng.gen_range(0.0..2.0 * PI);
            let phase = Complex64::from_polar(1.0, theta);
            let rotated = ComplexResponse::new(
                data.freqs().to_vec(),
                data.values().iter().map(|v| phase * v).collect(),
            )
            .unwrap();
            let base = cost(&data, g, &model_vals).unwrap();
            let rot = cost(&rotated, phase * g, &model_vals).unwrap();
            assert!((base - rot).abs() <= 1e-9 * base.max(1e-300));
        }
    }

    // fit: scale equivariance on a handful of noisy datasets
    {
        let cfg = fit_config();
        let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc).unwrap();
        let freqs = make_grid(&cfg.grid).unwrap();
        let problem = FitProblem::new(cfg.constants, cfg.main_cavity, cfg.pcc, false);
        for case in 0..10 {
            let noise = MeasurementNoiseModel {
                rel_amplitude_sigma: 0.02,
                phase_sigma: 0.0,
                seed: 2000 + case,
            };
            let data = synth_tf(
                &rates,
                &cfg.pcc,
                TfModel::Ratio {
                    include_detuning: false,
                },
                &freqs,
                &noise,
            )
            .unwrap();
            let k: f64 = rng.gen_range(0.1..10.0);
            let scaled = ComplexResponse::new(
                data.freqs().to_vec(),
                data.values().iter().map(|v| k * v).collect(),
            )
            .unwrap();
            let a = fit_loss(&data, &cfg.fit, &problem).unwrap();
            let b = fit_loss(&scaled, &cfg.fit, &problem).unwrap();
            assert!((a.loss_cav_hat - b.loss_cav_hat).abs() < 1e-10);
            assert!((b.gain_hat - k * a.gain_hat).norm() < 1e-6 * k);
        }
    }

    // noise: accumulated RMS is non-increasing for arbitrary spectra
    for _ in 0..100 {
        let n = rng.gen_range(2..200);
        let df = rng.gen_range(1e-3..10.0);
        let freqs: Vec<f64> = (1..=n).map(|k| k as f64 * df).collect();
        let asd: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1e-9)).collect();
        let cum = accumulate_rms(&asd, &freqs).unwrap();
        for w in cum.windows(2) {
            assert!(w[0] >= w[1] - 1e-30);
        }
    }

    // noise: projection is linear and the conventions differ by exactly 2
    {
        let rates = table1_rates();
        for _ in 0..100 {
            let rms = rng.gen_range(0.0..1e-8);
            let k = rng.gen_range(0.1..10.0);
            let sp = project_detuning(rms, &consts, &rates, PhaseConvention::SinglePass);
            let sp_scaled = project_detuning(k * rms, &consts, &rates, PhaseConvention::SinglePass);
            let rt = project_detuning(rms, &consts, &rates, PhaseConvention::RoundTrip);
            assert!((sp_scaled - k * sp).abs() <= 1e-9 * sp_scaled.max(1e-300));
            assert!((rt - 2.0 * sp).abs() <= 1e-12 * rt.max(1e-300));
        }
    }

    // lockacq: ordering, energy bound and detuning consistency over seeds
    {
        let cfg = lock_config();
        let bound = 1.0 + cfg.lock.ir_crosstalk + 1e-9;
        for seed in 0..100 {
            let trace = run_acquisition(
                &cfg.constants,
                &cfg.main_cavity,
                &cfg.pcc,
                &cfg.green,
                &cfg.servo,
                &cfg.lock,
                seed,
            )
            .unwrap();
            let mut prev = LockState::Idle;
            for &(next, _) in &trace.transitions {
                assert!(
                    prev.may_transition_to(next),
                    "seed {seed}: illegal transition {prev:?} -> {next:?}"
                );
                prev = next;
            }
            assert!(trace.reached_speed_meter, "seed {seed}: {:?}", trace.diagnostic);
            for s in &trace.samples {
                assert!(s.ir_trans >= 0.0 && s.ir_trans <= bound);
                assert!(s.gr_trans >= 0.0 && s.gr_trans <= bound);
                assert!(s.dcpd1 >= 0.0 && s.dcpd1 <= bound);
            }
            // residual circulation phase maps to the model detuning
            let last = trace.samples.last().unwrap();
            let phi = 2.0 * PI * last.pcc_length / cfg.constants.lambda0;
            let dphi = {
                let w = (phi - PI).rem_euclid(2.0 * PI);
                if w >= PI { w - 2.0 * PI } else { w }
            }
            .abs();
            let pcc_with_residual = PccParams {
                dphi_pcc: dphi,
                ..cfg.pcc
            };
            let rates =
                derive_rates(&cfg.constants, &cfg.main_cavity, &pcc_with_residual).unwrap();
            assert!(
                (rates.delta_pcc - rates.gamma1 * dphi / 2.0).abs()
                    <= 1e-12 * rates.gamma1.max(1.0)
            );
            // and it is tiny once the speed meter is running
            assert!(rates.delta_pcc / (2.0 * PI) < 100.0, "seed {seed}: residual detuning");
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("PASS criterion 9: invariant suites hold (runtime {elapsed:?})");
}
