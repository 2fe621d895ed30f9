//! Command-line front end: the four workflows (response, fit, lock, noise)
//! plus synthetic-data generation, all driven by layered TOML configs.
//!
//! Exit codes: 0 success, 1 domain failure (fit did not converge, lock not
//! acquired), 2 usage or parse errors.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use speedmeter_core::config::RunConfig;
use speedmeter_core::fit::{fit_loss, FitProblem};
use speedmeter_core::io;
use speedmeter_core::lockacq::run_acquisition;
use speedmeter_core::noise::{estimate_asd, project_detuning, PhaseConvention};
use speedmeter_core::synth::{eval_tf_model, make_grid, synth_noise_timeseries, synth_tf, TfModel};
use speedmeter_core::{derive_rates, ComplexResponse, Error};

#[derive(Parser)]
#[command(
    name = "speedmeter",
    about = "Speed-meter response modeling, fitting, lock acquisition and noise analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ResponseMode {
    /// Two-pass response without approximations.
    Exact,
    /// First-order expansion of the two-pass response.
    Firstorder,
    /// Ratio of the speed and position transfer functions.
    Ratio,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthKind {
    /// Transfer-function dataset.
    Tf,
    /// PCC-length noise time series.
    Noise,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the model response on the configured grid and write it as CSV.
    Response {
        /// Config file(s); later files override earlier ones.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "ratio")]
        mode: ResponseMode,
        /// Include the fixed detuning term in the ratio response.
        #[arg(long)]
        detuning: bool,
        #[arg(long)]
        out: PathBuf,
        /// Accepted for interface uniformity; the response is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a gnuplot script next to the output.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Generate synthetic data with known ground truth.
    Synth {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "tf")]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover gain and cavity loss from a transfer-function CSV.
    Fit {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Report path; residuals go to `<out>.residuals.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Accepted for interface uniformity; the fit is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate the lock-acquisition sequence and write the trace.
    Lock {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Trace path; transitions go to `<out>.transitions.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write a gnuplot script next to the output.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Spectral analysis of one or more PCC-length time series.
    Noise {
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        /// Input series; may repeat. With several inputs `--out` must be a
        /// directory.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Sample rate for single-column inputs, Hz.
        #[arg(long)]
        rate: Option<f64>,
        /// Also write a gnuplot script next to the output.
        #[arg(long)]
        gnuplot: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum RunError {
    /// The computation ran but its goal was not met.
    Domain(String),
    /// Bad arguments, configs or input files.
    Usage(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Usage(e.to_string())
    }
}

fn load_config(paths: &[PathBuf]) -> Result<RunConfig, RunError> {
    let cfg = RunConfig::load(paths)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn write_output(path: &Path, content: &str) -> Result<(), RunError> {
    std::fs::write(path, content)
        .map_err(|e| RunError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Response {
            config,
            mode,
            detuning,
            out,
            seed: _,
            gnuplot,
        } => cmd_response(&config, mode, detuning, &out, gnuplot),
        Command::Synth {
            config,
            kind,
            out,
            seed,
        } => cmd_synth(&config, kind, &out, seed),
        Command::Fit {
            config,
            data,
            out,
            seed: _,
        } => cmd_fit(&config, &data, &out),
        Command::Lock {
            config,
            out,
            seed,
            gnuplot,
        } => cmd_lock(&config, &out, seed, gnuplot),
        Command::Noise {
            config,
            data,
            out,
            rate,
            gnuplot,
        } => cmd_noise(&config, &data, &out, rate, gnuplot),
    }
}

fn cmd_response(
    config: &[PathBuf],
    mode: ResponseMode,
    detuning: bool,
    out: &Path,
    gnuplot: bool,
) -> Result<(), RunError> {
    let cfg = load_config(config)?;
    let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc)?;
    let freqs = make_grid(&cfg.grid)?;
    let resp = match mode {
        ResponseMode::Ratio => eval_tf_model(
            &rates,
            &cfg.pcc,
            TfModel::Ratio {
                include_detuning: detuning,
            },
            &freqs,
        )?,
        ResponseMode::Exact => {
            let phi = cfg.pcc.phase_offset();
            let values = freqs
                .iter()
                .map(|&f| {
                    let omega = 2.0 * std::f64::consts::PI * f;
                    speedmeter_core::speed_response_exact(&rates, &cfg.pcc, phi, omega)
                })
                .collect();
            ComplexResponse::new(freqs.clone(), values)?
        }
        ResponseMode::Firstorder => {
            let values = freqs
                .iter()
                .map(|&f| {
                    let omega = 2.0 * std::f64::consts::PI * f;
                    speedmeter_core::speed_response_firstorder(&rates, omega)
                })
                .collect();
            ComplexResponse::new(freqs.clone(), values)?
        }
    };
    write_output(out, &io::response_csv(&resp))?;
    if gnuplot {
        write_output(&with_suffix(out, ".gp"), &bode_gnuplot(out))?;
    }
    Ok(())
}

fn cmd_synth(
    config: &[PathBuf],
    kind: SynthKind,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), RunError> {
    let cfg = load_config(config)?;
    match kind {
        SynthKind::Tf => {
            let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc)?;
            let freqs = make_grid(&cfg.grid)?;
            let noise = cfg
                .measurement_noise
                .with_seed(seed.unwrap_or(cfg.seeds.synth));
            let data = synth_tf(
                &rates,
                &cfg.pcc,
                TfModel::Ratio {
                    include_detuning: cfg.fit.include_detuning,
                },
                &freqs,
                &noise,
            )?;
            write_output(out, &io::tf_data_csv(&data))
        }
        SynthKind::Noise => {
            let segments = cfg.noise_synth.effective_segments()?;
            let series = synth_noise_timeseries(
                &segments,
                cfg.noise_synth.duration,
                cfg.noise_synth.rate,
                seed.unwrap_or(cfg.seeds.noise),
            )?;
            write_output(out, &io::timeseries_csv(&series, cfg.noise_synth.rate))
        }
    }
}

fn cmd_fit(config: &[PathBuf], data_path: &Path, out: &Path) -> Result<(), RunError> {
    let cfg = load_config(config)?;
    let data = io::read_tf_csv(data_path)?;
    let problem = FitProblem::new(
        cfg.constants,
        cfg.main_cavity,
        cfg.pcc,
        cfg.fit.include_detuning,
    );
    let result = fit_loss(&data, &cfg.fit, &problem)?;
    let report = io::kv_report(&[
        ("loss_cav_hat_ppm", io::fmt_float(result.loss_cav_hat * 1e6)),
        ("gain_re", io::fmt_float(result.gain_hat.re)),
        ("gain_im", io::fmt_float(result.gain_hat.im)),
        ("final_cost", io::fmt_float(result.final_cost)),
        ("converged", result.converged.to_string()),
        ("n_iters", result.n_iters.to_string()),
        ("at_boundary", result.at_boundary.to_string()),
    ]);
    write_output(out, &report)?;
    write_output(
        &with_suffix(out, ".residuals.csv"),
        &io::response_csv(&result.residuals),
    )?;
    if result.at_boundary {
        eprintln!(
            "warning: recovered loss sits on a search bound ({:.3e})",
            result.loss_cav_hat
        );
    }
    if result.converged {
        Ok(())
    } else {
        Err(RunError::Domain(format!(
            "fit did not converge within {} iterations (final cost {:.3e})",
            result.n_iters, result.final_cost
        )))
    }
}

fn cmd_lock(
    config: &[PathBuf],
    out: &Path,
    seed: Option<u64>,
    gnuplot: bool,
) -> Result<(), RunError> {
    let cfg = load_config(config)?;
    let trace = run_acquisition(
        &cfg.constants,
        &cfg.main_cavity,
        &cfg.pcc,
        &cfg.green,
        &cfg.servo,
        &cfg.lock,
        seed.unwrap_or(cfg.seeds.lock),
    )?;
    write_output(out, &io::trace_csv(&trace))?;
    write_output(
        &with_suffix(out, ".transitions.csv"),
        &io::transitions_csv(&trace),
    )?;
    if gnuplot {
        write_output(&with_suffix(out, ".gp"), &lock_gnuplot(out))?;
    }
    match trace.diagnostic {
        None => Ok(()),
        Some(msg) => Err(RunError::Domain(msg)),
    }
}

fn cmd_noise(
    config: &[PathBuf],
    data: &[PathBuf],
    out: &Path,
    rate: Option<f64>,
    gnuplot: bool,
) -> Result<(), RunError> {
    let cfg = load_config(config)?;
    let rates = derive_rates(&cfg.constants, &cfg.main_cavity, &cfg.pcc)?;
    let multiple = data.len() > 1;
    if multiple && !out.is_dir() {
        return Err(RunError::Usage(format!(
            "{}: --out must be an existing directory when --data repeats",
            out.display()
        )));
    }
    for input in data {
        let (series, sample_rate) = io::read_timeseries_csv(input, rate)?;
        let spec = estimate_asd(&series, sample_rate, &cfg.spectrum)?;
        let readout = cfg.spectrum.readout_freq;
        let summary = io::kv_report(&[
            ("total_rms_m", io::fmt_float(spec.total_rms)),
            ("readout_freq_hz", io::fmt_float(readout)),
            ("rms_at_readout_m", io::fmt_float(spec.rms_at(readout))),
            (
                "detuning_single_pass_hz",
                io::fmt_float(project_detuning(
                    spec.total_rms,
                    &cfg.constants,
                    &rates,
                    PhaseConvention::SinglePass,
                )),
            ),
            (
                "detuning_round_trip_hz",
                io::fmt_float(project_detuning(
                    spec.total_rms,
                    &cfg.constants,
                    &rates,
                    PhaseConvention::RoundTrip,
                )),
            ),
        ]);
        let (spectrum_path, summary_path) = if multiple {
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into());
            (
                out.join(format!("{stem}.spectrum.csv")),
                out.join(format!("{stem}.summary.txt")),
            )
        } else {
            (out.to_path_buf(), with_suffix(out, ".summary.txt"))
        };
        write_output(&spectrum_path, &io::spectrum_csv(&spec))?;
        write_output(&summary_path, &summary)?;
        if gnuplot {
            write_output(&with_suffix(&spectrum_path, ".gp"), &asd_gnuplot(&spectrum_path))?;
        }
    }
    Ok(())
}

fn bode_gnuplot(csv: &Path) -> String {
    let name = csv.display();
    format!(
        "set datafile separator ','\n\
         set logscale x\n\
         set logscale y\n\
         set xlabel 'frequency [Hz]'\n\
         set ylabel '|H|'\n\
         plot '{name}' using 1:4 skip 1 with lines title 'magnitude'\n"
    )
}

fn lock_gnuplot(csv: &Path) -> String {
    let name = csv.display();
    format!(
        "set datafile separator ','\n\
         set xlabel 'time [s]'\n\
         set ylabel 'normalized power'\n\
         plot '{name}' using 1:3 skip 1 with lines title 'IR transmission', \\\n\
              '{name}' using 1:4 skip 1 with lines title 'GR transmission', \\\n\
              '{name}' using 1:5 skip 1 with lines title 'detection port'\n"
    )
}

fn asd_gnuplot(csv: &Path) -> String {
    let name = csv.display();
    format!(
        "set datafile separator ','\n\
         set logscale x\n\
         set logscale y\n\
         set xlabel 'frequency [Hz]'\n\
         set ylabel 'ASD [m/sqrt(Hz)]'\n\
         plot '{name}' using 1:2 skip 1 with lines title 'ASD', \\\n\
              '{name}' using 1:3 skip 1 with lines title 'accumulated RMS'\n"
    )
}
