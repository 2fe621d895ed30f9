//! File formats shared by the command-line tools: CSV writers and readers
//! plus flat key-value reports.
//!
//! All numeric fields are written as ASCII scientific notation with nine
//! significant digits ('.' decimal point, 'e' exponent marker) and LF line
//! endings, so re-running a command reproduces its output byte for byte.

use num_complex::Complex64;
use std::path::Path;

use crate::lockacq::LockTrace;
use crate::model::ComplexResponse;
use crate::noise::SpectrumResult;
use crate::{Error, Result};

/// Nine significant digits, scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Seventeen significant digits: round-trips any f64 exactly. Used for
/// data files that feed further computation, where presentation rounding
/// would contaminate fits.
pub fn fmt_float_precise(x: f64) -> String {
    format!("{x:.16e}")
}

/// Complex transfer function with magnitude and phase columns.
pub fn response_csv(resp: &ComplexResponse) -> String {
    let mut out = String::from("f_hz,re,im,mag,phase_deg\n");
    for (f, v) in resp.iter() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(f),
            fmt_float(v.re),
            fmt_float(v.im),
            fmt_float(v.norm()),
            fmt_float(v.arg().to_degrees()),
        ));
    }
    out
}

/// Transfer-function dataset at full precision, same column layout as
/// [`response_csv`].
pub fn tf_data_csv(resp: &ComplexResponse) -> String {
    let mut out = String::from("f_hz,re,im,mag,phase_deg\n");
    for (f, v) in resp.iter() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float_precise(f),
            fmt_float_precise(v.re),
            fmt_float_precise(v.im),
            fmt_float_precise(v.norm()),
            fmt_float_precise(v.arg().to_degrees()),
        ));
    }
    out
}

/// Read a transfer-function CSV. The first three columns must be
/// `f_hz,re,im`; any further columns (magnitude, phase) are ignored.
pub fn read_tf_csv(path: &Path) -> Result<ComplexResponse> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "f_hz" || cols[1] != "re" || cols[2] != "im" {
        return Err(parse_err(
            1,
            format!("expected header starting with f_hz,re,im; got {header:?}"),
        ));
    }
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(parse_err(lineno, format!("expected >= 3 fields, got {}", fields.len())));
        }
        let mut nums = [0.0; 3];
        for (i, slot) in nums.iter_mut().enumerate() {
            *slot = fields[i].trim().parse::<f64>().map_err(|e| {
                parse_err(lineno, format!("column {}: {e}", i + 1))
            })?;
        }
        freqs.push(nums[0]);
        values.push(Complex64::new(nums[1], nums[2]));
    }
    ComplexResponse::new(freqs, values)
}

/// Uniformly sampled time series as `t_s,length_m` rows, at full precision
/// so the sample rate survives the round trip through the time column.
pub fn timeseries_csv(series: &[f64], rate: f64) -> String {
    let mut out = String::from("t_s,length_m\n");
    for (i, &x) in series.iter().enumerate() {
        out.push_str(&format!(
            "{},{}\n",
            fmt_float_precise(i as f64 / rate),
            fmt_float_precise(x)
        ));
    }
    out
}

/// Read a time series. Accepts `t_s,length_m` (rate inferred from the time
/// column, which must be uniform) or a single `length_m` column with the
/// rate supplied by the caller.
pub fn read_timeseries_csv(path: &Path, rate_hint: Option<f64>) -> Result<(Vec<f64>, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let two_column = match cols.as_slice() {
        ["t_s", "length_m"] => true,
        ["length_m"] => false,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header t_s,length_m or length_m; got {header:?}"),
            ))
        }
    };
    let mut times = Vec::new();
    let mut series = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expect = if two_column { 2 } else { 1 };
        if fields.len() != expect {
            return Err(parse_err(
                lineno,
                format!("expected {expect} fields, got {}", fields.len()),
            ));
        }
        let mut parsed = [0.0; 2];
        for i in 0..expect {
            parsed[i] = fields[i].trim().parse::<f64>().map_err(|e| {
                parse_err(lineno, format!("column {}: {e}", i + 1))
            })?;
        }
        if two_column {
            times.push(parsed[0]);
            series.push(parsed[1]);
        } else {
            series.push(parsed[0]);
        }
    }
    let rate = if two_column {
        if times.len() < 2 {
            return Err(parse_err(2, "need at least 2 samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(parse_err(3, "time column must increase".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
                return Err(parse_err(
                    i + 3,
                    format!("non-uniform sampling: dt = {} vs {}", w[1] - w[0], dt),
                ));
            }
        }
        1.0 / dt
    } else {
        rate_hint.ok_or_else(|| {
            parse_err(1, "single-column input needs an explicit sample rate".into())
        })?
    };
    Ok((series, rate))
}

/// Spectrum with its accumulated-RMS column.
pub fn spectrum_csv(spec: &SpectrumResult) -> String {
    let mut out = String::from("f,asd,cum_rms\n");
    for i in 0..spec.freqs.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_float(spec.freqs[i]),
            fmt_float(spec.asd[i]),
            fmt_float(spec.cum_rms[i]),
        ));
    }
    out
}

/// Flat `key = value` report.
pub fn kv_report(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

/// Lock trace samples.
pub fn trace_csv(trace: &LockTrace) -> String {
    let mut out = String::from("t,lock_state,ir_trans,gr_trans,dcpd1,pcc_length,gr_freq_offset\n");
    for (s, state) in trace.samples.iter().zip(&trace.states) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_float(s.t),
            state.name(),
            fmt_float(s.ir_trans),
            fmt_float(s.gr_trans),
            fmt_float(s.dcpd1),
            fmt_float(s.pcc_length),
            fmt_float(s.gr_freq_offset),
        ));
    }
    out
}

/// Transition log: one `state,t` row per transition in firing order.
pub fn transitions_csv(trace: &LockTrace) -> String {
    let mut out = String::from("state,t\n");
    for &(state, t) in &trace.transitions {
        out.push_str(&format!("{},{}\n", state.name(), fmt_float(t)));
    }
    out
}
