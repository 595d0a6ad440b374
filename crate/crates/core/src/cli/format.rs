//! Number formatting and list/range/schedule parsing for the CLI.

use std::fmt::Write as _;
use std::path::Path;

use super::CliError;
use crate::classes::ClassSchedule;

/// Formats a real with 9 significant digits, locale-independent, trailing
/// zeros trimmed.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent format");
        format!("{}e{}", trim_zeros(mantissa.to_string()), exponent)
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Comma-separated items, each a number or an inclusive `start:stop:step`
/// range.
pub fn parse_real_list(spec: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| -> Result<f64, CliError> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("'{s}' is not a number in '{spec}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("'{s}' is not finite")))
            }
        };
        match parts.as_slice() {
            [single] => out.push(num(single)?),
            [start, stop, step] => {
                let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
                if step <= 0.0 || stop < start {
                    return Err(CliError::Usage(format!(
                        "range '{item}' needs start <= stop and a positive step"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                out.extend((0..n).map(|i| start + i as f64 * step));
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "cannot parse '{item}' as a number or range"
                )))
            }
        }
    }
    Ok(out)
}

/// Comma-separated integers or inclusive `start:stop[:step]` ranges.
pub fn parse_int_list(spec: &str) -> Result<Vec<u32>, CliError> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |s: &str| -> Result<u32, CliError> {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("'{s}' is not a nonnegative integer in '{spec}'")))
        };
        match parts.as_slice() {
            [single] => out.push(num(single)?),
            [start, stop] | [start, stop, _] => {
                let (start, stop) = (num(start)?, num(stop)?);
                let step = if parts.len() == 3 { num(parts[2])? } else { 1 };
                if step == 0 || stop < start {
                    return Err(CliError::Usage(format!(
                        "range '{item}' needs start <= stop and a positive step"
                    )));
                }
                out.extend((start..=stop).step_by(step as usize));
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "cannot parse '{item}' as an integer or range"
                )))
            }
        }
    }
    Ok(out)
}

/// A preset name (`scenario1`, `scenario2`, `range10to120`) or a file with
/// one class size per line and `#` comments.
pub fn load_schedule(spec: &str) -> Result<ClassSchedule, CliError> {
    match spec {
        "scenario1" => Ok(ClassSchedule::scenario1()),
        "scenario2" => Ok(ClassSchedule::scenario2()),
        "range10to120" => Ok(ClassSchedule::range_10_to_120()),
        path => {
            let text = std::fs::read_to_string(Path::new(path))
                .map_err(|e| CliError::Usage(format!("cannot read schedule '{path}': {e}")))?;
            parse_schedule(&text)
        }
    }
}

pub fn parse_schedule(text: &str) -> Result<ClassSchedule, CliError> {
    let mut sizes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let size: u32 = body.parse().map_err(|_| {
            CliError::Usage(format!(
                "schedule line {}: '{body}' is not a class size",
                lineno + 1
            ))
        })?;
        sizes.push(size);
    }
    Ok(ClassSchedule::new(sizes)?)
}

/// Renders a header and rows as CSV text with a trailing newline.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
