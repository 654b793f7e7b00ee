//! CSV tables. Every number is written with C's `%.9g`; readers parse the
//! same files back.

use std::path::Path;

use crate::error::{Error, Result};

/// `printf("%.9g", x)`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Rounding to P significant digits decides the exponent.
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Input(format!("{what}: {field:?} is not a number")))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, what).map(Some)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.into(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.into(),
        source,
    })
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Write {
        path: path.into(),
        source,
    })
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(csv_err)?;
    Ok((header, rows))
}

fn expect_prefix(path: &Path, header: &[String], fixed: &[&str]) -> Result<()> {
    if header.len() < fixed.len() || header[..fixed.len()] != *fixed {
        return Err(Error::Input(format!(
            "{}: expected columns starting {}, found {}",
            path.display(),
            fixed.join(","),
            header.join(",")
        )));
    }
    Ok(())
}

/// One Monte Carlo trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: u64,
    pub policy: String,
    pub gamma: Option<f64>,
    pub total_weight: f64,
    /// `Y_v`, in recipient order.
    pub recipient_weight: Vec<f64>,
}

const TRIAL_COLUMNS: [&str; 4] = ["trial", "policy", "gamma", "total_weight"];

/// `trial,policy,gamma,total_weight` then one column per recipient id.
pub fn write_trials(path: &Path, recipients: &[String], rows: &[TrialRow]) -> Result<()> {
    let header: Vec<String> = TRIAL_COLUMNS.iter().map(|s| s.to_string()).chain(recipients.iter().cloned()).collect();
    write_rows(
        path,
        &header,
        rows.iter().map(|r| {
            let mut out = vec![r.trial.to_string(), r.policy.clone(), fmt_opt(r.gamma), fmt_g9(r.total_weight)];
            out.extend(r.recipient_weight.iter().map(|&y| fmt_g9(y)));
            out
        }),
    )
}

/// Reads a trials table; returns the recipient ids and the rows.
pub fn read_trials(path: &Path) -> Result<(Vec<String>, Vec<TrialRow>)> {
    let (header, records) = read_rows(path)?;
    expect_prefix(path, &header, &TRIAL_COLUMNS)?;
    let recipients = header[TRIAL_COLUMNS.len()..].to_vec();
    let rows = records
        .iter()
        .map(|rec| {
            Ok(TrialRow {
                trial: rec[0]
                    .parse()
                    .map_err(|_| Error::Input(format!("trial index {:?}", &rec[0])))?,
                policy: rec[1].to_string(),
                gamma: parse_opt(&rec[2], "gamma")?,
                total_weight: parse_f64(&rec[3], "total_weight")?,
                recipient_weight: rec
                    .iter()
                    .skip(TRIAL_COLUMNS.len())
                    .map(|f| parse_f64(f, "recipient weight"))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((recipients, rows))
}

/// Aggregate of one policy's trials.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub policy: String,
    pub gamma_param: Option<f64>,
    pub mode: String,
    pub trials: usize,
    pub mean_total_weight: f64,
    pub std_err_total: f64,
    pub gamma_empirical: f64,
    pub gamma_std_err: f64,
    /// Mean `Y_v` and its standard error, in recipient order.
    pub mean_recipient_weight: Vec<f64>,
    pub std_err_recipient: Vec<f64>,
}

const AGGREGATE_COLUMNS: [&str; 8] = [
    "policy",
    "gamma_param",
    "mode",
    "trials",
    "mean_total_weight",
    "std_err_total",
    "gamma_empirical",
    "gamma_std_err",
];

/// Fixed columns, then `mean:<id>` and `se:<id>` per recipient.
pub fn write_aggregate(path: &Path, recipients: &[String], rows: &[AggregateRow]) -> Result<()> {
    let header: Vec<String> = AGGREGATE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(recipients.iter().map(|id| format!("mean:{id}")))
        .chain(recipients.iter().map(|id| format!("se:{id}")))
        .collect();
    write_rows(
        path,
        &header,
        rows.iter().map(|r| {
            let mut out = vec![
                r.policy.clone(),
                fmt_opt(r.gamma_param),
                r.mode.clone(),
                r.trials.to_string(),
                fmt_g9(r.mean_total_weight),
                fmt_g9(r.std_err_total),
                fmt_g9(r.gamma_empirical),
                fmt_g9(r.gamma_std_err),
            ];
            out.extend(r.mean_recipient_weight.iter().map(|&y| fmt_g9(y)));
            out.extend(r.std_err_recipient.iter().map(|&y| fmt_g9(y)));
            out
        }),
    )
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let (header, records) = read_rows(path)?;
    expect_prefix(path, &header, &AGGREGATE_COLUMNS)?;
    let extra = header.len() - AGGREGATE_COLUMNS.len();
    if !extra.is_multiple_of(2) {
        return Err(Error::Input(format!("{}: unpaired recipient columns", path.display())));
    }
    let n = extra / 2;
    records
        .iter()
        .map(|rec| {
            let nums: Vec<f64> = rec
                .iter()
                .skip(AGGREGATE_COLUMNS.len())
                .map(|f| parse_f64(f, "recipient column"))
                .collect::<Result<_>>()?;
            Ok(AggregateRow {
                policy: rec[0].to_string(),
                gamma_param: parse_opt(&rec[1], "gamma_param")?,
                mode: rec[2].to_string(),
                trials: rec[3]
                    .parse()
                    .map_err(|_| Error::Input(format!("trial count {:?}", &rec[3])))?,
                mean_total_weight: parse_f64(&rec[4], "mean_total_weight")?,
                std_err_total: parse_f64(&rec[5], "std_err_total")?,
                gamma_empirical: parse_f64(&rec[6], "gamma_empirical")?,
                gamma_std_err: parse_f64(&rec[7], "gamma_std_err")?,
                mean_recipient_weight: nums[..n].to_vec(),
                std_err_recipient: nums[n..].to_vec(),
            })
        })
        .collect()
}

/// One point of a fairness/weight sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub policy: String,
    pub gamma_param: Option<f64>,
    pub total_weight: f64,
    pub weight_fraction_of_max: Option<f64>,
    pub gamma_empirical: f64,
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub lp_bound: Option<f64>,
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "policy",
    "gamma_param",
    "total_weight",
    "weight_fraction_of_max",
    "gamma_empirical",
    "min_normalized",
    "max_normalized",
    "lp_bound",
];

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let header: Vec<String> = SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect();
    write_rows(
        path,
        &header,
        rows.iter().map(|r| {
            vec![
                r.policy.clone(),
                fmt_opt(r.gamma_param),
                fmt_g9(r.total_weight),
                fmt_opt(r.weight_fraction_of_max),
                fmt_g9(r.gamma_empirical),
                fmt_g9(r.min_normalized),
                fmt_g9(r.max_normalized),
                fmt_opt(r.lp_bound),
            ]
        }),
    )
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let (header, records) = read_rows(path)?;
    expect_prefix(path, &header, &SWEEP_COLUMNS)?;
    records
        .iter()
        .map(|rec| {
            Ok(SweepRow {
                policy: rec[0].to_string(),
                gamma_param: parse_opt(&rec[1], "gamma_param")?,
                total_weight: parse_f64(&rec[2], "total_weight")?,
                weight_fraction_of_max: parse_opt(&rec[3], "weight_fraction_of_max")?,
                gamma_empirical: parse_f64(&rec[4], "gamma_empirical")?,
                min_normalized: parse_f64(&rec[5], "min_normalized")?,
                max_normalized: parse_f64(&rec[6], "max_normalized")?,
                lp_bound: parse_opt(&rec[7], "lp_bound")?,
            })
        })
        .collect()
}

/// Rounds to the precision the tables carry, so in-memory rows can be
/// compared with what a reader gets back.
pub fn round_g9(x: f64) -> f64 {
    fmt_g9(x).parse().unwrap_or(x)
}
