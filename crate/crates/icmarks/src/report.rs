//! CSV emission and aggregation for evaluation and attack sweeps. Rows are
//! plain comma-separated text with fixed headers; aggregation is a pure
//! function of the parsed rows so reports are reproducible byte for byte.

use crate::attacks::{AttackOutcome, PWLR_THRESHOLD, WER_THRESHOLD};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("csv line {0}: {1}")]
    BadRow(usize, String),
}

/// One quality-evaluation row (header: `design,scheme,stage,hpwl,pwlr,tns,wns,wer,legal,bits`).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub design: String,
    pub scheme: String,
    pub stage: String,
    pub hpwl: i64,
    pub pwlr: f64,
    pub tns: f64,
    pub wns: f64,
    pub wer: f64,
    pub legal: bool,
    pub bits: usize,
}

pub const EVAL_HEADER: &str = "design,scheme,stage,hpwl,pwlr,tns,wns,wer,legal,bits";

impl EvalRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.design,
            self.scheme,
            self.stage,
            self.hpwl,
            self.pwlr,
            self.tns,
            self.wns,
            self.wer,
            self.legal as u8,
            self.bits
        )
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self, ReportError> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(ReportError::BadRow(lineno, format!("expected 10 fields, got {}", f.len())));
        }
        let num =
            |s: &str| -> Result<f64, ReportError> {
                s.parse().map_err(|_| ReportError::BadRow(lineno, format!("bad number `{s}`")))
            };
        Ok(EvalRow {
            design: f[0].to_string(),
            scheme: f[1].to_string(),
            stage: f[2].to_string(),
            hpwl: num(f[3])? as i64,
            pwlr: num(f[4])?,
            tns: num(f[5])?,
            wns: num(f[6])?,
            wer: num(f[7])?,
            legal: f[8] == "1",
            bits: num(f[9])? as usize,
        })
    }
}

/// One attack-trial row (header: `scheme,attack,param,seed,pwlr,wer_gw,wer_dw,wer,success`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub scheme: String,
    pub attack: String,
    pub param: f64,
    pub seed: u64,
    pub pwlr: f64,
    pub wer_gw: Option<f64>,
    pub wer_dw: Option<f64>,
    pub wer: f64,
    pub success: bool,
}

pub const ATTACK_HEADER: &str = "scheme,attack,param,seed,pwlr,wer_gw,wer_dw,wer,success";

impl AttackRow {
    pub fn from_outcome(scheme: &str, outcome: &AttackOutcome) -> Self {
        AttackRow {
            scheme: scheme.to_string(),
            attack: outcome.attack.to_string(),
            param: outcome.param,
            seed: outcome.seed,
            pwlr: outcome.pwlr_vs_original,
            wer_gw: outcome.report.wer_gw,
            wer_dw: outcome.report.wer_dw,
            wer: outcome.report.wer,
            success: outcome.success(),
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.attack,
            self.param,
            self.seed,
            self.pwlr,
            opt(self.wer_gw),
            opt(self.wer_dw),
            self.wer,
            self.success as u8
        )
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self, ReportError> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(ReportError::BadRow(lineno, format!("expected 9 fields, got {}", f.len())));
        }
        let num =
            |s: &str| -> Result<f64, ReportError> {
                s.parse().map_err(|_| ReportError::BadRow(lineno, format!("bad number `{s}`")))
            };
        let opt = |s: &str| -> Result<Option<f64>, ReportError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        Ok(AttackRow {
            scheme: f[0].to_string(),
            attack: f[1].to_string(),
            param: num(f[2])?,
            seed: num(f[3])? as u64,
            pwlr: num(f[4])?,
            wer_gw: opt(f[5])?,
            wer_dw: opt(f[6])?,
            wer: num(f[7])?,
            success: f[8] == "1",
        })
    }
}

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn attack_csv(rows: &[AttackRow]) -> String {
    let mut out = String::from(ATTACK_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

pub fn parse_eval_csv(text: &str) -> Result<Vec<EvalRow>, ReportError> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| EvalRow::parse(l, i + 1))
        .collect()
}

pub fn parse_attack_csv(text: &str) -> Result<Vec<AttackRow>, ReportError> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| AttackRow::parse(l, i + 1))
        .collect()
}

/// Header-based schema detection for the report command.
pub fn csv_kind(text: &str) -> Option<&'static str> {
    match text.lines().next().map(str::trim) {
        Some(EVAL_HEADER) => Some("eval"),
        Some(ATTACK_HEADER) => Some("attack"),
        _ => None,
    }
}

fn median(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    sorted[(sorted.len() - 1) / 2]
}

/// Attack-sweep table: one row per (scheme, attack, param) group.
pub fn summarize_attacks(rows: &[AttackRow]) -> String {
    let mut groups: std::collections::BTreeMap<(String, String, String), Vec<&AttackRow>> =
        std::collections::BTreeMap::new();
    for r in rows {
        groups
            .entry((r.scheme.clone(), r.attack.clone(), r.param.to_string()))
            .or_default()
            .push(r);
    }
    let mut out = String::from("scheme,attack,param,trials,median_wer,min_wer,max_pwlr,successes\n");
    for ((scheme, attack, param), rs) in groups {
        let mut wers: Vec<f64> = rs.iter().map(|r| r.wer).collect();
        wers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let min_wer = wers.first().copied().unwrap_or(f64::NAN);
        let max_pwlr = rs.iter().map(|r| r.pwlr).fold(f64::NEG_INFINITY, f64::max);
        let successes = rs.iter().filter(|r| r.success).count();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            scheme,
            attack,
            param,
            rs.len(),
            median(&wers),
            min_wer,
            max_pwlr,
            successes
        )
        .unwrap();
    }
    out
}

/// Capacity table: per scheme, the largest signature length whose run stayed
/// legal with full extraction and wirelength within the quality threshold.
pub fn summarize_capacity(rows: &[EvalRow]) -> String {
    let mut groups: std::collections::BTreeMap<String, Vec<&EvalRow>> =
        std::collections::BTreeMap::new();
    for r in rows {
        groups.entry(r.scheme.clone()).or_default().push(r);
    }
    let mut out = String::from("scheme,max_bits,bits_tested\n");
    for (scheme, rs) in groups {
        let tested: std::collections::BTreeSet<usize> = rs.iter().map(|r| r.bits).collect();
        let max_ok = rs
            .iter()
            .filter(|r| r.legal && r.wer >= 100.0 && r.pwlr <= PWLR_THRESHOLD)
            .map(|r| r.bits)
            .max()
            .unwrap_or(0);
        let tested_str: Vec<String> = tested.iter().map(|b| b.to_string()).collect();
        writeln!(out, "{},{},{}", scheme, max_ok, tested_str.join(" ")).unwrap();
    }
    out
}

/// Threshold echoes for consumers of this module.
pub fn thresholds() -> (f64, f64) {
    (WER_THRESHOLD, PWLR_THRESHOLD)
}
