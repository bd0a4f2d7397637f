//! CSV, Markdown and JSON renderings of rate-study results.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::study::RateStudyResult;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 8] = [
    "s",
    "u",
    "rule",
    "r",
    "kappa_hat",
    "r_squared",
    "alpha_exponent",
    "flag",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Parameter(format!(
                "unknown table format `{other}` (expected csv, markdown or json)"
            ))),
        }
    }
}

/// 17 significant digits; empty for non-finite values.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub fn emit_tables(results: &[RateStudyResult], format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Csv => emit_csv(results),
        TableFormat::Markdown => Ok(emit_markdown(results)),
        TableFormat::Json => emit_json(results),
    }
}

fn emit_csv(results: &[RateStudyResult]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for res in results {
        for n in &res.norms {
            let (kappa, r2) = n.fit.map_or((f64::NAN, f64::NAN), |f| (f.kappa_hat, f.r_squared));
            w.write_record([
                format_float(res.s),
                format_float(res.u),
                res.rule.to_string(),
                format_float(n.r),
                format_float(kappa),
                format_float(r2),
                format_float(res.alpha_exponent),
                if n.covered { "covered" } else { "uncovered" }.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
}

fn fraction(v: f64) -> String {
    for (den, name) in [(1.0, ""), (2.0, "/2"), (3.0, "/3")] {
        let num = v * den;
        if (num - num.round()).abs() < 1e-12 && den > 1.0 && num.round() as i64 % den as i64 != 0 {
            return format!("{}{name}", num.round() as i64);
        }
    }
    format!("{v}")
}

fn power(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("δ^{v:.2}"),
        _ => "---".to_string(),
    }
}

fn emit_markdown(results: &[RateStudyResult]) -> String {
    let mut out = String::new();
    let mut groups: Vec<(String, String)> = Vec::new();
    for r in results {
        let key = (r.problem.clone(), r.rule.to_string());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (problem, rule) in groups {
        let members: Vec<&RateStudyResult> = results
            .iter()
            .filter(|r| r.problem == problem && r.rule.to_string() == rule)
            .collect();
        let key = |v: f64| (v * 1e9).round() as i64;
        let s_values: BTreeSet<i64> = members.iter().map(|r| key(r.s)).collect();
        let u_values: BTreeSet<i64> = members.iter().map(|r| key(r.u)).collect();
        let mut norms: Vec<f64> = Vec::new();
        for m in &members {
            for n in &m.norms {
                if !norms.contains(&n.r) {
                    norms.push(n.r);
                }
            }
        }
        norms.sort_by(|a, b| a.total_cmp(b));
        let first = members[0];
        let _ = writeln!(
            out,
            "### {problem}, {rule} rule (a = {}, γ = {})\n",
            fraction(first.a),
            if first.gamma == 1.0 {
                "1".into()
            } else {
                format!("{:.4}", first.gamma)
            }
        );
        let mut header = String::from("| u |");
        let mut rule_line = String::from("|---|");
        for &s in &s_values {
            let s = s as f64 / 1e9;
            let _ = write!(header, " s = {}: α |", fraction(s));
            rule_line.push_str("---|");
            for r in &norms {
                let _ = write!(header, " ‖x − x†‖_{} |", fraction(*r));
                rule_line.push_str("---|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule_line}");
        for &u in &u_values {
            let _ = write!(out, "| {} |", fraction(u as f64 / 1e9));
            for &s in &s_values {
                match members.iter().find(|m| key(m.s) == s && key(m.u) == u) {
                    Some(m) => {
                        let mark = if m.covered { "" } else { " *" };
                        let _ = write!(out, " {}{mark} |", power(Some(m.alpha_exponent)));
                        for r in &norms {
                            match m.norm(*r) {
                                Some(n) => {
                                    let _ = write!(
                                        out,
                                        " {}{} |",
                                        power(n.fit.map(|f| f.kappa_hat)),
                                        if n.covered { "" } else { " *" }
                                    );
                                }
                                None => out.push_str(" |"),
                            }
                        }
                    }
                    None => {
                        for _ in 0..=norms.len() {
                            out.push_str(" |");
                        }
                    }
                }
            }
            out.push('\n');
        }
        out.push_str("\n`*` not covered by the theory (`s ≤ u ≤ 2s + a` or `−a ≤ r ≤ s` violated).\n\n");
    }
    out
}

/// JSON formatter that writes every float with 17 significant digits.
struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes with 17-significant-digit floats; non-finite values become `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    schema_version: u32,
    studies: &'a [RateStudyResult],
}

fn emit_json(results: &[RateStudyResult]) -> Result<String> {
    to_json_string(&JsonDocument {
        schema_version: SCHEMA_VERSION,
        studies: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fit::RateFit;
    use crate::harness::study::{NormResult, Rule};

    fn one_cell() -> RateStudyResult {
        RateStudyResult {
            problem: "smoothing".into(),
            reference: "step".into(),
            rule: Rule::Apriori,
            a: 1.0,
            gamma: 1.0,
            s: 0.0,
            u: 0.5,
            seed: 1,
            repetitions: 1,
            ladder: vec![3, 4, 5],
            deltas: vec![0.125, 0.0625, 0.03125],
            reference_norm: 1.0,
            median_alphas: vec![0.1, 0.05, 0.02],
            alpha_exponent: 4.0 / 3.0,
            alpha_fit: None,
            covered: true,
            norms: vec![NormResult {
                r: 0.0,
                median_errors: vec![0.3, 0.2, 0.1],
                fit: Some(RateFit {
                    kappa_hat: 0.41,
                    r_squared: 0.99,
                    points: 3,
                }),
                predicted_rate: 1.0 / 3.0,
                covered: true,
            }],
            failures: 0,
            cells: Vec::new(),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let csv = emit_tables(&[], TableFormat::Csv).unwrap();
        assert_eq!(csv, "s,u,rule,r,kappa_hat,r_squared,alpha_exponent,flag\r\n");
    }

    #[test]
    fn one_cell_csv_row() {
        let csv = emit_tables(&[one_cell()], TableFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines.len(), 2);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 8);
        assert!(fields.iter().all(|f| !f.is_empty()));
        assert_eq!(fields[2], "apriori");
        assert_eq!(fields[4].parse::<f64>().unwrap(), 0.41);
        assert_eq!(fields[6], "1.3333333333333333e0");
        assert_eq!(fields[7], "covered");
    }

    #[test]
    fn json_has_schema_and_round_trips_floats() {
        let json = emit_tables(&[one_cell()], TableFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema_version"], 1);
        let alpha = v["studies"][0]["alpha_exponent"].as_f64().unwrap();
        assert_eq!(alpha, 4.0 / 3.0);
        assert!(json.contains("1.3333333333333333e0"));
    }

    #[test]
    fn json_round_trips_missing_medians() {
        let mut r = one_cell();
        r.median_alphas[1] = f64::NAN;
        r.alpha_exponent = f64::NAN;
        let json = emit_tables(&[r], TableFormat::Json).unwrap();
        #[derive(serde::Deserialize)]
        struct Doc {
            studies: Vec<RateStudyResult>,
        }
        let back: Doc = serde_json::from_str(&json).unwrap();
        assert!(back.studies[0].median_alphas[1].is_nan());
        assert!(back.studies[0].alpha_exponent.is_nan());
        assert_eq!(back.studies[0].median_alphas[0], 0.1);
    }

    #[test]
    fn markdown_layout() {
        let md = emit_tables(&[one_cell()], TableFormat::Markdown).unwrap();
        assert!(md.contains("| 1/2 | δ^1.33 | δ^0.41 |"), "{md}");
        assert!(md.contains("s = 0: α"));
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<TableFormat>().unwrap(), TableFormat::Markdown);
        assert!("xlsx".parse::<TableFormat>().is_err());
    }

    /// Fixed-seed miniature study against files in `tests/golden`; regenerate with `UPDATE_GOLDEN=1`.
    #[test]
    fn miniature_study_matches_snapshot() {
        use crate::harness::study::{run_study, RateStudyConfig, StudyProblem};
        use crate::smoothing::{SmoothingReference, SmoothingSpec, StabilityVariant};

        let results: Vec<_> = [Rule::Apriori, Rule::Discrepancy]
            .into_iter()
            .map(|rule| {
                let spec = SmoothingSpec {
                    max_wavenumber: 256,
                    s: 1.0,
                    variant: StabilityVariant::LipschitzA1,
                };
                let reference = SmoothingReference::Hat;
                let mut cfg = RateStudyConfig::new(StudyProblem::Smoothing { spec, reference }, rule);
                cfg.j_max = 8;
                cfg.repetitions = 2;
                cfg.seed = 7;
                run_study(&cfg).unwrap()
            })
            .collect();
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
        for (name, format) in [("mini_study.csv", TableFormat::Csv), ("mini_study.md", TableFormat::Markdown)] {
            let actual = emit_tables(&results, format).unwrap();
            let path = dir.join(name);
            if std::env::var_os("UPDATE_GOLDEN").is_some() {
                std::fs::write(&path, &actual).unwrap();
                continue;
            }
            let expected = std::fs::read_to_string(&path).unwrap();
            assert_eq!(actual, expected, "snapshot {name} changed");
        }
    }
}
