//! Audit reports and their table / CSV / JSON renderings.
//!
//! Values are kept at full precision on a percent scale. Table and CSV output
//! rounds half-to-even at two decimals; JSON keeps every digit.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::balance::RebalancePlan;
use crate::domain::{PredictionRecord, Roster};
use crate::error::{Error, Result};
use crate::fairness::{summarize, GroupTable};
use crate::grouping::{apply_grouping, Attribute};
use crate::metrics::{ConfusionMatrix, MacroMetrics};

pub const SCHEMA_VERSION: &str = "fairaudit.audit.v1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected table, csv or json)")),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Rounds half-to-even at two decimals.
pub fn round2(value: f64) -> String {
    let scaled = (value * 100.0).round_ties_even();
    let cents = scaled as i64;
    let sign = if cents < 0 { "-" } else { "" };
    let cents = cents.unsigned_abs();
    format!("{sign}{}.{:02}", cents / 100, cents % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub schema: String,
    pub tool_version: String,
    pub subjects_sha256: String,
    pub predictions_sha256: String,
    pub subject_count: usize,
    pub record_count: usize,
    pub filter: String,
}

/// Precision / recall / F1 on a percent scale, with the number of classes
/// whose value was zero-filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub class_count: usize,
    pub zero_filled: usize,
}

impl From<MacroMetrics> for MetricsRow {
    fn from(m: MacroMetrics) -> Self {
        Self {
            precision: 100.0 * m.precision,
            recall: 100.0 * m.recall,
            f1: 100.0 * m.f1,
            class_count: m.class_count,
            zero_filled: m.undefined_precision.max(m.undefined_recall).max(m.undefined_f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub subjects: usize,
    pub records: u64,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessRow {
    pub dpd: f64,
    pub tpd: f64,
    pub fpd: f64,
    pub eod: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeSection {
    pub attribute: String,
    pub groups: Vec<GroupRow>,
    pub fairness: FairnessRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub metadata: Metadata,
    pub baseline: MetricsRow,
    pub attributes: Vec<AttributeSection>,
}

/// Raw inputs, hashed into the report metadata.
#[derive(Debug, Clone, Default)]
pub struct Provenance<'a> {
    pub subjects_bytes: &'a [u8],
    pub predictions_bytes: &'a [u8],
    pub filter: String,
}

pub fn build_audit(
    roster: &Roster,
    log: &[PredictionRecord],
    attributes: &[Attribute],
    provenance: &Provenance<'_>,
) -> Result<AuditReport> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster);
    }
    let matrix = ConfusionMatrix::from_log(log, roster.index())?;
    let baseline = matrix.macro_metrics(0..roster.len())?.into();

    let mut attrs = attributes.to_vec();
    attrs.sort_by_key(|a| a.to_string());
    attrs.dedup();
    let attributes = attrs
        .iter()
        .map(|attribute| {
            let grouping = apply_grouping(roster, attribute)?;
            let table = GroupTable::new(&matrix, &grouping)?;
            let groups = grouping
                .labels()
                .iter()
                .enumerate()
                .map(|(g, label)| {
                    let members = grouping.members_of_group(g);
                    Ok(GroupRow {
                        label: label.clone(),
                        subjects: members.len(),
                        records: table.group_records(g),
                        metrics: matrix.macro_metrics(members.iter().copied())?.into(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = summarize(&matrix, roster, &grouping)?;
            Ok(AttributeSection {
                attribute: attribute.to_string(),
                groups,
                fairness: FairnessRow {
                    dpd: summary.dpd,
                    tpd: summary.tpd,
                    fpd: summary.fpd,
                    eod: summary.eod,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(AuditReport {
        metadata: Metadata {
            schema: SCHEMA_VERSION.to_owned(),
            tool_version: TOOL_VERSION.to_owned(),
            subjects_sha256: sha256_hex(provenance.subjects_bytes),
            predictions_sha256: sha256_hex(provenance.predictions_bytes),
            subject_count: roster.len(),
            record_count: log.len(),
            filter: provenance.filter.clone(),
        },
        baseline,
        attributes,
    })
}

pub fn render_report(report: &AuditReport, format: Format) -> Vec<u8> {
    match format {
        Format::Table => render_table(report).into_bytes(),
        Format::Csv => render_csv(report).into_bytes(),
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
    }
}

fn flag(m: &MetricsRow) -> &'static str {
    if m.zero_filled > 0 {
        "*"
    } else {
        ""
    }
}

fn render_table(report: &AuditReport) -> String {
    let meta = &report.metadata;
    let mut s = String::new();
    let _ = writeln!(s, "fairaudit {} ({})", meta.tool_version, meta.schema);
    let _ = writeln!(
        s,
        "subjects: {}  records: {}  filter: {}",
        meta.subject_count,
        meta.record_count,
        if meta.filter.is_empty() { "none" } else { &meta.filter }
    );
    let _ = writeln!(s, "subjects sha256:    {}", meta.subjects_sha256);
    let _ = writeln!(s, "predictions sha256: {}", meta.predictions_sha256);
    s.push('\n');

    let _ = writeln!(
        s,
        "{:<28} {:>9} {:>9} {:>9} {:>8} {:>8}",
        "performance (%)", "precision", "recall", "f1", "subjects", "records"
    );
    let row = |s: &mut String, name: &str, m: &MetricsRow, records: Option<u64>| {
        let _ = writeln!(
            s,
            "{:<28} {:>9} {:>9} {:>9} {:>8} {:>8}{}",
            name,
            round2(m.precision),
            round2(m.recall),
            round2(m.f1),
            m.class_count,
            records.map_or(String::new(), |r| r.to_string()),
            flag(m)
        );
    };
    row(&mut s, "baseline", &report.baseline, Some(meta.record_count as u64));
    for section in &report.attributes {
        for g in &section.groups {
            row(&mut s, &format!("{}:{}", section.attribute, g.label), &g.metrics, Some(g.records));
        }
    }
    s.push('\n');

    let _ = writeln!(
        s,
        "{:<28} {:>9} {:>9} {:>9} {:>9}",
        "fairness (%)", "dpd", "tpd", "fpd", "eod"
    );
    for section in &report.attributes {
        let f = &section.fairness;
        let _ = writeln!(
            s,
            "{:<28} {:>9} {:>9} {:>9} {:>9}",
            section.attribute,
            round2(f.dpd),
            round2(f.tpd),
            round2(f.fpd),
            round2(f.eod)
        );
    }
    let flagged = std::iter::once(&report.baseline)
        .chain(report.attributes.iter().flat_map(|a| a.groups.iter().map(|g| &g.metrics)))
        .any(|m| m.zero_filled > 0);
    if flagged {
        s.push_str("\n* includes classes with undefined rates, counted as 0\n");
    }
    s
}

pub const CSV_COLUMNS: [&str; 13] = [
    "kind",
    "attribute",
    "group",
    "subjects",
    "records",
    "precision",
    "recall",
    "f1",
    "zero_filled",
    "dpd",
    "tpd",
    "fpd",
    "eod",
];

fn render_csv(report: &AuditReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, fields: [String; 13]| {
        w.write_record(&fields).expect("in-memory write");
    };
    write(&mut w, CSV_COLUMNS.map(str::to_owned));
    let perf = |kind: &str, attribute: &str, group: &str, records: u64, m: &MetricsRow| {
        [
            kind.to_owned(),
            attribute.to_owned(),
            group.to_owned(),
            m.class_count.to_string(),
            records.to_string(),
            round2(m.precision),
            round2(m.recall),
            round2(m.f1),
            m.zero_filled.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]
    };
    write(
        &mut w,
        perf("baseline", "", "", report.metadata.record_count as u64, &report.baseline),
    );
    for section in &report.attributes {
        for g in &section.groups {
            write(&mut w, perf("group", &section.attribute, &g.label, g.records, &g.metrics));
        }
    }
    for section in &report.attributes {
        let f = &section.fairness;
        write(
            &mut w,
            [
                "fairness".to_owned(),
                section.attribute.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                round2(f.dpd),
                round2(f.tpd),
                round2(f.fpd),
                round2(f.eod),
            ],
        );
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn render_plan(plan: &RebalancePlan, attribute: &str, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct PlanDoc<'a> {
                attribute: &'a str,
                strategy: String,
                added: u64,
                removed: u64,
                rows: &'a [crate::balance::PlanRow],
            }
            let doc = PlanDoc {
                attribute,
                strategy: plan.strategy.to_string(),
                added: plan.added(),
                removed: plan.removed(),
                rows: &plan.rows,
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("plan serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut s = String::from("attribute,group,current,target,delta\n");
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for r in &plan.rows {
                w.write_record([
                    attribute,
                    &r.label,
                    &r.current.to_string(),
                    &r.target.to_string(),
                    &r.delta.to_string(),
                ])
                .expect("in-memory write");
            }
            s.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
            s.into_bytes()
        }
        Format::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "rebalance plan for {attribute} ({})", plan.strategy);
            let _ = writeln!(s, "{:<20} {:>9} {:>9} {:>9} {:>8}", "group", "current", "target", "delta", "prior");
            let total: u64 = plan.rows.iter().map(|r| r.current).sum();
            for r in &plan.rows {
                let prior = if total == 0 { 0.0 } else { r.current as f64 / total as f64 };
                let _ = writeln!(
                    s,
                    "{:<20} {:>9} {:>9} {:>+9} {:>8.4}",
                    r.label, r.current, r.target, r.delta, prior
                );
            }
            let _ = writeln!(s, "added: {}  removed: {}", plan.added(), plan.removed());
            s.into_bytes()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round2(2.5), "2.50");
        assert_eq!(round2(0.125), "0.12");
        assert_eq!(round2(0.375), "0.38");
        assert_eq!(round2(99.999999), "100.00");
        assert_eq!(round2(4.999_999_999_9), "5.00");
        assert_eq!(round2(0.0), "0.00");
        assert_eq!(round2(-1.005), "-1.00");
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn format_parsing() {
        assert_eq!("json".parse(), Ok(Format::Json));
        assert!("xml".parse::<Format>().is_err());
    }
}
