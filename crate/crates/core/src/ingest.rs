//! Strict readers and writers for roster and prediction files.
//!
//! Two encodings are accepted, chosen by sniffing the first non-blank byte:
//! CSV with an exact lowercase header, or line-delimited JSON objects with the
//! same field names. Every rejection carries the 1-based line it refers to.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde_json::{Map, Value};

use crate::domain::{Modality, PredictionRecord, Roster, SubjectId, SubjectProfile};
use crate::error::Error;
use crate::grouping::{apply_grouping, Attribute};

pub const SUBJECT_COLUMNS: [&str; 4] = ["subject_id", "age", "gender", "ethnicity"];
pub const PREDICTION_COLUMNS: [&str; 5] = [
    "sample_id",
    "true_subject",
    "predicted_subject",
    "modality",
    "masked",
];

pub const MAX_AGE: u32 = 120;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineErrorKind {
    MissingHeader,
    UnknownColumn(String),
    MissingColumn(String),
    ColumnOrder { expected: String, found: String },
    FieldCount { expected: usize, found: usize },
    EmptyField(&'static str),
    InvalidUtf8,
    InvalidAge(String),
    AgeOutOfRange(u32),
    DuplicateSubject(String),
    UnknownSubject(String),
    DuplicateSample(String),
    InvalidModality(String),
    InvalidMasked(String),
    InvalidJson(String),
    NotAnObject,
    WrongType { field: String, expected: &'static str },
    Malformed(String),
}

impl fmt::Display for LineErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use LineErrorKind::*;
        match self {
            MissingHeader => f.write_str("missing header"),
            UnknownColumn(c) => write!(f, "unknown column '{c}'"),
            MissingColumn(c) => write!(f, "missing column '{c}'"),
            ColumnOrder { expected, found } => {
                write!(f, "header must be '{expected}', found '{found}'")
            }
            FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            EmptyField(name) => write!(f, "empty {name}"),
            InvalidUtf8 => f.write_str("invalid UTF-8"),
            InvalidAge(token) => write!(f, "age '{token}' is not an integer"),
            AgeOutOfRange(age) => write!(f, "age {age} outside [1, {MAX_AGE}]"),
            DuplicateSubject(id) => write!(f, "duplicate subject_id '{id}'"),
            UnknownSubject(id) => write!(f, "unknown subject '{id}'"),
            DuplicateSample(id) => write!(f, "duplicate sample_id '{id}'"),
            InvalidModality(token) => {
                write!(f, "invalid modality '{token}' (expected visual or thermal)")
            }
            InvalidMasked(token) => write!(f, "invalid masked '{token}' (expected yes or no)"),
            InvalidJson(e) => write!(f, "invalid JSON: {e}"),
            NotAnObject => f.write_str("record must be a JSON object"),
            WrongType { field, expected } => write!(f, "field '{field}' must be a {expected}"),
            Malformed(e) => write!(f, "malformed CSV: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("failed reading input: {0}")]
    Io(String),
    #[error("line {line}: {kind}")]
    Line { line: u64, kind: LineErrorKind },
}

impl IngestError {
    fn at(line: u64, kind: LineErrorKind) -> Self {
        IngestError::Line { line, kind }
    }

    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::Line { line, .. } => Some(*line),
            IngestError::Io(_) => None,
        }
    }
}

/// A parsed value plus non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    JsonLines,
}

pub fn sniff(bytes: &[u8]) -> Encoding {
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => Encoding::JsonLines,
        _ => Encoding::Csv,
    }
}

/// One data row, fields in canonical column order.
struct Row {
    line: u64,
    fields: Vec<Value>,
}

fn read_all(mut input: impl Read) -> Result<Vec<u8>, IngestError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| IngestError::Io(e.to_string()))?;
    Ok(bytes)
}

fn check_header(line: u64, found: &[&str], expected: &[&str]) -> Result<(), IngestError> {
    if let Some(c) = found.iter().find(|c| !expected.contains(c)) {
        return Err(IngestError::at(line, LineErrorKind::UnknownColumn((*c).to_owned())));
    }
    if let Some(c) = expected.iter().find(|c| !found.contains(c)) {
        return Err(IngestError::at(line, LineErrorKind::MissingColumn((*c).to_owned())));
    }
    if found != expected {
        return Err(IngestError::at(
            line,
            LineErrorKind::ColumnOrder {
                expected: expected.join(","),
                found: found.join(","),
            },
        ));
    }
    Ok(())
}

fn csv_rows(bytes: &[u8], columns: &[&str]) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows = Vec::new();
    let mut header_seen = false;
    let mut record = csv::ByteRecord::new();
    loop {
        let more = reader.read_byte_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            IngestError::at(line, LineErrorKind::Malformed(e.to_string()))
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let fields = record
            .iter()
            .map(std::str::from_utf8)
            .collect::<Result<Vec<&str>, _>>()
            .map_err(|_| IngestError::at(line, LineErrorKind::InvalidUtf8))?;
        if !header_seen {
            check_header(line, &fields, columns)?;
            header_seen = true;
            continue;
        }
        if fields.len() != columns.len() {
            return Err(IngestError::at(
                line,
                LineErrorKind::FieldCount {
                    expected: columns.len(),
                    found: fields.len(),
                },
            ));
        }
        rows.push(Row {
            line,
            fields: fields.into_iter().map(|f| Value::String(f.to_owned())).collect(),
        });
    }
    if !header_seen {
        return Err(IngestError::at(1, LineErrorKind::MissingHeader));
    }
    Ok(rows)
}

fn jsonl_rows(bytes: &[u8], columns: &[&str]) -> Result<Vec<Row>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() as u64 + 1;
        IngestError::at(line, LineErrorKind::InvalidUtf8)
    })?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw)
            .map_err(|e| IngestError::at(line, LineErrorKind::InvalidJson(e.to_string())))?;
        let Value::Object(mut map) = value else {
            return Err(IngestError::at(line, LineErrorKind::NotAnObject));
        };
        let keys: Vec<&str> = map.keys().map(String::as_str).collect();
        if let Some(k) = keys.iter().find(|k| !columns.contains(k)) {
            return Err(IngestError::at(line, LineErrorKind::UnknownColumn((*k).to_owned())));
        }
        let fields = columns
            .iter()
            .map(|c| {
                map.remove(*c)
                    .ok_or_else(|| IngestError::at(line, LineErrorKind::MissingColumn((*c).to_owned())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn rows(bytes: &[u8], columns: &[&str]) -> Result<Vec<Row>, IngestError> {
    match sniff(bytes) {
        Encoding::Csv => csv_rows(bytes, columns),
        Encoding::JsonLines => jsonl_rows(bytes, columns),
    }
}

fn text_field<'a>(row: &'a Row, i: usize, name: &str) -> Result<&'a str, IngestError> {
    row.fields[i].as_str().ok_or_else(|| {
        IngestError::at(
            row.line,
            LineErrorKind::WrongType {
                field: name.to_owned(),
                expected: "string",
            },
        )
    })
}

fn required<'a>(row: &'a Row, i: usize, name: &'static str) -> Result<&'a str, IngestError> {
    let v = text_field(row, i, name)?;
    if v.is_empty() {
        return Err(IngestError::at(row.line, LineErrorKind::EmptyField(name)));
    }
    Ok(v)
}

fn parse_age(row: &Row) -> Result<u32, IngestError> {
    let age = match &row.fields[1] {
        Value::String(s) => u32::from_str(s)
            .map_err(|_| IngestError::at(row.line, LineErrorKind::InvalidAge(s.clone())))?,
        Value::Number(n) => n
            .as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| IngestError::at(row.line, LineErrorKind::InvalidAge(n.to_string())))?,
        other => {
            return Err(IngestError::at(row.line, LineErrorKind::InvalidAge(other.to_string())))
        }
    };
    if !(1..=MAX_AGE).contains(&age) {
        return Err(IngestError::at(row.line, LineErrorKind::AgeOutOfRange(age)));
    }
    Ok(age)
}

/// Reads a roster (`subject_id,age,gender,ethnicity`).
pub fn parse_subjects(input: impl Read) -> Result<Roster, IngestError> {
    let bytes = read_all(input)?;
    let mut seen = HashSet::new();
    let mut profiles = Vec::new();
    for row in rows(&bytes, &SUBJECT_COLUMNS)? {
        let id = required(&row, 0, "subject_id")?;
        if !seen.insert(id.to_owned()) {
            return Err(IngestError::at(row.line, LineErrorKind::DuplicateSubject(id.to_owned())));
        }
        let age = parse_age(&row)?;
        let gender = text_field(&row, 2, "gender")?;
        let ethnicity = text_field(&row, 3, "ethnicity")?;
        profiles.push(SubjectProfile::new(id, age, gender, ethnicity));
    }
    Ok(Roster::new(profiles).expect("duplicates rejected above"))
}

fn parse_masked(row: &Row) -> Result<bool, IngestError> {
    match &row.fields[4] {
        Value::String(s) if s == "yes" => Ok(true),
        Value::String(s) if s == "no" => Ok(false),
        Value::String(s) => Err(IngestError::at(row.line, LineErrorKind::InvalidMasked(s.clone()))),
        other => Err(IngestError::at(row.line, LineErrorKind::InvalidMasked(other.to_string()))),
    }
}

/// Reads a prediction log, resolving identities against `roster`.
pub fn parse_predictions(
    input: impl Read,
    roster: &Roster,
) -> Result<Parsed<Vec<PredictionRecord>>, IngestError> {
    let bytes = read_all(input)?;
    let mut seen = HashSet::new();
    let mut log = Vec::new();
    for row in rows(&bytes, &PREDICTION_COLUMNS)? {
        let sample_id = required(&row, 0, "sample_id")?;
        if !seen.insert(sample_id.to_owned()) {
            return Err(IngestError::at(row.line, LineErrorKind::DuplicateSample(sample_id.to_owned())));
        }
        let subject = |i: usize, name: &'static str| -> Result<SubjectId, IngestError> {
            let id = SubjectId::from(required(&row, i, name)?);
            if !roster.contains(&id) {
                return Err(IngestError::at(row.line, LineErrorKind::UnknownSubject(id.to_string())));
            }
            Ok(id)
        };
        let true_subject = subject(1, "true_subject")?;
        let predicted_subject = subject(2, "predicted_subject")?;
        let modality_token = text_field(&row, 3, "modality")?;
        let modality = Modality::parse(modality_token).ok_or_else(|| {
            IngestError::at(row.line, LineErrorKind::InvalidModality(modality_token.to_owned()))
        })?;
        let masked = parse_masked(&row)?;
        log.push(PredictionRecord {
            sample_id: sample_id.to_owned(),
            true_subject,
            predicted_subject,
            modality,
            masked,
        });
    }
    let warnings = if log.is_empty() {
        vec!["prediction log has no records".to_owned()]
    } else {
        Vec::new()
    };
    Ok(Parsed { value: log, warnings })
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn flush_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_subjects_csv(roster: &Roster, out: impl Write) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(SUBJECT_COLUMNS).map_err(flush_err)?;
    for p in roster.profiles() {
        let age = p.age.to_string();
        w.write_record([p.subject_id.as_str(), &age, &p.gender, &p.ethnicity])
            .map_err(flush_err)?;
    }
    w.flush()
}

fn masked_token(masked: bool) -> &'static str {
    if masked {
        "yes"
    } else {
        "no"
    }
}

pub fn write_predictions_csv(log: &[PredictionRecord], out: impl Write) -> std::io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(PREDICTION_COLUMNS).map_err(flush_err)?;
    for r in log {
        w.write_record([
            r.sample_id.as_str(),
            r.true_subject.as_str(),
            r.predicted_subject.as_str(),
            r.modality.as_str(),
            masked_token(r.masked),
        ])
        .map_err(flush_err)?;
    }
    w.flush()
}

fn write_object(out: &mut impl Write, pairs: &[(&str, Value)]) -> std::io::Result<()> {
    let map: Map<String, Value> = pairs.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect();
    serde_json::to_writer(&mut *out, &Value::Object(map))?;
    out.write_all(b"\n")
}

pub fn write_subjects_jsonl(roster: &Roster, mut out: impl Write) -> std::io::Result<()> {
    for p in roster.profiles() {
        write_object(
            &mut out,
            &[
                ("subject_id", Value::from(p.subject_id.as_str())),
                ("age", Value::from(p.age)),
                ("gender", Value::from(p.gender.as_str())),
                ("ethnicity", Value::from(p.ethnicity.as_str())),
            ],
        )?;
    }
    Ok(())
}

pub fn write_predictions_jsonl(log: &[PredictionRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in log {
        write_object(
            &mut out,
            &[
                ("sample_id", Value::from(r.sample_id.as_str())),
                ("true_subject", Value::from(r.true_subject.as_str())),
                ("predicted_subject", Value::from(r.predicted_subject.as_str())),
                ("modality", Value::from(r.modality.as_str())),
                ("masked", Value::from(masked_token(r.masked))),
            ],
        )?;
    }
    Ok(())
}

/// Keeps records matching every set criterion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub modality: Option<Modality>,
    pub masked: Option<bool>,
}

impl RecordFilter {
    pub fn matches(&self, r: &PredictionRecord) -> bool {
        self.modality.is_none_or(|m| m == r.modality) && self.masked.is_none_or(|m| m == r.masked)
    }

    pub fn apply(&self, log: Vec<PredictionRecord>) -> Vec<PredictionRecord> {
        log.into_iter().filter(|r| self.matches(r)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.modality.is_none() && self.masked.is_none()
    }
}

impl fmt::Display for RecordFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(m) = self.modality {
            parts.push(format!("modality={m}"));
        }
        if let Some(m) = self.masked {
            parts.push(format!("masked={}", masked_token(m)));
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for RecordFilter {
    type Err = String;

    /// `modality=visual|thermal` and/or `masked=yes|no`, comma separated.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut filter = RecordFilter::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("filter term '{part}' must look like key=value"))?;
            match key {
                "modality" => {
                    filter.modality = Some(
                        Modality::parse(value).ok_or_else(|| format!("invalid modality '{value}'"))?,
                    )
                }
                "masked" => {
                    filter.masked = Some(match value {
                        "yes" => true,
                        "no" => false,
                        _ => return Err(format!("invalid masked '{value}'")),
                    })
                }
                _ => return Err(format!("unknown filter key '{key}'")),
            }
        }
        Ok(filter)
    }
}

/// Consistency findings for a log against a roster. Never mutates its inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    /// Records per true subject, for every roster subject.
    pub subject_samples: BTreeMap<SubjectId, u64>,
    /// Records per group for each standard attribute.
    pub group_samples: BTreeMap<String, BTreeMap<String, u64>>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(log: &[PredictionRecord], roster: &Roster) -> ValidationReport {
    let mut report = ValidationReport {
        subject_samples: roster.ids().iter().map(|id| (id.clone(), 0)).collect(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for (i, r) in log.iter().enumerate() {
        if !seen.insert(r.sample_id.as_str()) {
            report
                .violations
                .push(format!("record {}: duplicate sample_id '{}'", i + 1, r.sample_id));
        }
        match report.subject_samples.get_mut(&r.true_subject) {
            Some(n) => *n += 1,
            None => report.violations.push(format!(
                "record {}: unknown true_subject '{}'",
                i + 1,
                r.true_subject
            )),
        }
        if !roster.contains(&r.predicted_subject) {
            report.violations.push(format!(
                "record {}: unknown predicted_subject '{}'",
                i + 1,
                r.predicted_subject
            ));
        }
    }
    if log.is_empty() {
        report.warnings.push("prediction log has no records".to_owned());
    }
    for (id, n) in &report.subject_samples {
        if *n == 0 {
            report.warnings.push(format!("subject '{id}' has no samples"));
        }
    }
    for attribute in [Attribute::Age, Attribute::Gender, Attribute::Ethnicity] {
        match apply_grouping(roster, &attribute) {
            Ok(grouping) => {
                let mut totals: BTreeMap<String, u64> =
                    grouping.labels().iter().map(|l| (l.clone(), 0)).collect();
                for (pos, id) in roster.ids().iter().enumerate() {
                    *totals.get_mut(grouping.label_of(pos)).expect("label exists") +=
                        report.subject_samples[id];
                }
                report.group_samples.insert(attribute.to_string(), totals);
            }
            Err(e @ Error::EmptyLabel { .. }) => report.warnings.push(e.to_string()),
            Err(e) => report.violations.push(e.to_string()),
        }
    }
    report
}
