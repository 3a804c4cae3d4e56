//! Reading cardinal-point summaries from delimited text.
//!
//! Two layouts are supported out of the box: the native schema
//!
//! ```text
//! timestamp,isc_a,voc_v,imp_a,vmp_v,u_isc_pct,u_voc_pct,u_imp_pct,u_vmp_pct[,irradiance_wm2,t_module_c]
//! ```
//!
//! and a column profile for the NREL module-performance archives
//! ([`MappingProfile::nrel`]). Other layouts are described with a TOML
//! profile mapping field names to header texts or zero-based column indices.
//!
//! Rows that fail to parse or validate become [`RowDiagnostic`]s; a bad row
//! never aborts the file.

use crate::model::{non_negative, CardinalPoints};
use crate::uncertainty::{UncertainCardinalPoints, UncertaintyError};
use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Read;
use thiserror::Error;

pub const NATIVE_HEADER: [&str; 11] = [
    "timestamp",
    "isc_a",
    "voc_v",
    "imp_a",
    "vmp_v",
    "u_isc_pct",
    "u_voc_pct",
    "u_imp_pct",
    "u_vmp_pct",
    "irradiance_wm2",
    "t_module_c",
];

const NREL_PROFILE: &str = include_str!("../profiles/nrel.toml");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    UnreadableInput(String),
    #[error("no data row has the {required} columns the mapping requires")]
    MappingMismatch { required: usize },
    #[error("invalid column mapping: {0}")]
    InvalidMapping(String),
    #[error("failed to write output: {0}")]
    SinkWriteFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureUnit {
    #[default]
    Celsius,
    Kelvin,
}

impl TemperatureUnit {
    pub fn to_kelvin(self, t: f64) -> f64 {
        match self {
            TemperatureUnit::Celsius => t + 273.15,
            TemperatureUnit::Kelvin => t,
        }
    }
}

/// A column given by header text or by zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

/// Field names the profile must or may map.
pub const REQUIRED_FIELDS: [&str; 9] = ["timestamp", "isc", "voc", "imp", "vmp", "u_isc", "u_voc", "u_imp", "u_vmp"];
pub const OPTIONAL_FIELDS: [&str; 2] = ["irradiance", "temperature"];

/// Unresolved layout description, typically loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingProfile {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_decimal")]
    pub decimal_separator: char,
    #[serde(default = "default_header_rows")]
    pub header_rows: usize,
    #[serde(default)]
    pub temperature_unit: TemperatureUnit,
    /// chrono format string; ISO-8601 variants are tried when absent.
    #[serde(default)]
    pub timestamp_format: Option<String>,
    pub columns: BTreeMap<String, ColumnRef>,
}

fn default_delimiter() -> char {
    ','
}

fn default_decimal() -> char {
    '.'
}

fn default_header_rows() -> usize {
    1
}

impl MappingProfile {
    pub fn native() -> Self {
        let names =
            ["timestamp", "isc", "voc", "imp", "vmp", "u_isc", "u_voc", "u_imp", "u_vmp", "irradiance", "temperature"];
        MappingProfile {
            delimiter: ',',
            decimal_separator: '.',
            header_rows: 1,
            temperature_unit: TemperatureUnit::Celsius,
            timestamp_format: None,
            columns: names
                .iter()
                .zip(NATIVE_HEADER)
                .map(|(field, header)| (field.to_string(), ColumnRef::Name(header.to_string())))
                .collect(),
        }
    }

    pub fn nrel() -> Self {
        Self::from_toml(NREL_PROFILE).expect("bundled NREL profile parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let profile: MappingProfile = toml::from_str(text).map_err(|e| IngestError::InvalidMapping(e.to_string()))?;
        profile.check()?;
        Ok(profile)
    }

    fn check(&self) -> Result<(), IngestError> {
        for field in REQUIRED_FIELDS {
            if !self.columns.contains_key(field) {
                return Err(IngestError::InvalidMapping(format!("required field `{field}` is not mapped")));
            }
        }
        if let Some(extra) = self
            .columns
            .keys()
            .find(|k| !REQUIRED_FIELDS.contains(&k.as_str()) && !OPTIONAL_FIELDS.contains(&k.as_str()))
        {
            return Err(IngestError::InvalidMapping(format!("unknown field `{extra}`")));
        }
        if !self.delimiter.is_ascii() {
            return Err(IngestError::InvalidMapping("delimiter must be ASCII".to_owned()));
        }
        if self.decimal_separator != '.' && self.decimal_separator == self.delimiter {
            return Err(IngestError::InvalidMapping("decimal separator equals delimiter".to_owned()));
        }
        if self.header_rows == 0 && self.columns.values().any(|c| matches!(c, ColumnRef::Name(_))) {
            return Err(IngestError::InvalidMapping("header names need header_rows >= 1".to_owned()));
        }
        Ok(())
    }

    /// Resolves names against `header` (the last header row).
    pub fn resolve(&self, header: &[String]) -> Result<ColumnMapping, IngestError> {
        self.check()?;
        let find = |field: &str| -> Result<Option<usize>, IngestError> {
            match self.columns.get(field) {
                None => Ok(None),
                Some(ColumnRef::Index(i)) => Ok(Some(*i)),
                Some(ColumnRef::Name(name)) => {
                    let wanted = name.trim().to_lowercase();
                    let pos = header.iter().position(|h| h.trim().to_lowercase() == wanted);
                    match pos {
                        Some(p) => Ok(Some(p)),
                        None if OPTIONAL_FIELDS.contains(&field) => Ok(None),
                        None => Err(IngestError::InvalidMapping(format!(
                            "column `{name}` for `{field}` not found in header"
                        ))),
                    }
                }
            }
        };
        let req = |field: &str| -> Result<usize, IngestError> {
            find(field)?.ok_or_else(|| IngestError::InvalidMapping(format!("`{field}` not mapped")))
        };
        let mapping = ColumnMapping {
            timestamp: req("timestamp")?,
            isc: req("isc")?,
            voc: req("voc")?,
            imp: req("imp")?,
            vmp: req("vmp")?,
            u_isc: req("u_isc")?,
            u_voc: req("u_voc")?,
            u_imp: req("u_imp")?,
            u_vmp: req("u_vmp")?,
            irradiance: find("irradiance")?,
            temperature: find("temperature")?,
            delimiter: self.delimiter as u8,
            decimal_separator: self.decimal_separator,
            header_rows: self.header_rows,
            temperature_unit: self.temperature_unit,
            timestamp_format: self.timestamp_format.clone(),
        };
        mapping.check()?;
        Ok(mapping)
    }
}

/// Resolved layout: every field is a column index.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub timestamp: usize,
    pub isc: usize,
    pub voc: usize,
    pub imp: usize,
    pub vmp: usize,
    pub u_isc: usize,
    pub u_voc: usize,
    pub u_imp: usize,
    pub u_vmp: usize,
    pub irradiance: Option<usize>,
    pub temperature: Option<usize>,
    pub delimiter: u8,
    pub decimal_separator: char,
    pub header_rows: usize,
    pub temperature_unit: TemperatureUnit,
    pub timestamp_format: Option<String>,
}

impl ColumnMapping {
    fn required(&self) -> [usize; 9] {
        [self.timestamp, self.isc, self.voc, self.imp, self.vmp, self.u_isc, self.u_voc, self.u_imp, self.u_vmp]
    }

    fn check(&self) -> Result<(), IngestError> {
        let mut seen: Vec<usize> = self.required().to_vec();
        seen.extend(self.irradiance);
        seen.extend(self.temperature);
        let n = seen.len();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != n {
            return Err(IngestError::InvalidMapping("two fields map to the same column".to_owned()));
        }
        Ok(())
    }

    fn min_columns(&self) -> usize {
        self.required().iter().max().map_or(0, |m| m + 1)
    }
}

/// One validated row of a cardinal-point summary file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub timestamp: NaiveDateTime,
    pub irradiance: Option<f64>,
    /// Module temperature, K.
    pub t_module: Option<f64>,
    pub cardinal: CardinalPoints,
    pub u_isc_pct: f64,
    pub u_voc_pct: f64,
    pub u_imp_pct: f64,
    pub u_vmp_pct: f64,
    pub source_line: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub records: Vec<CurveRecord>,
    pub diagnostics: Vec<RowDiagnostic>,
}

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

fn parse_timestamp(text: &str, format: Option<&str>) -> Result<NaiveDateTime, String> {
    let text = text.trim();
    if let Some(fmt) = format {
        if let Ok(ts) = NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(ts);
        }
    }
    if let Ok(ts) = text.parse::<NaiveDateTime>() {
        return Ok(ts);
    }
    if let Ok(ts) = NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S%.f") {
        return Ok(ts);
    }
    if let Ok(ts) = DateTime::parse_from_rfc3339(text) {
        return Ok(ts.naive_utc());
    }
    Err(format!("unparseable timestamp `{text}`"))
}

fn parse_number(field: &str, text: &str, decimal: char) -> Result<f64, String> {
    let trimmed = text.trim();
    let owned;
    let normalized = if decimal == '.' {
        trimmed
    } else {
        owned = trimmed.replace(decimal, ".");
        owned.as_str()
    };
    let value: f64 = normalized.parse().map_err(|_| format!("{field}: not a number `{trimmed}`"))?;
    if !value.is_finite() {
        return Err(format!("{field}: non-finite value `{trimmed}`"));
    }
    Ok(value)
}

fn parse_row(fields: &csv::StringRecord, m: &ColumnMapping, line: u64) -> Result<CurveRecord, String> {
    let get = |idx: usize| fields.get(idx).ok_or_else(|| format!("missing column {idx}"));
    let num = |name: &str, idx: usize| -> Result<f64, String> { parse_number(name, get(idx)?, m.decimal_separator) };
    let opt = |name: &str, idx: Option<usize>| -> Result<Option<f64>, String> {
        match idx.and_then(|i| fields.get(i)).map(str::trim) {
            None | Some("") => Ok(None),
            Some(text) => parse_number(name, text, m.decimal_separator).map(Some),
        }
    };

    let timestamp = parse_timestamp(get(m.timestamp)?, m.timestamp_format.as_deref())?;
    let cardinal = CardinalPoints::new(num("isc", m.isc)?, num("voc", m.voc)?, num("imp", m.imp)?, num("vmp", m.vmp)?)
        .map_err(|e| e.to_string())?;
    let pct = |name: &'static str, idx: usize| -> Result<f64, String> {
        non_negative(name, num(name, idx)?).map_err(|e| e.to_string())
    };
    let irradiance = match opt("irradiance", m.irradiance)? {
        Some(g) => Some(non_negative("irradiance", g).map_err(|e| e.to_string())?),
        None => None,
    };
    let t_module = opt("temperature", m.temperature)?.map(|t| m.temperature_unit.to_kelvin(t));
    if t_module.is_some_and(|t| t <= 0.0) {
        return Err("temperature below absolute zero".to_owned());
    }
    Ok(CurveRecord {
        timestamp,
        irradiance,
        t_module,
        cardinal,
        u_isc_pct: pct("u_isc_pct", m.u_isc)?,
        u_voc_pct: pct("u_voc_pct", m.u_voc)?,
        u_imp_pct: pct("u_imp_pct", m.u_imp)?,
        u_vmp_pct: pct("u_vmp_pct", m.u_vmp)?,
        source_line: line,
    })
}

/// Parses every data row; bad rows become diagnostics.
pub fn parse_records<R: Read>(input: R, profile: &MappingProfile) -> Result<ParseOutput, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(profile.delimiter as u8)
        .from_reader(input);

    let mut mapping: Option<ColumnMapping> = if profile.header_rows == 0 { Some(profile.resolve(&[])?) } else { None };
    let mut headers_seen = 0;
    let mut out = ParseOutput::default();
    let mut data_rows = 0usize;
    let mut short_rows = 0usize;

    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if let csv::ErrorKind::Io(io) = e.kind() {
                    return Err(IngestError::UnreadableInput(io.to_string()));
                }
                if headers_seen >= profile.header_rows {
                    data_rows += 1;
                    out.diagnostics.push(RowDiagnostic { line, reason: e.to_string() });
                }
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if headers_seen < profile.header_rows {
            headers_seen += 1;
            if headers_seen == profile.header_rows {
                let header: Vec<String> = record.iter().map(str::to_owned).collect();
                mapping = Some(profile.resolve(&header)?);
            }
            continue;
        }
        let Some(m) = mapping.as_ref() else { continue };
        data_rows += 1;
        if record.len() < m.min_columns() {
            short_rows += 1;
            out.diagnostics.push(RowDiagnostic {
                line,
                reason: format!("{} columns, mapping needs {}", record.len(), m.min_columns()),
            });
            continue;
        }
        match parse_row(&record, m, line) {
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.diagnostics.push(RowDiagnostic { line, reason }),
        }
    }

    if data_rows > 0 && short_rows == data_rows {
        let required = mapping.map_or(0, |m| m.min_columns());
        return Err(IngestError::MappingMismatch { required });
    }
    Ok(out)
}

/// Converts percent uncertainties into absolute half-widths.
pub fn to_uncertain(rec: &CurveRecord) -> Result<UncertainCardinalPoints, UncertaintyError> {
    let cp = rec.cardinal;
    UncertainCardinalPoints::new(
        cp,
        rec.u_isc_pct / 100.0 * cp.i_sc().abs(),
        rec.u_voc_pct / 100.0 * cp.v_oc().abs(),
        rec.u_imp_pct / 100.0 * cp.i_mp().abs(),
        rec.u_vmp_pct / 100.0 * cp.v_mp().abs(),
    )
}
