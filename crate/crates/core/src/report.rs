//! Result rows and their CSV / JSON rendering.
//!
//! Rows are flat structs whose field order is the column order. Reals are
//! rendered as the shortest decimal that round-trips, so output is
//! byte-stable across runs.

use crate::domain::{DomainResult, SelectedRule};
use crate::ingest::IngestError;
use crate::model::{CardinalPoints, IVPoint, SdmParameters};
use crate::uncertainty::{Corner, DomainInterval, VariableStats};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// A row type with a fixed column list.
pub trait Tabular: Serialize {
    const HEADERS: &'static [&'static str];
}

pub const STATUS_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRow {
    pub timestamp: Option<String>,
    pub isc_a: f64,
    pub voc_v: f64,
    pub imp_a: f64,
    pub vmp_v: f64,
    pub a_max_v: Option<f64>,
    pub r_s_min_ohm: Option<f64>,
    pub selected_rule: Option<SelectedRule>,
    pub converged: Option<bool>,
    pub f_sh_residual: Option<f64>,
    pub f_mp_residual: Option<f64>,
    pub status: String,
}

impl Tabular for DomainRow {
    const HEADERS: &'static [&'static str] = &[
        "timestamp",
        "isc_a",
        "voc_v",
        "imp_a",
        "vmp_v",
        "a_max_v",
        "r_s_min_ohm",
        "selected_rule",
        "converged",
        "f_sh_residual",
        "f_mp_residual",
        "status",
    ];
}

impl DomainRow {
    pub fn new(timestamp: Option<String>, cp: &CardinalPoints, result: Result<&DomainResult, String>) -> Self {
        let mut row = DomainRow {
            timestamp,
            isc_a: cp.i_sc(),
            voc_v: cp.v_oc(),
            imp_a: cp.i_mp(),
            vmp_v: cp.v_mp(),
            a_max_v: None,
            r_s_min_ohm: None,
            selected_rule: None,
            converged: None,
            f_sh_residual: None,
            f_mp_residual: None,
            status: STATUS_OK.to_owned(),
        };
        match result {
            Ok(d) => {
                row.a_max_v = Some(d.a_max);
                row.r_s_min_ohm = Some(d.r_s_min);
                row.selected_rule = Some(d.selected_rule);
                row.converged = Some(d.converged);
                row.f_sh_residual = Some(d.f_sh_residual);
                row.f_mp_residual = Some(d.f_mp_residual);
            }
            Err(reason) => row.status = reason,
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub timestamp: Option<String>,
    pub isc_a: f64,
    pub voc_v: f64,
    pub imp_a: f64,
    pub vmp_v: f64,
    pub low_a_max_v: Option<f64>,
    pub low_r_s_min_ohm: Option<f64>,
    pub low_selected_rule: Option<SelectedRule>,
    pub high_a_max_v: Option<f64>,
    pub high_r_s_min_ohm: Option<f64>,
    pub high_selected_rule: Option<SelectedRule>,
    pub a_max_lo_v: Option<f64>,
    pub a_max_hi_v: Option<f64>,
    pub r_s_min_lo_ohm: Option<f64>,
    pub r_s_min_hi_ohm: Option<f64>,
    pub status: String,
}

impl Tabular for IntervalRow {
    const HEADERS: &'static [&'static str] = &[
        "timestamp",
        "isc_a",
        "voc_v",
        "imp_a",
        "vmp_v",
        "low_a_max_v",
        "low_r_s_min_ohm",
        "low_selected_rule",
        "high_a_max_v",
        "high_r_s_min_ohm",
        "high_selected_rule",
        "a_max_lo_v",
        "a_max_hi_v",
        "r_s_min_lo_ohm",
        "r_s_min_hi_ohm",
        "status",
    ];
}

impl IntervalRow {
    pub fn new(timestamp: Option<String>, nominal: &CardinalPoints, result: Result<&DomainInterval, String>) -> Self {
        let mut row = IntervalRow {
            timestamp,
            isc_a: nominal.i_sc(),
            voc_v: nominal.v_oc(),
            imp_a: nominal.i_mp(),
            vmp_v: nominal.v_mp(),
            low_a_max_v: None,
            low_r_s_min_ohm: None,
            low_selected_rule: None,
            high_a_max_v: None,
            high_r_s_min_ohm: None,
            high_selected_rule: None,
            a_max_lo_v: None,
            a_max_hi_v: None,
            r_s_min_lo_ohm: None,
            r_s_min_hi_ohm: None,
            status: STATUS_OK.to_owned(),
        };
        match result {
            Ok(i) => {
                row.low_a_max_v = Some(i.low.a_max);
                row.low_r_s_min_ohm = Some(i.low.r_s_min);
                row.low_selected_rule = Some(i.low.selected_rule);
                row.high_a_max_v = Some(i.high.a_max);
                row.high_r_s_min_ohm = Some(i.high.r_s_min);
                row.high_selected_rule = Some(i.high.selected_rule);
                row.a_max_lo_v = Some(i.a_max_interval[0]);
                row.a_max_hi_v = Some(i.a_max_interval[1]);
                row.r_s_min_lo_ohm = Some(i.r_s_min_interval[0]);
                row.r_s_min_hi_ohm = Some(i.r_s_min_interval[1]);
            }
            Err(reason) => row.status = reason,
        }
        row
    }
}

/// One sign combination of the corner analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    pub corner: String,
    pub isc_a: Option<f64>,
    pub voc_v: Option<f64>,
    pub imp_a: Option<f64>,
    pub vmp_v: Option<f64>,
    pub a_max_v: Option<f64>,
    pub r_s_min_ohm: Option<f64>,
    pub selected_rule: Option<SelectedRule>,
    pub status: String,
}

impl Tabular for CornerRow {
    const HEADERS: &'static [&'static str] =
        &["corner", "isc_a", "voc_v", "imp_a", "vmp_v", "a_max_v", "r_s_min_ohm", "selected_rule", "status"];
}

impl From<&Corner> for CornerRow {
    fn from(c: &Corner) -> Self {
        let cp = c.cardinal.as_ref().ok();
        let mut row = CornerRow {
            corner: c.label(),
            isc_a: cp.map(CardinalPoints::i_sc),
            voc_v: cp.map(CardinalPoints::v_oc),
            imp_a: cp.map(CardinalPoints::i_mp),
            vmp_v: cp.map(CardinalPoints::v_mp),
            a_max_v: None,
            r_s_min_ohm: None,
            selected_rule: None,
            status: STATUS_OK.to_owned(),
        };
        match (&c.cardinal, &c.domain) {
            (Err(e), _) => row.status = e.to_string(),
            (Ok(_), Some(Ok(d))) => {
                row.a_max_v = Some(d.a_max);
                row.r_s_min_ohm = Some(d.r_s_min);
                row.selected_rule = Some(d.selected_rule);
            }
            (Ok(_), Some(Err(e))) => row.status = e.to_string(),
            (Ok(_), None) => unreachable!("valid corners always carry a domain result"),
        }
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRow {
    pub a_v: f64,
    pub i_ph_a: f64,
    pub i_o_a: f64,
    pub g_sh_s: f64,
    pub r_s_ohm: f64,
}

impl Tabular for ParamsRow {
    const HEADERS: &'static [&'static str] = &["a_v", "i_ph_a", "i_o_a", "g_sh_s", "r_s_ohm"];
}

impl From<&SdmParameters> for ParamsRow {
    fn from(p: &SdmParameters) -> Self {
        ParamsRow { a_v: p.a, i_ph_a: p.i_ph, i_o_a: p.i_o, g_sh_s: p.g_sh, r_s_ohm: p.r_s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub v_pv_v: f64,
    pub i_pv_a: f64,
}

impl Tabular for CurveRow {
    const HEADERS: &'static [&'static str] = &["v_pv_v", "i_pv_a"];
}

impl From<&IVPoint> for CurveRow {
    fn from(p: &IVPoint) -> Self {
        CurveRow { v_pv_v: p.v_pv, i_pv_a: p.i_pv }
    }
}

/// `R_s^sh(A)` and `R_s^mp(A)` at one grid point; missing values are
/// outside the respective branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub series: String,
    pub a_v: f64,
    pub r_s_sh_ohm: Option<f64>,
    pub r_s_mp_ohm: Option<f64>,
    pub status: String,
}

impl Tabular for TraceRow {
    const HEADERS: &'static [&'static str] = &["series", "a_v", "r_s_sh_ohm", "r_s_mp_ohm", "status"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub variable: String,
    pub count: usize,
    pub min_pct: f64,
    pub mean_pct: f64,
    pub max_pct: f64,
    pub sd_pct: f64,
}

impl Tabular for StatsRow {
    const HEADERS: &'static [&'static str] = &["variable", "count", "min_pct", "mean_pct", "max_pct", "sd_pct"];
}

impl StatsRow {
    pub fn new(variable: &str, count: usize, s: &VariableStats) -> Self {
        StatsRow {
            variable: variable.to_owned(),
            count,
            min_pct: s.min,
            mean_pct: s.mean,
            max_pct: s.max,
            sd_pct: s.sd,
        }
    }
}

/// Writes `rows` as CSV (header first, even when empty) or as one JSON array.
pub fn write_results<T: Tabular, W: Write>(rows: &[T], format: OutputFormat, mut sink: W) -> Result<(), IngestError> {
    let fail = |e: &dyn std::fmt::Display| IngestError::SinkWriteFailure(e.to_string());
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut sink);
            w.write_record(T::HEADERS).map_err(|e| fail(&e))?;
            for row in rows {
                w.serialize(row).map_err(|e| fail(&e))?;
            }
            w.flush().map_err(|e| fail(&e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut sink, rows).map_err(|e| fail(&e))?;
            sink.write_all(b"\n").map_err(|e| fail(&e))?;
        }
    }
    sink.flush().map_err(|e| fail(&e))
}
