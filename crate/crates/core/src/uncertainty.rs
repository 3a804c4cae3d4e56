//! Propagation of cardinal-point uncertainty into the feasible domain.
//!
//! The default propagation uses two realizations: every cardinal value at
//! its lower bound, and every value at its upper bound. Each realization
//! yields its own `(A_max, R_s,min)`; the pair spans the reported interval.
//! [`corner_domains`] evaluates all 16 sign combinations instead.

use crate::domain::{DomainError, DomainResult, Sdm1Solver};
use crate::ingest::CurveRecord;
use crate::model::{non_negative, CardinalPoints, SdmParameters, ValidationError};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    Low,
    Nominal,
    High,
}

impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Realization::Low => "low",
            Realization::Nominal => "nominal",
            Realization::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("{which} realization invalid: {source}")]
    Validation { which: Realization, source: ValidationError },
    #[error("{which} realization: {source}")]
    Domain { which: Realization, source: DomainError },
    #[error("no rows to summarize")]
    EmptyInput,
}

/// Nominal cardinal points with absolute half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertainCardinalPoints {
    nominal: CardinalPoints,
    du: [f64; 4],
}

impl UncertainCardinalPoints {
    /// Both the all-low and the all-high realization must be valid
    /// cardinal points.
    pub fn new(
        nominal: CardinalPoints,
        du_isc: f64,
        du_voc: f64,
        du_imp: f64,
        du_vmp: f64,
    ) -> Result<Self, UncertaintyError> {
        let wrap = |e| UncertaintyError::Validation { which: Realization::Nominal, source: e };
        let du = [
            non_negative("du_isc", du_isc).map_err(wrap)?,
            non_negative("du_voc", du_voc).map_err(wrap)?,
            non_negative("du_imp", du_imp).map_err(wrap)?,
            non_negative("du_vmp", du_vmp).map_err(wrap)?,
        ];
        let ucp = UncertainCardinalPoints { nominal, du };
        ucp.realize(Realization::Low)?;
        ucp.realize(Realization::High)?;
        Ok(ucp)
    }

    pub fn nominal(&self) -> CardinalPoints {
        self.nominal
    }

    pub fn du_isc(&self) -> f64 {
        self.du[0]
    }

    pub fn du_voc(&self) -> f64 {
        self.du[1]
    }

    pub fn du_imp(&self) -> f64 {
        self.du[2]
    }

    pub fn du_vmp(&self) -> f64 {
        self.du[3]
    }

    /// Same nominal point with every half-width multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self, UncertaintyError> {
        let [a, b, c, d] = self.du.map(|x| x * t);
        Self::new(self.nominal, a, b, c, d)
    }

    pub fn realize(&self, which: Realization) -> Result<CardinalPoints, UncertaintyError> {
        let sign = match which {
            Realization::Low => -1.0,
            Realization::Nominal => return Ok(self.nominal),
            Realization::High => 1.0,
        };
        self.shifted([sign; 4]).map_err(|source| UncertaintyError::Validation { which, source })
    }

    /// Cardinal points with each value moved by `signs[k]` half-widths
    /// (order: I_sc, V_oc, I_mp, V_mp).
    pub fn shifted(&self, signs: [f64; 4]) -> Result<CardinalPoints, ValidationError> {
        let n = &self.nominal;
        CardinalPoints::new(
            n.i_sc() + signs[0] * self.du[0],
            n.v_oc() + signs[1] * self.du[1],
            n.i_mp() + signs[2] * self.du[2],
            n.v_mp() + signs[3] * self.du[3],
        )
    }
}

/// Domain corners of the low and high realizations and the intervals they span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainInterval {
    pub low: DomainResult,
    pub high: DomainResult,
    pub a_max_interval: [f64; 2],
    pub r_s_min_interval: [f64; 2],
}

impl DomainInterval {
    pub fn from_endpoints(low: DomainResult, high: DomainResult) -> Self {
        let span = |x: f64, y: f64| [x.min(y), x.max(y)];
        DomainInterval {
            low,
            high,
            a_max_interval: span(low.a_max, high.a_max),
            r_s_min_interval: span(low.r_s_min, high.r_s_min),
        }
    }

    pub fn a_max_width(&self) -> f64 {
        self.a_max_interval[1] - self.a_max_interval[0]
    }
}

pub fn domain_interval(ucp: &UncertainCardinalPoints) -> Result<DomainInterval, UncertaintyError> {
    domain_interval_with(ucp, &Sdm1Solver::default())
}

pub fn domain_interval_with(
    ucp: &UncertainCardinalPoints,
    solver: &Sdm1Solver,
) -> Result<DomainInterval, UncertaintyError> {
    domain_interval_between(&ucp.realize(Realization::Low)?, &ucp.realize(Realization::High)?, solver)
}

/// Interval from explicitly given low and high cardinal points.
pub fn domain_interval_between(
    low: &CardinalPoints,
    high: &CardinalPoints,
    solver: &Sdm1Solver,
) -> Result<DomainInterval, UncertaintyError> {
    let run = |cp: &CardinalPoints, which| {
        solver.compute_domain(cp).map_err(|source| UncertaintyError::Domain { which, source })
    };
    Ok(DomainInterval::from_endpoints(run(low, Realization::Low)?, run(high, Realization::High)?))
}

/// One of the 16 sign combinations of the half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Corner {
    /// Per-value direction, order I_sc, V_oc, I_mp, V_mp.
    pub signs: [i8; 4],
    pub cardinal: Result<CardinalPoints, ValidationError>,
    pub domain: Option<Result<DomainResult, DomainError>>,
}

impl Corner {
    /// Compact label such as `-+-+`.
    pub fn label(&self) -> String {
        self.signs.iter().map(|&s| if s < 0 { '-' } else { '+' }).collect()
    }
}

pub fn corner_domains(ucp: &UncertainCardinalPoints, solver: &Sdm1Solver) -> Vec<Corner> {
    (0..16u8)
        .map(|mask| {
            let signs: [i8; 4] = std::array::from_fn(|k| if mask & (1 << (3 - k)) != 0 { 1 } else { -1 });
            let cardinal = ucp.shifted(signs.map(f64::from));
            let domain = cardinal.as_ref().ok().map(|cp| solver.compute_domain(cp));
            Corner { signs, cardinal, domain }
        })
        .collect()
}

/// Reduced solution at one `A`, or the reason it does not exist.
#[derive(Debug, Clone, PartialEq)]
pub enum BandEntry {
    Feasible(SdmParameters),
    Infeasible(String),
}

impl BandEntry {
    pub fn params(&self) -> Option<&SdmParameters> {
        match self {
            BandEntry::Feasible(p) => Some(p),
            BandEntry::Infeasible(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub a: f64,
    pub low: BandEntry,
    pub high: BandEntry,
}

/// Reduced solutions of the low and high realizations along `a_grid`.
pub fn parameter_band(
    ucp: &UncertainCardinalPoints,
    a_grid: &[f64],
    solver: &Sdm1Solver,
) -> Result<Vec<BandRow>, UncertaintyError> {
    let low = ucp.realize(Realization::Low)?;
    let high = ucp.realize(Realization::High)?;
    let entry = |cp: &CardinalPoints, a: f64| match solver.reduced_solution(cp, a) {
        Ok(p) => BandEntry::Feasible(p),
        Err(e) => BandEntry::Infeasible(e.to_string()),
    };
    Ok(a_grid.iter().map(|&a| BandRow { a, low: entry(&low, a), high: entry(&high, a) }).collect())
}

/// Min, mean, max and population standard deviation of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

impl VariableStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(VariableStats { min, mean: mean.clamp(min, max), max, sd: var.sqrt() })
    }

    /// Rounded to `decimals` places for display.
    pub fn rounded(&self, decimals: i32) -> Self {
        let f = 10f64.powi(decimals);
        let r = |x: f64| (x * f).round() / f;
        VariableStats { min: r(self.min), mean: r(self.mean), max: r(self.max), sd: r(self.sd) }
    }
}

/// Summary of the percent uncertainties of a set of curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyStats {
    pub count: usize,
    pub isc: VariableStats,
    pub voc: VariableStats,
    pub imp: VariableStats,
    pub vmp: VariableStats,
}

impl UncertaintyStats {
    pub fn rounded(&self, decimals: i32) -> Self {
        UncertaintyStats {
            count: self.count,
            isc: self.isc.rounded(decimals),
            voc: self.voc.rounded(decimals),
            imp: self.imp.rounded(decimals),
            vmp: self.vmp.rounded(decimals),
        }
    }

    pub fn variables(&self) -> [(&'static str, VariableStats); 4] {
        [("isc", self.isc), ("voc", self.voc), ("imp", self.imp), ("vmp", self.vmp)]
    }
}

pub fn summarize_uncertainties(rows: &[CurveRecord]) -> Result<UncertaintyStats, UncertaintyError> {
    let column = |f: fn(&CurveRecord) -> f64| -> Result<VariableStats, UncertaintyError> {
        let values: Vec<f64> = rows.iter().map(f).collect();
        VariableStats::from_values(&values).ok_or(UncertaintyError::EmptyInput)
    };
    Ok(UncertaintyStats {
        count: rows.len(),
        isc: column(|r| r.u_isc_pct)?,
        voc: column(|r| r.u_voc_pct)?,
        imp: column(|r| r.u_imp_pct)?,
        vmp: column(|r| r.u_vmp_pct)?,
    })
}
