//! Feasible domain of the one-parameter single-diode model.
//!
//! Forcing the model through the three cardinal points leaves a linear
//! system in `(I_ph, I_o, G_sh)` once `A` and `R_s` are fixed. Two boundary
//! functions describe where that solution stops being physical:
//!
//! - `f_sh(A, R_s) = 0` is where the reconstructed shunt conductance
//!   changes sign; its root in `R_s` is `R_s^sh(A)`.
//! - `f_mp(A, R_s) = 0` is the maximum-power stationarity condition
//!   `dP/dV = 0` at `V_mp`; its root in `R_s` is `R_s^mp(A)`, the series
//!   resistance of the one-parameter family.
//!
//! The largest admissible `A` is the smaller of the `f_mp(A, 0) = 0` root
//! and the intersection of the two curves.
//!
//! Both functions are sums of three exponentials. They are evaluated with
//! the largest exponent factored out ([`exp_rescaled`]), so values are
//! reported up to a positive factor and never overflow; roots are unchanged.

use crate::model::{CardinalPoints, ModelError, SdmParameters, ValidationError, MAX_EXPONENT};
use crate::numerics::{
    exp_rescaled, find_root_bracketed, solve_linear_3x3, Bracket, LinearError, Rescaled, RootConfig, RootError,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Reconstructed `|G_sh|` below `G_SH_ROUNDOFF · I_sc / V_oc` is treated as zero.
pub const G_SH_ROUNDOFF: f64 = 1e-10;

/// Relative size below which a boundary function at `R_s = 0` counts as zero.
const ZERO_RS_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("no root of {function} in R_s ∈ [0, {r_s_ub}] at A = {a}")]
    NoRootInRange { function: BoundaryFunction, a: f64, r_s_ub: f64 },
    #[error("no sign change of f_mp(A, 0) on A ∈ [{lo}, {hi}]")]
    NoZeroRsRoot { lo: f64, hi: f64 },
    #[error("feasible domain not found on A ∈ [{lo}, {hi}]")]
    DomainNotFound { lo: f64, hi: f64 },
    #[error("singular cardinal-point system at A = {a}, R_s = {r_s}")]
    SingularMatrix { a: f64, r_s: f64 },
    #[error("non-positive parameters at A = {a}, R_s = {r_s}: I_ph = {i_ph}, I_o = {i_o}, G_sh = {g_sh}")]
    NonPositiveParameters { a: f64, r_s: f64, i_ph: f64, i_o: f64, g_sh: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl DomainError {
    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_convergence_failure(&self) -> bool {
        !matches!(self, DomainError::Validation(_) | DomainError::Model(ModelError::Validation(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryFunction {
    Shunt,
    MaxPower,
}

impl fmt::Display for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryFunction::Shunt => "f_sh",
            BoundaryFunction::MaxPower => "f_mp",
        })
    }
}

/// Which rule produced `A_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectedRule {
    /// Intersection of `R_s^sh(A)` and `R_s^mp(A)`.
    Intersection,
    /// Root of `f_mp(A, 0)`.
    MpAtZeroRs,
}

impl fmt::Display for SelectedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectedRule::Intersection => "intersection",
            SelectedRule::MpAtZeroRs => "mp_at_zero_rs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub a: f64,
    pub r_s: f64,
}

/// Corner `(A_max, R_s,min)` of the feasible domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainResult {
    pub a_max: f64,
    pub r_s_min: f64,
    pub selected_rule: SelectedRule,
    pub converged: bool,
    /// Rescaled `|f_sh|` at the returned point.
    pub f_sh_residual: f64,
    /// Rescaled `|f_mp|` at the returned point.
    pub f_mp_residual: f64,
}

impl DomainResult {
    pub fn point(&self) -> BoundaryPoint {
        BoundaryPoint { a: self.a_max, r_s: self.r_s_min }
    }
}

/// Root of a boundary function in `R_s` at fixed `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRoot {
    pub r_s: f64,
    /// Sign changes seen while scanning `[0, R_s upper bound]`; more than one
    /// means the smallest root was taken.
    pub sign_changes: usize,
}

/// Exponents and weights of the three terms, in the order open circuit,
/// maximum power, short circuit.
fn terms(function: BoundaryFunction, cp: &CardinalPoints, a: f64, r_s: f64) -> ([f64; 3], [f64; 3]) {
    let (i_sc, v_oc, i_mp, v_mp) = (cp.i_sc(), cp.v_oc(), cp.i_mp(), cp.v_mp());
    let exponents = [v_oc / a, (v_mp + r_s * i_mp) / a, r_s * i_sc / a];
    let weights = match function {
        BoundaryFunction::Shunt => [i_sc - i_mp, -i_sc, i_mp],
        BoundaryFunction::MaxPower => [
            -a * v_mp * (2.0 * i_mp - i_sc),
            (v_oc * i_mp + v_mp * i_sc - v_oc * i_sc) * (v_mp - r_s * i_mp) + a * (v_oc * i_mp - v_mp * i_sc),
            a * i_mp * (2.0 * v_mp - v_oc),
        ],
    };
    (exponents, weights)
}

/// `f_sh` evaluated with its largest exponential factored out.
///
/// `(I_sc − I_mp)·e^{V_oc/A} − I_sc·e^{(V_mp + R_s·I_mp)/A} + I_mp·e^{R_s·I_sc/A}`
pub fn f_sh(cp: &CardinalPoints, a: f64, r_s: f64) -> Rescaled {
    let (x, w) = terms(BoundaryFunction::Shunt, cp, a, r_s);
    exp_rescaled(&x, &w)
}

/// `f_mp` evaluated with its largest exponential factored out.
///
/// `−A·V_mp·(2I_mp − I_sc)·e^{V_oc/A}
///  + [(V_oc·I_mp + V_mp·I_sc − V_oc·I_sc)(V_mp − R_s·I_mp) + A(V_oc·I_mp − V_mp·I_sc)]·e^{(V_mp + R_s·I_mp)/A}
///  + A·I_mp·(2V_mp − V_oc)·e^{R_s·I_sc/A}`
pub fn f_mp(cp: &CardinalPoints, a: f64, r_s: f64) -> Rescaled {
    let (x, w) = terms(BoundaryFunction::MaxPower, cp, a, r_s);
    exp_rescaled(&x, &w)
}

fn eval(function: BoundaryFunction, cp: &CardinalPoints, a: f64, r_s: f64) -> f64 {
    let (x, w) = terms(function, cp, a, r_s);
    exp_rescaled(&x, &w).value
}

/// Sum of the absolute rescaled terms; the natural size of rounding error
/// in [`eval`].
fn magnitude(function: BoundaryFunction, cp: &CardinalPoints, a: f64, r_s: f64) -> f64 {
    let (x, w) = terms(function, cp, a, r_s);
    exp_rescaled(&x, &w.map(f64::abs)).value
}

/// Upper end of the `R_s` search: beyond `V_mp / I_mp` the voltage drop at
/// the maximum-power point exceeds `V_mp`.
pub fn r_s_upper_bound(cp: &CardinalPoints) -> f64 {
    cp.v_mp() / cp.i_mp()
}

/// First sign change of `f` on a uniform grid over `[lo, hi]`, plus the
/// total number of sign changes. Returns the exact grid point when `f`
/// vanishes there.
fn scan<F: FnMut(f64) -> Option<f64>>(mut f: F, lo: f64, hi: f64, cells: usize) -> (Option<Scanned>, usize) {
    let mut first = None;
    let mut changes = 0;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=cells {
        let x = if k == cells { hi } else { lo + (hi - lo) * k as f64 / cells as f64 };
        let Some(fx) = f(x).filter(|v| v.is_finite()) else {
            prev = None;
            continue;
        };
        if fx == 0.0 {
            changes += 1;
            first.get_or_insert(Scanned::Exact(x));
            prev = None;
            continue;
        }
        if let Some((px, pf)) = prev {
            if pf.signum() != fx.signum() {
                changes += 1;
                first.get_or_insert(Scanned::Bracket(px, pf, x, fx));
            }
        }
        prev = Some((x, fx));
    }
    (first, changes)
}

#[derive(Debug, Clone, Copy)]
enum Scanned {
    Exact(f64),
    Bracket(f64, f64, f64, f64),
}

/// Root solves over the boundary functions with configurable tolerances
/// and scan resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sdm1Solver {
    pub root: RootConfig,
    /// Grid cells used to locate the first sign change in `R_s`.
    pub r_s_cells: usize,
    /// Grid cells used to locate sign changes in `A`.
    pub a_cells: usize,
    /// Default `A` search interval as fractions of `V_oc`.
    pub a_window: (f64, f64),
    /// Geometric widenings (×1.5 per side) tried when the window has no sign change.
    pub max_expansions: usize,
}

impl Default for Sdm1Solver {
    fn default() -> Self {
        Sdm1Solver {
            root: RootConfig::default(),
            r_s_cells: 64,
            a_cells: 200,
            a_window: (0.02, 0.2),
            max_expansions: 5,
        }
    }
}

impl Sdm1Solver {
    pub fn with_root_config(root: RootConfig) -> Self {
        Sdm1Solver { root, ..Sdm1Solver::default() }
    }

    /// Smallest root in `R_s ∈ [0, V_mp/I_mp]` of the given boundary function.
    pub fn branch_root(
        &self,
        function: BoundaryFunction,
        cp: &CardinalPoints,
        a: f64,
    ) -> Result<BranchRoot, DomainError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(ValidationError::NotPositive { field: "a", value: a }.into());
        }
        let ub = r_s_upper_bound(cp);
        let (first, sign_changes) = scan(|r| Some(eval(function, cp, a, r)), 0.0, ub, self.r_s_cells);
        let r_s = match first {
            // a root sitting exactly on R_s = 0 may show up as a tiny value of either sign
            None if eval(function, cp, a, 0.0).abs() <= ZERO_RS_REL_TOL * magnitude(function, cp, a, 0.0) => 0.0,
            None => return Err(DomainError::NoRootInRange { function, a, r_s_ub: ub }),
            Some(Scanned::Exact(r)) => r,
            Some(Scanned::Bracket(lo, f_lo, hi, f_hi)) => {
                let bracket = Bracket::from_values(lo, hi, f_lo, f_hi)?;
                find_root_bracketed(|r| eval(function, cp, a, r), bracket, &self.root)?
            }
        };
        Ok(BranchRoot { r_s, sign_changes })
    }

    pub fn r_s_sh_of_a(&self, cp: &CardinalPoints, a: f64) -> Result<f64, DomainError> {
        Ok(self.branch_root(BoundaryFunction::Shunt, cp, a)?.r_s)
    }

    pub fn r_s_mp_of_a(&self, cp: &CardinalPoints, a: f64) -> Result<f64, DomainError> {
        Ok(self.branch_root(BoundaryFunction::MaxPower, cp, a)?.r_s)
    }

    fn a_windows(&self, cp: &CardinalPoints) -> impl Iterator<Item = (f64, f64)> {
        let (lo, hi) = (self.a_window.0 * cp.v_oc(), self.a_window.1 * cp.v_oc());
        (0..=self.max_expansions).map(move |k| {
            let g = 1.5f64.powi(k as i32);
            (lo / g, hi * g)
        })
    }

    /// Root of `f_mp(A, 0)` in `A`, the smallest if there are several.
    pub fn a_at_zero_rs(&self, cp: &CardinalPoints) -> Result<f64, DomainError> {
        let f = |a: f64| f_mp(cp, a, 0.0).value;
        let mut last = (0.0, 0.0);
        for (lo, hi) in self.a_windows(cp) {
            last = (lo, hi);
            match scan(|a| Some(f(a)), lo, hi, self.a_cells).0 {
                Some(Scanned::Exact(a)) => return Ok(a),
                Some(Scanned::Bracket(l, fl, h, fh)) => {
                    let bracket = Bracket::from_values(l, h, fl, fh)?;
                    return Ok(find_root_bracketed(f, bracket, &self.root)?);
                }
                None => {}
            }
        }
        Err(DomainError::NoZeroRsRoot { lo: last.0, hi: last.1 })
    }

    /// `R_s^mp(A) − R_s^sh(A)`, or `None` outside either branch.
    fn branch_gap(&self, cp: &CardinalPoints, a: f64) -> Option<f64> {
        let mp = self.r_s_mp_of_a(cp, a).ok()?;
        let sh = self.r_s_sh_of_a(cp, a).ok()?;
        Some(mp - sh)
    }

    /// Intersection of `R_s^sh(A)` and `R_s^mp(A)` on `[lo, hi]`, if any.
    /// Returns the point and whether the outer solve converged.
    pub fn intersection_in(
        &self,
        cp: &CardinalPoints,
        lo: f64,
        hi: f64,
    ) -> Result<Option<(BoundaryPoint, bool)>, DomainError> {
        let (first, _) = scan(|a| self.branch_gap(cp, a), lo, hi, self.a_cells);
        let (a, converged) = match first {
            None => return Ok(None),
            Some(Scanned::Exact(a)) => (a, true),
            Some(Scanned::Bracket(l, fl, h, fh)) => {
                let bracket = Bracket::from_values(l, h, fl, fh)?;
                match find_root_bracketed(|a| self.branch_gap(cp, a).unwrap_or(f64::NAN), bracket, &self.root) {
                    Ok(a) => (a, true),
                    Err(RootError::MaxIterExceeded { best, .. }) => (best, false),
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let r_s = self.r_s_mp_of_a(cp, a)?;
        Ok(Some((BoundaryPoint { a, r_s }, converged)))
    }

    /// Computes `(A_max, R_s,min)` and the rule that selected it.
    pub fn compute_domain(&self, cp: &CardinalPoints) -> Result<DomainResult, DomainError> {
        let a_zero = self.a_at_zero_rs(cp).ok();
        let mut last = (0.0, 0.0);
        for (lo, hi) in self.a_windows(cp) {
            last = (lo, hi);
            let upper = match a_zero {
                Some(a0) if a0 <= lo => break,
                Some(a0) => a0.min(hi),
                None => hi,
            };
            if let Some((point, converged)) = self.intersection_in(cp, lo, upper)? {
                if a_zero.is_none_or(|a0| point.a <= a0) {
                    return Ok(self.result(cp, point, SelectedRule::Intersection, converged));
                }
            }
            if a_zero.is_some_and(|a0| a0 <= hi) {
                break;
            }
        }
        match a_zero {
            Some(a0) => Ok(self.result(cp, BoundaryPoint { a: a0, r_s: 0.0 }, SelectedRule::MpAtZeroRs, true)),
            None => Err(DomainError::DomainNotFound { lo: last.0, hi: last.1 }),
        }
    }

    fn result(&self, cp: &CardinalPoints, point: BoundaryPoint, rule: SelectedRule, converged: bool) -> DomainResult {
        DomainResult {
            a_max: point.a,
            r_s_min: point.r_s,
            selected_rule: rule,
            converged,
            f_sh_residual: f_sh(cp, point.a, point.r_s).value.abs(),
            f_mp_residual: f_mp(cp, point.a, point.r_s).value.abs(),
        }
    }

    /// The one-parameter family: `R_s = R_s^mp(A)` and the linear solve for the rest.
    pub fn reduced_solution(&self, cp: &CardinalPoints, a: f64) -> Result<SdmParameters, DomainError> {
        let r_s = self.r_s_mp_of_a(cp, a)?;
        reconstruct_parameters(cp, a, r_s)
    }
}

/// Convenience wrapper over [`Sdm1Solver::r_s_sh_of_a`] with default settings.
pub fn r_s_sh_of_a(cp: &CardinalPoints, a: f64) -> Result<f64, DomainError> {
    Sdm1Solver::default().r_s_sh_of_a(cp, a)
}

pub fn r_s_mp_of_a(cp: &CardinalPoints, a: f64) -> Result<f64, DomainError> {
    Sdm1Solver::default().r_s_mp_of_a(cp, a)
}

pub fn a_at_zero_rs(cp: &CardinalPoints) -> Result<f64, DomainError> {
    Sdm1Solver::default().a_at_zero_rs(cp)
}

pub fn compute_domain(cp: &CardinalPoints) -> Result<DomainResult, DomainError> {
    Sdm1Solver::default().compute_domain(cp)
}

pub fn reduced_solution(cp: &CardinalPoints, a: f64) -> Result<SdmParameters, DomainError> {
    Sdm1Solver::default().reduced_solution(cp, a)
}

/// Raw solution `(I_ph, I_o, G_sh)` of the cardinal-point system, without
/// any sign checks.
pub fn cardinal_system_solution(cp: &CardinalPoints, a: f64, r_s: f64) -> Result<[f64; 3], DomainError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(ValidationError::NotPositive { field: "a", value: a }.into());
    }
    if !(r_s.is_finite() && r_s >= 0.0) {
        return Err(ValidationError::Negative { field: "r_s", value: r_s }.into());
    }
    let (i_sc, v_oc, i_mp, v_mp) = (cp.i_sc(), cp.v_oc(), cp.i_mp(), cp.v_mp());
    let v_j = [r_s * i_sc, v_mp + r_s * i_mp, v_oc];
    let exps = v_j.map(|v| v / a);
    let scale = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scale > MAX_EXPONENT {
        return Err(ModelError::Overflow { exponent: scale }.into());
    }
    // Unknown I_o is carried as I_o·e^scale so the diode column stays O(1).
    let rows: [[f64; 3]; 3] = std::array::from_fn(|k| {
        let diode = (exps[k] - scale).exp() - (-scale).exp();
        [1.0, -diode, -v_j[k]]
    });
    let x = solve_linear_3x3(&rows, &[i_sc, i_mp, 0.0]).map_err(|e| match e {
        LinearError::SingularMatrix { .. } => DomainError::SingularMatrix { a, r_s },
    })?;
    Ok([x[0], x[1] * (-scale).exp(), x[2]])
}

/// Solves for `(I_ph, I_o, G_sh)` so that the model passes through the
/// three cardinal points at the given `(A, R_s)`.
pub fn reconstruct_parameters(cp: &CardinalPoints, a: f64, r_s: f64) -> Result<SdmParameters, DomainError> {
    let [i_ph, i_o, mut g_sh] = cardinal_system_solution(cp, a, r_s)?;
    if g_sh.abs() <= G_SH_ROUNDOFF * cp.i_sc() / cp.v_oc() {
        g_sh = g_sh.max(0.0);
    }
    let params = SdmParameters { i_ph, i_o, a, g_sh, r_s };
    if params.validate().is_err() {
        return Err(DomainError::NonPositiveParameters { a, r_s, i_ph, i_o, g_sh });
    }
    Ok(params)
}
