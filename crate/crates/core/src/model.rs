//! Single-diode model: value types, the implicit equation and curve synthesis.
//!
//! The model relates terminal voltage `V` and current `I` through
//!
//! ```text
//! I_ph = I_o·(exp(V_j/A) − 1) + G_sh·V_j + I,    V_j = V + R_s·I
//! ```
//!
//! where `A` (volts) lumps together ideality factor, cell count and
//! temperature. Everything here works with `A` directly;
//! [`equivalent_factor`] converts from the ideality factor when the module
//! metadata is known.

use crate::numerics::{find_root_bracketed, Bracket, RootConfig, RootError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Elementary charge, coulomb (exact SI value).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, joule per kelvin (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Largest exponent accepted by [`diode_current`] and friends.
pub const MAX_EXPONENT: f64 = 700.0;

/// Physical constants used by [`equivalent_factor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub q: f64,
    pub k_b: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants { q: ELEMENTARY_CHARGE, k_b: BOLTZMANN };
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("{field} must be finite and > 0, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite and >= 0, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("exponent {exponent} exceeds {MAX_EXPONENT}; input is nonphysical")]
    Overflow { exponent: f64 },
    #[error("no current solution at V = {v_pv} V within the search bracket")]
    NoSolutionInBracket { v_pv: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

pub(crate) fn positive(field: &'static str, value: f64) -> Result<f64, ValidationError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ValidationError::NotPositive { field, value })
    }
}

pub(crate) fn non_negative(field: &'static str, value: f64) -> Result<f64, ValidationError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ValidationError::Negative { field, value })
    }
}

/// Short-circuit, open-circuit and maximum-power points of one I–V curve.
///
/// Construction enforces `0 < I_mp < I_sc`, `0 < V_mp < V_oc`,
/// `2·I_mp > I_sc` and `2·V_mp > V_oc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CardinalPoints {
    i_sc: f64,
    v_oc: f64,
    i_mp: f64,
    v_mp: f64,
}

impl CardinalPoints {
    pub fn new(i_sc: f64, v_oc: f64, i_mp: f64, v_mp: f64) -> Result<Self, ValidationError> {
        positive("i_sc", i_sc)?;
        positive("v_oc", v_oc)?;
        positive("i_mp", i_mp)?;
        positive("v_mp", v_mp)?;
        if i_mp >= i_sc {
            return Err(ValidationError::Invariant(format!("i_mp ({i_mp}) must be < i_sc ({i_sc})")));
        }
        if v_mp >= v_oc {
            return Err(ValidationError::Invariant(format!("v_mp ({v_mp}) must be < v_oc ({v_oc})")));
        }
        if 2.0 * i_mp - i_sc <= 0.0 {
            return Err(ValidationError::Invariant(format!(
                "2·i_mp − i_sc must be > 0 (i_mp = {i_mp}, i_sc = {i_sc})"
            )));
        }
        if 2.0 * v_mp - v_oc <= 0.0 {
            return Err(ValidationError::Invariant(format!(
                "2·v_mp − v_oc must be > 0 (v_mp = {v_mp}, v_oc = {v_oc})"
            )));
        }
        Ok(CardinalPoints { i_sc, v_oc, i_mp, v_mp })
    }

    pub fn i_sc(&self) -> f64 {
        self.i_sc
    }

    pub fn v_oc(&self) -> f64 {
        self.v_oc
    }

    pub fn i_mp(&self) -> f64 {
        self.i_mp
    }

    pub fn v_mp(&self) -> f64 {
        self.v_mp
    }

    /// `(V_mp·I_mp) / (V_oc·I_sc)`
    pub fn fill_factor(&self) -> f64 {
        (self.v_mp * self.i_mp) / (self.v_oc * self.i_sc)
    }

    /// The three points as `(V, I)` pairs: short circuit, maximum power, open circuit.
    pub fn points(&self) -> [IVPoint; 3] {
        [
            IVPoint { v_pv: 0.0, i_pv: self.i_sc },
            IVPoint { v_pv: self.v_mp, i_pv: self.i_mp },
            IVPoint { v_pv: self.v_oc, i_pv: 0.0 },
        ]
    }
}

impl<'de> Deserialize<'de> for CardinalPoints {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            i_sc: f64,
            v_oc: f64,
            i_mp: f64,
            v_mp: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        CardinalPoints::new(raw.i_sc, raw.v_oc, raw.i_mp, raw.v_mp).map_err(serde::de::Error::custom)
    }
}

/// The five single-diode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdmParameters {
    /// Photo-generated current, A.
    pub i_ph: f64,
    /// Dark saturation current, A.
    pub i_o: f64,
    /// Equivalent diode factor, V.
    pub a: f64,
    /// Shunt conductance, S.
    pub g_sh: f64,
    /// Series resistance, Ω.
    pub r_s: f64,
}

impl SdmParameters {
    pub fn new(i_ph: f64, i_o: f64, a: f64, g_sh: f64, r_s: f64) -> Result<Self, ValidationError> {
        let p = SdmParameters { i_ph, i_o, a, g_sh, r_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        positive("i_ph", self.i_ph)?;
        positive("i_o", self.i_o)?;
        positive("a", self.a)?;
        non_negative("g_sh", self.g_sh)?;
        non_negative("r_s", self.r_s)?;
        Ok(())
    }

    /// True when all five parameters are strictly positive.
    pub fn strictly_positive(&self) -> bool {
        [self.i_ph, self.i_o, self.a, self.g_sh, self.r_s].iter().all(|&v| v > 0.0)
    }
}

/// Module description needed to turn an ideality factor into `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleMetadata {
    pub n_s: u32,
    /// Module temperature, K.
    pub t_pv: f64,
    pub label: Option<String>,
}

impl ModuleMetadata {
    pub fn new(n_s: u32, t_pv: f64, label: Option<String>) -> Result<Self, ValidationError> {
        if n_s == 0 {
            return Err(ValidationError::Invariant("n_s must be >= 1".to_owned()));
        }
        positive("t_pv", t_pv)?;
        Ok(ModuleMetadata { n_s, t_pv, label })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IVPoint {
    pub v_pv: f64,
    pub i_pv: f64,
}

/// Shockley diode current `I_o·(exp(V_j/A) − 1)`.
pub fn diode_current(i_o: f64, v_j: f64, a: f64) -> Result<f64, ModelError> {
    let x = v_j / a;
    if x > MAX_EXPONENT {
        return Err(ModelError::Overflow { exponent: x });
    }
    Ok(i_o * x.exp_m1())
}

/// `A = n·N_s·k_B·T_pv / q`, in volts.
pub fn equivalent_factor(n: f64, meta: &ModuleMetadata) -> Result<f64, ValidationError> {
    positive("n", n)?;
    let c = PhysicalConstants::SI;
    Ok(n * f64::from(meta.n_s) * c.k_b * meta.t_pv / c.q)
}

/// Residual of the implicit model equation at `point`; zero on the curve.
///
/// Strictly increasing in `point.i_pv` whenever `r_s, g_sh >= 0`.
pub fn sdm_residual(p: &SdmParameters, point: IVPoint) -> Result<f64, ModelError> {
    let v_j = point.v_pv + p.r_s * point.i_pv;
    Ok(diode_current(p.i_o, v_j, p.a)? + p.g_sh * v_j + point.i_pv - p.i_ph)
}

/// Current on the modeled curve at terminal voltage `v_pv`.
pub fn solve_current_at_voltage(p: &SdmParameters, v_pv: f64) -> Result<f64, ModelError> {
    solve_current_with(p, v_pv, &RootConfig::default())
}

pub fn solve_current_with(p: &SdmParameters, v_pv: f64, cfg: &RootConfig) -> Result<f64, ModelError> {
    p.validate()?;
    let mut lo = -0.1 * p.i_ph;
    let mut hi = 1.1 * p.i_ph;
    // keep the diode exponent representable at the top of the bracket
    if p.r_s > 0.0 {
        hi = hi.min((MAX_EXPONENT * p.a - v_pv) / p.r_s);
        lo = lo.min(hi - p.i_ph);
    }
    let mut residual = |i: f64| sdm_residual(p, IVPoint { v_pv, i_pv: i }).unwrap_or(f64::INFINITY);
    let bracket = match Bracket::new(&mut residual, lo, hi) {
        Ok(b) => b,
        Err(RootError::NoSignChange { .. }) | Err(RootError::InvalidBracket { .. }) => {
            return Err(ModelError::NoSolutionInBracket { v_pv })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(find_root_bracketed(residual, bracket, cfg)?)
}

/// Voltage where the modeled current crosses zero.
///
/// At `I = 0` the residual reduces to `I_o·(exp(V/A) − 1) + G_sh·V − I_ph`,
/// increasing in `V`, with its root below `A·ln(1 + I_ph/I_o)`.
pub fn open_circuit_voltage(p: &SdmParameters) -> Result<f64, ModelError> {
    p.validate()?;
    let upper = p.a * (p.i_ph / p.i_o).ln_1p();
    let mut residual = |v: f64| sdm_residual(p, IVPoint { v_pv: v, i_pv: 0.0 }).unwrap_or(f64::INFINITY);
    let bracket = Bracket::new(&mut residual, 0.0, upper)?;
    Ok(find_root_bracketed(residual, bracket, &RootConfig::default())?)
}

/// `n_points` curve points at uniformly spaced voltages from 0 to the
/// model's own open-circuit voltage.
pub fn sample_curve(p: &SdmParameters, n_points: usize) -> Result<Vec<IVPoint>, ModelError> {
    if n_points < 2 {
        return Err(ValidationError::Invariant("n_points must be >= 2".to_owned()).into());
    }
    let v_oc = open_circuit_voltage(p)?;
    let last = (n_points - 1) as f64;
    (0..n_points)
        .map(|k| {
            let v_pv = if k == n_points - 1 { v_oc } else { v_oc * k as f64 / last };
            Ok(IVPoint { v_pv, i_pv: solve_current_at_voltage(p, v_pv)? })
        })
        .collect()
}

/// Central-difference estimate of `d(V·I)/dV` at `v_pv` with step `h`.
pub fn power_slope(p: &SdmParameters, v_pv: f64, h: f64) -> Result<f64, ModelError> {
    let power = |v: f64| solve_current_at_voltage(p, v).map(|i| v * i);
    Ok((power(v_pv + h)? - power(v_pv - h)?) / (2.0 * h))
}
