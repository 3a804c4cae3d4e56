//! Numerical primitives shared by the model code.
//!
//! Three pieces live here:
//!
//! - [`find_root_bracketed`], a Brent-style bracketed scalar root finder
//!   (inverse quadratic interpolation and secant steps, with bisection
//!   whenever an interpolated step would leave the bracket or converge too
//!   slowly),
//! - [`solve_linear_3x3`], Gaussian elimination with partial pivoting,
//! - [`exp_rescaled`], a weighted sum of exponentials with the largest
//!   exponent factored out so that nothing overflows.
//!
//! Everything is pure and allocation free apart from the caller's closures.

use thiserror::Error;

/// Pivots smaller than this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-300;

/// Errors reported by the root finder.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations, best estimate {best}")]
    MaxIterExceeded { best: f64, iterations: usize },
    #[error("function returned a non-finite value at x = {x}")]
    NonFiniteEval { x: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinearError {
    #[error("singular matrix (pivot {pivot:e} in column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
}

/// Tolerances and iteration cap for [`find_root_bracketed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    pub abs_tol_x: f64,
    pub rel_tol_x: f64,
    pub abs_tol_f: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig { abs_tol_x: 1e-12, rel_tol_x: 1e-12, abs_tol_f: 1e-12, max_iter: 200 }
    }
}

impl RootConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.abs_tol_x) || !positive(self.rel_tol_x) || !positive(self.abs_tol_f) {
            return Err("root tolerances must be finite and > 0".to_owned());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be >= 1".to_owned());
        }
        Ok(())
    }
}

/// An interval `[lo, hi]` together with the function values at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks for a sign change.
    pub fn new<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Self, RootError> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Self::from_values(lo, hi, f_lo, f_hi)
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self, RootError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(RootError::InvalidBracket { lo, hi });
        }
        if !f_lo.is_finite() {
            return Err(RootError::NonFiniteEval { x: lo });
        }
        if !f_hi.is_finite() {
            return Err(RootError::NonFiniteEval { x: hi });
        }
        if f_lo * f_hi > 0.0 {
            return Err(RootError::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Bracket { lo, hi, f_lo, f_hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn f_lo(&self) -> f64 {
        self.f_lo
    }

    pub fn f_hi(&self) -> f64 {
        self.f_hi
    }
}

/// Finds a root of `f` inside `bracket`.
///
/// `f` is only ever evaluated at points of `[lo, hi]`. Terminates when
/// `|f(x)| <= abs_tol_f` or when the bracket has shrunk below
/// `abs_tol_x + rel_tol_x * |x|`. On hitting `max_iter` the best estimate
/// is returned inside [`RootError::MaxIterExceeded`].
pub fn find_root_bracketed<F>(mut f: F, bracket: Bracket, cfg: &RootConfig) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);

    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }

    // b is the best estimate, c the contrapoint (f(b) and f(c) differ in sign),
    // a the previous iterate.
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..cfg.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }

        let tol = cfg.abs_tol_x + cfg.rel_tol_x * b.abs();
        let half = 0.5 * (c - b);
        if fb.abs() <= cfg.abs_tol_f || half.abs() <= 0.5 * tol || fb == 0.0 {
            return Ok(b);
        }

        if e.abs() >= 0.5 * tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            // Accept interpolation only if it stays well inside the bracket
            // and shrinks faster than the step before last.
            if 2.0 * p < (3.0 * half * q - (0.5 * tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }

        a = b;
        fa = fb;
        let step = if d.abs() > 0.5 * tol { d } else { (0.5 * tol).copysign(half) };
        b += step;
        // Clamp to the open bracket between b's old value and c.
        let (lo, hi) = if a < c { (a, c) } else { (c, a) };
        if !(b > lo && b < hi) {
            b = 0.5 * (a + c);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFiniteEval { x: b });
        }
    }

    let best = if fc.abs() < fb.abs() { c } else { b };
    Err(RootError::MaxIterExceeded { best, iterations: cfg.max_iter })
}

pub type Matrix3 = [[f64; 3]; 3];

/// Solves `m · x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear_3x3(m: &Matrix3, b: &[f64; 3]) -> Result<[f64; 3], LinearError> {
    let mut a = *m;
    let mut rhs = *b;

    for col in 0..3 {
        let pivot_row = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        let pivot = a[pivot_row][col];
        if pivot.is_nan() || pivot.abs() < SINGULAR_PIVOT {
            return Err(LinearError::SingularMatrix { column: col, pivot });
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);

        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            let pivot_row = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= factor * p;
            }
            rhs[row] -= factor * rhs[col];
        }
    }

    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// A sum of exponentials stored as `value · exp(scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaled {
    pub value: f64,
    pub scale: f64,
}

impl Rescaled {
    /// `value · exp(scale)`; may overflow to infinity, that is the caller's problem.
    pub fn unscaled(&self) -> f64 {
        self.value * self.scale.exp()
    }
}

/// Computes `Σ wᵢ·exp(xᵢ)` as `(s, m)` with `m = max xᵢ` and
/// `s = Σ wᵢ·exp(xᵢ − m)`.
///
/// # Panics
///
/// If the slices differ in length, are empty, or contain non-finite values.
pub fn exp_rescaled(exponents: &[f64], weights: &[f64]) -> Rescaled {
    assert_eq!(exponents.len(), weights.len(), "exponents and weights differ in length");
    assert!(!exponents.is_empty(), "empty exponential sum");
    assert!(exponents.iter().chain(weights).all(|v| v.is_finite()), "non-finite input to exp_rescaled");
    let scale = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = exponents.iter().zip(weights).map(|(x, w)| w * (x - scale).exp()).sum();
    Rescaled { value, scale }
}
