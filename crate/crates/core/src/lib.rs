//! One-parameter single-diode model (SDM-1) for photovoltaic I–V curves.
//!
//! Given the three cardinal points of a measured curve (short circuit,
//! maximum power, open circuit) the five single-diode parameters reduce to a
//! one-parameter family indexed by the equivalent diode factor `A`. This
//! crate computes where that family is physical (`A ≤ A_max`), rebuilds all
//! five parameters for any admissible `A`, synthesizes curves, and carries
//! cardinal-point uncertainty through to an interval on `A_max`.
//!
//! ```
//! use sdm1::{compute_domain, reduced_solution, CardinalPoints};
//!
//! let cp = CardinalPoints::new(5.26, 21.15, 4.85, 16.71)?;
//! let domain = compute_domain(&cp)?;
//! assert!(domain.a_max > 1.3 && domain.a_max < 1.35);
//!
//! let p = reduced_solution(&cp, 1.2)?;
//! assert!(p.strictly_positive());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide under `book/` walks through the model chapter by chapter; its
//! code listings are compiled as doctests of this crate.

pub mod domain;
pub mod ingest;
pub mod model;
pub mod numerics;
pub mod report;
pub mod uncertainty;

pub use domain::{
    compute_domain, f_mp, f_sh, reconstruct_parameters, reduced_solution, DomainError, DomainResult, Sdm1Solver,
    SelectedRule,
};
pub use model::{
    sample_curve, sdm_residual, solve_current_at_voltage, CardinalPoints, IVPoint, ModelError, SdmParameters,
    ValidationError,
};
pub use numerics::RootConfig;
pub use uncertainty::{domain_interval, DomainInterval, Realization, UncertainCardinalPoints, UncertaintyError};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/domain.md")]
    mod domain {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
}
