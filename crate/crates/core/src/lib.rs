//! Necessary sample sizes for importance sampling.
//!
//! `N` weighted particles can only represent an f-divergence of about
//! `U_f(N)` between target and proposal. This crate computes the
//! divergences of a target from a proposal (closed form, quadrature or
//! Monte Carlo), the resulting sample-size thresholds, and runs the
//! importance sampler itself to check them empirically.
//!
//! ```
//! use isbound::{bounds, gaussian, DivergenceKind, Gaussian1D, ToleranceBudget};
//!
//! let target = Gaussian1D::new(3.0, 1.0).unwrap();
//! let kl = gaussian::kl_gaussian(&target, &Gaussian1D::standard());
//! let report = bounds::necessary_n(&kl, DivergenceKind::KullbackLeibler, &ToleranceBudget::default()).unwrap();
//! assert_eq!(report.necessary_n_integer(), Some(50));
//! ```

pub mod bounds;
pub mod divergence;
pub mod error;
pub mod gaussian;
pub mod generator;
pub mod quadrature;
pub mod rng;
pub mod sampling;

pub use bounds::{SampleSizeReport, ToleranceBudget};
pub use divergence::{DivergenceValue, MassVector, Method, ProbabilityVector};
pub use error::{Error, Result};
pub use gaussian::{DensityRatioModel, Gaussian1D, GaussianModel};
pub use generator::{ConvexGenerator, CustomGenerator, DivergenceKind};
pub use quadrature::QuadratureSpec;
pub use sampling::{BreakdownReport, TestFunction, TrialOutcome, WeightedEmpiricalMeasure};
