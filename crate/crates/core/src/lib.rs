//! Stochastic optimization with the NGN (non-negative Gauss-Newton) stepsize.
//!
//! The crate is organised around five pieces:
//!
//! * [`objectives`]: finite-sum problems with nonnegative components, dataset
//!   loaders and a finite-difference gradient oracle.
//! * [`stepsizes`]: NGN and its baselines (Polyak variants, AdaGrad-norm,
//!   constant, Armijo, generalized Gauss-Newton) behind one policy type.
//! * [`runner`]: the SGD loop, sampling, traces, iterate averaging, PCA and
//!   multi-seed aggregation.
//! * [`theory`]: the constants and right-hand sides of the convergence bounds.
//! * [`verify`]: checks binding measured runs to those bounds.
//!
//! ```
//! use ngn_core::objectives::make_quadratic1d;
//! use ngn_core::runner::{run_sgd, RunSettings, SamplerMode};
//! use ngn_core::stepsizes::PolicySpec;
//!
//! let problem = make_quadratic1d(1.2, 0.0, 0.1).unwrap();
//! let settings = RunSettings::new("ngn(sigma=1)".parse::<PolicySpec>().unwrap(), 200)
//!     .with_sampler(SamplerMode::FullBatch, 1)
//!     .with_x0(vec![3.0]);
//! let trace = run_sgd(&problem, &settings, 0).unwrap();
//! assert!(!trace.diverged());
//! assert!(trace.final_point()[0].abs() < 1e-6);
//! ```

pub mod config;
pub mod error;
pub mod linalg;
pub mod objectives;
pub mod runner;
pub mod stepsizes;
pub mod syntax;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
pub use objectives::{ComponentEval, FiniteSumObjective, ObjectiveInfo, Point};
pub use runner::{run_sgd, ExperimentConfig, RunSettings, RunTrace};
pub use stepsizes::{Policy, PolicySpec, StepObservation, StepSize};
pub use theory::TheoryContext;
