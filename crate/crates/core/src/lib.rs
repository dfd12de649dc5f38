//! Semi-supervised novelty detection with finite-sample false discovery
//! rate control.
//!
//! A null training sample is split in two. A score function is learned to
//! separate the first part from the *mixed* sample (second part plus test
//! points) while staying invariant to the order of the mixed sample. Test
//! scores are then ranked against the held-out nulls to form empirical
//! p-values, and a step-up procedure selects the novelties.
//!
//! Modules, bottom-up:
//!
//! - [`mtest`]: BH step-up, Storey/quantile π0 estimators, counting knockoffs.
//! - [`conformal`]: empirical p-values and tie-breaking.
//! - [`scorers`]: score functions (oracle, density ratio, PU classifiers,
//!   non-adaptive baselines).
//! - [`adadetect`]: the detection procedures, their adaptive and
//!   cross-validated variants.
//! - [`simlab`]: synthetic settings and Monte-Carlo checks of the guarantees.
//! - [`cli`]: the command-line front end.

pub mod adadetect;
pub mod cli;
pub mod conformal;
pub mod data;
pub mod error;
pub mod mtest;
pub mod rng;
pub mod scorers;
pub mod simlab;

pub use adadetect::{
    run_adadetect, run_adadetect_cv, run_quantile_adadetect, run_storey_adadetect, split_nts,
    CvReport, DetectionReport, NullSplit, SplitDataset, SplitPolicy,
};
pub use data::Points;
pub use error::{Error, Result};
pub use mtest::{PValues, Pi0Estimate, Pi0Method, RejectionSet};
pub use scorers::{FittedScore, ScoreFunction, Scorer, ScorerConfig};

/// Crate version, echoed into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
