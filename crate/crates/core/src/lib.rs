//! Sparse linear estimation with approximate message-passing over fast
//! structured operators.
//!
//! The crate is organized bottom-up: [`xforms`] holds the fast transforms,
//! [`coupled`] assembles them into block operators, [`denoise`] provides the
//! prior-dependent thresholding functions, [`amp`] runs the iteration,
//! [`se`] predicts it, and [`sparc`] applies it to sparse superposition
//! codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod coupled;
pub mod dense;
pub mod denoise;
pub mod error;
pub mod field;
pub mod operator;
pub mod quad;
pub mod rng;
pub mod se;
pub mod signals;
pub mod sparc;
pub mod xforms;

pub use num_complex::Complex64;

pub use amp::{amp_init, amp_iterate, amp_run, AmpConfig, AmpOutcome, AmpState, StopCriterion, StopReason, Trace};
pub use coupled::{CouplingEnsemble, OperatorRecipe, StructuredOperator};
pub use dense::GaussianOperator;
pub use denoise::{Denoiser, GaussBernoulliPrior, SectionPrior};
pub use error::{Error, Result};
pub use field::Field;
pub use operator::{DenseMatrix, LinearOperator};
pub use xforms::{BlockRandomization, TransformKind};
