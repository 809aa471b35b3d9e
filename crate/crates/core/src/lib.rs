//! Resolvents of operators of the form A = Γ₁BΓ₁, where Γ₁ is a projector
//! that is local in Fourier space and B is local in real space.
//!
//! The crate covers field solves on periodic grids, the identities that
//! relate different closed forms of (z₀I − A)⁻¹, inner and outer spectral
//! bounds, contour-integral matrix functions, the block doubling that turns
//! a non-Hermitian problem into a Hermitian one, and the Stieltjes and
//! effective-parameter analyses built on top of it.
//!
//! Everything has a dense oracle path for small problems; the FFT path is
//! the one meant for real grids. Parallel loops go through rayon unless the
//! `parallel` feature is disabled.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod augment;
pub mod bounds;
pub mod composite;
pub mod contour;
pub mod effective;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operator;
pub mod par;
pub mod projector;
pub mod random;
pub mod resolvent;
pub mod stieltjes;

pub use augment::{augment, evaluate_h0, remarkable_identity_check, AugmentedProblem, SplitChoice};
pub use composite::{LocalOperator, NullTOperator, TwoPhaseMedium};
pub use effective::{z_star, z_star_dual_check, EffectiveParameter};
pub use error::{Error, Result};
pub use field::ComplexField;
pub use grid::PeriodicGrid;
pub use linalg::{CMat, CVec, C64};
pub use operator::{LinearOperator, OperatorHandle, SpectrumInterval};
pub use projector::ProjectorSpec;
pub use resolvent::{ResolventProblem, SolveMethod};
pub use stieltjes::{invert_measure, sample_f, StieltjesMeasure};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
