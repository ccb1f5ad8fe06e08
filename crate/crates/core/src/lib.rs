//! Fair division of multidimensional necklaces, and the rainbow complexes
//! that underpin their existence.
//!
//! The crate has two halves:
//!
//! * a numerical half ([`measures`], [`divisions`], [`solver`]) that
//!   represents piecewise-constant measures on the unit cube, evaluates how a
//!   division by axis-parallel cuts shares them between `k` thieves, and
//!   searches for divisions in which every thief receives exactly `1/k` of
//!   every measure;
//! * a combinatorial half ([`polytope`], [`rainbow`]) that builds the complex
//!   of vertex-coloured faces of a polytope and certifies its Euler
//!   characteristic, GF(2) homology, lexicographic shelling and free cyclic
//!   action.
//!
//! [`formats`] holds the JSON wire types shared with the command line tool.

pub mod divisions;
pub mod formats;
pub mod generator;
mod grid;
pub mod measures;
pub mod polytope;
pub mod rainbow;
pub mod solver;

pub use divisions::{
    evaluate, residual_norm, sign_representation, verify, CutConfiguration, Division,
    DivisionError, Labeling, ResidualMatrix, VerificationReport,
};
pub use measures::{
    bead_necklace_to_measures, AxisBox, GridDensity, MeasureError, MeasureMode, MeasureSet,
};
pub use polytope::{FaceLattice, PolytopeError};
pub use rainbow::{RainbowComplex, RainbowError};
pub use solver::{
    allocate_cut_budgets, compose, restrict_measure, solve, solve_base, solve_discrete_1d,
    DiscreteSplit, FactorPlan, SolveError, SolverConfig,
};
