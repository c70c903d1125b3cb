//! Spectra of PT-symmetric perturbed double-well Schrödinger operators,
//! computed two independent ways and cross-validated:
//!
//! * a direct finite-difference eigensolver ([`fdsolve`]), and
//! * a semiclassical quantization condition built from complex action
//!   integrals ([`actions`], [`quantization`]),
//!
//! together with the leading-order model of the threshold where real
//! eigenvalue pairs collide and bifurcate into complex-conjugate pairs
//! ([`bifurcation`]), Stokes-line geometry diagnostics ([`stokes`]), and a
//! sweep/report harness ([`harness`]).
//!
//! The operator family is P = -h² d²/dx² + V₀(x) + iε·W(x) with V₀ an even
//! real polynomial double well and W an odd real polynomial.

pub mod actions;
pub mod bifurcation;
pub mod error;
pub mod fdsolve;
pub mod harness;
pub mod numerics;
pub mod potential;
pub mod quantization;
pub mod stokes;
pub mod turning;

pub use actions::{action_i, action_j, action_set, di_de, di_deps, dj_de, ActionSet, WellSide};
pub use bifurcation::{
    build_model, classify, from_window, predicted_pair, to_window, BifurcationModel, PairClass,
    WindowCoords,
};
pub use error::{Error, Result};
pub use fdsolve::{
    assemble, default_domain_half_width, default_grid, eigs_near, eigs_window, grid_selftest,
    lu_solve, EigenpairSet, Grid, GridSelftest, TridiagonalOperator,
};
pub use harness::{
    compare_spectrum, empirical_threshold, figure1, run_sweep, CompareReport, Method, RunConfig,
    SpectrumRow, SweepResult, ThresholdMeasurement,
};
pub use numerics::{
    chebyshev_rule, newton_refine, poly_roots, winding_count, ComplexPolynomial, QuadratureRule,
    Rectangle, RuleKind,
};
pub use potential::{a7_check, classify_wells, pt_check, PerturbedPotential, WellStructure};
pub use quantization::{
    bs_levels, eval_f, find_f_roots, gamma_slope, localization_radius, winding_in, BsLevel, FRoot,
    SpectralParams,
};
pub use stokes::{seed_angles, trace_level_curve, trace_stokes, StokesCurve, StokesKind};
pub use turning::{continue_path, turning_points, TurningPoints};
