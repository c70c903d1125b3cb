//! Leading-order model of the eigenvalue collision: inside a window of size h
//! around a real energy E1, rescaled coordinates E = E1 + h·F, eps = h·ε̃
//! turn the quantization condition into a quadratic normal form
//!
//!   q0·(F - F_c)² + m0·(ε̃² - ε̃_c²) = 0,
//!
//! whose roots are a real pair below the critical strength ε̃_c, a double
//! root at it, and a complex-conjugate pair above it.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::actions::{action_i, action_j, di_de, di_deps, WellSide};
use crate::error::{Error, Result};
use crate::numerics::Rectangle;
use crate::potential::{PerturbedPotential, WellStructure};
use crate::quantization::{bs_levels, SpectralParams};
use crate::turning::turning_points;

/// Window (rescaled) coordinates around E1 at scale h.
#[derive(Debug, Clone, Copy)]
pub struct WindowCoords {
    pub e1: f64,
    pub f: Complex64,
    pub eps_tilde: f64,
    pub kappa_tilde: f64,
    pub h: f64,
}

/// Frozen leading-order coefficients of the normal form at (E1, h).
#[derive(Debug, Clone, Copy)]
pub struct BifurcationModel {
    pub e1: f64,
    pub h: f64,
    /// unscaled threshold h·ε̃_c
    pub eps_c: f64,
    pub eps_tilde_c: f64,
    pub q0: f64,
    pub m0: f64,
    pub j_val: f64,
    pub di_de: f64,
    pub di_deps_abs: f64,
    pub f_c: f64,
}

/// Three-way outcome of the collision analysis at a given strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    RealPair,
    DoubleRoot,
    ConjugatePair,
}

/// Maps (E, eps) into window coordinates; κ̃ folds the Floquet offset and
/// the fast phase I(E1,0)/h together, reduced mod π.
pub fn to_window(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    e1: f64,
    h: f64,
    kappa: f64,
    well: &WellStructure,
) -> Result<WindowCoords> {
    let tp = turning_points(pot, Complex64::new(e1, 0.0), 0.0, well)?;
    let i1 = action_i(pot, WellSide::Left, &tp, 128)?.re;
    Ok(WindowCoords {
        e1,
        f: (e - e1) / h,
        eps_tilde: eps / h,
        kappa_tilde: (kappa - i1 / h).rem_euclid(PI),
        h,
    })
}

/// Inverse of `to_window` on the (E, eps) part.
pub fn from_window(w: &WindowCoords) -> (Complex64, f64) {
    (w.e1 + w.f * w.h, w.eps_tilde * w.h)
}

/// Builds the normal-form coefficients at (E1, h) from the actions at
/// (E1, 0). κ̃ is accepted for interface stability but the leading-order
/// symbols do not depend on it.
pub fn build_model(
    pot: &PerturbedPotential,
    e1: f64,
    h: f64,
    well: &WellStructure,
    _kappa_tilde: f64,
) -> Result<BifurcationModel> {
    let tp = turning_points(pot, Complex64::new(e1, 0.0), 0.0, well)?;
    let j_val = action_j(pot, &tp, 128)?.re;
    let a = di_deps(pot, WellSide::Left, &tp, 128)?.norm();
    let b = di_de(pot, WellSide::Left, &tp, 128)?.re;
    if a < 1e-10 {
        return Err(Error::A7Violation);
    }

    let eps_tilde_c = (-j_val / h).exp() / (2.0 * a);

    // critical F: the Bohr–Sommerfeld level of index nearest E1, searched
    // one level spacing to each side but kept inside the double-well band
    let params = SpectralParams::new(h, 0.0)?;
    let spacing = PI * h / b;
    let depth = well.barrier_top - well.well_min_left.min(well.well_min_right);
    let lo = (e1 - 1.1 * spacing).max(well.well_min_left.max(well.well_min_right) + 0.02 * depth);
    let hi = (e1 + 1.1 * spacing).min(well.barrier_top - 0.02 * depth);
    if !(lo < hi) {
        return Err(Error::Config(format!("E1={e1} leaves no valid level-search band")));
    }
    let search = Rectangle::new(Complex64::new((lo + hi) / 2.0, 0.0), (hi - lo) / 2.0, 1e-3)?;
    let levels = bs_levels(pot, &params, &search, WellSide::Left, well)?;
    let nearest = levels
        .iter()
        .min_by(|x, y| (x.e.re - e1).abs().total_cmp(&(y.e.re - e1).abs()))
        .ok_or(Error::NoConvergence { context: "no BS level near E1" })?;
    let f_c = (nearest.e.re - e1) / h;

    Ok(BifurcationModel {
        e1,
        h,
        eps_c: h * eps_tilde_c,
        eps_tilde_c,
        q0: 2.0 * b * b,
        m0: a,
        j_val,
        di_de: b,
        di_deps_abs: a,
        f_c,
    })
}

/// Classifies the strength against the threshold; equality within a
/// relative band of 1e-12 counts as the double root.
pub fn classify(eps_tilde: f64, model: &BifurcationModel) -> PairClass {
    let x = eps_tilde.abs();
    let c = model.eps_tilde_c;
    if (x - c).abs() <= 1e-12 * c {
        PairClass::DoubleRoot
    } else if x < c {
        PairClass::RealPair
    } else {
        PairClass::ConjugatePair
    }
}

/// The two model zeros at strength ε̃, in unscaled energy units:
/// E1 + h·(F_c ± sqrt(-m0(ε̃²-ε̃_c²)/q0)).
pub fn predicted_pair(eps_tilde: f64, model: &BifurcationModel) -> (Complex64, Complex64) {
    let f_crit = model.m0 * (eps_tilde * eps_tilde - model.eps_tilde_c * model.eps_tilde_c);
    let disc = -f_crit / model.q0;
    let s = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    let base = Complex64::new(model.e1 + model.h * model.f_c, 0.0);
    (base + s * model.h, base - s * model.h)
}
