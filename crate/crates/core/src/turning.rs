//! Labeled turning points of V_eps - E, tracked by continuation from the
//! real double-well configuration so that each of the four roots keeps its
//! identity (outer/inner, left/right) as (E, eps) moves into the complex.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{newton_refine, poly_roots};
use crate::potential::{PerturbedPotential, WellStructure};

/// Two labeled roots closer than this make labels meaningless.
pub const SEPARATION_FLOOR: f64 = 1e-6;

/// The four labeled roots of V_eps(z) = E at one parameter point.
#[derive(Debug, Clone, Copy)]
pub struct TurningPoints {
    pub alpha_l: Complex64,
    pub beta_l: Complex64,
    pub beta_r: Complex64,
    pub alpha_r: Complex64,
    pub e: Complex64,
    pub eps: f64,
    /// max |V_eps(z) - E| over the four points.
    pub residual: f64,
}

impl TurningPoints {
    pub fn quadruple(&self) -> [Complex64; 4] {
        [self.alpha_l, self.beta_l, self.beta_r, self.alpha_r]
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let q = self.quadruple();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                best = best.min((q[i] - q[j]).norm());
            }
        }
        best
    }
}

fn label_against(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    reference: [Complex64; 4],
) -> Result<TurningPoints> {
    let p = pot.v_minus_e_poly(e, eps);
    let dp = p.derivative();
    let roots = poly_roots(&p, 1e-12)?;

    let mut chosen = [usize::MAX; 4];
    for (i, r) in reference.iter().enumerate() {
        let (j, _) = roots
            .iter()
            .map(|z| (z - r).norm())
            .enumerate()
            .min_by(|(_, a), (_, b)| a.total_cmp(b))
            .expect("poly_roots returns at least one root");
        chosen[i] = j;
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if chosen[i] == chosen[j] {
                return Err(Error::LabelAmbiguity);
            }
        }
    }

    let f = |z: Complex64| (p.eval(z), dp.eval(z));
    let mut labeled = [Complex64::new(0.0, 0.0); 4];
    let mut residual = 0.0f64;
    for (slot, &j) in labeled.iter_mut().zip(&chosen) {
        let z = newton_refine(f, roots[j], 1e-14 * p.scale_at(roots[j]), 60)?;
        let r = p.eval(z).norm();
        if r > 1e-12 * p.scale_at(z) {
            return Err(Error::NoConvergence { context: "turning-point residual" });
        }
        residual = residual.max(r);
        *slot = z;
    }

    // unlabeled spectator roots (deg > 4) must stay clear of the labeled ones
    for (j, z) in roots.iter().enumerate() {
        if chosen.contains(&j) {
            continue;
        }
        if labeled.iter().any(|l| (l - z).norm() < SEPARATION_FLOOR) {
            return Err(Error::LabelAmbiguity);
        }
    }

    let tp = TurningPoints {
        alpha_l: labeled[0],
        beta_l: labeled[1],
        beta_r: labeled[2],
        alpha_r: labeled[3],
        e,
        eps,
        residual,
    };
    if tp.min_pairwise_distance() < SEPARATION_FLOOR {
        return Err(Error::LabelAmbiguity);
    }
    Ok(tp)
}

/// Finds and labels the four turning points at (E, eps), anchoring labels by
/// nearest-neighbor matching against the real configuration in `well`.
pub fn turning_points(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    well: &WellStructure,
) -> Result<TurningPoints> {
    let reference = [
        Complex64::new(well.alpha_l, 0.0),
        Complex64::new(well.beta_l, 0.0),
        Complex64::new(well.beta_r, 0.0),
        Complex64::new(well.alpha_r, 0.0),
    ];
    label_against(pot, e, eps, reference)
}

fn step_from(
    pot: &PerturbedPotential,
    prev: &TurningPoints,
    e: Complex64,
    eps: f64,
    depth: usize,
) -> Result<TurningPoints> {
    if depth >= 20 {
        return Err(Error::StepTooLarge);
    }
    let span = (e - prev.e).norm() + (eps - prev.eps).abs();
    if span <= 0.1 * prev.min_pairwise_distance() {
        match label_against(pot, e, eps, prev.quadruple()) {
            Ok(tp) => {
                // transport is trustworthy only if every point moved by less
                // than half the old separation; a larger jump can silently
                // hop across a collision
                let moved = tp
                    .quadruple()
                    .iter()
                    .zip(prev.quadruple())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                if moved <= 0.5 * prev.min_pairwise_distance() {
                    return Ok(tp);
                }
            }
            // a smaller step can disambiguate; a genuine collision will
            // exhaust the depth budget below
            Err(Error::LabelAmbiguity) => {}
            Err(other) => return Err(other),
        }
    }
    let mid_e = prev.e + (e - prev.e) * 0.5;
    let mid_eps = prev.eps + (eps - prev.eps) * 0.5;
    let mid = step_from(pot, prev, mid_e, mid_eps, depth + 1)?;
    step_from(pot, &mid, e, eps, depth + 1)
}

/// Transports the labels along a parameter path, bisecting any step that is
/// large relative to the current point separation (at most 20 bisections).
pub fn continue_path(
    pot: &PerturbedPotential,
    path: &[(Complex64, f64)],
    well: &WellStructure,
) -> Result<Vec<TurningPoints>> {
    let mut out = Vec::with_capacity(path.len());
    for &(e, eps) in path {
        let tp = match out.last() {
            None => turning_points(pot, e, eps, well)?,
            Some(prev) => step_from(pot, prev, e, eps, 0)?,
        };
        out.push(tp);
    }
    Ok(out)
}

/// As `continue_path`, but starting from an already-labeled configuration.
pub(crate) fn continue_from(
    pot: &PerturbedPotential,
    start: &TurningPoints,
    targets: &[(Complex64, f64)],
) -> Result<Vec<TurningPoints>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut prev = *start;
    for &(e, eps) in targets {
        let tp = step_from(pot, &prev, e, eps, 0)?;
        out.push(tp);
        prev = tp;
    }
    Ok(out)
}
