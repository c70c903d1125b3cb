//! The leading-order quantization function
//!
//!   f(E) = cos(I_l/h - κ)·cos(I_r/h - κ) - ¼·e^(-2J/h)·sin(I_l/h - κ)·sin(I_r/h - κ)
//!
//! whose zeros track the spectrum: Bohr–Sommerfeld solving per well, a
//! certified zero search over rectangular windows, and the localization
//! radius that bounds how far true zeros sit from the BS ladder.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::actions::{action_i, action_set, di_de, di_deps, WellSide};
use crate::error::{Error, Result};
use crate::numerics::{newton_refine, winding_count, Rectangle};
use crate::potential::PerturbedPotential;
use crate::turning::turning_points;
use crate::WellStructure;

const N_NODES: usize = 128;
/// exp(-x) underflows to zero for x beyond this; flushed explicitly.
const EXP_FLUSH: f64 = 745.0;

/// Semiclassical parameters: h, the perturbation strength, and the Floquet
/// offset κ (κ in πℤ reproduces the plain double-well condition).
#[derive(Debug, Clone, Copy)]
pub struct SpectralParams {
    pub h: f64,
    pub eps: f64,
    pub kappa: f64,
}

impl SpectralParams {
    pub fn new(h: f64, eps: f64) -> Result<Self> {
        Self::with_kappa(h, eps, 0.0)
    }

    pub fn with_kappa(h: f64, eps: f64, kappa: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Config(format!("h must lie in (0, 1], got {h}")));
        }
        Ok(SpectralParams { h, eps, kappa })
    }
}

/// One Bohr–Sommerfeld level: 2·I_side(E, eps) = (2k+1)·π·h.
#[derive(Debug, Clone, Copy)]
pub struct BsLevel {
    pub k: i64,
    pub e: Complex64,
    pub side: WellSide,
    pub residual: f64,
}

/// A certified zero of the quantization function.
#[derive(Debug, Clone, Copy)]
pub struct FRoot {
    pub e: Complex64,
    pub multiplicity: usize,
    pub newton_residual: f64,
    pub certified: bool,
}

/// Evaluates the quantization function at complex energy E.
pub fn eval_f(
    pot: &PerturbedPotential,
    e: Complex64,
    params: &SpectralParams,
    well: &WellStructure,
) -> Result<Complex64> {
    let a = action_set(pot, e, params.eps, well, N_NODES)?;
    let tl = a.i_l / params.h - params.kappa;
    let tr = a.i_r / params.h - params.kappa;
    let two_j = a.j * (2.0 / params.h);
    let tunneling = if two_j.re > EXP_FLUSH {
        Complex64::new(0.0, 0.0)
    } else {
        (-two_j).exp()
    };
    Ok(tl.cos() * tr.cos() - 0.25 * tunneling * tl.sin() * tr.sin())
}

/// Newton driver over closures that may fail internally: failures poison the
/// value with NaN, which newton_refine reports as NoConvergence.
fn newton_checked<F>(f: F, seed: Complex64, tol: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64)>,
{
    let poisoned = Cell::new(false);
    let wrapped = |z: Complex64| {
        f(z).unwrap_or_else(|_| {
            poisoned.set(true);
            (Complex64::new(f64::NAN, 0.0), Complex64::new(1.0, 0.0))
        })
    };
    let out = newton_refine(wrapped, seed, tol, 80);
    if poisoned.get() {
        return Err(Error::NoConvergence { context: "evaluation failed during newton" });
    }
    out
}

/// Solves 2·I_side = (2k+1)πh for every k whose level can sit inside the
/// window; levels whose Newton iteration fails are dropped.
pub fn bs_levels(
    pot: &PerturbedPotential,
    params: &SpectralParams,
    window: &Rectangle,
    side: WellSide,
    well: &WellStructure,
) -> Result<Vec<BsLevel>> {
    let lo = window.center.re - window.half_width;
    let hi = window.center.re + window.half_width;
    let samples = 9;
    let mut grid = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
        let tp = turning_points(pot, Complex64::new(x, 0.0), params.eps, well)?;
        let i_val = action_i(pot, side, &tp, N_NODES)?;
        grid.push((x, i_val.re));
    }
    let i_min = grid.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let i_max = grid.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);

    let level_of = |k: i64| (2 * k + 1) as f64 * PI * params.h / 2.0;
    let k_lo = ((2.0 * i_min / (PI * params.h) - 1.0) / 2.0).ceil() as i64;
    let k_hi = ((2.0 * i_max / (PI * params.h) - 1.0) / 2.0).floor() as i64;

    let mut out = Vec::new();
    for k in k_lo..=k_hi {
        let target = 2.0 * level_of(k);
        // seed by inverse interpolation of the sampled (monotone) action
        let mut seed = grid[0].0;
        for w in grid.windows(2) {
            let (x0, v0) = w[0];
            let (x1, v1) = w[1];
            if (2.0 * v0 - target) * (2.0 * v1 - target) <= 0.0 {
                let t = (target - 2.0 * v0) / (2.0 * (v1 - v0));
                seed = x0 + t.clamp(0.0, 1.0) * (x1 - x0);
                break;
            }
        }
        let tol = 1e-12 * target.abs().max(1.0);
        let solve = |z: Complex64| -> Result<(Complex64, Complex64)> {
            let tp = turning_points(pot, z, params.eps, well)?;
            let i_val = action_i(pot, side, &tp, N_NODES)?;
            let di = di_de(pot, side, &tp, N_NODES)?;
            Ok((i_val * 2.0 - target, di * 2.0))
        };
        let Ok(e) = newton_checked(solve, Complex64::new(seed, 0.0), tol) else {
            continue;
        };
        if !window.contains(e) {
            continue;
        }
        let residual = match solve(e) {
            Ok((r, _)) => r.norm(),
            Err(_) => continue,
        };
        out.push(BsLevel { k, e, side, residual });
    }
    out.sort_by_key(|l| l.k);
    Ok(out)
}

/// Finds every zero of the quantization function inside the window, seeded
/// from both Bohr–Sommerfeld ladders and their conjugates, and certifies the
/// count against the boundary winding number.
pub fn find_f_roots(
    pot: &PerturbedPotential,
    params: &SpectralParams,
    window: &Rectangle,
    well: &WellStructure,
) -> Result<Vec<FRoot>> {
    let mut seeds = Vec::new();
    for side in [WellSide::Left, WellSide::Right] {
        for lvl in bs_levels(pot, params, window, side, well)? {
            seeds.push(lvl.e);
            seeds.push(lvl.e.conj());
        }
    }

    let delta = 1e-7 * params.h;
    let f_and_slope = |z: Complex64| -> Result<(Complex64, Complex64)> {
        let f = eval_f(pot, z, params, well)?;
        let up = eval_f(pot, z + delta, params, well)?;
        let dn = eval_f(pot, z - delta, params, well)?;
        Ok((f, (up - dn) / (2.0 * delta)))
    };

    let mut converged = Vec::new();
    for &s in &seeds {
        if let Ok(z) = newton_checked(&f_and_slope, s, 1e-13) {
            if window.contains(z) {
                converged.push(z);
            }
        }
    }

    // cluster collapsed runs
    let dedupe = 1e-3 * params.h;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for z in converged {
        match clusters.iter_mut().find(|(rep, _)| (*rep - z).norm() < dedupe) {
            Some((_, count)) => *count += 1,
            None => clusters.push((z, 1)),
        }
    }

    let mut roots = Vec::new();
    let mut claimed = 0usize;
    for (k, &(rep, count)) in clusters.iter().enumerate() {
        let mut emitted = false;
        if count >= 2 {
            // certification box must not swallow a neighbouring root
            let nearest_other = clusters
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &(other, _))| (other - rep).norm())
                .fold(f64::INFINITY, f64::min);
            let half = (10.0 * dedupe).min(0.45 * nearest_other);
            let box_r = Rectangle::new(rep, half, half)?;
            if winding_in(pot, params, well, &box_r)? == 2 {
                // two zeros in the box: either a genuine double zero or a
                // pair too close for the dedupe radius (the splitting near a
                // collision is exponentially small in 1/h).  A quadratic fit
                // of f through rep and rep ± d resolves the pair down to the
                // noise floor of the cosine arguments.
                let d = 1e-4 * params.h;
                let f0 = eval_f(pot, rep, params, well)?;
                let fp = eval_f(pot, rep + d, params, well)?;
                let fm = eval_f(pot, rep - d, params, well)?;
                let c2 = (fp + fm - 2.0 * f0) / (2.0 * d * d);
                let c1 = (fp - fm) / (2.0 * d);
                let disc = (c1 * c1 - 4.0 * c2 * f0).sqrt();
                let sep = (disc / c2).norm();
                // |∂f/∂(I/h)| ≈ |cos| ≈ sqrt(|f|) for a symmetric pair of
                // wells, and the actions carry ~1e-15 relative argument error
                let fmax = f0.norm().max(fp.norm()).max(fm.norm());
                let floor = 30.0 * (fmax.sqrt() * 1e-14 / c2.norm()).sqrt();
                if c2.norm() > 0.0 && sep > floor {
                    for sign in [1.0, -1.0] {
                        let guess = rep + (sign * disc - c1) / (2.0 * c2);
                        let z = newton_checked(&f_and_slope, guess, 1e-13).unwrap_or(guess);
                        let newton_residual = eval_f(pot, z, params, well)?.norm();
                        roots.push(FRoot { e: z, multiplicity: 1, newton_residual, certified: true });
                    }
                    claimed += 2;
                    emitted = true;
                } else {
                    let newton_residual = f0.norm();
                    roots.push(FRoot { e: rep, multiplicity: 2, newton_residual, certified: true });
                    claimed += 2;
                    emitted = true;
                }
            }
        }
        if !emitted {
            claimed += 1;
            let newton_residual = eval_f(pot, rep, params, well)?.norm();
            roots.push(FRoot { e: rep, multiplicity: 1, newton_residual, certified: true });
        }
    }

    let winding = winding_in(pot, params, well, window)?;
    if winding != claimed as i64 {
        return Err(Error::CertificationMismatch { winding, claimed });
    }
    roots.sort_by(|a, b| a.e.re.total_cmp(&b.e.re).then(a.e.im.total_cmp(&b.e.im)));
    Ok(roots)
}

/// Boundary winding of the quantization function over a rectangle.
pub fn winding_in(
    pot: &PerturbedPotential,
    params: &SpectralParams,
    well: &WellStructure,
    rect: &Rectangle,
) -> Result<i64> {
    let poisoned = Cell::new(false);
    let g = |z: Complex64| {
        eval_f(pot, z, params, well).unwrap_or_else(|_| {
            poisoned.set(true);
            Complex64::new(f64::NAN, f64::NAN)
        })
    };
    let w = winding_count(g, rect, 64)?;
    if poisoned.get() {
        return Err(Error::NoConvergence { context: "winding boundary evaluation" });
    }
    Ok(w)
}

/// Radius of the disc around a BS level that is guaranteed to contain the
/// nearby zeros of f: C·h·min(1, max(h/ε, 1)·e^(-ReJ/h))·e^(-ReJ/h).
pub fn localization_radius(eps: f64, h: f64, j_val: Complex64, c: f64) -> f64 {
    let decay = if j_val.re / h > EXP_FLUSH { 0.0 } else { (-j_val.re / h).exp() };
    if decay == 0.0 {
        return 0.0;
    }
    let amp = if eps == 0.0 {
        1.0 // max(h/eps, 1) = ∞ and the min picks 1 whenever decay > 0
    } else {
        ((h / eps.abs()).max(1.0) * decay).min(1.0)
    };
    c * h * amp * decay
}

/// Leading-order eigenvalue-curve slope at a real energy: the drift of a
/// left-well level under the perturbation is E(eps) ≈ E(0) + i·slope·eps.
pub fn gamma_slope(pot: &PerturbedPotential, e_real: f64, well: &WellStructure) -> Result<f64> {
    let tp = turning_points(pot, Complex64::new(e_real, 0.0), 0.0, well)?;
    let de = di_deps(pot, WellSide::Left, &tp, N_NODES)?;
    let denom = di_de(pot, WellSide::Left, &tp, N_NODES)?;
    Ok((Complex64::i() * de / denom).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::classify_wells;

    fn quartic() -> PerturbedPotential {
        PerturbedPotential::new(vec![0.0, 0.0, -0.5, 0.0, 0.05], vec![0.0, 1.0], true).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn f_is_real_on_real_energies() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.05, 0.0).unwrap();
        for i in 0..5 {
            let e = c(-1.15 + 0.05 * i as f64, 0.0);
            let f = eval_f(&pot, e, &params, &well).unwrap();
            assert!(f.im.abs() < 1e-10, "Im f = {} at {e}", f.im);
        }
    }

    #[test]
    fn f_vanishes_on_the_bs_ladder_at_deep_h() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.01, 0.0).unwrap();
        let window = Rectangle::new(c(-1.0, 0.0), 0.05, 0.01).unwrap();
        let levels = bs_levels(&pot, &params, &window, WellSide::Left, &well).unwrap();
        assert!(!levels.is_empty());
        for lvl in levels.iter().take(3) {
            let f = eval_f(&pot, lvl.e, &params, &well).unwrap();
            assert!(f.norm() <= 1e-10, "|f| = {} at level {}", f.norm(), lvl.k);
        }
    }

    #[test]
    fn f_composes_the_reference_actions() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.01, 0.0).unwrap();
        let f = eval_f(&pot, c(-1.0, 0.0), &params, &well).unwrap();
        let theta: f64 = 0.40066225976899974 / 0.01;
        let tun = (-2.0 * 2.4799613637456043_f64 / 0.01).exp();
        let expected = theta.cos().powi(2) - 0.25 * tun * theta.sin().powi(2);
        assert!((f - c(expected, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn bs_count_reality_and_spacing() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.01, 0.0).unwrap();
        let window = Rectangle::new(c(-1.0, 0.0), 0.05, 0.01).unwrap();
        let levels = bs_levels(&pot, &params, &window, WellSide::Left, &well).unwrap();

        // count matches the phase-space estimate ΔI/(πh) up to one level
        let tp_lo = turning_points(&pot, c(-1.05, 0.0), 0.0, &well).unwrap();
        let tp_hi = turning_points(&pot, c(-0.95, 0.0), 0.0, &well).unwrap();
        let di = action_i(&pot, WellSide::Left, &tp_hi, 128).unwrap().re
            - action_i(&pot, WellSide::Left, &tp_lo, 128).unwrap().re;
        let estimate = di / (PI * 0.01);
        assert!((levels.len() as f64 - estimate).abs() <= 1.0);

        for lvl in &levels {
            assert!(lvl.e.im.abs() < 1e-10);
        }
        for w in levels.windows(2) {
            let gap = w[1].e.re - w[0].e.re;
            let tp = turning_points(&pot, w[0].e, 0.0, &well).unwrap();
            let local = PI * 0.01 / di_de(&pot, WellSide::Left, &tp, 128).unwrap().re;
            assert!((gap - local).abs() / local < 0.1, "gap {gap} vs local {local}");
        }
    }

    #[test]
    fn deep_h_roots_sit_on_the_ladder_with_multiplicity_two() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.01, 0.0).unwrap();
        let wide = Rectangle::new(c(-1.0, 0.0), 0.03, 0.01).unwrap();
        let levels = bs_levels(&pot, &params, &wide, WellSide::Left, &well).unwrap();
        assert!(levels.len() >= 2);
        let (e0, e1) = (levels[0].e.re, levels[1].e.re);
        let center = c((e0 + e1) / 2.0, 0.0);
        let half = (e1 - e0) / 2.0 + (e1 - e0) / 4.0;
        let window = Rectangle::new(center, half, 0.005).unwrap();
        let roots = find_f_roots(&pot, &params, &window, &well).unwrap();
        assert_eq!(roots.len(), 2);
        for r in &roots {
            assert_eq!(r.multiplicity, 2);
            assert!(r.certified);
            let near = (r.e - levels[0].e).norm().min((r.e - levels[1].e).norm());
            assert!(near < 1e-10, "root {} off ladder by {near}", r.e);
        }
    }

    #[test]
    fn roots_pair_up_beyond_threshold() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.2, 1e-3).unwrap();
        let window = Rectangle::new(c(-1.053, 0.0), 0.06, 0.05).unwrap();
        let roots = find_f_roots(&pot, &params, &window, &well).unwrap();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0].e - roots[1].e.conj()).norm() < 1e-9);
        assert!(roots[0].e.im.abs() > 5e-4);
    }

    #[test]
    fn localization_radius_cases() {
        let j = c(5.0, 0.0);
        assert!((localization_radius(0.0, 1.0, j, 1.0) - (-5.0f64).exp()).abs() < 1e-18);
        let r = localization_radius(1.0, 1.0, j, 1.0);
        assert!((r - (-10.0f64).exp()).abs() < 1e-18);
        assert_eq!(localization_radius(0.0, 1.0, c(800.0, 0.0), 1.0), 0.0);
    }

    #[test]
    fn slope_reference_value_and_linearity() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let s = gamma_slope(&pot, -1.0, &well).unwrap();
        assert!((s + 2.1453864961973486).abs() < 1e-9, "slope {s}");

        let flipped =
            PerturbedPotential::new(vec![0.0, 0.0, -0.5, 0.0, 0.05], vec![0.0, -1.0], true)
                .unwrap();
        let well_f = classify_wells(&flipped, -1.0).unwrap();
        let sf = gamma_slope(&flipped, -1.0, &well_f).unwrap();
        assert!((s + sf).abs() < 1e-12);
    }

    #[test]
    fn f_symmetries_hold_off_axis() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        for (im, eps) in [(0.01, 2e-3), (-0.02, 5e-3), (0.02, 0.0)] {
            let e = c(-1.0, im);
            let pa = SpectralParams::new(0.1, eps).unwrap();
            let pm = SpectralParams::new(0.1, -eps).unwrap();
            let f = eval_f(&pot, e, &pa, &well).unwrap();
            let star = eval_f(&pot, e.conj(), &pm, &well).unwrap();
            assert!((star - f.conj()).norm() < 1e-10);
            let dag = eval_f(&pot, e.conj(), &pa, &well).unwrap();
            assert!((dag - f.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn winding_is_stable_under_window_inflation() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let params = SpectralParams::new(0.2, 0.0).unwrap();
        let base = Rectangle::new(c(-1.053, 0.0), 0.05, 0.03).unwrap();
        let bigger = Rectangle::new(base.center, base.half_width * 1.01, base.half_height * 1.01)
            .unwrap();
        let w1 = winding_in(&pot, &params, &well, &base).unwrap();
        let w2 = winding_in(&pot, &params, &well, &bigger).unwrap();
        assert_eq!(w1, 2);
        assert_eq!(w1, w2);
    }

    #[test]
    fn pair_splitting_is_bracketed_and_shrinks_with_h() {
        let pot = quartic();
        let well = classify_wells(&pot, -1.0).unwrap();
        let mut prev_lower = f64::INFINITY;
        for step in 0..3 {
            let h = 0.2 / 1.2f64.powi(step);
            let params = SpectralParams::new(h, 0.0).unwrap();
            let window = Rectangle::new(c(-1.06, 0.0), 0.08, 0.03).unwrap();
            let lvl = bs_levels(&pot, &params, &window, WellSide::Left, &well).unwrap();
            let e0 = lvl[0].e;
            let tp = turning_points(&pot, e0, 0.0, &well).unwrap();
            let j = crate::actions::action_j(&pot, &tp, 128).unwrap().re;
            let didev = di_de(&pot, WellSide::Left, &tp, 128).unwrap().re;
            let predicted = h * (-j / h).exp() / didev;

            // the two zeros straddle the BS level: a box at twice the
            // predicted splitting holds both, a box at a quarter holds none
            let outer = Rectangle::new(e0, 2.0 * predicted, 2.0 * predicted).unwrap();
            let inner = Rectangle::new(e0, 0.25 * predicted, 0.25 * predicted).unwrap();
            assert_eq!(winding_in(&pot, &params, &well, &outer).unwrap(), 2, "h={h}");
            assert_eq!(winding_in(&pot, &params, &well, &inner).unwrap(), 0, "h={h}");

            // monotone decrease: this h's upper bracket sits below the
            // previous h's lower bracket
            assert!(4.0 * predicted < prev_lower, "h={h}");
            prev_lower = 0.5 * predicted;
        }
    }
}
