//! Stokes geometry around simple turning points.
//!
//! A turning point is a simple zero of V_eps(z) − E. With the phase
//! φ(z) = ∫ (V_eps(t) − E)^{1/2} dt accumulated along a curve, two
//! level-curve families organise the complex plane:
//!
//! * [`StokesKind::Stokes`] — level curves of Re φ,
//! * [`StokesKind::AntiStokes`] — level curves of Im φ.
//!
//! Under this convention a classically allowed stretch of the real axis
//! (V_eps − E < 0, root imaginary) belongs to the Stokes family and a
//! barrier stretch (V_eps − E > 0, root real) to the anti-Stokes family.
//! Exactly three curves of each family leave every simple turning point,
//! at mutual angles of 2π/3. CLI output repeats the convention so plots
//! are unambiguous.

use std::cell::Cell;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{poly_roots, rk4_step, ComplexPolynomial, Rectangle};
use crate::potential::PerturbedPotential;

/// Level-curve family selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StokesKind {
    /// Level curves of Re φ.
    Stokes,
    /// Level curves of Im φ.
    AntiStokes,
}

impl StokesKind {
    /// Stable lowercase label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            StokesKind::Stokes => "stokes",
            StokesKind::AntiStokes => "anti-stokes",
        }
    }

    /// The component of φ that is conserved along curves of this family.
    fn level(self, phi: Complex64) -> f64 {
        match self {
            StokesKind::Stokes => phi.re,
            StokesKind::AntiStokes => phi.im,
        }
    }

    /// Unit tangent induced by the continued root w = (V_eps − E)^{1/2}:
    /// the direction of i/w keeps Re φ frozen, the direction of 1/w
    /// keeps Im φ frozen.
    fn tangent(self, w: Complex64) -> Complex64 {
        let t = w.conj() / w.norm();
        match self {
            StokesKind::Stokes => Complex64::i() * t,
            StokesKind::AntiStokes => t,
        }
    }
}

/// One traced level curve.
#[derive(Clone, Debug)]
pub struct StokesCurve {
    /// Turning point the curve emanates from.
    pub origin: Complex64,
    /// Family the curve belongs to.
    pub kind: StokesKind,
    /// Position of the curve among the three seed directions of its
    /// family at `origin`, in ascending-angle order.
    pub branch_index: usize,
    /// Vertices, starting at the seed point just off `origin`.
    pub points: Vec<Complex64>,
    /// Worst excursion of the conserved component of φ along the curve.
    pub phi_drift: f64,
}

impl StokesCurve {
    /// Total polyline length.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|s| (s[1] - s[0]).norm()).sum()
    }
}

const SEED_SAMPLES: usize = 720;
const SEED_BISECT_TOL: f64 = 1e-10;

/// Roots of `p` with the one representing `tp` itself removed.
fn other_roots(p: &ComplexPolynomial, tp: Complex64) -> Result<Vec<Complex64>> {
    let mut roots = poly_roots(p, 1e-12)?;
    if let Some(own) = (0..roots.len())
        .min_by(|&i, &j| (roots[i] - tp).norm().total_cmp(&(roots[j] - tp).norm()))
    {
        roots.remove(own);
    }
    Ok(roots)
}

/// Locates the directions in which level curves of `kind` cross a circle
/// of radius `r0` around `tp`.
///
/// Works on ψ(z) = (z − tp)²·rad(z), which is single-valued and
/// proportional to φ² near a simple turning point, so no square-root
/// branch needs tracking. Zeros of Im ψ on the circle mark both families
/// at once — six crossings for a simple point — and the sign of Re ψ
/// separates them: Re ψ < 0 means Re φ = 0 (Stokes), Re ψ > 0 means
/// Im φ = 0 (anti-Stokes).
fn seed_angles_on_circle(
    rad: &dyn Fn(Complex64) -> Complex64,
    tp: Complex64,
    r0: f64,
    kind: StokesKind,
) -> Result<[f64; 3]> {
    let psi = |theta: f64| {
        let d = Complex64::from_polar(r0, theta);
        d * d * rad(tp + d)
    };
    // half-sample offset keeps symmetric configurations from landing
    // samples exactly on a zero
    let dt = TAU / SEED_SAMPLES as f64;
    let sample = |j: usize| (j as f64 + 0.5) * dt;
    let mut vals = Vec::with_capacity(SEED_SAMPLES);
    for j in 0..SEED_SAMPLES {
        let mut v = psi(sample(j)).im;
        if v == 0.0 {
            v = psi(sample(j) + 1e-4 * dt).im;
        }
        vals.push(v);
    }

    let mut crossings = Vec::new();
    for j in 0..SEED_SAMPLES {
        if vals[j] * vals[(j + 1) % SEED_SAMPLES] < 0.0 {
            crossings.push((sample(j), sample(j) + dt));
        }
    }
    if crossings.len() != 6 {
        return Err(Error::SeedCountMismatch { expected: 6, found: crossings.len() });
    }

    let mut of_kind = Vec::new();
    for &(start, end) in &crossings {
        let (mut lo, mut hi) = (start, end);
        let mut flo = psi(lo).im;
        while hi - lo > SEED_BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            let fmid = psi(mid).im;
            if flo * fmid <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fmid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let stokes_here = psi(theta).re < 0.0;
        if stokes_here == (kind == StokesKind::Stokes) {
            of_kind.push(theta.rem_euclid(TAU));
        }
    }
    if of_kind.len() != 3 {
        return Err(Error::SeedCountMismatch { expected: 3, found: of_kind.len() });
    }
    of_kind.sort_by(f64::total_cmp);
    Ok([of_kind[0], of_kind[1], of_kind[2]])
}

/// Finds the three directions in which curves of `kind` leave the
/// turning point `tp`, as angles in [0, 2π) sorted ascending.
///
/// The probe circle radius adapts to the distance from `tp` to the
/// nearest other root of V_eps − E, keeping the local linear model
/// accurate at the crossings. Fails with [`Error::SeedCountMismatch`]
/// when the circle does not show the six level crossings of a simple
/// turning point — at a double root, say, or when `tp` is not a root
/// at all.
pub fn seed_angles(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    tp: Complex64,
    kind: StokesKind,
) -> Result<[f64; 3]> {
    let p = pot.v_minus_e_poly(e, eps);
    let nearest = other_roots(&p, tp)?
        .iter()
        .map(|z| (z - tp).norm())
        .fold(f64::INFINITY, f64::min);
    let r0 = if nearest.is_finite() {
        (1e-2 * nearest).max(1e-12 * (1.0 + tp.norm()))
    } else {
        1e-2 * tp.norm().max(1.0)
    };
    seed_angles_on_circle(&|z| p.eval(z), tp, r0, kind)
}

/// The square root of `val` lying nearer to `prev`.
fn continued_root(val: Complex64, prev: Complex64) -> Result<Complex64> {
    let s = val.sqrt();
    if 2.0 * s.norm() < 1e-12 {
        return Err(Error::BranchAmbiguity);
    }
    Ok(if (s - prev).norm() <= (s + prev).norm() { s } else { -s })
}

/// Unit-speed RK4 trace of one level curve of `rad`.
///
/// State is (z, φ) with φ accumulated from `start`; the conserved
/// component of φ is reported as the drift. `heading` resolves the ±
/// root ambiguity at the start: the initial tangent is taken with a
/// positive projection onto it.
///
/// This is the engine behind [`trace_stokes`], exposed for model problems
/// where `rad` is not a potential: e.g. `rad = z` reproduces the Airy
/// geometry with its three exact rays, a useful step-size calibration.
pub fn trace_level_curve(
    rad: &dyn Fn(Complex64) -> Complex64,
    kind: StokesKind,
    start: Complex64,
    heading: Complex64,
    step: f64,
    max_arc: f64,
    domain: &Rectangle,
    stop_points: &[Complex64],
) -> Result<(Vec<Complex64>, f64)> {
    let w0 = rad(start).sqrt();
    if 2.0 * w0.norm() < 1e-12 {
        return Err(Error::BranchAmbiguity);
    }
    let w0 = if (kind.tangent(w0) * heading.conj()).re >= 0.0 { w0 } else { -w0 };

    let last_w = Cell::new(w0);
    let ambiguous = Cell::new(false);
    let field = |y: &[Complex64; 2]| -> [Complex64; 2] {
        match continued_root(rad(y[0]), last_w.get()) {
            Ok(w) => {
                last_w.set(w);
                let t = kind.tangent(w);
                [t, w * t]
            }
            Err(_) => {
                ambiguous.set(true);
                [Complex64::new(0.0, 0.0); 2]
            }
        }
    };

    let mut y = [start, Complex64::new(0.0, 0.0)];
    let mut points = vec![start];
    let mut drift = 0.0f64;
    let mut arc = 0.0;
    loop {
        y = rk4_step(&field, &y, step);
        if ambiguous.get() {
            return Err(Error::BranchAmbiguity);
        }
        arc += step;
        points.push(y[0]);
        drift = drift.max(kind.level(y[1]).abs());
        let near_stop = stop_points.iter().any(|&q| (y[0] - q).norm() < 5.0 * step);
        if !domain.contains(y[0]) || near_stop || arc >= max_arc {
            break;
        }
    }
    Ok((points, drift))
}

/// Traces the level curve of `kind` leaving `tp` in direction
/// `seed_angle`.
///
/// The trace starts at tp + 10·step·e^{i·seed_angle} and integrates the
/// unit-speed field of [`StokesKind::tangent`] with fixed-step RK4, the
/// square root continued from step to step. It stops on leaving
/// `domain`, once `max_arc` is exceeded, or within 5·step of another
/// turning point. `step` must not exceed 1e−2 of the larger domain
/// half-size.
pub fn trace_stokes(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    tp: Complex64,
    kind: StokesKind,
    seed_angle: f64,
    step: f64,
    max_arc: f64,
    domain: &Rectangle,
) -> Result<StokesCurve> {
    let scale = domain.half_width.max(domain.half_height);
    if !(step > 0.0 && max_arc > 0.0) {
        return Err(Error::Config(format!(
            "trace needs positive step and max_arc (got {step}, {max_arc})"
        )));
    }
    if step > 1e-2 * scale {
        return Err(Error::Config(format!(
            "trace step {step} exceeds 1e-2 of the domain scale {scale}"
        )));
    }

    let angles = seed_angles(pot, e, eps, tp, kind)?;
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    };
    let branch_index = (0..3)
        .min_by(|&i, &j| circ(seed_angle, angles[i]).total_cmp(&circ(seed_angle, angles[j])))
        .expect("three candidate angles");

    let p = pot.v_minus_e_poly(e, eps);
    let stop_points = other_roots(&p, tp)?;
    let heading = Complex64::from_polar(1.0, seed_angle);
    let start = tp + 10.0 * step * heading;
    let (points, phi_drift) = trace_level_curve(
        &|z| p.eval(z),
        kind,
        start,
        heading,
        step,
        max_arc,
        domain,
        &stop_points,
    )?;
    Ok(StokesCurve { origin: tp, kind, branch_index, points, phi_drift })
}
