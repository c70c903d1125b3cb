//! Shared numerical kernels: Aberth–Ehrlich polynomial roots, damped Newton,
//! Gauss–Chebyshev quadrature rules, fixed-step RK4, and argument-principle
//! winding counts on rectangles.
//!
//! Everything here is pure and allocation-light; the physics modules build on
//! these kernels but the kernels know nothing about potentials or spectra.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial with complex coefficients stored in ascending degree order.
///
/// Trailing zero coefficients are trimmed on construction so the leading
/// coefficient is nonzero (the zero polynomial keeps a single zero entry).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolynomial {
    coeffs: Vec<Complex64>,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        ComplexPolynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn derivative(&self) -> ComplexPolynomial {
        if self.coeffs.len() <= 1 {
            return ComplexPolynomial::new(vec![Complex64::new(0.0, 0.0)]);
        }
        ComplexPolynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Residual scale for root acceptance: max|coeff| · max(1,|z|)^deg.
    pub fn scale_at(&self, z: Complex64) -> f64 {
        let cmax = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        cmax * z.norm().max(1.0).powi(self.degree() as i32)
    }

    /// Synthetic division by (z - r); returns the quotient, discarding the
    /// (small, when r is a root) remainder.
    pub fn deflate(&self, r: Complex64) -> ComplexPolynomial {
        let n = self.coeffs.len();
        if n <= 1 {
            return ComplexPolynomial::new(vec![Complex64::new(0.0, 0.0)]);
        }
        let mut q = vec![Complex64::new(0.0, 0.0); n - 1];
        let mut acc = self.coeffs[n - 1];
        for k in (0..n - 1).rev() {
            q[k] = acc;
            acc = self.coeffs[k] + acc * r;
        }
        ComplexPolynomial::new(q)
    }
}

/// Finds all roots (with multiplicity) by Aberth–Ehrlich simultaneous iteration.
///
/// Roots at the origin are deflated analytically first so the initial-guess
/// circle radius (|a0|/|a_deg|)^(1/deg) is always well defined. Each returned
/// root z satisfies |p(z)| <= tol·scale(p, z); output is sorted by (re, im).
pub fn poly_roots(p: &ComplexPolynomial, tol: f64) -> Result<Vec<Complex64>> {
    let deg = p.degree();
    if deg == 0 {
        return Err(Error::DegreeZero);
    }
    let mut zero_count = 0;
    while zero_count < deg && p.coeffs()[zero_count].norm() == 0.0 {
        zero_count += 1;
    }
    let reduced = ComplexPolynomial::new(p.coeffs()[zero_count..].to_vec());
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_count];
    let n = reduced.degree();
    if n == 0 {
        return Ok(roots);
    }

    let dp = reduced.derivative();
    let a0 = reduced.coeffs()[0].norm();
    let an = reduced.coeffs()[n].norm();
    let radius = (a0 / an).powf(1.0 / n as f64);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.45;
            Complex64::from_polar(radius, th)
        })
        .collect();

    let converged = |zi: Complex64| reduced.eval(zi).norm() <= tol * reduced.scale_at(zi);
    let mut ok = false;
    for _ in 0..200 {
        if z.iter().all(|&zi| converged(zi)) {
            ok = true;
            break;
        }
        let snapshot = z.clone();
        for i in 0..n {
            let zi = snapshot[i];
            let pi = reduced.eval(zi);
            if pi.norm() <= tol * reduced.scale_at(zi) {
                continue;
            }
            let di = dp.eval(zi);
            if di.norm() < 1e-300 {
                // sitting on a critical point: nudge off it instead of dividing
                z[i] = zi + Complex64::from_polar(1e-8 * (radius + zi.norm()), 0.7);
                continue;
            }
            let ri = pi / di;
            let mut s = Complex64::new(0.0, 0.0);
            let mut collided = false;
            for j in 0..n {
                if j != i {
                    let dz = zi - snapshot[j];
                    if dz.norm() < 1e-300 {
                        collided = true;
                        break;
                    }
                    s += 1.0 / dz;
                }
            }
            if collided {
                z[i] = zi + Complex64::from_polar(1e-8 * (radius + zi.norm()), 1.3);
                continue;
            }
            let denom = 1.0 - ri * s;
            let w = if denom.norm() < 1e-300 { ri } else { ri / denom };
            z[i] = zi - w;
        }
    }
    if !ok && !z.iter().all(|&zi| converged(zi)) {
        return Err(Error::NoConvergence { context: "poly_roots" });
    }
    roots.extend(z);
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Newton's method with step-halving damping (up to 40 halvings per step).
///
/// `f` returns the value and derivative at a point. Fails with
/// `DerivativeUnderflow` if the derivative vanishes at an iterate (e.g. the
/// seed sits exactly on a multiple root) and `NoConvergence` after `max_iter`.
pub fn newton_refine<F>(f: F, seed: Complex64, tol: f64, max_iter: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> (Complex64, Complex64),
{
    let mut z = seed;
    let (mut fz, mut dz) = f(z);
    for _ in 0..max_iter {
        if dz.norm() < 1e-300 {
            return Err(Error::DerivativeUnderflow);
        }
        if fz.norm() <= tol {
            return Ok(z);
        }
        let step = fz / dz;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = z - step * lambda;
            let (fc, dc) = f(cand);
            if fc.norm() < fz.norm() {
                z = cand;
                fz = fc;
                dz = dc;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // flat landscape around the iterate; accept only if already there
            if fz.norm() <= tol {
                return Ok(z);
            }
            return Err(Error::NoConvergence { context: "newton_refine" });
        }
    }
    if fz.norm() <= tol {
        Ok(z)
    } else {
        Err(Error::NoConvergence { context: "newton_refine" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    ChebyshevFirst,
    ChebyshevSecond,
}

/// Gauss–Chebyshev rule: nodes in (-1, 1) ascending, weights matching.
///
/// First kind absorbs the weight 1/√(1-s²), second kind √(1-s²); both are
/// exact for polynomial integrands up to degree 2n-1 against their weight.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn chebyshev_rule(kind: RuleKind, n: usize) -> QuadratureRule {
    assert!(n >= 1, "chebyshev_rule needs at least one node");
    let pi = std::f64::consts::PI;
    let (mut nodes, mut weights): (Vec<f64>, Vec<f64>) = match kind {
        RuleKind::ChebyshevFirst => (1..=n)
            .map(|j| (((2 * j - 1) as f64) * pi / (2.0 * n as f64)).cos())
            .map(|x| (x, pi / n as f64))
            .unzip(),
        RuleKind::ChebyshevSecond => (1..=n)
            .map(|j| {
                let th = j as f64 * pi / (n as f64 + 1.0);
                (th.cos(), pi / (n as f64 + 1.0) * th.sin().powi(2))
            })
            .unzip(),
    };
    nodes.reverse();
    weights.reverse();
    QuadratureRule { kind, nodes, weights }
}

/// Axis-aligned search window in the complex plane.
#[derive(Debug, Clone, Copy)]
pub struct Rectangle {
    pub center: Complex64,
    pub half_width: f64,
    pub half_height: f64,
}

impl Rectangle {
    pub fn new(center: Complex64, half_width: f64, half_height: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_height > 0.0) {
            return Err(Error::Config(format!(
                "rectangle half-sizes must be positive (got {half_width}, {half_height})"
            )));
        }
        Ok(Rectangle { center, half_width, half_height })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z.re - self.center.re).abs() <= self.half_width
            && (z.im - self.center.im).abs() <= self.half_height
    }

    /// Corners in counterclockwise order starting bottom-left.
    pub fn corners(&self) -> [Complex64; 4] {
        let c = self.center;
        let w = self.half_width;
        let h = self.half_height;
        [
            c + Complex64::new(-w, -h),
            c + Complex64::new(w, -h),
            c + Complex64::new(w, h),
            c + Complex64::new(-w, h),
        ]
    }
}

/// Counts zeros of `f` inside `rect` by the argument principle.
///
/// Accumulates phase differences along the boundary, bisecting any segment
/// whose phase jump reaches π/2. A boundary sample with |f| below
/// 1e-13·(median boundary |f|) aborts with `BoundaryZeroSuspected`.
pub fn winding_count<F>(f: F, rect: &Rectangle, samples_per_side: usize) -> Result<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    assert!(samples_per_side >= 64, "winding_count needs >= 64 samples per side");
    let corners = rect.corners();
    let mut pts = Vec::with_capacity(4 * samples_per_side);
    for k in 0..4 {
        let a = corners[k];
        let b = corners[(k + 1) % 4];
        for j in 0..samples_per_side {
            let t = j as f64 / samples_per_side as f64;
            pts.push(a + (b - a) * t);
        }
    }
    let vals: Vec<Complex64> = pts.iter().map(|&z| f(z)).collect();
    let mut mags: Vec<f64> = vals.iter().map(|v| v.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let floor = 1e-13 * median;
    if mags[0] < floor {
        return Err(Error::BoundaryZeroSuspected);
    }

    fn seg<F>(
        f: &F,
        z1: Complex64,
        f1: Complex64,
        z2: Complex64,
        f2: Complex64,
        floor: f64,
        depth: usize,
    ) -> Result<f64>
    where
        F: Fn(Complex64) -> Complex64,
    {
        let d = (f2 / f1).arg();
        if d.abs() < std::f64::consts::FRAC_PI_2 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(Error::BoundaryZeroSuspected);
        }
        let zm = (z1 + z2) * 0.5;
        let fm = f(zm);
        if fm.norm() < floor {
            return Err(Error::BoundaryZeroSuspected);
        }
        Ok(seg(f, z1, f1, zm, fm, floor, depth - 1)?
            + seg(f, zm, fm, z2, f2, floor, depth - 1)?)
    }

    let n = pts.len();
    let mut total = 0.0;
    for k in 0..n {
        let (z1, f1) = (pts[k], vals[k]);
        let (z2, f2) = (pts[(k + 1) % n], vals[(k + 1) % n]);
        total += seg(&f, z1, f1, z2, f2, floor, 46)?;
    }
    let w = total / (2.0 * std::f64::consts::PI);
    let rounded = w.round();
    if (w - rounded).abs() > 0.1 {
        return Err(Error::BoundaryZeroSuspected);
    }
    Ok(rounded as i64)
}

/// One fixed-step RK4 step for a first-order system over complex state.
pub fn rk4_step<const N: usize, F>(f: &F, y: &[Complex64; N], ds: f64) -> [Complex64; N]
where
    F: Fn(&[Complex64; N]) -> [Complex64; N],
{
    let add = |a: &[Complex64; N], b: &[Complex64; N], s: f64| {
        let mut out = *a;
        for i in 0..N {
            out[i] += b[i] * s;
        }
        out
    };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * ds));
    let k3 = f(&add(y, &k2, 0.5 * ds));
    let k4 = f(&add(y, &k3, ds));
    let mut out = *y;
    for i in 0..N {
        out[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (ds / 6.0);
    }
    out
}
