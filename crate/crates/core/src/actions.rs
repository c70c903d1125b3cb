//! Action integrals over the well and barrier segments and their parameter
//! derivatives, by Gauss–Chebyshev quadrature after factoring out the
//! square-root endpoint behavior.
//!
//! Every integrand is a branch of a square root. The branch is pinned the
//! same way throughout: walk the value continuously along the node sequence,
//! and tie the segment-midpoint value to the real-parameter configuration
//! (where each integral is real and positive) by a short homotopy in (E, eps).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{chebyshev_rule, ComplexPolynomial, RuleKind};
use crate::potential::{PerturbedPotential, WellStructure};
use crate::turning::{continue_from, turning_points, TurningPoints};

/// Which well an action integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Well(WellSide),
    Barrier,
}

impl Segment {
    fn endpoints(self, tp: &TurningPoints) -> (Complex64, Complex64) {
        match self {
            Segment::Well(WellSide::Left) => (tp.alpha_l, tp.beta_l),
            Segment::Well(WellSide::Right) => (tp.alpha_r, tp.beta_r),
            Segment::Barrier => (tp.beta_l, tp.beta_r),
        }
    }

    /// Sign s so that the radicand is s·(V_eps - E)/((t-a)(b-t)):
    /// wells integrate sqrt(E - V), the barrier sqrt(V - E).
    fn direct_sign(self) -> f64 {
        match self {
            Segment::Well(_) => -1.0,
            Segment::Barrier => 1.0,
        }
    }
}

/// Radicand evaluator on one segment at fixed (E, eps): the smooth factor G
/// with (t-a)(b-t) divided out, switching to the deflated polynomial near
/// the endpoints where the direct quotient loses accuracy.
struct Radicand {
    p: ComplexPolynomial,
    deflated: ComplexPolynomial,
    a: Complex64,
    b: Complex64,
    sign: f64,
    near: f64,
}

impl Radicand {
    fn new(pot: &PerturbedPotential, e: Complex64, eps: f64, a: Complex64, b: Complex64, sign: f64) -> Self {
        let p = pot.v_minus_e_poly(e, eps);
        let deflated = p.deflate(a).deflate(b);
        let near = 1e-3 * (b - a).norm();
        Radicand { p, deflated, a, b, sign, near }
    }

    fn eval(&self, t: Complex64) -> Complex64 {
        let da = (t - self.a).norm();
        let db = (self.b - t).norm();
        if da < self.near || db < self.near {
            // p = (t-a)(t-b)·deflated and (t-a)(b-t) = -(t-a)(t-b)
            -self.sign * self.deflated.eval(t)
        } else {
            self.sign * self.p.eval(t) / ((t - self.a) * (self.b - t))
        }
    }
}

/// Square root continued from `prev`: picks the branch nearer the previous
/// value and rejects a genuine jump (radicand through zero).
fn continued_sqrt(raw: Complex64, prev: Complex64) -> Result<Complex64> {
    if raw.norm() < 1e-280 {
        return Err(Error::BranchJump);
    }
    let s = raw.sqrt();
    let cand = if (s - prev).norm() <= (s + prev).norm() { s } else { -s };
    // consecutive continued values must stay within a quarter turn
    if cand.re * prev.re + cand.im * prev.im < 0.0 {
        return Err(Error::BranchJump);
    }
    Ok(cand)
}

const HOMOTOPY_STEPS: usize = 8;

/// The branch of sqrt(G) at the segment midpoint, anchored to the positive
/// real value it takes at the real parameter point (Re E, 0) and continued
/// along a straight homotopy in (E, eps).
fn midpoint_anchor(
    pot: &PerturbedPotential,
    tp: &TurningPoints,
    seg: Segment,
) -> Result<Complex64> {
    let g_mid = |t: &TurningPoints| {
        let (a, b) = seg.endpoints(t);
        Radicand::new(pot, t.e, t.eps, a, b, seg.direct_sign()).eval((a + b) * 0.5)
    };
    let positive_root = |g: Complex64| -> Result<Complex64> {
        if g.re > 0.0 && g.im.abs() <= 1e-8 * g.re {
            Ok(Complex64::new(g.re.sqrt(), 0.0))
        } else {
            Err(Error::BranchJump)
        }
    };

    if tp.e.im == 0.0 && tp.eps == 0.0 {
        return positive_root(g_mid(tp));
    }
    let path: Vec<(Complex64, f64)> = (0..HOMOTOPY_STEPS)
        .rev()
        .map(|k| {
            let f = k as f64 / HOMOTOPY_STEPS as f64;
            (Complex64::new(tp.e.re, tp.e.im * f), tp.eps * f)
        })
        .collect();
    let stations = continue_from(pot, tp, &path)?;
    let mut val = positive_root(g_mid(stations.last().expect("path is non-empty")))?;
    for t in stations.iter().rev().skip(1) {
        val = continued_sqrt(g_mid(t), val)?;
    }
    continued_sqrt(g_mid(tp), val)
}

/// sqrt(G) at the mapped quadrature nodes, branch-continued outward from the
/// node nearest the midpoint (whose sign comes from the homotopy anchor).
fn sqrt_g_at_nodes(
    pot: &PerturbedPotential,
    tp: &TurningPoints,
    seg: Segment,
    nodes: &[f64],
) -> Result<(Vec<Complex64>, Complex64, Complex64)> {
    let (a, b) = seg.endpoints(tp);
    let rad = Radicand::new(pot, tp.e, tp.eps, a, b, seg.direct_sign());
    let d = (b - a) * 0.5;
    let m = (a + b) * 0.5;
    let anchor = midpoint_anchor(pot, tp, seg)?;

    let g: Vec<Complex64> = nodes.iter().map(|&s| rad.eval(m + d * s)).collect();
    let j0 = nodes
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.abs().total_cmp(&y.abs()))
        .map(|(j, _)| j)
        .expect("quadrature rule has nodes");

    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    out[j0] = continued_sqrt(g[j0], anchor)?;
    for j in j0 + 1..g.len() {
        out[j] = continued_sqrt(g[j], out[j - 1])?;
    }
    for j in (0..j0).rev() {
        out[j] = continued_sqrt(g[j], out[j + 1])?;
    }
    Ok((out, d, m))
}

/// Well action I = ∫ sqrt(E - V_eps) between the labeled well endpoints,
/// evaluated as ((b-a)/2)²·Σ w_j·sqrt(G(t_j)) under the second-kind rule.
pub fn action_i(
    pot: &PerturbedPotential,
    side: WellSide,
    tp: &TurningPoints,
    n: usize,
) -> Result<Complex64> {
    assert!(n >= 16, "need at least 16 quadrature nodes");
    let seg = Segment::Well(side);
    let rule = chebyshev_rule(RuleKind::ChebyshevSecond, n);
    let (sq, d, _) = sqrt_g_at_nodes(pot, tp, seg, &rule.nodes)?;
    let sum: Complex64 = rule.weights.iter().zip(&sq).map(|(&w, s)| w * s).sum();
    Ok(d * d * sum)
}

/// Barrier action J = ∫ sqrt(V_eps - E) between the inner turning points.
pub fn action_j(pot: &PerturbedPotential, tp: &TurningPoints, n: usize) -> Result<Complex64> {
    assert!(n >= 16, "need at least 16 quadrature nodes");
    let rule = chebyshev_rule(RuleKind::ChebyshevSecond, n);
    let (sq, d, _) = sqrt_g_at_nodes(pot, tp, Segment::Barrier, &rule.nodes)?;
    let sum: Complex64 = rule.weights.iter().zip(&sq).map(|(&w, s)| w * s).sum();
    Ok(d * d * sum)
}

/// Energy derivative of the well action, ½∫(E - V_eps)^(-1/2); the segment
/// half-width cancels against the first-kind weight, leaving ½·Σ w_j/sqrt(G).
pub fn di_de(
    pot: &PerturbedPotential,
    side: WellSide,
    tp: &TurningPoints,
    n: usize,
) -> Result<Complex64> {
    assert!(n >= 16, "need at least 16 quadrature nodes");
    let rule = chebyshev_rule(RuleKind::ChebyshevFirst, n);
    let (sq, _, _) = sqrt_g_at_nodes(pot, tp, Segment::Well(side), &rule.nodes)?;
    let sum: Complex64 = rule.weights.iter().zip(&sq).map(|(&w, s)| w / s).sum();
    Ok(sum * 0.5)
}

/// Perturbation derivative of the well action, (1/2i)∫(E - V_eps)^(-1/2)·W.
pub fn di_deps(
    pot: &PerturbedPotential,
    side: WellSide,
    tp: &TurningPoints,
    n: usize,
) -> Result<Complex64> {
    assert!(n >= 16, "need at least 16 quadrature nodes");
    let rule = chebyshev_rule(RuleKind::ChebyshevFirst, n);
    let seg = Segment::Well(side);
    let (sq, d, m) = sqrt_g_at_nodes(pot, tp, seg, &rule.nodes)?;
    let sum: Complex64 = rule
        .weights
        .iter()
        .zip(rule.nodes.iter())
        .zip(&sq)
        .map(|((&w, &s), sg)| w * pot.eval_w(m + d * s) / sg)
        .sum();
    Ok(sum * Complex64::new(0.0, -0.5)) // 1/(2i) = -i/2
}

/// Energy derivative of the barrier action, -½∫(V_eps - E)^(-1/2).
pub fn dj_de(pot: &PerturbedPotential, tp: &TurningPoints, n: usize) -> Result<Complex64> {
    assert!(n >= 16, "need at least 16 quadrature nodes");
    let rule = chebyshev_rule(RuleKind::ChebyshevFirst, n);
    let (sq, _, _) = sqrt_g_at_nodes(pot, tp, Segment::Barrier, &rule.nodes)?;
    let sum: Complex64 = rule.weights.iter().zip(&sq).map(|(&w, s)| w / s).sum();
    Ok(sum * -0.5)
}

/// All actions and derivatives at one parameter point.
#[derive(Debug, Clone, Copy)]
pub struct ActionSet {
    pub i_l: Complex64,
    pub i_r: Complex64,
    pub j: Complex64,
    /// d I_left / dE
    pub dil_de: Complex64,
    /// d I_right / dE
    pub dir_de: Complex64,
    /// d I_left / d eps
    pub dil_deps: Complex64,
    /// d I_right / d eps
    pub dir_deps: Complex64,
    /// d J / dE
    pub dj_de: Complex64,
    pub e: Complex64,
    pub eps: f64,
    pub n_nodes: usize,
    /// turning-point residual carried through from the root solve
    pub residual: f64,
}

/// Computes the turning points at (E, eps) and bundles the five integrals.
pub fn action_set(
    pot: &PerturbedPotential,
    e: Complex64,
    eps: f64,
    well: &WellStructure,
    n: usize,
) -> Result<ActionSet> {
    let tp = turning_points(pot, e, eps, well)?;
    Ok(ActionSet {
        i_l: action_i(pot, WellSide::Left, &tp, n)?,
        i_r: action_i(pot, WellSide::Right, &tp, n)?,
        j: action_j(pot, &tp, n)?,
        dil_de: di_de(pot, WellSide::Left, &tp, n)?,
        dir_de: di_de(pot, WellSide::Right, &tp, n)?,
        dil_deps: di_deps(pot, WellSide::Left, &tp, n)?,
        dir_deps: di_deps(pot, WellSide::Right, &tp, n)?,
        dj_de: dj_de(pot, &tp, n)?,
        e,
        eps,
        n_nodes: n,
        residual: tp.residual,
    })
}
