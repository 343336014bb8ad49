//! Discrete canonical maps of the plane.
//!
//! A map is generated by a discrete Hamiltonian `H(q_i, p_{i+1}, K)` through
//! the implicit system
//!
//! ```text
//! p_{i+1} = p_i     - dH/dq(q_i, p_{i+1}, K)
//! q_{i+1} = q_i     + dH/dp(q_i, p_{i+1}, K)
//! ```
//!
//! The standard map is the case `H = p'^2/2 + K cos q`, for which the system
//! is explicit. All coordinates are kept on the lift (unwrapped); reduction to
//! the torus `[-pi, pi) x [0, 2pi)` is only a view.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Point of the lifted phase plane, ordered `(q, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "non-finite phase point ({}, {})",
                self.q, self.p
            )))
        }
    }
}

/// The stochasticity parameter `K`; finite and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Stochasticity(f64);

impl Stochasticity {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k >= 0.0 {
            Ok(Self(k))
        } else {
            Err(Error::Domain(format!(
                "stochasticity parameter must be finite and >= 0, got {k}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Stochasticity {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        Self::new(k)
    }
}

impl From<Stochasticity> for f64 {
    fn from(k: Stochasticity) -> f64 {
        k.0
    }
}

/// Real 2x2 matrix in `(q, p)` ordering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2x2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Jacobian2x2 {
    pub const IDENTITY: Self = Self::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            a11: self.a11 * rhs.a11 + self.a12 * rhs.a21,
            a12: self.a11 * rhs.a12 + self.a12 * rhs.a22,
            a21: self.a21 * rhs.a11 + self.a22 * rhs.a21,
            a22: self.a21 * rhs.a12 + self.a22 * rhs.a22,
        }
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.a11 * v.0 + self.a12 * v.1, self.a21 * v.0 + self.a22 * v.1)
    }
}

/// A discrete Hamiltonian `H(q, p_next, K)` together with the derivatives
/// needed to step the map it generates. Derivatives are supplied by the
/// implementor; nothing is differentiated symbolically.
pub trait DiscreteHamiltonian {
    fn name(&self) -> &str;
    fn h(&self, q: f64, p_next: f64, k: f64) -> f64;
    fn dh_dq(&self, q: f64, p_next: f64, k: f64) -> f64;
    fn dh_dp(&self, q: f64, p_next: f64, k: f64) -> f64;
    /// Mixed derivative `d2H/dq dp_next`, used by the implicit solver.
    fn d2h_dq_dp(&self, q: f64, p_next: f64, k: f64) -> f64;
}

/// `H = p'^2 / 2 + K cos q`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardMap;

impl DiscreteHamiltonian for StandardMap {
    fn name(&self) -> &str {
        "standard"
    }
    fn h(&self, q: f64, p_next: f64, k: f64) -> f64 {
        0.5 * p_next * p_next + k * q.cos()
    }
    fn dh_dq(&self, q: f64, _p_next: f64, k: f64) -> f64 {
        -(k * q.sin())
    }
    fn dh_dp(&self, _q: f64, p_next: f64, _k: f64) -> f64 {
        p_next
    }
    fn d2h_dq_dp(&self, _q: f64, _p_next: f64, _k: f64) -> f64 {
        0.0
    }
}

/// Unchecked standard-map step on raw coordinates; the hot loop everywhere.
#[inline(always)]
pub(crate) fn step_raw(q: f64, p: f64, k: f64) -> (f64, f64) {
    let p = p + k * q.sin();
    (q + p, p)
}

pub fn step_standard(x: PhasePoint, k: Stochasticity) -> Result<PhasePoint> {
    x.check()?;
    let (q, p) = step_raw(x.q, x.p, k.get());
    Ok(PhasePoint { q, p })
}

const IMPLICIT_TOL: f64 = 1e-13;
const IMPLICIT_MAX_NEWTON: usize = 50;
const IMPLICIT_MAX_BISECT: usize = 200;

/// One step of the map generated by `map`, solving the implicit equation for
/// `p'` by Newton with a bisection fallback.
pub fn step_canonical<H: DiscreteHamiltonian + ?Sized>(
    x: PhasePoint,
    map: &H,
    k: Stochasticity,
) -> Result<PhasePoint> {
    x.check()?;
    let k = k.get();
    let (q, p) = (x.q, x.p);
    let residual = |pn: f64| pn - p + map.dh_dq(q, pn, k);
    // absolute below |p| = 1, relative above; the residual cannot beat ulp(p)
    let tol = IMPLICIT_TOL * p.abs().max(1.0);

    let mut pn = p;
    let mut last_res = f64::INFINITY;
    let mut solved = None;
    for _ in 0..IMPLICIT_MAX_NEWTON {
        let r = residual(pn);
        last_res = r;
        if !r.is_finite() {
            break;
        }
        if r.abs() <= tol {
            solved = Some(pn);
            break;
        }
        let dr = 1.0 + map.d2h_dq_dp(q, pn, k);
        if dr == 0.0 || !dr.is_finite() {
            break;
        }
        pn -= r / dr;
    }

    let pn = match solved {
        Some(v) => v,
        None => bisect_implicit(&residual, p, tol).ok_or(Error::Solver {
            last: pn,
            residual: last_res,
        })?,
    };
    let qn = q + map.dh_dp(q, pn, k);
    if !qn.is_finite() {
        return Err(Error::Solver {
            last: pn,
            residual: last_res,
        });
    }
    Ok(PhasePoint { q: qn, p: pn })
}

fn bisect_implicit(f: &impl Fn(f64) -> f64, center: f64, tol: f64) -> Option<f64> {
    let mut width = 1e-3_f64.max(center.abs() * 1e-3);
    let (mut lo, mut hi);
    loop {
        lo = center - width;
        hi = center + width;
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
            break;
        }
        width *= 2.0;
        if width > 1e8 {
            return None;
        }
    }
    let mut flo = f(lo);
    for _ in 0..IMPLICIT_MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= tol || mid == lo || mid == hi {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[inline(always)]
pub(crate) fn tangent_raw(q: f64, k: f64) -> Jacobian2x2 {
    let c = k * q.cos();
    Jacobian2x2::new(1.0 + c, 1.0, c, 1.0)
}

/// Linearisation of the standard map at `x`.
pub fn tangent_step(x: PhasePoint, k: Stochasticity) -> Result<Jacobian2x2> {
    x.check()?;
    Ok(tangent_raw(x.q, k.get()))
}

pub fn symplecticity_check(x: PhasePoint, k: Stochasticity) -> Result<f64> {
    Ok((tangent_step(x, k)?.det() - 1.0).abs())
}

/// Wraps `q` into `[-pi, pi)` and `p` into `[0, 2pi)`. Points already in the
/// fundamental domain are returned unchanged, so the reduction is idempotent.
pub fn reduce_to_torus(x: PhasePoint) -> PhasePoint {
    PhasePoint {
        q: wrap_q(x.q),
        p: wrap_p(x.p),
    }
}

pub(crate) fn wrap_q(q: f64) -> f64 {
    if (-PI..PI).contains(&q) {
        return q;
    }
    let mut r = (q + PI).rem_euclid(TAU);
    if r >= TAU {
        r = 0.0;
    }
    let out = r - PI;
    if out >= PI {
        -PI
    } else {
        out
    }
}

pub(crate) fn wrap_p(p: f64) -> f64 {
    if (0.0..TAU).contains(&p) {
        return p;
    }
    let r = p.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest angular separation, in `[0, pi]`.
pub fn angular_separation(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

/// Euclidean distance on the torus: componentwise shortest angular
/// separation, then the 2-norm.
pub fn torus_distance(a: PhasePoint, b: PhasePoint) -> f64 {
    angular_separation(a.q, b.q).hypot(angular_separation(a.p, b.p))
}

/// Iterates the standard map, returning `steps + 1` points starting at `x0`.
pub fn trajectory(x0: PhasePoint, k: Stochasticity, steps: usize) -> Result<Vec<PhasePoint>> {
    x0.check()?;
    let k = k.get();
    let mut out = Vec::with_capacity(steps + 1);
    let (mut q, mut p) = (x0.q, x0.p);
    out.push(x0);
    for _ in 0..steps {
        (q, p) = step_raw(q, p, k);
        out.push(PhasePoint { q, p });
    }
    Ok(out)
}

/// Discrete action `sum_i [(q_{i+1} - q_i) p_{i+1} - H(q_i, p_{i+1}, K)]`.
pub fn action<H: DiscreteHamiltonian + ?Sized>(
    traj: &[PhasePoint],
    map: &H,
    k: Stochasticity,
) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::Domain("action needs at least two points".into()));
    }
    let k = k.get();
    Ok(traj
        .windows(2)
        .map(|w| (w[1].q - w[0].q) * w[1].p - map.h(w[0].q, w[1].p, k))
        .sum())
}

/// Residual of the discrete Euler-Lagrange equations at every interior index:
/// the larger of `|(q_{i+1} - q_i) - dH/dp|` and `|(p_i - p_{i+1}) - dH/dq|`,
/// both evaluated at `(q_i, p_{i+1})`.
pub fn euler_lagrange_residual<H: DiscreteHamiltonian + ?Sized>(
    traj: &[PhasePoint],
    map: &H,
    k: Stochasticity,
) -> Result<Vec<f64>> {
    if traj.len() < 3 {
        return Err(Error::Domain(
            "Euler-Lagrange residual needs at least three points".into(),
        ));
    }
    let k = k.get();
    Ok((1..traj.len() - 1)
        .map(|i| {
            let (cur, next) = (traj[i], traj[i + 1]);
            let r_q = (next.q - cur.q) - map.dh_dp(cur.q, next.p, k);
            let r_p = (cur.p - next.p) - map.dh_dq(cur.q, next.p, k);
            r_q.abs().max(r_p.abs())
        })
        .collect())
}
