//! Periodic orbits of the standard map.
//!
//! The standard map factors into two reversing involutions,
//! `T = I1 . I0` with `I0(q, p) = (-q, p + K sin q)` and `I1(q, p) = (p - q, p)`.
//! Their fixed sets are the four symmetry lines `q = 0`, `q = pi` (for `I0`)
//! and `q = p/2`, `q = p/2 + pi` (for `I1`). A symmetric orbit of period `n`
//! crosses a second symmetry line after half a period, so finding it is a
//! one-dimensional root problem in the momentum `p` of the seed on the line.
//!
//! Orbits are followed in `K` from the integrable seeds `p = 2 pi m / n` at
//! `K = 0`, which fixes the identity of each family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::map::{step_raw, tangent_raw, torus_distance, Jacobian2x2, PhasePoint, Stochasticity};
use crate::stability;

/// `(sqrt(5) - 1) / 2`.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_8;

/// Samples of the line residual scanned before bracketing.
pub const SCAN_SAMPLES: usize = 2048;
/// Closure tolerance every returned orbit satisfies.
pub const CLOSURE_TOL: f64 = 1e-9;
/// Closure tolerance that Newton refinement aims for.
pub const REFINED_TOL: f64 = 1e-11;
const NEWTON_MAX_ITER: usize = 30;
/// Smallest step continuation will take before giving up.
pub const CONTINUATION_FLOOR: f64 = 1e-6;
/// Default maximal continuation step in `K`.
pub const DEFAULT_DK_MAX: f64 = 0.05;
// A tracked root moving further than this in one step is treated as a jump
// to another branch and the step is retried with half the size.
const MAX_PARAM_JUMP: f64 = 0.25;

/// Rotation number `m / n` in lowest terms, `0 <= m < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Convergent {
    pub m: u64,
    pub n: u64,
}

impl Convergent {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("period n must be positive".into()));
        }
        if m >= n {
            return Err(Error::Domain(format!("winding {m}/{n} must satisfy m < n")));
        }
        if gcd(m, n) != 1 {
            return Err(Error::Domain(format!("m/n not in lowest terms: {m}/{n}")));
        }
        Ok(Self { m, n })
    }

    /// The elliptic fixed point family, `0/1`.
    pub const FIXED_POINT: Self = Self { m: 0, n: 1 };

    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

impl fmt::Display for Convergent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Irrational winding number of an invariant curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KamCurveTarget {
    pub alpha: f64,
}

impl KamCurveTarget {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::Domain(format!(
                "target winding must lie in (0, 1), got {alpha}"
            )))
        }
    }
}

impl Default for KamCurveTarget {
    fn default() -> Self {
        Self { alpha: GOLDEN_MEAN }
    }
}

/// Successive truncations of the golden-mean continued fraction:
/// `1/2, 2/3, 3/5, 5/8, ...`, `depth` entries.
pub fn fibonacci_convergents(depth: usize) -> Result<Vec<Convergent>> {
    if depth == 0 {
        return Err(Error::Domain("depth must be at least 1".into()));
    }
    let (mut m, mut n) = (1u64, 2u64);
    let mut out = Vec::with_capacity(depth);
    for _ in 0..depth {
        out.push(Convergent { m, n });
        let next = m
            .checked_add(n)
            .ok_or_else(|| Error::Domain("convergent overflow".into()))?;
        (m, n) = (n, next);
    }
    Ok(out)
}

/// Mean advance of the lifted angle per iteration, in turns.
pub fn winding_number(x0: PhasePoint, k: Stochasticity, iters: usize) -> Result<f64> {
    if iters == 0 {
        return Err(Error::Domain(
            "winding number needs at least one iteration".into(),
        ));
    }
    if !x0.is_finite() {
        return Err(Error::Domain("non-finite seed".into()));
    }
    let k = k.get();
    let (mut q, mut p) = (x0.q, x0.p);
    for _ in 0..iters {
        (q, p) = step_raw(q, p, k);
    }
    Ok((q - x0.q) / (TAU * iters as f64))
}

pub const WINDING_BUDGET: usize = 100_000;
const WINDING_BLOCK: usize = 10_000;

/// Winding number with the default budget, stopping early once two
/// successive block estimates agree to `1e-10`.
pub fn winding_number_auto(x0: PhasePoint, k: Stochasticity) -> Result<f64> {
    if !x0.is_finite() {
        return Err(Error::Domain("non-finite seed".into()));
    }
    let kk = k.get();
    let (mut q, mut p) = (x0.q, x0.p);
    let mut done = 0usize;
    let mut prev = f64::NAN;
    while done < WINDING_BUDGET {
        for _ in 0..WINDING_BLOCK {
            (q, p) = step_raw(q, p, kk);
        }
        done += WINDING_BLOCK;
        let est = (q - x0.q) / (TAU * done as f64);
        if (est - prev).abs() < 1e-10 {
            return Ok(est);
        }
        prev = est;
    }
    Ok(prev)
}

/// Symmetry lines of the standard map on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryLine {
    #[serde(rename = "q=0")]
    Q0,
    #[serde(rename = "q=pi")]
    QPi,
    #[serde(rename = "q=p/2")]
    HalfP,
    #[serde(rename = "q=p/2+pi")]
    HalfPPlusPi,
    #[serde(rename = "none")]
    None,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Involution {
    I0,
    I1,
}

impl SymmetryLine {
    pub const ALL: [SymmetryLine; 4] = [Self::Q0, Self::QPi, Self::HalfP, Self::HalfPPlusPi];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Q0 => "q=0",
            Self::QPi => "q=pi",
            Self::HalfP => "q=p/2",
            Self::HalfPPlusPi => "q=p/2+pi",
            Self::None => "none",
        }
    }

    fn involution(&self) -> Option<(Involution, f64)> {
        match self {
            Self::Q0 => Some((Involution::I0, 0.0)),
            Self::QPi => Some((Involution::I0, 1.0)),
            Self::HalfP => Some((Involution::I1, 0.0)),
            Self::HalfPPlusPi => Some((Involution::I1, 1.0)),
            Self::None => None,
        }
    }

    /// Point on the line with momentum `p`.
    pub fn point(&self, p: f64) -> Option<PhasePoint> {
        let (inv, a) = self.involution()?;
        Some(match inv {
            Involution::I0 => PhasePoint::new(PI * a, p),
            Involution::I1 => PhasePoint::new(0.5 * p + PI * a, p),
        })
    }
}

impl std::str::FromStr for SymmetryLine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "q=0" | "q0" => Ok(Self::Q0),
            "q=pi" | "qpi" => Ok(Self::QPi),
            "q=p/2" | "halfp" => Ok(Self::HalfP),
            "q=p/2+pi" | "halfp+pi" => Ok(Self::HalfPPlusPi),
            other => Err(Error::Domain(format!("unknown symmetry line {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Rational,
    Alternate(u32),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Rational => f.write_str("rational"),
            Family::Alternate(j) => write!(f, "alternate({j})"),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "rational" {
            return Ok(Family::Rational);
        }
        if s == "alternate" {
            return Ok(Family::Alternate(1));
        }
        if let Some(j) = s.strip_prefix("alternate(").and_then(|r| r.strip_suffix(')')) {
            let j = j
                .parse()
                .map_err(|_| Error::Domain(format!("bad alternate index in {s:?}")))?;
            return Ok(Family::Alternate(j));
        }
        Err(Error::Domain(format!("unknown family {s:?}")))
    }
}

/// `n` consecutive lifted points of a periodic orbit with winding `m/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub points: Vec<PhasePoint>,
    pub convergent: Convergent,
    #[serde(rename = "K")]
    pub k: f64,
    pub family: Family,
    #[serde(rename = "line")]
    pub symmetry_line: SymmetryLine,
    pub closure_error: f64,
}

impl PeriodicOrbit {
    /// Builds the orbit through `seed`, computing its closure error.
    pub fn from_seed(
        seed: PhasePoint,
        convergent: Convergent,
        k: f64,
        family: Family,
        symmetry_line: SymmetryLine,
    ) -> Self {
        let n = convergent.n as usize;
        let mut points = Vec::with_capacity(n);
        let (mut q, mut p) = (seed.q, seed.p);
        for _ in 0..n {
            points.push(PhasePoint::new(q, p));
            (q, p) = step_raw(q, p, k);
        }
        let shift = TAU * convergent.m as f64;
        let closure_error = (q - seed.q - shift).abs().max((p - seed.p).abs());
        Self {
            points,
            convergent,
            k,
            family,
            symmetry_line,
            closure_error,
        }
    }

    pub fn seed(&self) -> PhasePoint {
        self.points[0]
    }

    pub fn period(&self) -> usize {
        self.points.len()
    }

    /// Orbit points followed by their first image, `n + 1` points on the lift.
    pub fn closed_trajectory(&self) -> Vec<PhasePoint> {
        let mut out = self.points.clone();
        let last = *out.last().expect("orbit has at least one point");
        let (q, p) = step_raw(last.q, last.p, self.k);
        out.push(PhasePoint::new(q, p));
        out
    }

    /// Largest nearest-point torus distance from `self` to `other`.
    pub(crate) fn set_separation(&self, other: &PeriodicOrbit) -> f64 {
        self.points
            .iter()
            .map(|a| {
                other
                    .points
                    .iter()
                    .map(|b| torus_distance(*a, *b))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

/// Which symmetry line the half-period image must land on, and after how many steps.
fn half_period(line: SymmetryLine, n: u64) -> (Involution, u64, f64) {
    let (inv, a) = line.involution().expect("search on a symmetry line");
    match (inv, n.is_multiple_of(2)) {
        (Involution::I0, true) => (Involution::I0, n / 2, a),
        (Involution::I0, false) => (Involution::I1, n.div_ceil(2), a),
        (Involution::I1, true) => (Involution::I1, n / 2, a),
        (Involution::I1, false) => (Involution::I0, (n - 1) / 2, a),
    }
}

/// Residual of the half-period symmetry condition for the seed on `line` with momentum `s`.
/// Its zeros are exactly the symmetric orbits of winding `m/n` through that line.
fn line_residual(line: SymmetryLine, c: Convergent, k: f64, s: f64) -> f64 {
    let (target, steps, a) = half_period(line, c.n);
    let seed = line.point(s).expect("symmetry line");
    let (mut q, mut p) = (seed.q, seed.p);
    for _ in 0..steps {
        (q, p) = step_raw(q, p, k);
    }
    let offset = PI * (a + c.m as f64);
    match target {
        Involution::I0 => q - offset,
        Involution::I1 => q - 0.5 * p - offset,
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

fn check_line(line: SymmetryLine) -> Result<()> {
    if line == SymmetryLine::None {
        Err(Error::Domain(
            "orbit search needs one of the four symmetry lines".into(),
        ))
    } else {
        Ok(())
    }
}

fn family_of(line: SymmetryLine) -> Family {
    match line {
        SymmetryLine::Q0 | SymmetryLine::QPi | SymmetryLine::None => Family::Rational,
        SymmetryLine::HalfP | SymmetryLine::HalfPPlusPi => Family::Alternate(1),
    }
}

fn integrable_seed(c: Convergent) -> f64 {
    TAU * c.m as f64 / c.n as f64
}

/// `(line parameter, residual)` pairs.
pub type ScanSamples = Vec<(f64, f64)>;

/// All symmetric orbits of winding `c` through `line`, by scanning one period
/// of the line parameter and bisecting every sign change.
pub fn scan_line(c: Convergent, k: Stochasticity, line: SymmetryLine) -> Result<(Vec<f64>, ScanSamples)> {
    check_line(line)?;
    let kk = k.get();
    let center = integrable_seed(c);
    let lo = center - PI;
    let h = TAU / SCAN_SAMPLES as f64;
    let samples: Vec<(f64, f64)> = (0..=SCAN_SAMPLES)
        .map(|i| {
            let s = lo + h * i as f64;
            (s, line_residual(line, c, kk, s))
        })
        .collect();
    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((s0, f0), (s1, f1)) = (w[0], w[1]);
        if !f0.is_finite() || !f1.is_finite() {
            continue;
        }
        if f0 == 0.0 {
            roots.push(s0);
        } else if f0 * f1 < 0.0 {
            roots.push(bisect(|s| line_residual(line, c, kk, s), s0, s1, f0));
        }
    }
    Ok((roots, samples))
}

/// Symmetric orbit of winding `c` on `line` at stochasticity `k`: the scanned
/// root closest to the integrable seed, polished by Newton.
pub fn find_periodic_orbit(c: Convergent, k: Stochasticity, line: SymmetryLine) -> Result<PeriodicOrbit> {
    check_line(line)?;
    let kk = k.get();
    let family = family_of(line);
    if kk == 0.0 {
        let seed = line.point(integrable_seed(c)).expect("symmetry line");
        return Ok(PeriodicOrbit::from_seed(seed, c, 0.0, family, line));
    }
    let (roots, scan) = scan_line(c, k, line)?;
    let center = integrable_seed(c);
    let Some(s) = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
    else {
        return Err(Error::NotFound {
            m: c.m,
            n: c.n,
            k: kk,
            line: line.label().into(),
            reason: "no sign change of the symmetry residual over one period".into(),
            scan,
        });
    };
    let seed = line.point(s).expect("symmetry line");
    polish(PeriodicOrbit::from_seed(seed, c, kk, family, line))
}

/// Refines when needed; a failed refinement is tolerated if the orbit already closes to `CLOSURE_TOL`.
fn polish(orbit: PeriodicOrbit) -> Result<PeriodicOrbit> {
    if orbit.closure_error <= REFINED_TOL {
        return Ok(orbit);
    }
    match refine_newton(&orbit) {
        Ok(o) => Ok(o),
        Err(_) if orbit.closure_error <= CLOSURE_TOL => Ok(orbit),
        Err(e) => Err(e),
    }
}

fn monodromy_at(x0: PhasePoint, n: usize, k: f64) -> (Jacobian2x2, PhasePoint) {
    let mut m = Jacobian2x2::IDENTITY;
    let (mut q, mut p) = (x0.q, x0.p);
    for _ in 0..n {
        m = tangent_raw(q, k).mul(&m);
        (q, p) = step_raw(q, p, k);
    }
    (m, PhasePoint::new(q, p))
}

/// Newton on `F(x) = T^n(x) - x - (2 pi m, 0)` with Jacobian `M(x) - I`.
pub fn refine_newton(orbit: &PeriodicOrbit) -> Result<PeriodicOrbit> {
    if !orbit.closure_error.is_finite() {
        return Err(Error::Refinement {
            iterations: 0,
            reason: "non-finite closure error".into(),
            history: vec![],
        });
    }
    if orbit.closure_error <= REFINED_TOL {
        return Ok(orbit.clone());
    }
    let n = orbit.period();
    let shift = TAU * orbit.convergent.m as f64;
    let k = orbit.k;
    let mut x = orbit.seed();
    let mut history = Vec::new();
    for it in 0..=NEWTON_MAX_ITER {
        let (m, image) = monodromy_at(x, n, k);
        let f = (image.q - x.q - shift, image.p - x.p);
        let err = f.0.abs().max(f.1.abs());
        history.push(err);
        if !err.is_finite() {
            break;
        }
        if err <= REFINED_TOL {
            return Ok(PeriodicOrbit::from_seed(
                x,
                orbit.convergent,
                k,
                orbit.family,
                orbit.symmetry_line,
            ));
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let j = Jacobian2x2::new(m.a11 - 1.0, m.a12, m.a21, m.a22 - 1.0);
        let det = j.det();
        let scale = (j.a11.abs() + j.a12.abs()) * (j.a21.abs() + j.a22.abs());
        if det.abs() <= 1e-14 * scale.max(1.0) {
            return Err(Error::Refinement {
                iterations: it,
                reason: format!("singular Jacobian (det(M - I) = {det:e}), parabolic orbit"),
                history,
            });
        }
        let dq = (j.a22 * f.0 - j.a12 * f.1) / det;
        let dp = (-j.a21 * f.0 + j.a11 * f.1) / det;
        x = PhasePoint::new(x.q - dq, x.p - dp);
    }
    Err(Error::Refinement {
        iterations: NEWTON_MAX_ITER,
        reason: "no convergence".into(),
        history,
    })
}

/// Root of the line residual nearest to `guess`, found by bracketing outward.
fn track_line_root(line: SymmetryLine, c: Convergent, k: f64, guess: f64) -> Option<f64> {
    let f = |s: f64| line_residual(line, c, k, s);
    let f0 = f(guess);
    if f0 == 0.0 {
        return Some(guess);
    }
    if !f0.is_finite() {
        return None;
    }
    let (mut left, mut fl) = (guess, f0);
    let (mut right, mut fr) = (guess, f0);
    let mut h = 1e-6;
    while h <= PI {
        let (nl, nr) = (guess - h, guess + h);
        let (fnl, fnr) = (f(nl), f(nr));
        let l_change = fnl.is_finite() && fnl * fl <= 0.0;
        let r_change = fnr.is_finite() && fnr * fr <= 0.0;
        match (l_change, r_change) {
            (true, false) => return Some(bisect(f, nl, left, fnl)),
            (false, true) => return Some(bisect(f, right, nr, fr)),
            (true, true) => {
                let a = bisect(f, nl, left, fnl);
                let b = bisect(f, right, nr, fr);
                return Some(if (a - guess).abs() <= (b - guess).abs() {
                    a
                } else {
                    b
                });
            }
            (false, false) => {}
        }
        (left, fl, right, fr) = (nl, fnl, nr, fnr);
        h *= 2.0;
    }
    None
}

fn line_param(orbit: &PeriodicOrbit) -> Option<f64> {
    (orbit.symmetry_line != SymmetryLine::None).then(|| orbit.seed().p)
}

/// One continuation step to `k_next` starting from `orbit` (with `prev_param`
/// as secant predictor information).
fn continuation_step(orbit: &PeriodicOrbit, k_next: f64, predicted: Option<f64>) -> Option<PeriodicOrbit> {
    let c = orbit.convergent;
    match line_param(orbit) {
        Some(s) => {
            let guess = predicted.unwrap_or(s);
            let root = track_line_root(orbit.symmetry_line, c, k_next, guess)?;
            if (root - s).abs() > MAX_PARAM_JUMP {
                return None;
            }
            let seed = orbit.symmetry_line.point(root)?;
            let next = PeriodicOrbit::from_seed(seed, c, k_next, orbit.family, orbit.symmetry_line);
            let next = polish(next).ok()?;
            (next.closure_error <= CLOSURE_TOL).then_some(next)
        }
        None => {
            let mut guess = orbit.clone();
            guess.k = k_next;
            guess = PeriodicOrbit::from_seed(guess.seed(), c, k_next, orbit.family, SymmetryLine::None);
            let next = refine_newton(&guess).ok()?;
            let moved = torus_distance(next.seed(), orbit.seed());
            (moved <= MAX_PARAM_JUMP).then_some(next)
        }
    }
}

/// Natural-parameter continuation of `orbit` to `k_target`, halving the step
/// on failure down to `CONTINUATION_FLOOR`.
pub fn continue_in_k(orbit: &PeriodicOrbit, k_target: Stochasticity, dk_max: f64) -> Result<PeriodicOrbit> {
    if !(dk_max > 0.0 && dk_max.is_finite()) {
        return Err(Error::Domain(format!("dK_max must be positive, got {dk_max}")));
    }
    let target = k_target.get();
    let mut cur = orbit.clone();
    let mut prev: Option<(f64, f64)> = None;
    let mut dk = dk_max;
    while cur.k != target {
        let remaining = target - cur.k;
        let step = remaining.abs().min(dk);
        let k_next = if step >= remaining.abs() {
            target
        } else {
            cur.k + step.copysign(remaining)
        };
        let predicted = match (prev, line_param(&cur)) {
            (Some((pk, ps)), Some(s)) if cur.k != pk => Some(s + (s - ps) * (k_next - cur.k) / (cur.k - pk)),
            _ => None,
        };
        let attempt = continuation_step(&cur, k_next, predicted)
            .or_else(|| predicted.and_then(|_| continuation_step(&cur, k_next, None)));
        match attempt {
            Some(next) => {
                prev = line_param(&cur).map(|s| (cur.k, s));
                cur = next;
                dk = (dk * 2.0).min(dk_max);
            }
            None => {
                dk *= 0.5;
                if dk < CONTINUATION_FLOOR {
                    return Err(Error::Continuation {
                        last_good_k: cur.k,
                        target_k: target,
                        reason: format!(
                            "step fell below {CONTINUATION_FLOOR:e} following {} {} on {}",
                            cur.family,
                            cur.convergent,
                            cur.symmetry_line.label()
                        ),
                    });
                }
            }
        }
    }
    Ok(cur)
}

/// Follows the symmetric orbit on `line` from its integrable seed up to `k`.
pub fn continued_orbit(
    c: Convergent,
    k: Stochasticity,
    line: SymmetryLine,
    dk_max: f64,
) -> Result<PeriodicOrbit> {
    let start = find_periodic_orbit(c, Stochasticity::new(0.0)?, line)?;
    continue_in_k(&start, k, dk_max)
}

fn residue_of(orbit: &PeriodicOrbit) -> f64 {
    stability::residue(&stability::monodromy(orbit))
}

const COINCIDENT: f64 = 1e-8;

/// Rational iterate `I(m, n)`: the elliptic symmetric orbit through `q = 0` or `q = pi`.
///
/// Both lines are followed from `K = 0`; the orbit with the larger residue is
/// kept. For even `n` both lines carry the same orbit and the `q = 0`
/// representative is returned. When the residues cannot be told apart (very
/// small `K`, odd `n`) the `q = pi` orbit is taken; it is the branch that
/// continues into the elliptic one.
pub fn rational_orbit(c: Convergent, k: Stochasticity) -> Result<PeriodicOrbit> {
    let a = continued_orbit(c, k, SymmetryLine::Q0, DEFAULT_DK_MAX);
    let b = continued_orbit(c, k, SymmetryLine::QPi, DEFAULT_DK_MAX);
    let (a, b) = match (a, b) {
        (Ok(a), Ok(b)) => (a, b),
        (Ok(o), Err(_)) | (Err(_), Ok(o)) => return Ok(o),
        (Err(e), Err(_)) => return Err(e),
    };
    let (ra, rb) = (residue_of(&a), residue_of(&b));
    let chosen = if (ra - rb).abs() <= 1e-12 {
        if a.set_separation(&b) <= COINCIDENT {
            a
        } else {
            b
        }
    } else if ra > rb {
        a
    } else {
        b
    };
    Ok(chosen)
}

/// Alternate rational iterate `Y(m_1, n)`: the symmetric orbit through
/// `q = p/2` or `q = p/2 + pi` that is distinct from `I(m, n)`.
///
/// For odd `n` the elliptic orbit crosses one line of each family, so the
/// orbit kept here is the one farthest from the rational iterate.
pub fn alternate_orbit(c: Convergent, k: Stochasticity, j: u32) -> Result<PeriodicOrbit> {
    if j != 1 {
        return Err(Error::Unsupported(format!(
            "alternate iterates only implemented for j = 1, got {j}"
        )));
    }
    let rational = rational_orbit(c, k)?;
    alternate_against(&rational, k)
}

fn alternate_against(rational: &PeriodicOrbit, k: Stochasticity) -> Result<PeriodicOrbit> {
    let c = rational.convergent;
    let mut best: Option<(f64, PeriodicOrbit)> = None;
    let mut last_err = None;
    for line in [SymmetryLine::HalfP, SymmetryLine::HalfPPlusPi] {
        match continued_orbit(c, k, line, DEFAULT_DK_MAX) {
            Ok(o) => {
                let sep = o.set_separation(rational);
                if best.as_ref().is_none_or(|(s, _)| sep > *s + 1e-12) {
                    best = Some((sep, o));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, o)) => Ok(o),
        None => Err(last_err.expect("at least one line was tried")),
    }
}

/// Rational iterates for the first `depth` golden-mean convergents.
pub fn rational_iterates(k: Stochasticity, depth: usize) -> Result<Vec<(Convergent, Result<PeriodicOrbit>)>> {
    let cs = fibonacci_convergents(depth)?;
    Ok(cs.into_par_iter().map(|c| (c, rational_orbit(c, k))).collect())
}

/// Alternate rational iterates for the first `depth` golden-mean convergents.
pub fn alternate_iterates(
    k: Stochasticity,
    depth: usize,
    j: u32,
) -> Result<Vec<(Convergent, Result<PeriodicOrbit>)>> {
    if j != 1 {
        return Err(Error::Unsupported(format!(
            "alternate iterates only implemented for j = 1, got {j}"
        )));
    }
    let cs = fibonacci_convergents(depth)?;
    Ok(cs
        .into_par_iter()
        .map(|c| (c, alternate_orbit(c, k, j)))
        .collect())
}

/// Pair of rational and alternate orbits at the same `(m, n, K)`.
pub fn orbit_pair(c: Convergent, k: Stochasticity) -> Result<(PeriodicOrbit, PeriodicOrbit)> {
    let rational = rational_orbit(c, k)?;
    let alternate = alternate_against(&rational, k)?;
    Ok((rational, alternate))
}
