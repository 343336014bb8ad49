//! Estimates of the breakup threshold of the golden-mean curve.
//!
//! * Greene: destabilization thresholds `K*(n)` of the rational iterates,
//!   extrapolated in `n`.
//! * NCH: distance between corresponding points of the rational and
//!   alternate iterates as a function of `K`; its minimum marks breakup.
//! * Chirikov: overlap of the two integer resonances bounding the curve.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::map::{step_raw, torus_distance, PhasePoint, Stochasticity};
use crate::orbit::{
    continue_in_k, fibonacci_convergents, orbit_pair, Convergent, Family, PeriodicOrbit, DEFAULT_DK_MAX,
};
use crate::stability::destabilization_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greene,
    Nch,
    Chirikov,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Greene, Method::Nch, Method::Chirikov];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Greene => "greene",
            Method::Nch => "nch",
            Method::Chirikov => "chirikov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greene" => Ok(Method::Greene),
            "nch" => Ok(Method::Nch),
            "chirikov" => Ok(Method::Chirikov),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub method: Method,
    #[serde(rename = "K_crit")]
    pub k_crit: f64,
    pub per_n: Vec<(u64, f64)>,
    pub diagnostics: Map<String, Value>,
}

/// Minimum matched distance `d(K)` for one order `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub n: u64,
    pub samples: Vec<(f64, f64)>,
    /// First grid value at which continuation failed, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated_at: Option<f64>,
}

impl DistanceCurve {
    /// Index of the grid minimum when it is strictly inside the sampled range.
    pub fn interior_minimum(&self) -> Option<usize> {
        if self.samples.len() < 3 {
            return None;
        }
        let (imin, _) = self
            .samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
        let interior = imin > 0 && imin + 1 < self.samples.len();
        let strict = interior
            && self.samples[imin].1 < self.samples[imin - 1].1
            && self.samples[imin].1 < self.samples[imin + 1].1;
        strict.then_some(imin)
    }

    /// Vertex of the parabola through the grid minimum and its neighbours.
    pub fn minimizer(&self) -> Option<f64> {
        let i = self.interior_minimum()?;
        let (a, fa) = self.samples[i - 1];
        let (b, fb) = self.samples[i];
        let (c, fc) = self.samples[i + 1];
        Some(parabola_vertex((a, fa), (b, fb), (c, fc)))
    }
}

pub(crate) fn parabola_vertex((a, fa): (f64, f64), (b, fb): (f64, f64), (c, fc): (f64, f64)) -> f64 {
    let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
    let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
    if den == 0.0 {
        b
    } else {
        b - 0.5 * num / den
    }
}

/// Aitken delta-squared on the last three entries; falls back to the last
/// value for short or non-accelerable sequences. Returns the estimate and the
/// scheme used.
pub fn extrapolate(seq: &[f64]) -> (f64, &'static str) {
    let Some(&last) = seq.last() else {
        return (f64::NAN, "empty");
    };
    if seq.len() < 3 {
        return (last, "last value (fewer than three terms)");
    }
    let (x0, x1, x2) = (seq[seq.len() - 3], seq[seq.len() - 2], last);
    let d1 = x2 - x1;
    let d0 = x1 - x0;
    let den = d1 - d0;
    if den.abs() <= 1e-15 * x2.abs().max(1.0) {
        return (last, "last value (aitken denominator vanished)");
    }
    let acc = x2 - d1 * d1 / den;
    if acc.is_finite() {
        (acc, "aitken delta-squared on last three")
    } else {
        (last, "last value (aitken not finite)")
    }
}

/// Greene's estimate over the first `depth` golden-mean convergents.
pub fn greene_kcrit(depth: usize) -> Result<CriterionResult> {
    greene_kcrit_for(&fibonacci_convergents(depth)?)
}

/// Greene's estimate over an explicit sequence of convergents, ordered by period.
pub fn greene_kcrit_for(convergents: &[Convergent]) -> Result<CriterionResult> {
    if convergents.is_empty() {
        return Err(Error::Domain("no convergents given".into()));
    }
    let outcomes: Vec<(Convergent, Result<f64>)> = convergents
        .par_iter()
        .map(|&c| (c, destabilization_threshold(c, Family::Rational)))
        .collect();
    let mut per_n = Vec::new();
    let mut failures = Map::new();
    for (c, r) in outcomes {
        match r {
            Ok(kstar) => per_n.push((c.n, kstar)),
            Err(e) => {
                failures.insert(c.to_string(), Value::String(e.to_string()));
            }
        }
    }
    if per_n.is_empty() {
        return Err(Error::Bracket(format!(
            "no destabilization threshold found: {failures:?}"
        )));
    }
    let seq: Vec<f64> = per_n.iter().map(|(_, k)| *k).collect();
    let (k_crit, scheme) = extrapolate(&seq);
    let mut diagnostics = Map::new();
    diagnostics.insert("extrapolation".into(), json!(scheme));
    diagnostics.insert("threshold".into(), json!("residue crosses 1 (trace crosses -2)"));
    diagnostics.insert("bisection_width".into(), json!(crate::stability::THRESHOLD_WIDTH));
    diagnostics.insert(
        "monotone_non_increasing".into(),
        json!(seq.windows(2).all(|w| w[1] <= w[0])),
    );
    if seq.len() < 3 {
        diagnostics.insert("warning".into(), json!("degenerate sequence"));
    }
    if !failures.is_empty() {
        diagnostics.insert("failures".into(), Value::Object(failures));
    }
    Ok(CriterionResult {
        method: Method::Greene,
        k_crit,
        per_n,
        diagnostics,
    })
}

/// Greedy nearest-neighbour matching of the points of `a` and `b` under the
/// torus metric. Every point is used once; pairs come back sorted by `a`'s index.
pub fn match_elliptic_points(a: &PeriodicOrbit, b: &PeriodicOrbit) -> Result<Vec<(usize, usize, f64)>> {
    if a.convergent != b.convergent || a.points.len() != b.points.len() {
        return Err(Error::Domain(format!(
            "cannot match orbits of winding {} and {}",
            a.convergent, b.convergent
        )));
    }
    Ok(greedy_matching(&a.points, &b.points))
}

pub(crate) fn greedy_matching(a: &[PhasePoint], b: &[PhasePoint]) -> Vec<(usize, usize, f64)> {
    let mut edges: Vec<(f64, usize, usize)> = a
        .iter()
        .enumerate()
        .flat_map(|(i, x)| {
            b.iter()
                .enumerate()
                .map(move |(j, y)| (torus_distance(*x, *y), i, j))
        })
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::with_capacity(a.len());
    for (d, i, j) in edges {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        out.push((i, j, d));
        if out.len() == a.len().min(b.len()) {
            break;
        }
    }
    out.sort_by_key(|&(i, _, _)| i);
    out
}

fn min_matched_distance(a: &PeriodicOrbit, b: &PeriodicOrbit) -> Result<f64> {
    Ok(match_elliptic_points(a, b)?
        .iter()
        .map(|(_, _, d)| *d)
        .fold(f64::INFINITY, f64::min))
}

/// Minimum matched distance between `I(m, n)` and `Y(m, n)` at `k`.
pub fn nch_distance(c: Convergent, k: Stochasticity) -> Result<f64> {
    let (rational, alternate) = orbit_pair(c, k)?;
    min_matched_distance(&rational, &alternate)
}

pub(crate) fn check_grid(grid: &[f64], min_len: usize) -> Result<()> {
    if grid.len() < min_len {
        return Err(Error::Domain(format!(
            "K grid needs at least {min_len} points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|k| !k.is_finite() || *k < 0.0) {
        return Err(Error::Domain("K grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("K grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `d(K)` over `grid`, following both orbits by continuation along the grid.
/// A continuation failure truncates the curve at the failing grid point.
pub fn nch_distance_curve(c: Convergent, grid: &[f64]) -> Result<DistanceCurve> {
    nch_distance_curve_with(c, grid, DEFAULT_DK_MAX)
}

/// As [`nch_distance_curve`] with an explicit largest continuation step.
pub fn nch_distance_curve_with(c: Convergent, grid: &[f64], dk_max: f64) -> Result<DistanceCurve> {
    check_grid(grid, 1)?;
    let (mut rational, mut alternate) = orbit_pair(c, Stochasticity::new(grid[0])?)?;
    let mut samples = vec![(grid[0], min_matched_distance(&rational, &alternate)?)];
    let mut truncated_at = None;
    for &k in &grid[1..] {
        let kk = Stochasticity::new(k)?;
        let next = continue_in_k(&rational, kk, dk_max)
            .and_then(|r| continue_in_k(&alternate, kk, dk_max).map(|a| (r, a)));
        match next {
            Ok((r, a)) => {
                samples.push((k, min_matched_distance(&r, &a)?));
                rational = r;
                alternate = a;
            }
            Err(_) => {
                truncated_at = Some(k);
                break;
            }
        }
    }
    Ok(DistanceCurve {
        n: c.n,
        samples,
        truncated_at,
    })
}

/// Distance curves for the first `depth` golden-mean convergents.
pub fn nch_curves(depth: usize, grid: &[f64]) -> Result<Vec<(Convergent, Result<DistanceCurve>)>> {
    check_grid(grid, 1)?;
    let cs = fibonacci_convergents(depth)?;
    Ok(cs
        .into_par_iter()
        .map(|c| (c, nch_distance_curve(c, grid)))
        .collect())
}

/// NCH estimate: per-order minimizers of `d(K)` on the grid, extrapolated in `n`.
pub fn nch_kcrit(depth: usize, grid: &[f64]) -> Result<CriterionResult> {
    check_grid(grid, 5)?;
    let curves = nch_curves(depth, grid)?;
    nch_from_curves(&curves)
}

pub fn nch_from_curves(curves: &[(Convergent, Result<DistanceCurve>)]) -> Result<CriterionResult> {
    let mut per_n = Vec::new();
    let mut flagged = Map::new();
    for (c, curve) in curves {
        match curve {
            Ok(curve) => match curve.minimizer() {
                Some(kmin) => per_n.push((c.n, kmin)),
                None => {
                    let reason = match curve.truncated_at {
                        Some(k) => format!("no interior minimum (continuation stopped at K = {k})"),
                        None => "no interior minimum on the grid".to_string(),
                    };
                    flagged.insert(c.n.to_string(), json!(reason));
                }
            },
            Err(e) => {
                flagged.insert(c.n.to_string(), json!(e.to_string()));
            }
        }
    }
    if per_n.is_empty() {
        return Err(Error::Criterion(format!(
            "distance curve has no interior minimum for any order: {}",
            Value::Object(flagged)
        )));
    }
    let seq: Vec<f64> = per_n.iter().map(|(_, k)| *k).collect();
    let (k_crit, scheme) = extrapolate(&seq);
    let mut diagnostics = Map::new();
    diagnostics.insert("statistic".into(), json!("minimum matched distance"));
    diagnostics.insert("matching".into(), json!("greedy nearest neighbour, torus metric"));
    diagnostics.insert(
        "minimum".into(),
        json!("interior local minimum on the grid, parabolic vertex"),
    );
    diagnostics.insert(
        "alternate_family".into(),
        json!("symmetric orbit on q=p/2 or q=p/2+pi distinct from I(m,n)"),
    );
    diagnostics.insert("extrapolation".into(), json!(scheme));
    if !flagged.is_empty() {
        diagnostics.insert("flagged".into(), Value::Object(flagged));
    }
    Ok(CriterionResult {
        method: Method::Nch,
        k_crit,
        per_n,
        diagnostics,
    })
}

/// Offset of the launch point from the hyperbolic point.
pub const LAUNCH_OFFSET: f64 = 1e-4;
pub const WIDTH_ITERATIONS: usize = 10_000;
/// Spacing of the integer resonances at `p = 0` and `p = 2 pi`.
pub const RESONANCE_SPACING: f64 = TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapMeasurement {
    #[serde(rename = "K")]
    pub k: f64,
    /// Semi-amplitude of the island of the resonance at `p = 0`.
    pub w0: f64,
    /// Semi-amplitude of the island of the resonance at `p = 2 pi`.
    pub w1: f64,
    pub rho: f64,
    pub pendulum_rho: f64,
}

/// Island semi-amplitude of the integer resonance at momentum `p_res`:
/// the largest `|p - p_res|` along the orbit launched just inside the
/// separatrix, next to the hyperbolic point `(0, p_res)`.
pub fn island_semi_amplitude(k: Stochasticity, p_res: f64) -> Result<f64> {
    let kk = k.get();
    if kk <= 0.0 {
        return Err(Error::Domain("island width needs K > 0".into()));
    }
    let (mut q, mut p) = (LAUNCH_OFFSET, p_res);
    let mut widest: f64 = 0.0;
    for i in 0..WIDTH_ITERATIONS {
        (q, p) = step_raw(q, p, kk);
        let dev = (p - p_res).abs();
        widest = widest.max(dev);
        if dev >= RESONANCE_SPACING {
            return Err(Error::Width {
                k: kk,
                iterations: i + 1,
                max_excursion: widest,
                last: PhasePoint::new(q, p),
            });
        }
    }
    Ok(widest)
}

/// Pendulum approximation of the semi-amplitude, `2 sqrt(K)`.
pub fn pendulum_semi_amplitude(k: f64) -> f64 {
    2.0 * k.sqrt()
}

pub fn pendulum_overlap(k: f64) -> f64 {
    2.0 * pendulum_semi_amplitude(k) / RESONANCE_SPACING
}

pub fn measure_overlap(k: Stochasticity) -> Result<OverlapMeasurement> {
    let w0 = island_semi_amplitude(k, 0.0)?;
    let w1 = island_semi_amplitude(k, RESONANCE_SPACING)?;
    Ok(OverlapMeasurement {
        k: k.get(),
        w0,
        w1,
        rho: (w0 + w1) / RESONANCE_SPACING,
        pendulum_rho: pendulum_overlap(k.get()),
    })
}

/// Overlap ratio `(w0 + w1) / dp` of the two integer resonances.
pub fn chirikov_overlap(k: Stochasticity) -> Result<f64> {
    Ok(measure_overlap(k)?.rho)
}

/// `K` where the pendulum estimate reaches overlap, `(pi/2)^2`, by bisection.
pub fn pendulum_crossing() -> f64 {
    let (mut lo, mut hi) = (1e-3, 10.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if pendulum_overlap(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const CROSSING_STEP: f64 = 0.01;
const CROSSING_TOL: f64 = 1e-4;

fn overlapping(k: f64) -> Result<bool> {
    match measure_overlap(Stochasticity::new(k)?) {
        Ok(m) => Ok(m.rho >= 1.0),
        Err(Error::Width { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Smallest `K` on a `0.01` sweep from `k_start` at which the measured
/// resonances overlap (`rho >= 1`, or the launch orbit escapes to the
/// neighbouring resonance), refined by bisection to `1e-4`.
pub fn measured_crossing(k_start: f64, k_max: f64) -> Result<f64> {
    let mut lo = k_start;
    if overlapping(lo)? {
        return Err(Error::Bracket(format!("resonances already overlap at K = {lo}")));
    }
    let mut hi = lo;
    loop {
        hi += CROSSING_STEP;
        if hi > k_max {
            return Err(Error::Bracket(format!("no overlap found up to K = {k_max}")));
        }
        if overlapping(hi)? {
            break;
        }
        lo = hi;
    }
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if overlapping(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Chirikov estimate over a grid: `K_crit` is the measured crossing, the
/// pendulum crossing is reported next to it.
pub fn chirikov_kcrit(grid: &[f64]) -> Result<CriterionResult> {
    check_grid(grid, 1)?;
    let table: Vec<(f64, Result<OverlapMeasurement>)> = grid
        .par_iter()
        .map(|&k| (k, Stochasticity::new(k).and_then(measure_overlap)))
        .collect();
    let mut rows = Vec::new();
    for (k, m) in &table {
        match m {
            Ok(m) => rows
                .push(json!({"K": k, "rho": m.rho, "w0": m.w0, "w1": m.w1, "pendulum_rho": m.pendulum_rho})),
            Err(e) => rows.push(json!({"K": k, "error": e.to_string()})),
        }
    }
    let measured = measured_crossing(0.01, 10.0)?;
    let pendulum = pendulum_crossing();
    let mut diagnostics = Map::new();
    diagnostics.insert("pendulum_crossing".into(), json!(pendulum));
    diagnostics.insert("measured_crossing".into(), json!(measured));
    diagnostics.insert("resonances".into(), json!([0.0, RESONANCE_SPACING]));
    diagnostics.insert("launch_offset".into(), json!(LAUNCH_OFFSET));
    diagnostics.insert("iterations".into(), json!(WIDTH_ITERATIONS));
    diagnostics.insert("table".into(), Value::Array(rows));
    Ok(CriterionResult {
        method: Method::Chirikov,
        k_crit: measured,
        per_n: vec![(1, measured)],
        diagnostics,
    })
}

/// Ordered-pair distance on the torus; exposed for callers that want the metric.
pub fn elliptic_point_distance(a: PhasePoint, b: PhasePoint) -> f64 {
    torus_distance(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{find_periodic_orbit, SymmetryLine};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn k(v: f64) -> Stochasticity {
        Stochasticity::new(v).unwrap()
    }

    #[test]
    fn aitken_is_exact_on_geometric_sequences() {
        let seq: Vec<f64> = (0..6).map(|i| 0.97 + 0.5 * 0.6f64.powi(i)).collect();
        let (v, scheme) = extrapolate(&seq);
        assert_abs_diff_eq!(v, 0.97, epsilon = 1e-12);
        assert!(scheme.starts_with("aitken"));
        assert_eq!(extrapolate(&[2.0]).0, 2.0);
        assert_eq!(extrapolate(&[1.0, 1.0, 1.0]).0, 1.0);
    }

    #[test]
    fn closed_form_greene_sequences() {
        let r = greene_kcrit_for(&[Convergent::FIXED_POINT]).unwrap();
        assert_abs_diff_eq!(r.k_crit, 4.0, epsilon = 1e-5);
        let r = greene_kcrit(1).unwrap();
        assert_abs_diff_eq!(r.k_crit, 2.0, epsilon = 1e-5);
        assert_eq!(r.per_n.len(), 1);
        assert_eq!(r.diagnostics["warning"], "degenerate sequence");
    }

    #[test]
    fn torus_metric_wraps() {
        let eps = 1e-3;
        let d = elliptic_point_distance(PhasePoint::new(PI - eps, 1.0), PhasePoint::new(-PI + eps, 1.0));
        assert_abs_diff_eq!(d, 2.0 * eps, epsilon = 1e-12);
        let d = elliptic_point_distance(PhasePoint::new(0.0, 0.1), PhasePoint::new(TAU, TAU - 0.1));
        assert_abs_diff_eq!(d, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn self_match_is_zero() {
        let o = find_periodic_orbit(Convergent::new(3, 5).unwrap(), k(0.4), SymmetryLine::QPi).unwrap();
        let pairs = match_elliptic_points(&o, &o).unwrap();
        assert_eq!(pairs.len(), 5);
        for (i, (a, b, d)) in pairs.iter().enumerate() {
            assert_eq!((*a, *b), (i, i));
            assert_eq!(*d, 0.0);
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn greedy_matches_the_permutation_oracle_for_short_periods() {
        for (m, n, kv) in [(1, 2, 0.5), (2, 3, 0.3)] {
            let (r, a) = orbit_pair(Convergent::new(m, n).unwrap(), k(kv)).unwrap();
            let pairs = match_elliptic_points(&r, &a).unwrap();
            let greedy: f64 = pairs.iter().map(|x| x.2).sum();
            let best = permutations(n as usize)
                .into_iter()
                .map(|perm| {
                    perm.iter()
                        .enumerate()
                        .map(|(i, &j)| torus_distance(r.points[i], a.points[j]))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(greedy, best, epsilon = 1e-12);
        }
    }

    #[test]
    fn period_mismatch_is_rejected() {
        let a = find_periodic_orbit(Convergent::new(1, 2).unwrap(), k(0.4), SymmetryLine::Q0).unwrap();
        let b = find_periodic_orbit(Convergent::new(2, 3).unwrap(), k(0.4), SymmetryLine::QPi).unwrap();
        assert!(matches!(match_elliptic_points(&a, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn parabola_vertex_recovers_quadratic_minimum() {
        let f = |x: f64| 3.0 * (x - 0.93).powi(2) + 0.1;
        let v = parabola_vertex((0.9, f(0.9)), (0.92, f(0.92)), (0.95, f(0.95)));
        assert_abs_diff_eq!(v, 0.93, epsilon = 1e-12);
    }

    #[test]
    fn interior_minimum_detection() {
        let curve = DistanceCurve {
            n: 5,
            samples: vec![(0.1, 3.0), (0.2, 2.0), (0.3, 2.5), (0.4, 2.8)],
            truncated_at: None,
        };
        assert_eq!(curve.interior_minimum(), Some(1));
        let monotone = DistanceCurve {
            n: 5,
            samples: vec![(0.1, 3.0), (0.2, 2.0), (0.3, 1.0)],
            truncated_at: None,
        };
        assert_eq!(monotone.interior_minimum(), None);
        assert_eq!(monotone.minimizer(), None);
    }

    #[test]
    fn degenerate_grid_has_no_minimizers() {
        let grid = [0.01, 0.03, 0.05, 0.07, 0.09];
        let err = nch_kcrit(3, &grid).unwrap_err();
        assert!(matches!(err, Error::Criterion(_)), "{err}");
        assert!(nch_kcrit(3, &[0.1, 0.2]).is_err());
        assert!(nch_kcrit(3, &[0.1, 0.3, 0.2, 0.4, 0.5]).is_err());
    }

    #[test]
    fn small_k_widths_follow_the_pendulum() {
        let m = measure_overlap(k(0.04)).unwrap();
        assert_abs_diff_eq!(m.w0, m.w1, epsilon = 1e-6);
        assert!((m.rho - 0.127).abs() <= 0.15 * 0.127, "rho = {}", m.rho);
        assert!(island_semi_amplitude(k(0.0), 0.0).is_err());
    }

    #[test]
    fn widths_vanish_with_k() {
        let small = chirikov_overlap(k(1e-6)).unwrap();
        assert!(small < 1e-2);
    }

    #[test]
    fn escaping_orbits_are_width_errors() {
        assert!(matches!(chirikov_overlap(k(5.0)), Err(Error::Width { .. })));
    }

    #[test]
    fn pendulum_crossing_is_pi_squared_over_four() {
        assert_abs_diff_eq!(pendulum_crossing(), PI * PI / 4.0, epsilon = 1e-9);
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
