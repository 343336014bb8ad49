//! Linear stability of periodic orbits and the destabilization threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{tangent_raw, Jacobian2x2, Stochasticity};
use crate::orbit::{
    alternate_orbit, continue_in_k, continued_orbit, rational_orbit, Convergent, Family, PeriodicOrbit,
    SymmetryLine, DEFAULT_DK_MAX,
};

/// Tolerance on `|trace| = 2` for the parabolic class.
pub const PARABOLIC_TOL: f64 = 1e-10;
/// Bisection width for the destabilization threshold.
pub const THRESHOLD_WIDTH: f64 = 1e-6;
const BRACKET_STEP: f64 = 0.02;
const BRACKET_K_MAX: f64 = 4.5;

/// Tangent product around an orbit. `entries` is the rounded matrix; the
/// product is accumulated in double-double and `low` keeps the remainders,
/// so `trace` and `det` stay accurate when the entries are large.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub entries: Jacobian2x2,
    #[serde(skip, default = "zero_matrix")]
    pub low: Jacobian2x2,
    pub n: usize,
}

fn zero_matrix() -> Jacobian2x2 {
    Jacobian2x2::new(0.0, 0.0, 0.0, 0.0)
}

impl Monodromy {
    pub fn from_entries(entries: Jacobian2x2, n: usize) -> Self {
        Self {
            entries,
            low: zero_matrix(),
            n,
        }
    }

    fn dd(&self) -> [Dd; 4] {
        let (e, l) = (&self.entries, &self.low);
        [
            Dd(e.a11, l.a11),
            Dd(e.a12, l.a12),
            Dd(e.a21, l.a21),
            Dd(e.a22, l.a22),
        ]
    }

    pub fn trace(&self) -> f64 {
        let [a, _, _, d] = self.dd();
        a.add(d).value()
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d] = self.dd();
        a.mul(d).add(b.mul(c).neg()).value()
    }
}

/// Unevaluated sum `hi + lo` of two doubles.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Self {
        Dd(x, 0.0)
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd(s, lo - (s - hi))
    }

    fn add(self, o: Dd) -> Dd {
        let Dd(s, e) = Dd::two_sum(self.0, o.0);
        Dd::renorm(s, e + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::renorm(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Elliptic,
    Hyperbolic,
    InverseHyperbolic,
    Parabolic,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Elliptic => "elliptic",
            Self::Hyperbolic => "hyperbolic",
            Self::InverseHyperbolic => "inverse-hyperbolic",
            Self::Parabolic => "parabolic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub trace: f64,
    pub residue: f64,
    #[serde(rename = "class")]
    pub classification: Classification,
    pub lyapunov: f64,
}

/// Stability report tagged with the orbit it belongs to; the JSON record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub m: u64,
    pub n: u64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(flatten)]
    pub report: StabilityReport,
}

/// Ordered product `DT(x_{n-1}) ... DT(x_0)` along the orbit.
pub fn monodromy(orbit: &PeriodicOrbit) -> Monodromy {
    let one = Dd::from(1.0);
    let zero = Dd::from(0.0);
    let mut m = [one, zero, zero, one];
    for x in &orbit.points {
        // [[1 + c, 1], [c, 1]] with c = K cos q; the unit entries stay exact
        let c = Dd::from(tangent_raw(x.q, orbit.k).a21);
        let [a, b, cc, d] = m;
        let (a2, b2) = (a.add(cc), b.add(d));
        m = [
            a2.add(c.mul(a)),
            b2.add(c.mul(b)),
            c.mul(a).add(cc),
            c.mul(b).add(d),
        ];
    }
    Monodromy {
        entries: Jacobian2x2::new(m[0].0, m[1].0, m[2].0, m[3].0),
        low: Jacobian2x2::new(m[0].1, m[1].1, m[2].1, m[3].1),
        n: orbit.points.len(),
    }
}

/// Greene's residue `(2 - trace) / 4`.
pub fn residue(m: &Monodromy) -> f64 {
    (2.0 - m.trace()) / 4.0
}

pub fn classify(m: &Monodromy) -> StabilityReport {
    let trace = m.trace();
    let classification = if (trace.abs() - 2.0).abs() <= PARABOLIC_TOL {
        Classification::Parabolic
    } else if trace.abs() < 2.0 {
        Classification::Elliptic
    } else if trace > 2.0 {
        Classification::Hyperbolic
    } else {
        Classification::InverseHyperbolic
    };
    let lyapunov = match classification {
        Classification::Elliptic | Classification::Parabolic => 0.0,
        _ => {
            // eigenvalues of a unit-determinant matrix: (tr +- sqrt(tr^2 - 4)) / 2
            let radius = 0.5 * (trace.abs() + (trace * trace - 4.0).sqrt());
            radius.ln() / m.n.max(1) as f64
        }
    };
    StabilityReport {
        trace,
        residue: residue(m),
        classification,
        lyapunov,
    }
}

pub fn stability_record(orbit: &PeriodicOrbit) -> StabilityRecord {
    StabilityRecord {
        m: orbit.convergent.m,
        n: orbit.convergent.n,
        k: orbit.k,
        report: classify(&monodromy(orbit)),
    }
}

fn orbit_at(c: Convergent, line: SymmetryLine, family: Family, k: f64) -> Result<PeriodicOrbit> {
    let k = Stochasticity::new(k)?;
    match (line, family) {
        (SymmetryLine::None, Family::Rational) => rational_orbit(c, k),
        (SymmetryLine::None, Family::Alternate(j)) => alternate_orbit(c, k, j),
        (line, _) => continued_orbit(c, k, line, DEFAULT_DK_MAX),
    }
}

fn orbit_residue(o: &PeriodicOrbit) -> f64 {
    residue(&monodromy(o))
}

/// Stochasticity at which the orbit's residue crosses 1 (trace crosses -2),
/// located by bisection in `K` with continuation at every probe.
///
/// `line = SymmetryLine::None` selects the orbit by family instead of by line.
pub fn destabilization_k(
    c: Convergent,
    line: SymmetryLine,
    family: Family,
    k_lo: f64,
    k_hi: f64,
) -> Result<f64> {
    if k_lo.partial_cmp(&k_hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Bracket(format!("need K_lo < K_hi, got [{k_lo}, {k_hi}]")));
    }
    let lo_orbit = orbit_at(c, line, family, k_lo)?;
    let r_lo = orbit_residue(&lo_orbit);
    if !(r_lo > 0.0 && r_lo < 1.0) {
        return Err(Error::Bracket(format!(
            "{family} {c} is not elliptic at K = {k_lo} (residue {r_lo})"
        )));
    }
    bisect_threshold(lo_orbit, k_hi, THRESHOLD_WIDTH)
}

fn bisect_threshold(mut lo_orbit: PeriodicOrbit, k_hi: f64, width: f64) -> Result<f64> {
    let hi_orbit = continue_in_k(&lo_orbit, Stochasticity::new(k_hi)?, DEFAULT_DK_MAX)?;
    let r_hi = orbit_residue(&hi_orbit);
    if r_hi < 1.0 {
        return Err(Error::Bracket(format!(
            "{} {} still has residue {r_hi} < 1 at K = {k_hi}",
            lo_orbit.family, lo_orbit.convergent
        )));
    }
    let mut hi = k_hi;
    while hi - lo_orbit.k > width {
        let mid = 0.5 * (lo_orbit.k + hi);
        let probe = continue_in_k(&lo_orbit, Stochasticity::new(mid)?, DEFAULT_DK_MAX)?;
        if orbit_residue(&probe) < 1.0 {
            lo_orbit = probe;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo_orbit.k + hi))
}

/// `K*(m, n)` for a family, bracketing automatically by stepping up from
/// small `K` until the residue first reaches 1.
pub fn destabilization_threshold(c: Convergent, family: Family) -> Result<f64> {
    destabilization_threshold_with(c, family, THRESHOLD_WIDTH)
}

/// As [`destabilization_threshold`] with an explicit final bracket width.
pub fn destabilization_threshold_with(c: Convergent, family: Family, width: f64) -> Result<f64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!(
            "bracket width must be positive, got {width}"
        )));
    }
    let mut orbit = orbit_at(c, SymmetryLine::None, family, BRACKET_STEP)?;
    let mut last_ok = orbit.clone();
    loop {
        let r = orbit_residue(&orbit);
        if r >= 1.0 {
            return bisect_threshold(last_ok, orbit.k, width);
        }
        if orbit.k >= BRACKET_K_MAX {
            return Err(Error::Bracket(format!(
                "{family} {c} residue stayed below 1 up to K = {BRACKET_K_MAX}"
            )));
        }
        last_ok = orbit.clone();
        let next = (orbit.k + BRACKET_STEP).min(BRACKET_K_MAX);
        orbit = continue_in_k(&orbit, Stochasticity::new(next)?, DEFAULT_DK_MAX)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::PhasePoint;
    use crate::orbit::find_periodic_orbit;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn k(v: f64) -> Stochasticity {
        Stochasticity::new(v).unwrap()
    }

    fn mono(trace: f64, n: usize) -> Monodromy {
        // companion form with unit determinant
        Monodromy::from_entries(Jacobian2x2::new(trace, -1.0, 1.0, 0.0), n)
    }

    #[test]
    fn fixed_point_monodromy_closed_form() {
        for kk in [0.0, 0.5, 1.0, 2.0, 3.3, 4.0] {
            let o = find_periodic_orbit(Convergent::FIXED_POINT, k(kk), SymmetryLine::QPi).unwrap();
            let m = monodromy(&o);
            assert_abs_diff_eq!(m.entries.a11, 1.0 - kk, epsilon = 1e-12);
            assert_abs_diff_eq!(m.entries.a12, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.entries.a21, -kk, epsilon = 1e-12);
            assert_abs_diff_eq!(m.entries.a22, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(residue(&m), kk / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn period_two_trace_closed_form() {
        let c = Convergent::new(1, 2).unwrap();
        for i in 0..=40 {
            let kk = 0.1 * i as f64;
            let o = PeriodicOrbit::from_seed(
                PhasePoint::new(0.0, PI),
                c,
                kk,
                Family::Rational,
                SymmetryLine::Q0,
            );
            let m = monodromy(&o);
            assert_abs_diff_eq!(m.trace(), 2.0 - kk * kk, epsilon = 1e-10);
            assert_abs_diff_eq!(residue(&m), kk * kk / 4.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn integrable_monodromy_is_a_shear() {
        let c = Convergent::new(5, 8).unwrap();
        let o = find_periodic_orbit(c, k(0.0), SymmetryLine::Q0).unwrap();
        let m = monodromy(&o);
        assert_eq!(m.entries, Jacobian2x2::new(1.0, 8.0, 0.0, 1.0));
        assert_eq!(residue(&m), 0.0);
        assert_eq!(classify(&m).classification, Classification::Parabolic);
    }

    #[test]
    fn classification_examples() {
        let r = classify(&mono(1.5, 3));
        assert_eq!(r.classification, Classification::Elliptic);
        assert_eq!(r.lyapunov, 0.0);

        let r = classify(&mono(-2.5, 2));
        assert_eq!(r.classification, Classification::InverseHyperbolic);
        let expected = 0.5 * ((2.5 + (2.5f64 * 2.5 - 4.0).sqrt()) / 2.0).ln();
        assert_abs_diff_eq!(r.lyapunov, expected, epsilon = 1e-15);
        assert!(r.residue > 1.0);

        let r = classify(&mono(3.0, 1));
        assert_eq!(r.classification, Classification::Hyperbolic);
        assert!(r.residue < 0.0 && r.lyapunov > 0.0);

        assert_eq!(classify(&mono(2.0, 1)).classification, Classification::Parabolic);
        assert_eq!(
            classify(&mono(-2.0 - 1e-11, 1)).classification,
            Classification::Parabolic
        );
    }

    #[test]
    fn trace_is_independent_of_starting_point() {
        let c = Convergent::new(5, 8).unwrap();
        let o = rational_orbit(c, k(0.8)).unwrap();
        let t0 = monodromy(&o).trace();
        for shift in 1..o.points.len() {
            let mut rotated = o.clone();
            rotated.points.rotate_left(shift);
            assert_abs_diff_eq!(monodromy(&rotated).trace(), t0, epsilon = 1e-10);
        }
    }

    #[test]
    fn determinant_survives_large_entries() {
        let c = Convergent::new(34, 55).unwrap();
        let o = alternate_orbit(c, k(1.2), 1).unwrap();
        let m = monodromy(&o);
        assert!(m.trace().abs() > 1e4);
        assert!((m.det() - 1.0).abs() <= 1e-12, "det = {}", m.det());
    }

    #[test]
    fn closed_form_thresholds() {
        let kf = destabilization_k(
            Convergent::FIXED_POINT,
            SymmetryLine::QPi,
            Family::Rational,
            1.0,
            4.5,
        )
        .unwrap();
        assert_abs_diff_eq!(kf, 4.0, epsilon = 1e-6);
        let k2 = destabilization_k(
            Convergent::new(1, 2).unwrap(),
            SymmetryLine::Q0,
            Family::Rational,
            0.5,
            2.5,
        )
        .unwrap();
        assert_abs_diff_eq!(k2, 2.0, epsilon = 1e-6);
        let auto = destabilization_threshold(Convergent::new(1, 2).unwrap(), Family::Rational).unwrap();
        assert_abs_diff_eq!(auto, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn bad_brackets_are_rejected() {
        let c = Convergent::new(1, 2).unwrap();
        assert!(matches!(
            destabilization_k(c, SymmetryLine::Q0, Family::Rational, 0.5, 1.5),
            Err(Error::Bracket(_))
        ));
        assert!(matches!(
            destabilization_k(c, SymmetryLine::Q0, Family::Rational, 2.5, 3.0),
            Err(Error::Bracket(_))
        ));
        // the hyperbolic partner is never elliptic
        assert!(matches!(
            destabilization_k(c, SymmetryLine::HalfP, Family::Alternate(1), 0.5, 3.0),
            Err(Error::Bracket(_))
        ));
    }

    #[test]
    fn thirteen_twentyone_threshold() {
        let kstar = destabilization_threshold(Convergent::new(13, 21).unwrap(), Family::Rational).unwrap();
        assert!(kstar > 0.9716 && kstar < 1.2, "K* = {kstar}");
    }

    #[test]
    fn record_serializes_flat() {
        let o = rational_orbit(Convergent::new(1, 2).unwrap(), k(0.5)).unwrap();
        let v = serde_json::to_value(stability_record(&o)).unwrap();
        for key in ["m", "n", "K", "trace", "residue", "class", "lyapunov"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["class"], "elliptic");
    }
}
