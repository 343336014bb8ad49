//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p kamcrit-core --test acceptance`.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use kamcrit::criteria::{
    extrapolate, greene_kcrit, island_semi_amplitude, match_elliptic_points, measure_overlap,
    measured_crossing, nch_curves, pendulum_crossing, pendulum_semi_amplitude,
};
use kamcrit::map::{
    euler_lagrange_residual, symplecticity_check, torus_distance, trajectory, PhasePoint, StandardMap,
    Stochasticity,
};
use kamcrit::orbit::{
    fibonacci_convergents, orbit_pair, winding_number, Convergent, Family, PeriodicOrbit, GOLDEN_MEAN,
};
use kamcrit::scan::{run_scan, ScanConfig};
use kamcrit::stability::{classify, destabilization_threshold, monodromy, Classification};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn k(v: f64) -> Stochasticity {
    Stochasticity::new(v).unwrap()
}

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("criterion {id:<3} {tag}  {detail}");
        self.lines.push((id.to_string(), ok));
    }

    fn note(&self, text: String) {
        println!("              {text}");
    }
}

/// Orbits of both families for all Fibonacci orders up to 89, at a few K.
fn orbit_bank() -> (Vec<PeriodicOrbit>, Vec<String>) {
    let cs = fibonacci_convergents(9).unwrap();
    let ks = [0.3, 0.6, 0.9, 1.2];
    let jobs: Vec<(Convergent, f64)> = cs
        .iter()
        .flat_map(|&c| ks.iter().map(move |&kv| (c, kv)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(c, kv)| (c, kv, orbit_pair(c, k(kv))))
        .collect();
    let mut orbits = Vec::new();
    let mut failures = Vec::new();
    for (c, kv, r) in results {
        match r {
            Ok((a, b)) => {
                orbits.push(a);
                orbits.push(b);
            }
            Err(e) => failures.push(format!("{c} at K={kv}: {e}")),
        }
    }
    (orbits, failures)
}

fn criterion_1(r: &mut Report) -> f64 {
    let t = Instant::now();
    let res = greene_kcrit(9).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let per_n = &res.per_n;
    let complete = per_n.len() == 9;
    let upto55: Vec<f64> = per_n.iter().filter(|(n, _)| *n <= 55).map(|x| x.1).collect();
    let upto89: Vec<f64> = per_n.iter().map(|x| x.1).collect();
    let (k55, _) = extrapolate(&upto55);
    let (k89, _) = extrapolate(&upto89);
    r.note(format!(
        "K*(n): {}",
        per_n
            .iter()
            .map(|(n, v)| format!("{n}:{v:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    r.check(
        "1a",
        complete && (0.95..=0.99).contains(&k55),
        format!("Greene K_crit (n <= 55) = {k55:.6}, want [0.95, 0.99]"),
    );
    r.check(
        "1b",
        complete && (0.96..=0.985).contains(&k89),
        format!("Greene K_crit (n <= 89) = {k89:.6}, want [0.96, 0.985] ({elapsed:.1} s)"),
    );
    k89
}

fn criterion_2(r: &mut Report) {
    let fixed = destabilization_threshold(Convergent::FIXED_POINT, Family::Rational).unwrap();
    let half = destabilization_threshold(Convergent::new(1, 2).unwrap(), Family::Rational).unwrap();
    r.check(
        "2",
        (fixed - 4.0).abs() <= 1e-5 && (half - 2.0).abs() <= 1e-5,
        format!("K*(0/1) = {fixed:.7}, K*(1/2) = {half:.7}, want 4 and 2 within 1e-5"),
    );
}

fn criterion_3(r: &mut Report, bank: &[PeriodicOrbit]) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let x = PhasePoint::new(rng.gen_range(-PI..PI), rng.gen_range(0.0..TAU));
        let kv = rng.gen_range(0.0..10.0);
        worst = worst.max(symplecticity_check(x, k(kv)).unwrap());
    }
    let worst_mono = bank
        .iter()
        .filter(|o| o.k <= 1.2)
        .map(|o| (monodromy(o).det() - 1.0).abs())
        .fold(0.0, f64::max);
    r.check(
        "3",
        worst <= 1e-12 && worst_mono <= 1e-9,
        format!(
            "max |det DT - 1| = {worst:.2e} over 1e5 points; max |det M - 1| = {worst_mono:.2e} over {} orbits",
            bank.len()
        ),
    );
}

fn criterion_4(r: &mut Report, bank: &[PeriodicOrbit], failures: &[String]) {
    let worst_closure = bank.iter().map(|o| o.closure_error).fold(0.0, f64::max);
    r.check(
        "4a",
        worst_closure <= 1e-9,
        format!(
            "max lifted closure error = {worst_closure:.2e} over {} orbits",
            bank.len()
        ),
    );
    for f in failures {
        r.note(format!("orbit not returned: {f}"));
    }
    let errs: Vec<(bool, f64, String)> = bank
        .par_iter()
        .map(|o| {
            let c = o.convergent;
            let iters = c.n as usize * 1000;
            let w = winding_number(o.seed(), k(o.k), iters).unwrap();
            let elliptic = matches!(classify(&monodromy(o)).classification, Classification::Elliptic);
            (
                elliptic,
                (w - c.ratio()).abs(),
                format!("{} {c} K={}", o.family, o.k),
            )
        })
        .collect();
    let (ell, hyp): (Vec<_>, Vec<_>) = errs.iter().partition(|e| e.0);
    let worst = |v: &[&(bool, f64, String)]| {
        v.iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|e| (e.1, e.2.clone()))
            .unwrap_or((0.0, "none".into()))
    };
    let (we, we_at) = worst(&ell);
    let (wh, wh_at) = worst(&hyp);
    r.check(
        "4b",
        we <= 1e-10,
        format!(
            "winding over n*1000 iterations, {} elliptic orbits: max error {we:.2e} ({we_at})",
            ell.len()
        ),
    );
    let bad = hyp.iter().filter(|e| e.1 > 1e-10).count();
    r.check(
        "4c",
        wh <= 1e-10,
        format!(
            "winding over n*1000 iterations, {} non-elliptic orbits: {bad} exceed 1e-10, max error {wh:.2e} ({wh_at})",
            hyp.len()
        ),
    );
}

fn criterion_5(r: &mut Report, bank: &[PeriodicOrbit]) {
    let map = StandardMap;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_random: f64 = 0.0;
    for _ in 0..100 {
        let x = PhasePoint::new(rng.gen_range(-PI..PI), rng.gen_range(0.0..TAU));
        let kv = k(rng.gen_range(0.0..5.0));
        let traj = trajectory(x, kv, 50).unwrap();
        let res = euler_lagrange_residual(&traj, &map, kv).unwrap();
        worst_random = res.iter().fold(worst_random, |a, b| a.max(*b));
    }
    let worst_orbit = bank
        .iter()
        .map(|o| {
            let traj = o.closed_trajectory();
            euler_lagrange_residual(&traj, &map, k(o.k))
                .unwrap()
                .into_iter()
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let kv = k(1.0);
    let mut traj = trajectory(PhasePoint::new(0.3, 1.1), kv, 50).unwrap();
    traj[25].q += 1e-3;
    let res = euler_lagrange_residual(&traj, &map, kv).unwrap();
    // residual r[i-1] belongs to interior index i
    let adjacent = res[23].min(res[24]);
    r.check(
        "5",
        worst_random <= 1e-10 && worst_orbit <= 1e-10 && adjacent >= 1e-4,
        format!(
            "EL residual: random {worst_random:.2e}, orbits {worst_orbit:.2e}; perturbed neighbours {adjacent:.2e} (>= 1e-4)"
        ),
    );
}

/// Independent period-n solver for the grid search: plain iteration and tangent products.
fn grid_newton(seed: (f64, f64), m: u64, n: u64, kv: f64) -> Option<(f64, f64)> {
    let (mut q0, mut p0) = seed;
    for _ in 0..30 {
        let (mut q, mut p) = (q0, p0);
        let (mut a, mut b, mut c, mut d) = (1.0, 0.0, 0.0, 1.0);
        for _ in 0..n {
            let kc = kv * q.cos();
            let (na, nb) = ((1.0 + kc) * a + c, (1.0 + kc) * b + d);
            let (nc, nd) = (kc * a + c, kc * b + d);
            (a, b, c, d) = (na, nb, nc, nd);
            p += kv * q.sin();
            q += p;
        }
        let f1 = q - q0 - TAU * m as f64;
        let f2 = p - p0;
        if f1.abs().max(f2.abs()) <= 1e-12 {
            return Some((q0, p0));
        }
        let (ja, jb, jc, jd) = (a - 1.0, b, c, d - 1.0);
        let det = ja * jd - jb * jc;
        if det.abs() < 1e-14 {
            return None;
        }
        q0 -= (jd * f1 - jb * f2) / det;
        p0 -= (-jc * f1 + ja * f2) / det;
        if !(q0.is_finite() && p0.is_finite()) || p0.abs() > 4.0 * TAU {
            return None;
        }
    }
    None
}

fn criterion_6(r: &mut Report) {
    let cases: Vec<(Convergent, f64)> = [(0, 1), (1, 2), (1, 3), (2, 3)]
        .iter()
        .flat_map(|&(m, n)| {
            [0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(move |&kv| (Convergent::new(m, n).unwrap(), kv))
        })
        .collect();
    const GRID: usize = 400;
    let outcomes: Vec<(String, f64)> = cases
        .par_iter()
        .map(|&(c, kv)| {
            let found: Vec<PhasePoint> = (0..GRID * GRID)
                .filter_map(|idx| {
                    let q = -PI + TAU * (idx / GRID) as f64 / GRID as f64;
                    let p = TAU * (idx % GRID) as f64 / GRID as f64;
                    grid_newton((q, p), c.m, c.n, kv).map(|(q, p)| PhasePoint::new(q, p))
                })
                .collect();
            let label = format!("{c} K={kv}");
            let Ok((a, b)) = orbit_pair(c, k(kv)) else {
                return (label, f64::INFINITY);
            };
            let worst = [a, b]
                .iter()
                .flat_map(|o| o.points.clone())
                .map(|x| {
                    found
                        .iter()
                        .map(|y| torus_distance(x, *y))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            (label, worst)
        })
        .collect();
    let (worst_label, worst) = outcomes
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap();
    r.check(
        "6a",
        worst <= 1e-8,
        format!("symmetry-line orbits vs 400x400 grid + Newton, n <= 3, K <= 1: max distance {worst:.2e} ({worst_label})"),
    );

    let mut mismatches = Vec::new();
    let mut checked = 0;
    for c in fibonacci_convergents(4).unwrap() {
        for kv in [0.3, 0.6, 0.9] {
            let (a, b) = orbit_pair(c, k(kv)).unwrap();
            let greedy: f64 = match_elliptic_points(&a, &b).unwrap().iter().map(|x| x.2).sum();
            let best = min_weight_matching(&a.points, &b.points);
            checked += 1;
            if (greedy - best).abs() > 1e-12 {
                mismatches.push(format!("{c} K={kv}: greedy {greedy:.4} vs exhaustive {best:.4}"));
            }
        }
    }
    r.check(
        "6b",
        mismatches.is_empty(),
        format!(
            "greedy vs exhaustive matching, n <= 8: {} of {checked} cases differ",
            mismatches.len()
        ),
    );
    for m in mismatches {
        r.note(m);
    }
}

/// Exhaustive minimum total distance over all permutations.
fn min_weight_matching(a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
    fn go(i: usize, a: &[PhasePoint], b: &[PhasePoint], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, a, b, used, acc + torus_distance(a[i], b[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, a, b, &mut vec![false; b.len()], 0.0, &mut best);
    best
}

fn criterion_7(r: &mut Report, greene: f64) {
    let grid: Vec<f64> = (0..=15).map(|i| 0.80 + 0.02 * i as f64).collect();
    let curves = nch_curves(8, &grid).unwrap();
    let mut all_interior = true;
    let mut minimizers = Vec::new();
    for (c, curve) in curves.iter().filter(|(c, _)| [13, 21, 34].contains(&c.n)) {
        match curve {
            Ok(curve) => {
                let (kmin, dmin) = curve
                    .samples
                    .iter()
                    .copied()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                let interior = curve.minimizer();
                all_interior &= interior.is_some() && curve.samples.len() == grid.len();
                minimizers.push(format!(
                    "{}:{}",
                    c.n,
                    interior.map_or("none".into(), |v| format!("{v:.4}"))
                ));
                r.note(format!(
                    "n={} d(K) from {:.5} at K={:.2} to {:.5} at K={:.2}; grid minimum {dmin:.5} at K={kmin:.2}",
                    c.n,
                    curve.samples[0].1,
                    curve.samples[0].0,
                    curve.samples.last().unwrap().1,
                    curve.samples.last().unwrap().0,
                ));
            }
            Err(e) => {
                all_interior = false;
                minimizers.push(format!("{}:error", c.n));
                r.note(format!("n={} curve failed: {e}", c.n));
            }
        }
    }
    r.check(
        "7",
        all_interior,
        format!(
            "NCH d(K) interior minimum on 0.80:0.02:1.10 for n = 13, 21, 34; minimizers {}; Greene {greene:.6}",
            minimizers.join(" ")
        ),
    );
}

fn criterion_8(r: &mut Report) {
    let mut rhos = Vec::new();
    let mut escapes = Vec::new();
    for i in 1..=100 {
        let kv = i as f64 * 0.01;
        match measure_overlap(k(kv)) {
            Ok(m) => rhos.push((kv, m.rho)),
            Err(e) => escapes.push(format!("K={kv:.2}: {e}")),
        }
    }
    let drops: Vec<String> = rhos
        .windows(2)
        .filter(|w| w[1].1 < w[0].1)
        .map(|w| format!("K={:.2}: {:.4} -> {:.4}", w[1].0, w[0].1, w[1].1))
        .collect();
    let monotone = escapes.is_empty() && drops.is_empty();
    r.check(
        "8a",
        monotone,
        format!(
            "measured rho non-decreasing on 0.01..1.00 ({} points, rho(1) = {:.4}, {} escapes)",
            rhos.len(),
            rhos.last().map_or(f64::NAN, |x| x.1),
            escapes.len()
        ),
    );
    for d in drops.iter().chain(&escapes) {
        r.note(d.clone());
    }
    let worst_rel = (1..=10)
        .map(|i| {
            let kv = i as f64 * 0.01;
            let w = island_semi_amplitude(k(kv), 0.0).unwrap();
            (w / pendulum_semi_amplitude(kv) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    r.check(
        "8b",
        worst_rel <= 0.15,
        format!("semi-amplitude vs 2 sqrt(K) for K <= 0.1: worst relative deviation {worst_rel:.3}"),
    );
    let pend = pendulum_crossing();
    r.check(
        "8c",
        (pend - 2.47).abs() <= 0.25,
        format!("rho = 1 crossing under the pendulum oracle: K = {pend:.4}, want 2.47 +- 0.25"),
    );
    let measured = measured_crossing(0.01, 10.0);
    let detail = match &measured {
        Ok(v) => format!("rho = 1 crossing of the measured widths: K = {v:.4}, want 2.47 +- 0.25"),
        Err(e) => format!("measured crossing not found: {e}"),
    };
    r.check("8d", measured.is_ok_and(|v| (v - 2.47).abs() <= 0.25), detail);
}

fn criterion_9(r: &mut Report) {
    let x0 = PhasePoint::new(0.1, TAU * GOLDEN_MEAN);
    let excursion = |kv: f64| {
        trajectory(x0, k(kv), 10_000)
            .unwrap()
            .iter()
            .map(|x| (x.p - x0.p).abs())
            .fold(0.0, f64::max)
    };
    let (lo, hi) = (excursion(0.5), excursion(5.0));
    r.check(
        "9",
        lo < TAU && hi > TAU,
        format!("lifted p excursion over 1e4 iterates: {lo:.4} at K=0.5 (< 2 pi), {hi:.2} at K=5 (> 2 pi)"),
    );
}

fn criterion_10(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "K_grid = 0.80:0.05:1.00\ndepth = 5\nmethods = greene, nch, chirikov\noutput_dir = {}\n",
        dir.path().join("run").display()
    );
    let cfg = ScanConfig::parse(&text).unwrap();
    let read_all = || {
        ["greene", "nch", "chirikov"]
            .iter()
            .map(|m| std::fs::read(cfg.output_dir.join(format!("{m}.csv"))).unwrap())
            .collect::<Vec<_>>()
    };
    let m1 = run_scan(&cfg).unwrap();
    let first = read_all();
    let m2 = run_scan(&cfg).unwrap();
    let second = read_all();
    r.check(
        "10",
        first == second && m1.config_sha256 == m2.config_sha256,
        format!(
            "two runs of one scan config: CSV bodies identical = {}, {} tasks, {} failed",
            first == second,
            m1.task_count,
            m1.failure_count
        ),
    );
}

fn main() {
    let t0 = Instant::now();
    let mut r = Report { lines: Vec::new() };
    let greene = criterion_1(&mut r);
    criterion_2(&mut r);
    let (bank, failures) = orbit_bank();
    criterion_3(&mut r, &bank);
    criterion_4(&mut r, &bank, &failures);
    criterion_5(&mut r, &bank);
    criterion_6(&mut r);
    criterion_7(&mut r, greene);
    criterion_8(&mut r);
    criterion_9(&mut r);
    criterion_10(&mut r);
    let failed: Vec<&str> = r.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {} checks, {} failed{} ({:.1} s)",
        r.lines.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" [{}]", failed.join(", "))
        },
        t0.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
