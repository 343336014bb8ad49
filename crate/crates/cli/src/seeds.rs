//! Seed lists for `portrait`: a count, or explicit `(q,p)` pairs.

use anyhow::{bail, Context, Result};
use kamcrit::map::PhasePoint;
use std::f64::consts::TAU;

/// `"12"` gives 12 seeds on `q = 0` at `p = 2 pi (i + 1/2) / 12`;
/// `"(0.1,3.88); (1,2)"` gives the listed points.
pub fn parse(text: &str) -> Result<Vec<PhasePoint>> {
    let text = text.trim();
    if let Ok(count) = text.parse::<usize>() {
        if count == 0 {
            bail!("--seeds count must be >= 1");
        }
        return Ok((0..count)
            .map(|i| PhasePoint::new(0.0, TAU * (i as f64 + 0.5) / count as f64))
            .collect());
    }
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let open = rest
            .find('(')
            .with_context(|| format!("unparseable seeds {text:?}: expected a count or (q,p) pairs"))?;
        if !rest[..open]
            .trim_matches(|c: char| c.is_whitespace() || c == ';' || c == ',')
            .is_empty()
        {
            bail!("unparseable seeds {text:?}: stray text before '('");
        }
        let close = rest[open..]
            .find(')')
            .map(|i| i + open)
            .with_context(|| format!("unparseable seeds {text:?}: missing ')'"))?;
        let inner = &rest[open + 1..close];
        let (q, p) = inner
            .split_once(',')
            .with_context(|| format!("unparseable seed ({inner}): expected (q,p)"))?;
        let q: f64 = q.trim().parse().with_context(|| format!("bad q in ({inner})"))?;
        let p: f64 = p.trim().parse().with_context(|| format!("bad p in ({inner})"))?;
        if !(q.is_finite() && p.is_finite()) {
            bail!("seed ({inner}) is not finite");
        }
        out.push(PhasePoint::new(q, p));
        rest = rest[close + 1..].trim_start_matches(|c: char| c.is_whitespace() || c == ';' || c == ',');
    }
    if out.is_empty() {
        bail!("no seeds given");
    }
    Ok(out)
}
