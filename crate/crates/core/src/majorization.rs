//! Weak majorization of discrete spectra and convex-trace monotonicity.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::FunctionSpec;
use crate::spectrum::DiscreteSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreorderViolation {
    pub k: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreorderResult {
    pub holds: bool,
    /// Prefix length actually compared.
    pub compared: u64,
    pub violation: Option<PreorderViolation>,
}

/// Atoms ordered by nonincreasing `|lambda|`, equal moduli by descending signed value.
fn decreasing_runs(s: &DiscreteSpectrum) -> Vec<(f64, u64)> {
    let mut runs: Vec<(f64, u64)> = s.atoms().to_vec();
    runs.sort_by(|a, b| {
        b.0.abs()
            .total_cmp(&a.0.abs())
            .then_with(|| b.0.total_cmp(&a.0))
    });
    runs
}

/// Value of the `k`-th entry (1-based) and the run boundaries, padded with zeros.
struct Runs {
    runs: Vec<(f64, u64)>,
}

impl Runs {
    fn new(s: &DiscreteSpectrum, len: u64) -> Self {
        let mut runs = decreasing_runs(s);
        let total = s.total_multiplicity();
        if len > total {
            runs.push((0.0, len - total));
        }
        Runs { runs }
    }

    fn breakpoints(&self) -> Vec<u64> {
        let mut acc = 0;
        self.runs
            .iter()
            .map(|&(_, m)| {
                acc += m;
                acc
            })
            .collect()
    }
}

/// Prefix sum of a run list at every requested (sorted) breakpoint, plus the
/// value in force just after each breakpoint.
fn prefix_at(runs: &Runs, points: &[u64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(points.len());
    let mut idx = 0;
    let mut start = 0u64;
    let mut base = 0.0;
    for &k in points {
        while idx < runs.runs.len() && start + runs.runs[idx].1 <= k {
            base += runs.runs[idx].0 * runs.runs[idx].1 as f64;
            start += runs.runs[idx].1;
            idx += 1;
        }
        let (value, partial) = match runs.runs.get(idx) {
            Some(&(v, _)) => (v, base + v * (k - start) as f64),
            None => (0.0, base),
        };
        out.push((partial, value));
    }
    out
}

/// `X ≼ Y`: every prefix sum of the decreasing rearrangement of `X` is bounded
/// by that of `Y`. The shorter sequence is padded with zeros.
pub fn preceq(x: &DiscreteSpectrum, y: &DiscreteSpectrum, k_max: Option<u64>) -> PreorderResult {
    let full = x.total_multiplicity().max(y.total_multiplicity());
    let n = k_max.map_or(full, |k| k.min(full));
    let rx = Runs::new(x, full);
    let ry = Runs::new(y, full);

    let mut points: Vec<u64> = std::iter::once(0)
        .chain(rx.breakpoints())
        .chain(ry.breakpoints())
        .filter(|&k| k <= n)
        .collect();
    points.push(n);
    points.sort_unstable();
    points.dedup();

    let px = prefix_at(&rx, &points);
    let py = prefix_at(&ry, &points);
    for i in 1..points.len() {
        let (k0, k1) = (points[i - 1], points[i]);
        let (lx1, ly1) = (px[i].0, py[i].0);
        if lx1 <= ly1 {
            // linear on the segment, and the left end already holds
            continue;
        }
        let (sx, vx) = px[i - 1];
        let (sy, vy) = py[i - 1];
        let d0 = sx - sy;
        let slope = vx - vy;
        let span = k1 - k0;
        let mut j = if slope > 0.0 {
            ((-d0 / slope).floor() + 1.0).clamp(1.0, span as f64) as u64
        } else {
            span
        };
        let at = |j: u64| (sx + vx * j as f64, sy + vy * j as f64);
        while j > 1 {
            let (a, b) = at(j - 1);
            if a > b {
                j -= 1;
            } else {
                break;
            }
        }
        while j < span {
            let (a, b) = at(j);
            if a > b {
                break;
            }
            j += 1;
        }
        let (lhs, rhs) = at(j);
        return PreorderResult {
            holds: false,
            compared: n,
            violation: Some(PreorderViolation { k: k0 + j, lhs, rhs }),
        };
    }
    PreorderResult {
        holds: true,
        compared: n,
        violation: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexTraceReport {
    pub x: DiscreteSpectrum,
    pub y: DiscreteSpectrum,
    pub phi: FunctionSpec,
    pub trace_x: f64,
    pub trace_y: f64,
    pub holds: bool,
}

fn phi_trace(s: &DiscreteSpectrum, phi: &FunctionSpec) -> Result<f64> {
    s.weighted_sum(|t| phi.eval(t))
}

/// Checks `Tr Phi(X) <= Tr Phi(Y)` for `X ≼ Y` and an admitted convex `Phi`.
pub fn convex_trace_monotonicity_check(
    x: &DiscreteSpectrum,
    y: &DiscreteSpectrum,
    phi: &FunctionSpec,
) -> Result<ConvexTraceReport> {
    for s in [x, y] {
        if let Some(&(v, _)) = s.atoms().iter().find(|a| a.0 < 0.0) {
            return Err(Error::NegativeEigenvalue(v));
        }
    }
    phi.validate()?;
    if !phi.convex_nondecreasing_through_origin() {
        return Err(Error::Parameter(format!(
            "{phi} is not in the admitted convex nondecreasing family through the origin"
        )));
    }
    let pre = preceq(x, y, None);
    if let Some(v) = pre.violation {
        return Err(Error::PreorderNotEstablished {
            k: v.k,
            lhs: v.lhs,
            rhs: v.rhs,
        });
    }
    let trace_x = phi_trace(x, phi)?;
    let trace_y = phi_trace(y, phi)?;
    let scale = trace_x.abs().max(trace_y.abs()).max(1.0);
    Ok(ConvexTraceReport {
        x: x.clone(),
        y: y.clone(),
        phi: phi.clone(),
        trace_x,
        trace_y,
        holds: trace_x <= trace_y + 1e-12 * scale,
    })
}

/// Random positive `Y` on the 1/16 lattice and an `X ≼ Y` obtained from it by
/// Robin-Hood transfers followed by pointwise shrinking.
pub fn majorized_pair<R: Rng + ?Sized>(rng: &mut R) -> (DiscreteSpectrum, DiscreteSpectrum) {
    const Q: f64 = 16.0;
    let atoms = rng.gen_range(1..=12usize);
    let y_pairs: Vec<(f64, u64)> = (0..atoms)
        .map(|_| (rng.gen_range(1..=64 * 16u32) as f64 / Q, rng.gen_range(1..=3u64)))
        .collect();
    let y = DiscreteSpectrum::from_unsorted(y_pairs, "Y").expect("lattice atoms are finite");

    // work in lattice units so every step is exact
    let mut units: Vec<u32> = y.expand().iter().map(|v| (v * Q) as u32).collect();
    let transfers = rng.gen_range(0..=units.len());
    for _ in 0..transfers {
        let i = rng.gen_range(0..units.len());
        let j = rng.gen_range(0..units.len());
        let (hi, lo) = if units[i] >= units[j] { (i, j) } else { (j, i) };
        let room = (units[hi] - units[lo]) / 2;
        if room == 0 {
            continue;
        }
        let delta = rng.gen_range(1..=room);
        units[hi] -= delta;
        units[lo] += delta;
    }
    for u in units.iter_mut() {
        if rng.gen_bool(0.3) {
            let cut = rng.gen_range(0..=*u);
            *u -= cut;
        }
    }
    let x = DiscreteSpectrum::from_unsorted(units.iter().map(|&u| (u as f64 / Q, 1)).collect(), "X")
        .expect("lattice atoms are finite");
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(v: &[f64]) -> DiscreteSpectrum {
        DiscreteSpectrum::diag(v).unwrap()
    }

    /// Direct oracle over the expanded, padded sequences.
    fn brute(x: &DiscreteSpectrum, y: &DiscreteSpectrum) -> Option<u64> {
        let sorted = |s: &DiscreteSpectrum, n: usize| {
            let mut v = s.expand();
            v.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
            v.resize(n, 0.0);
            v
        };
        let n = x.total_multiplicity().max(y.total_multiplicity()) as usize;
        let (a, b) = (sorted(x, n), sorted(y, n));
        let (mut sa, mut sb) = (0.0, 0.0);
        for k in 0..n {
            sa += a[k];
            sb += b[k];
            if sa > sb {
                return Some(k as u64 + 1);
            }
        }
        None
    }

    #[test]
    fn preceq_examples() {
        assert!(preceq(&d(&[1.0, 1.0]), &d(&[2.0, 1.0]), None).holds);
        let x = d(&[0.5, 3.0, 2.0]);
        assert!(preceq(&x, &x, None).holds);
        let r = preceq(&d(&[3.0]), &d(&[1.0, 1.0, 1.0]), None);
        assert!(!r.holds);
        assert_eq!(r.violation, Some(PreorderViolation { k: 1, lhs: 3.0, rhs: 1.0 }));
    }

    #[test]
    fn violation_inside_a_run() {
        // prefix sums x: 1..6, y: 3, 3.5, 4, 4.5, 5, 5
        let x = DiscreteSpectrum::new(vec![(1.0, 6)], None, "").unwrap();
        let y = DiscreteSpectrum::new(vec![(0.5, 4), (3.0, 1)], None, "").unwrap();
        let r = preceq(&x, &y, None);
        assert_eq!(r.violation.map(|v| v.k), brute(&x, &y));
        assert_eq!(r.violation.unwrap().k, 6);
    }

    #[test]
    fn k_max_limits_comparison() {
        let x = d(&[1.0, 1.0, 1.0]);
        let y = d(&[2.0]);
        assert!(preceq(&x, &y, Some(2)).holds);
        assert_eq!(preceq(&x, &y, None).violation.unwrap().k, 3);
    }

    #[test]
    fn signed_tiebreak() {
        // |2| = |-2|: +2 is listed first
        let x = d(&[-2.0, 2.0]);
        let y = d(&[2.0, 0.0]);
        assert!(preceq(&x, &y, None).holds);
        assert!(!preceq(&y, &x, None).holds);
    }

    #[test]
    fn agrees_with_expanded_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut gen = || {
                let n = rng.gen_range(0..6);
                let atoms: Vec<(f64, u64)> = (0..n)
                    .map(|_| (rng.gen_range(-6i32..=6) as f64 / 2.0, rng.gen_range(1..=4)))
                    .collect();
                DiscreteSpectrum::from_unsorted(atoms, "").unwrap()
            };
            let (x, y) = (gen(), gen());
            let r = preceq(&x, &y, None);
            assert_eq!(r.violation.map(|v| v.k), brute(&x, &y), "{x:?} vs {y:?}");
            assert_eq!(r.holds, r.violation.is_none());
        }
    }

    #[test]
    fn convex_trace_examples() {
        let r = convex_trace_monotonicity_check(&d(&[1.0, 1.0]), &d(&[2.0, 1.0]), &FunctionSpec::power(2.0)).unwrap();
        assert_eq!((r.trace_x, r.trace_y), (2.0, 5.0));
        assert!(r.holds);

        let x = d(&[0.25, 4.0, 4.0]);
        let r = convex_trace_monotonicity_check(&x, &x, &FunctionSpec::hinge(1.0)).unwrap();
        assert_eq!(r.trace_x, r.trace_y);

        let r = convex_trace_monotonicity_check(&d(&[1.0, 2.0]), &d(&[3.0, 1.0]), &FunctionSpec::Identity).unwrap();
        assert_eq!((r.trace_x, r.trace_y), (3.0, 4.0));
    }

    #[test]
    fn convex_trace_errors() {
        let err = convex_trace_monotonicity_check(&d(&[3.0]), &d(&[1.0, 1.0, 1.0]), &FunctionSpec::power(2.0)).unwrap_err();
        assert!(matches!(err, Error::PreorderNotEstablished { k: 1, .. }));
        let err = convex_trace_monotonicity_check(&d(&[1.0]), &d(&[2.0]), &FunctionSpec::power(0.5)).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
        let err = convex_trace_monotonicity_check(&d(&[-1.0]), &d(&[2.0]), &FunctionSpec::Identity).unwrap_err();
        assert!(matches!(err, Error::NegativeEigenvalue(_)));
    }

    #[test]
    fn generated_pairs_are_majorized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1729);
        for _ in 0..500 {
            let (x, y) = majorized_pair(&mut rng);
            assert!(preceq(&x, &y, None).holds, "{x:?} {y:?}");
            assert_eq!(brute(&x, &y), None);
        }
    }
}
