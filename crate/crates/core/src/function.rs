//! A closed, serializable algebra of real functions applied through the
//! functional calculus.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Identity,
    Affine {
        a: f64,
        b: f64,
    },
    /// `t^beta` on `[0, inf)`.
    Power {
        beta: f64,
    },
    /// `exp(c t)`.
    ExpScale {
        c: f64,
    },
    /// `ln t` for `t >= 1`, zero below.
    LogPos,
    /// Indicator of the closed interval `[lo, hi]`.
    Indicator {
        lo: f64,
        hi: f64,
    },
    /// One on `|t| <= lambda`, linear down to zero at `|t| = 2 lambda`.
    CutoffRamp {
        lambda: f64,
    },
    /// Linear interpolation between knots, linear extrapolation with the end slopes.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    Compose {
        outer: Box<FunctionSpec>,
        inner: Box<FunctionSpec>,
    },
    /// `t` on `[-k, k]`, zero outside.
    TruncateBand {
        k: f64,
    },
}

impl FunctionSpec {
    pub fn affine(a: f64, b: f64) -> Self {
        FunctionSpec::Affine { a, b }
    }

    pub fn power(beta: f64) -> Self {
        FunctionSpec::Power { beta }
    }

    pub fn exp_scale(c: f64) -> Self {
        FunctionSpec::ExpScale { c }
    }

    pub fn indicator(lo: f64, hi: f64) -> Self {
        FunctionSpec::Indicator { lo, hi }
    }

    pub fn cutoff_ramp(lambda: f64) -> Self {
        FunctionSpec::CutoffRamp { lambda }
    }

    pub fn truncate_band(k: f64) -> Self {
        FunctionSpec::TruncateBand { k }
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let f = FunctionSpec::PiecewiseLinear { knots };
        f.validate()?;
        Ok(f)
    }

    pub fn compose(outer: FunctionSpec, inner: FunctionSpec) -> Self {
        FunctionSpec::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    /// `max(t - a, 0)`, written as a three-knot piecewise-linear spec.
    pub fn hinge(a: f64) -> Self {
        assert!(a >= 0.0 && a.is_finite(), "hinge offset must be finite and >= 0");
        let knots = if a == 0.0 {
            vec![(-1.0, 0.0), (0.0, 0.0), (1.0, 1.0)]
        } else {
            vec![(0.0, 0.0), (a, 0.0), (a + 1.0, 1.0)]
        };
        FunctionSpec::PiecewiseLinear { knots }
    }

    /// `|t|`.
    pub fn abs() -> Self {
        FunctionSpec::PiecewiseLinear {
            knots: vec![(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Checks parameter ranges recursively.
    pub fn validate(&self) -> Result<()> {
        use FunctionSpec::*;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            Identity | LogPos => Ok(()),
            Affine { a, b } => {
                finite("affine a", *a)?;
                finite("affine b", *b)
            }
            Power { beta } => {
                if beta.is_finite() && *beta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("power exponent must be > 0, got {beta}")))
                }
            }
            ExpScale { c } => finite("exp_scale c", *c),
            Indicator { lo, hi } => {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    Err(Error::Parameter(format!("indicator needs lo <= hi, got [{lo}, {hi}]")))
                } else {
                    Ok(())
                }
            }
            CutoffRamp { lambda } => positive("cutoff_ramp lambda", *lambda),
            TruncateBand { k } => positive("truncate_band k", *k),
            PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return Err(Error::Parameter("piecewise_linear needs at least one knot".into()));
                }
                for &(t, v) in knots {
                    finite("knot abscissa", t)?;
                    finite("knot value", v)?;
                }
                if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Parameter(
                        "piecewise_linear knots must be strictly increasing in t".into(),
                    ));
                }
                Ok(())
            }
            Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        eval_function(self, t)
    }

    /// Provably nondecreasing on the declared domain.
    pub fn monotone_flag(&self) -> bool {
        use FunctionSpec::*;
        match self {
            Identity | Power { .. } | LogPos => true,
            Affine { a, .. } => *a >= 0.0,
            ExpScale { c } => *c >= 0.0,
            PiecewiseLinear { knots } => knots.windows(2).all(|w| w[0].1 <= w[1].1),
            Compose { outer, inner } => outer.monotone_flag() && inner.monotone_flag(),
            Indicator { .. } | CutoffRamp { .. } | TruncateBand { .. } => false,
        }
    }

    /// Bounded in absolute value on the declared domain.
    pub fn bounded_flag(&self) -> bool {
        use FunctionSpec::*;
        match self {
            Identity | Power { .. } | LogPos => false,
            Affine { a, .. } => *a == 0.0,
            ExpScale { c } => *c == 0.0,
            Indicator { .. } | CutoffRamp { .. } | TruncateBand { .. } => true,
            PiecewiseLinear { knots } => {
                let (first, last) = end_slopes(knots);
                first == 0.0 && last == 0.0
            }
            // every primitive is locally bounded, so a bounded inner suffices
            Compose { outer, inner } => outer.bounded_flag() || inner.bounded_flag(),
        }
    }

    /// `f(t) -> inf` as `t -> inf`, assuming `monotone_flag`.
    pub fn unbounded_above(&self) -> bool {
        use FunctionSpec::*;
        match self {
            Identity | Power { .. } | LogPos => true,
            Affine { a, .. } => *a > 0.0,
            ExpScale { c } => *c > 0.0,
            PiecewiseLinear { knots } => end_slopes(knots).1 > 0.0,
            Compose { outer, inner } => outer.unbounded_above() && inner.unbounded_above(),
            Indicator { .. } | CutoffRamp { .. } | TruncateBand { .. } => false,
        }
    }

    /// Strictly increasing on `[0, inf)` as a real function.
    pub fn strictly_increasing(&self) -> bool {
        use FunctionSpec::*;
        match self {
            Identity | Power { .. } => true,
            Affine { a, .. } => *a > 0.0,
            ExpScale { c } => *c > 0.0,
            PiecewiseLinear { knots } => {
                knots.len() >= 2 && segment_slopes(knots).iter().all(|s| *s > 0.0)
            }
            Compose { outer, inner } => outer.strictly_increasing() && inner.strictly_increasing(),
            LogPos | Indicator { .. } | CutoffRamp { .. } | TruncateBand { .. } => false,
        }
    }

    /// Convex and nondecreasing on `[0, inf)` with `f(0) = 0`, decided structurally.
    pub fn convex_nondecreasing_through_origin(&self) -> bool {
        use FunctionSpec::*;
        match self {
            Identity => true,
            Power { beta } => *beta >= 1.0,
            Affine { a, b } => *a >= 0.0 && *b == 0.0,
            PiecewiseLinear { knots } => {
                if !self.monotone_flag() || self.validate().is_err() {
                    return false;
                }
                let slopes = segment_slopes(knots);
                let convex = slopes.windows(2).all(|w| w[0] <= w[1]);
                let nonneg = slopes.iter().all(|s| *s >= 0.0);
                convex && nonneg && eval_function(self, 0.0).map(|v| v == 0.0).unwrap_or(false)
            }
            _ => false,
        }
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match serde_json::to_string(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => write!(f, "{self:?}"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be > 0, got {v}")))
    }
}

fn segment_slopes(knots: &[(f64, f64)]) -> Vec<f64> {
    knots
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect()
}

fn end_slopes(knots: &[(f64, f64)]) -> (f64, f64) {
    let n = knots.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let s = |i: usize| (knots[i + 1].1 - knots[i].1) / (knots[i + 1].0 - knots[i].0);
    (s(0), s(n - 2))
}

fn domain_error(f: &FunctionSpec, t: f64) -> Error {
    Error::Domain {
        function: f.to_string(),
        value: t,
    }
}

fn eval_piecewise(knots: &[(f64, f64)], t: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return knots[0].1;
    }
    let (first, last) = end_slopes(knots);
    if t <= knots[0].0 {
        return if t == knots[0].0 {
            knots[0].1
        } else {
            knots[0].1 + (t - knots[0].0) * first
        };
    }
    if t >= knots[n - 1].0 {
        return if t == knots[n - 1].0 {
            knots[n - 1].1
        } else {
            knots[n - 1].1 + (t - knots[n - 1].0) * last
        };
    }
    // first knot strictly greater than t
    let j = knots.partition_point(|k| k.0 <= t);
    let (t0, v0) = knots[j - 1];
    let (t1, v1) = knots[j];
    if t == t0 {
        return v0;
    }
    let v = v0 + (t - t0) * ((v1 - v0) / (t1 - t0));
    v.clamp(v0.min(v1), v0.max(v1))
}

/// Evaluates `f` at `t`.
pub fn eval_function(f: &FunctionSpec, t: f64) -> Result<f64> {
    use FunctionSpec::*;
    if t.is_nan() {
        return Err(domain_error(f, t));
    }
    let v = match f {
        Identity => t,
        Affine { a, b } => a * t + b,
        Power { beta } => {
            if !(beta.is_finite() && *beta > 0.0) {
                f.validate()?;
            }
            if t < 0.0 {
                return Err(domain_error(f, t));
            }
            if *beta == 1.0 {
                t
            } else if *beta == 2.0 {
                t * t
            } else {
                t.powf(*beta)
            }
        }
        ExpScale { c } => (c * t).exp(),
        LogPos => {
            if t >= 1.0 {
                t.ln()
            } else {
                0.0
            }
        }
        Indicator { lo, hi } => {
            if *lo <= t && t <= *hi {
                1.0
            } else {
                0.0
            }
        }
        CutoffRamp { lambda } => {
            positive("cutoff_ramp lambda", *lambda)?;
            let a = t.abs();
            if a <= *lambda {
                1.0
            } else if a >= 2.0 * lambda {
                0.0
            } else {
                (2.0 * lambda - a) / lambda
            }
        }
        PiecewiseLinear { knots } => {
            f.validate()?;
            eval_piecewise(knots, t)
        }
        Compose { outer, inner } => {
            let u = eval_function(inner, t)?;
            eval_function(outer, u)?
        }
        TruncateBand { k } => {
            positive("truncate_band k", *k)?;
            if t.abs() <= *k {
                t
            } else {
                0.0
            }
        }
    };
    Ok(v)
}

/// `sup { t >= 0 : f(t) <= level }`, with the supremum of the empty set taken as 0.
///
/// The closed-form candidate (when one exists) is polished to the exact
/// floating-point boundary, so for `t >= 0`: `t <= inverse` iff `f(t) <= level`.
pub fn generalized_inverse(f: &FunctionSpec, level: f64) -> Result<f64> {
    f.validate()?;
    if !f.monotone_flag() {
        return Err(Error::NotMonotone(f.to_string()));
    }
    if !f.unbounded_above() {
        return Err(Error::NotUnbounded(f.to_string()));
    }
    if level.is_nan() {
        return Err(Error::Parameter("level must not be NaN".into()));
    }
    if level == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let below = |t: f64| -> Result<bool> { Ok(eval_function(f, t)? <= level) };
    let f0 = eval_function(f, 0.0)?;
    if f0 > level || (f0 == level && f.strictly_increasing()) {
        // the second case keeps underflow (t^2 == 0 for tiny t) from leaking in
        return Ok(0.0);
    }
    if below(f64::MAX)? {
        return Ok(f64::INFINITY);
    }
    let guess = closed_form_candidate(f, level)
        .filter(|t| t.is_finite() && *t >= 0.0)
        .unwrap_or(0.0);
    polish(guess, &below)
}

fn closed_form_candidate(f: &FunctionSpec, level: f64) -> Option<f64> {
    use FunctionSpec::*;
    match f {
        Identity => Some(level),
        Affine { a, b } => Some((level - b) / a),
        Power { beta } => (level >= 0.0).then(|| level.powf(1.0 / beta)),
        ExpScale { c } => (level >= 1.0).then(|| level.ln() / c),
        LogPos => Some(level.exp()),
        PiecewiseLinear { knots } => {
            let i = knots.iter().rposition(|k| k.1 <= level)?;
            let (ti, vi) = knots[i];
            let slope = if i + 1 < knots.len() {
                (knots[i + 1].1 - vi) / (knots[i + 1].0 - ti)
            } else {
                end_slopes(knots).1
            };
            if slope > 0.0 {
                Some(ti + (level - vi) / slope)
            } else {
                Some(ti)
            }
        }
        Compose { .. } | Indicator { .. } | CutoffRamp { .. } | TruncateBand { .. } => None,
    }
}

/// Largest nonnegative finite `t` with `below(t)`; requires `below(0)` and `!below(MAX)`.
fn polish(guess: f64, below: &dyn Fn(f64) -> Result<bool>) -> Result<f64> {
    const MAX_BITS: u64 = 0x7FEF_FFFF_FFFF_FFFF;
    let at = |b: u64| f64::from_bits(b);
    let g = guess.to_bits().min(MAX_BITS);
    // invariant: below(at(lo)) && !below(at(hi))
    let (mut lo, mut hi);
    if below(at(g))? {
        lo = g;
        let mut step = 1u64;
        loop {
            let probe = lo.saturating_add(step).min(MAX_BITS);
            if !below(at(probe))? {
                hi = probe;
                break;
            }
            lo = probe;
            step = step.saturating_mul(2);
        }
    } else {
        hi = g;
        let mut step = 1u64;
        loop {
            let probe = hi.saturating_sub(step);
            if below(at(probe))? {
                lo = probe;
                break;
            }
            hi = probe;
            step = step.saturating_mul(2);
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(at(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo))
}

/// An interval of the real line with independently closed or open ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Parameter(format!("interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn point(x: f64) -> Self {
        Interval {
            lo: x,
            hi: x,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let above_lo = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below_hi = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above_lo && below_hi
    }
}

/// Membership in a finite union of intervals.
pub fn union_contains(set: &[Interval], t: f64) -> bool {
    set.iter().any(|i| i.contains(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plateau() -> FunctionSpec {
        FunctionSpec::piecewise_linear(vec![(0.0, 0.0), (2.0, 5.0), (4.0, 5.0), (6.0, 9.0)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_function(&FunctionSpec::Identity, 3.5).unwrap(), 3.5);
        assert_eq!(eval_function(&FunctionSpec::power(2.0), 3.0).unwrap(), 9.0);
        assert_eq!(eval_function(&FunctionSpec::cutoff_ramp(2.0), 3.0).unwrap(), 0.5);
    }

    #[test]
    fn power_rejects_negative_input() {
        let err = eval_function(&FunctionSpec::power(2.0), -1.0).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn cutoff_ramp_boundaries() {
        let chi = FunctionSpec::cutoff_ramp(2.0);
        for t in [-2.0, 0.0, 1.0, 2.0] {
            assert_eq!(chi.eval(t).unwrap(), 1.0);
        }
        for t in [-4.0, 4.0, 7.0] {
            assert_eq!(chi.eval(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn log_pos_and_truncate_band() {
        assert_eq!(FunctionSpec::LogPos.eval(0.5).unwrap(), 0.0);
        assert_eq!(FunctionSpec::LogPos.eval(1.0).unwrap(), 0.0);
        let tb = FunctionSpec::truncate_band(2.0);
        assert_eq!(tb.eval(-2.0).unwrap(), -2.0);
        assert_eq!(tb.eval(2.5).unwrap(), 0.0);
    }

    #[test]
    fn inverse_examples() {
        let sq = FunctionSpec::power(2.0);
        assert_eq!(generalized_inverse(&sq, 9.0).unwrap(), 3.0);
        assert_eq!(generalized_inverse(&sq, 0.0).unwrap(), 0.0);
        assert_eq!(generalized_inverse(&plateau(), 5.0).unwrap(), 4.0);
    }

    #[test]
    fn plateau_inverse_matches_grid_scan() {
        let f = plateau();
        let mut best = 0.0;
        let mut i = 0u64;
        loop {
            let t = i as f64 * 1e-6;
            if t > 6.0 {
                break;
            }
            if f.eval(t).unwrap() <= 5.0 {
                best = t;
            }
            i += 1;
        }
        let inv = generalized_inverse(&f, 5.0).unwrap();
        assert!((inv - best).abs() < 2e-6);
    }

    #[test]
    fn inverse_of_empty_level_set_is_zero() {
        let f = FunctionSpec::affine(1.0, 3.0);
        assert_eq!(generalized_inverse(&f, 2.0).unwrap(), 0.0);
        assert_eq!(generalized_inverse(&FunctionSpec::exp_scale(1.0), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn inverse_errors() {
        let r = generalized_inverse(&FunctionSpec::indicator(0.0, 1.0), 1.0);
        assert!(matches!(r, Err(Error::NotMonotone(_))));
        let r = generalized_inverse(&FunctionSpec::hinge(0.0).clone(), 1.0);
        assert!(r.is_ok());
        let flat = FunctionSpec::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.0)]).unwrap();
        assert!(matches!(generalized_inverse(&flat, 1.0), Err(Error::NotUnbounded(_))));
    }

    #[test]
    fn inverse_is_exact_boundary() {
        let f = FunctionSpec::exp_scale(0.7);
        assert_eq!(generalized_inverse(&f, 1.0).unwrap(), 0.0);
        for level in [1.5, 2.0, 10.0, 1234.5] {
            let t = generalized_inverse(&f, level).unwrap();
            assert!(f.eval(t).unwrap() <= level);
            assert!(f.eval(crate::numeric::next_up(t)).unwrap() > level);
        }
    }

    #[test]
    fn inverse_saturates_for_slow_functions() {
        assert_eq!(generalized_inverse(&FunctionSpec::LogPos, 1000.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn compose_inverse_uses_search() {
        let f = FunctionSpec::compose(FunctionSpec::power(2.0), FunctionSpec::affine(1.0, 1.0));
        let t = generalized_inverse(&f, 16.0).unwrap();
        assert!((t - 3.0).abs() <= 4.0 * f64::EPSILON);
        assert!(f.eval(t).unwrap() <= 16.0);
        assert!(f.eval(crate::numeric::next_up(t)).unwrap() > 16.0);
    }

    #[test]
    fn flags() {
        use FunctionSpec as F;
        assert!(F::Identity.monotone_flag());
        assert!(!F::affine(-1.0, 0.0).monotone_flag());
        assert!(!F::exp_scale(-0.1).monotone_flag());
        assert!(!F::cutoff_ramp(1.0).monotone_flag());
        assert!(F::cutoff_ramp(1.0).bounded_flag());
        assert!(!F::power(0.5).bounded_flag());
        assert!(F::compose(F::power(2.0), F::indicator(0.0, 1.0)).bounded_flag());
        assert!(!F::abs().monotone_flag());
        assert!(F::hinge(1.5).convex_nondecreasing_through_origin());
        assert!(!F::power(0.5).convex_nondecreasing_through_origin());
    }

    #[test]
    fn piecewise_rejects_unsorted_knots() {
        assert!(FunctionSpec::piecewise_linear(vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn piecewise_extrapolates_with_end_slopes() {
        let f = FunctionSpec::abs();
        assert_eq!(f.eval(-3.0).unwrap(), 3.0);
        assert_eq!(f.eval(2.5).unwrap(), 2.5);
    }

    #[test]
    fn json_tags() {
        let f = FunctionSpec::compose(FunctionSpec::power(2.0), FunctionSpec::Identity);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"compose","outer":{"kind":"power","beta":2.0},"inner":{"kind":"identity"}}"#
        );
        let back: FunctionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let pl: FunctionSpec =
            serde_json::from_str(r#"{"kind":"piecewise_linear","knots":[[0,0],[1,2]]}"#).unwrap();
        assert_eq!(pl.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn interval_membership() {
        let i = Interval::new(1.0, 2.0, false, true).unwrap();
        assert!(!i.contains(1.0));
        assert!(i.contains(2.0));
        assert!(Interval::point(3.0).contains(3.0));
        assert!(Interval::closed(2.0, 1.0).is_err());
    }
}
