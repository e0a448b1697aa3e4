//! Trace-form evaluators, rank-one calibration, scaling uniqueness and the
//! trace/evaluator measure pair.

mod audit;

use serde::{Deserialize, Serialize};

pub use audit::{audit_axioms, AuditSuite, Axiom, AxiomRecord, AxiomReport, Verdict, Witness};

use crate::counterexamples::EventuallyConstantDiagonal;
use crate::error::{Error, Result};
use crate::function::{eval_function, union_contains, FunctionSpec, Interval};
use crate::numeric::{rel_deviation, CompensatedSum};
use crate::spectrum::DiscreteSpectrum;

/// A map from spectra to extended reals.
pub trait Evaluator {
    fn name(&self) -> String;

    fn domain(&self) -> String {
        "finite discrete spectra".to_string()
    }

    fn evaluate(&self, s: &DiscreteSpectrum) -> Result<f64>;

    /// Eventually-constant diagonals. A zero tail reduces to the prefix; other
    /// tails are outside the domain unless the implementor says otherwise.
    fn evaluate_diagonal(&self, d: &EventuallyConstantDiagonal) -> Result<f64> {
        if d.tail == 0.0 {
            self.evaluate(&d.prefix_spectrum()?)
        } else {
            Err(Error::Domain {
                function: self.name(),
                value: d.tail,
            })
        }
    }
}

/// Evaluator backed by a closure; handy for controls and sabotage.
pub struct FnEvaluator<F> {
    name: String,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&DiscreteSpectrum) -> Result<f64>,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnEvaluator { name: name.into(), f }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&DiscreteSpectrum) -> Result<f64>,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn evaluate(&self, s: &DiscreteSpectrum) -> Result<f64> {
        (self.f)(s)
    }
}

/// Nondecreasing profile `h`, either symbolic or tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceProfile {
    Spec(FunctionSpec),
    /// Knots sorted by abscissa; linear in between, constant beyond the ends.
    Table(Vec<(f64, f64)>),
}

impl TraceProfile {
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        let p = TraceProfile::Table(knots);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TraceProfile::Spec(f) => {
                f.validate()?;
                if !f.monotone_flag() {
                    return Err(Error::NotMonotone(f.to_string()));
                }
                Ok(())
            }
            TraceProfile::Table(knots) => {
                if knots.is_empty() {
                    return Err(Error::Parameter("profile table is empty".into()));
                }
                if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
                    return Err(Error::Parameter("profile table entries must be finite".into()));
                }
                if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::Parameter("profile table abscissae must increase".into()));
                }
                if let Some(w) = knots.windows(2).find(|w| w[0].1 > w[1].1) {
                    return Err(Error::NonMonotoneEvaluator {
                        lambda_lo: w[0].0,
                        h_lo: w[0].1,
                        lambda_hi: w[1].0,
                        h_hi: w[1].1,
                    });
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            TraceProfile::Spec(f) => eval_function(f, t),
            TraceProfile::Table(knots) => Ok(eval_table(knots, t)),
        }
    }

    pub fn origin_zero(&self) -> bool {
        matches!(self.eval(0.0), Ok(v) if v == 0.0)
    }
}

fn eval_table(knots: &[(f64, f64)], t: f64) -> f64 {
    let n = knots.len();
    if t <= knots[0].0 {
        return knots[0].1;
    }
    if t >= knots[n - 1].0 {
        return knots[n - 1].1;
    }
    let j = knots.partition_point(|k| k.0 <= t);
    let (t0, v0) = knots[j - 1];
    let (t1, v1) = knots[j];
    if t == t0 {
        return v0;
    }
    let v = v0 + (t - t0) * ((v1 - v0) / (t1 - t0));
    v.clamp(v0, v1)
}

/// `E(X) = c Tr(h(X))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceFormEvaluator {
    pub profile: TraceProfile,
    pub c: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProfileFile {
    Table {
        table: Vec<(f64, f64)>,
        #[serde(default = "one")]
        c: f64,
    },
    Spec {
        #[serde(flatten)]
        spec: FunctionSpec,
        #[serde(default = "one")]
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TraceFormEvaluator {
    pub fn new(profile: TraceProfile, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Parameter(format!("c must be finite and > 0, got {c}")));
        }
        profile.validate()?;
        if !profile.origin_zero() {
            return Err(Error::Parameter("profile must satisfy h(0) = 0".into()));
        }
        Ok(TraceFormEvaluator { profile, c })
    }

    pub fn from_spec(h: FunctionSpec, c: f64) -> Result<Self> {
        Self::new(TraceProfile::Spec(h), c)
    }

    /// The plain trace.
    pub fn trace() -> Self {
        TraceFormEvaluator {
            profile: TraceProfile::Spec(FunctionSpec::Identity),
            c: 1.0,
        }
    }

    /// Accepts `{"table": [[l, h], ...], "c": ..}` or a function spec object with an optional `c`.
    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str::<ProfileFile>(text)? {
            ProfileFile::Table { table, c } => Self::new(TraceProfile::Table(table), c),
            ProfileFile::Spec { spec, c } => Self::new(TraceProfile::Spec(spec), c),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.profile {
            TraceProfile::Table(t) => serde_json::json!({ "table": t, "c": self.c }),
            TraceProfile::Spec(f) => {
                let mut v = serde_json::to_value(f).expect("function specs serialize");
                v["c"] = serde_json::json!(self.c);
                v
            }
        }
    }

    pub fn h(&self, t: f64) -> Result<f64> {
        self.profile.eval(t)
    }
}

impl Evaluator for TraceFormEvaluator {
    fn name(&self) -> String {
        match &self.profile {
            TraceProfile::Spec(f) => format!("trace-form(h={f}, c={})", self.c),
            TraceProfile::Table(t) => format!("trace-form(table[{}], c={})", t.len(), self.c),
        }
    }

    fn evaluate(&self, s: &DiscreteSpectrum) -> Result<f64> {
        Ok(self.c * s.weighted_sum(|l| self.profile.eval(l))?)
    }

    /// Infinitely many tail entries contribute `h(tail)` each.
    fn evaluate_diagonal(&self, d: &EventuallyConstantDiagonal) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for &x in &d.prefix {
            acc.add(self.profile.eval(x)?);
        }
        let ht = self.profile.eval(d.tail)?;
        if ht != 0.0 {
            return Ok(ht.signum() * f64::INFINITY);
        }
        Ok(self.c * acc.value())
    }
}

/// `E(X_+) - E(X_-)`.
pub fn signed_evaluate(e: &dyn Evaluator, s: &DiscreteSpectrum) -> Result<f64> {
    let pos: Vec<(f64, u64)> = s.atoms().iter().copied().filter(|a| a.0 > 0.0).collect();
    let neg: Vec<(f64, u64)> = s
        .atoms()
        .iter()
        .filter(|a| a.0 < 0.0)
        .map(|&(l, m)| (-l, m))
        .collect();
    let plus = e.evaluate(&DiscreteSpectrum::from_unsorted(pos, "")?)?;
    let minus = e.evaluate(&DiscreteSpectrum::from_unsorted(neg, "")?)?;
    Ok(plus - minus)
}

fn rank_one(lambda: f64) -> Result<DiscreteSpectrum> {
    DiscreteSpectrum::new(vec![(lambda, 1)], None, "")
}

/// Recovers `h(lambda) = E(lambda P)` on the grid, with `(0, 0)` prepended.
pub fn calibrate_profile(e: &dyn Evaluator, grid: &[f64]) -> Result<TraceProfile> {
    if grid.is_empty() {
        return Err(Error::Parameter("calibration grid is empty".into()));
    }
    if grid.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::Parameter("calibration grid must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("calibration grid must be strictly increasing".into()));
    }
    let mut knots = Vec::with_capacity(grid.len() + 1);
    knots.push((0.0, 0.0));
    for &g in grid {
        let v = e.evaluate(&rank_one(g)?)?;
        if !v.is_finite() {
            return Err(Error::Domain {
                function: e.name(),
                value: g,
            });
        }
        let &(lp, hp) = knots.last().unwrap();
        if v < hp {
            return Err(Error::NonMonotoneEvaluator {
                lambda_lo: lp,
                h_lo: hp,
                lambda_hi: g,
                h_hi: v,
            });
        }
        knots.push((g, v));
    }
    Ok(TraceProfile::Table(knots))
}

/// Calibrated table paired with `c = 1`, which absorbs the original constant.
pub fn calibrated_evaluator(e: &dyn Evaluator, grid: &[f64]) -> Result<TraceFormEvaluator> {
    TraceFormEvaluator::new(calibrate_profile(e, grid)?, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Uniqueness {
    Scalar { a: f64 },
    Incompatible {
        lambda: Option<f64>,
        expected: f64,
        found: f64,
        rel_deviation: f64,
    },
}

/// Finds `a` with `h2 = a h1` and `c2 = c1 / a` on the grid.
pub fn check_scaling_uniqueness(
    h1: &TraceProfile,
    c1: f64,
    h2: &TraceProfile,
    c2: f64,
    grid: &[f64],
    tol: f64,
) -> Result<Uniqueness> {
    let mut v1 = Vec::with_capacity(grid.len());
    let mut v2 = Vec::with_capacity(grid.len());
    for &g in grid {
        v1.push(h1.eval(g)?);
        v2.push(h2.eval(g)?);
    }
    let mut ratios: Vec<f64> = v1
        .iter()
        .zip(&v2)
        .filter(|(a, _)| **a != 0.0)
        .map(|(a, b)| b / a)
        .collect();
    if ratios.is_empty() {
        return Err(Error::DegenerateProfile);
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let a = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    for (i, &g) in grid.iter().enumerate() {
        let expected = a * v1[i];
        let dev = rel_deviation(expected, v2[i]);
        if dev > tol && worst.map_or(true, |w| dev > w.3) {
            worst = Some((g, expected, v2[i], dev));
        }
    }
    if let Some((g, expected, found, dev)) = worst {
        return Ok(Uniqueness::Incompatible {
            lambda: Some(g),
            expected,
            found,
            rel_deviation: dev,
        });
    }
    let dev = rel_deviation(c1 / a, c2);
    if dev > tol {
        return Ok(Uniqueness::Incompatible {
            lambda: None,
            expected: c1 / a,
            found: c2,
            rel_deviation: dev,
        });
    }
    Ok(Uniqueness::Scalar { a })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurePair {
    pub nu: f64,
    pub mu: f64,
}

/// `nu(B)` is the multiplicity inside `B`; `mu(B)` is `E` of the spectral projection onto `B`.
pub fn measure_pair(e: &dyn Evaluator, s: &DiscreteSpectrum, b: &[Interval]) -> Result<MeasurePair> {
    let nu: u64 = s
        .atoms()
        .iter()
        .filter(|a| union_contains(b, a.0))
        .map(|a| a.1)
        .sum();
    let projection = if nu == 0 {
        DiscreteSpectrum::empty()
    } else {
        DiscreteSpectrum::new(vec![(1.0, nu)], None, "")?
    };
    Ok(MeasurePair {
        nu: nu as f64,
        mu: e.evaluate(&projection)?,
    })
}

/// Per-atom ratio `mu({l}) / nu({l})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RNDensity {
    pub entries: Vec<(f64, f64)>,
}

impl RNDensity {
    pub fn weight(&self, lambda: f64) -> Option<f64> {
        self.entries
            .binary_search_by(|e| e.0.total_cmp(&lambda))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// `sum over atoms in B of w * mult`.
    pub fn integrate(&self, s: &DiscreteSpectrum, b: &[Interval]) -> f64 {
        s.atoms()
            .iter()
            .filter(|a| union_contains(b, a.0))
            .map(|&(l, m)| self.weight(l).unwrap_or(0.0) * m as f64)
            .collect::<CompensatedSum>()
            .value()
    }
}

pub fn rn_density(e: &dyn Evaluator, s: &DiscreteSpectrum) -> Result<RNDensity> {
    let mut entries = Vec::with_capacity(s.atoms().len());
    for &(l, m) in s.atoms() {
        let mu = e.evaluate(&DiscreteSpectrum::new(vec![(1.0, m)], None, "")?)?;
        entries.push((l, mu / m as f64));
    }
    Ok(RNDensity { entries })
}

/// Evaluations along the truncations keeping the `N` smallest-modulus eigenvalues, `N = 1..=total`.
pub fn monotone_truncations(e: &dyn Evaluator, s: &DiscreteSpectrum) -> Result<Vec<(u64, f64)>> {
    let total = s.total_multiplicity();
    let mut out = Vec::with_capacity(total as usize);
    for n in 1..=total {
        out.push((n, e.evaluate(&s.smallest_modulus_prefix(n))?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DiscreteSpectrum {
        DiscreteSpectrum::diag(v).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let tr = TraceFormEvaluator::trace();
        assert_eq!(tr.evaluate(&diag(&[1.0, 2.0, 3.0])).unwrap(), 6.0);
        assert_eq!(tr.evaluate(&DiscreteSpectrum::empty()).unwrap(), 0.0);
        let sq = TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 0.5).unwrap();
        assert_eq!(sq.evaluate(&diag(&[1.0, 2.0, 3.0])).unwrap(), 7.0);
    }

    #[test]
    fn signed_examples() {
        let tr = TraceFormEvaluator::trace();
        assert_eq!(signed_evaluate(&tr, &diag(&[-1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(signed_evaluate(&tr, &diag(&[-3.0])).unwrap(), -3.0);
        let sq = TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 1.0).unwrap();
        assert_eq!(signed_evaluate(&sq, &diag(&[-2.0, 2.0])).unwrap(), 0.0);
    }

    #[test]
    fn calibration_examples() {
        let hidden = TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 1.0).unwrap();
        let p = calibrate_profile(&hidden, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            p,
            TraceProfile::Table(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 4.0), (3.0, 9.0)])
        );
        let p = calibrate_profile(&TraceFormEvaluator::trace(), &[5.0]).unwrap();
        assert_eq!(p, TraceProfile::Table(vec![(0.0, 0.0), (5.0, 5.0)]));
    }

    #[test]
    fn calibration_detects_decrease() {
        let bad = FnEvaluator::new("decreasing", |s: &DiscreteSpectrum| {
            Ok(s.atoms().iter().map(|a| (10.0 - a.0) * a.1 as f64).sum())
        });
        let err = calibrate_profile(&bad, &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneEvaluator { lambda_hi, .. } if lambda_hi == 2.0));
    }

    #[test]
    fn table_interpolates_and_extends() {
        let p = TraceProfile::table(vec![(0.0, 0.0), (2.0, 4.0)]).unwrap();
        assert_eq!(p.eval(1.0).unwrap(), 2.0);
        assert_eq!(p.eval(5.0).unwrap(), 4.0);
        assert_eq!(p.eval(-1.0).unwrap(), 0.0);
        assert!(TraceProfile::table(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn uniqueness_examples() {
        let grid = [1.0, 2.0, 3.0];
        let id = TraceProfile::Spec(FunctionSpec::Identity);
        let twice = TraceProfile::Spec(FunctionSpec::affine(2.0, 0.0));
        assert_eq!(
            check_scaling_uniqueness(&id, 1.0, &twice, 0.5, &grid, 1e-9).unwrap(),
            Uniqueness::Scalar { a: 2.0 }
        );
        let sq = TraceProfile::Spec(FunctionSpec::power(2.0));
        let sq3 = TraceProfile::Table(vec![(0.0, 0.0), (1.0, 3.0), (2.0, 12.0), (3.0, 27.0)]);
        assert_eq!(
            check_scaling_uniqueness(&sq, 1.0, &sq3, 1.0 / 3.0, &grid, 1e-9).unwrap(),
            Uniqueness::Scalar { a: 3.0 }
        );
        assert!(matches!(
            check_scaling_uniqueness(&id, 1.0, &sq, 1.0, &grid, 1e-9).unwrap(),
            Uniqueness::Incompatible { .. }
        ));
    }

    #[test]
    fn uniqueness_rejects_degenerate_profile() {
        let zero = TraceProfile::Table(vec![(0.0, 0.0), (10.0, 0.0)]);
        let id = TraceProfile::Spec(FunctionSpec::Identity);
        assert_eq!(
            check_scaling_uniqueness(&zero, 1.0, &id, 1.0, &[1.0], 1e-9),
            Err(Error::DegenerateProfile)
        );
    }

    #[test]
    fn measure_pair_examples() {
        let s = diag(&[1.0, 2.0, 3.0]);
        let tr = TraceFormEvaluator::trace();
        let b = [Interval::closed(1.5, 3.0).unwrap()];
        assert_eq!(measure_pair(&tr, &s, &b).unwrap(), MeasurePair { nu: 2.0, mu: 2.0 });

        let seven = TraceFormEvaluator::from_spec(FunctionSpec::affine(7.0, 0.0), 1.0).unwrap();
        let b = [Interval::closed(0.5, 3.5).unwrap()];
        assert_eq!(measure_pair(&seven, &s, &b).unwrap(), MeasurePair { nu: 3.0, mu: 21.0 });

        let b = [Interval::closed(10.0, 20.0).unwrap()];
        assert_eq!(measure_pair(&seven, &s, &b).unwrap(), MeasurePair { nu: 0.0, mu: 0.0 });
    }

    #[test]
    fn rn_density_examples() {
        let s = DiscreteSpectrum::new(vec![(2.0, 1), (5.0, 3)], None, "").unwrap();
        let w = rn_density(&TraceFormEvaluator::trace(), &s).unwrap();
        assert_eq!(w.entries, vec![(2.0, 1.0), (5.0, 1.0)]);

        let h = TraceFormEvaluator::from_spec(FunctionSpec::affine(4.0, 0.0), 1.0).unwrap();
        let w = rn_density(&h, &s).unwrap();
        assert_eq!(w.entries, vec![(2.0, 4.0), (5.0, 4.0)]);

        let zero = FnEvaluator::new("zero", |_: &DiscreteSpectrum| Ok(0.0));
        let w = rn_density(&zero, &s).unwrap();
        assert!(w.entries.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn profile_json_forms() {
        let e = TraceFormEvaluator::from_json(r#"{"table": [[0,0],[1,2]], "c": 0.5}"#).unwrap();
        assert_eq!(e.evaluate(&diag(&[1.0])).unwrap(), 1.0);
        let e = TraceFormEvaluator::from_json(r#"{"kind":"power","beta":2,"c":2}"#).unwrap();
        assert_eq!(e.evaluate(&diag(&[3.0])).unwrap(), 18.0);
        let e = TraceFormEvaluator::from_json(r#"{"kind":"identity"}"#).unwrap();
        assert_eq!(e.c, 1.0);
        let back = TraceFormEvaluator::from_json(&e.to_json().to_string()).unwrap();
        assert_eq!(back, e);
        assert!(TraceFormEvaluator::from_json(r#"{"kind":"exp_scale","c":1}"#).is_err());
    }

    #[test]
    fn truncations_are_monotone() {
        let s = diag(&[0.5, 1.0, 4.0]);
        let e = TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 1.0).unwrap();
        let seq = monotone_truncations(&e, &s).unwrap();
        assert_eq!(seq, vec![(1, 0.25), (2, 1.25), (3, 17.25)]);
    }
}
