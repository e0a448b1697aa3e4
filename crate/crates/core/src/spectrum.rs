//! Discrete spectra as sorted multisets of eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{eval_function, FunctionSpec};
use crate::numeric::CompensatedSum;

/// Sorted multiset of real eigenvalues with finite multiplicities.
///
/// `truncation_rank`, when present, marks a finite prefix of an infinite model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpectrumRepr", into = "SpectrumRepr")]
pub struct DiscreteSpectrum {
    atoms: Vec<(f64, u64)>,
    truncation_rank: Option<u64>,
    source_label: String,
    // atom indices ordered by increasing |lambda|
    abs_order: Vec<usize>,
    // distinct |lambda| values ascending, with cumulative multiplicity
    abs_values: Vec<f64>,
    abs_cumulative: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumRepr {
    atoms: Vec<(f64, u64)>,
    #[serde(default)]
    truncation_rank: Option<u64>,
    #[serde(default)]
    source_label: String,
}

impl TryFrom<SpectrumRepr> for DiscreteSpectrum {
    type Error = Error;
    fn try_from(r: SpectrumRepr) -> Result<Self> {
        DiscreteSpectrum::new(r.atoms, r.truncation_rank, r.source_label)
    }
}

impl From<DiscreteSpectrum> for SpectrumRepr {
    fn from(s: DiscreteSpectrum) -> Self {
        SpectrumRepr {
            atoms: s.atoms,
            truncation_rank: s.truncation_rank,
            source_label: s.source_label,
        }
    }
}

impl PartialEq for DiscreteSpectrum {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
            && self.truncation_rank == other.truncation_rank
            && self.source_label == other.source_label
    }
}

/// Outcome of a cutoff-trace limit along a schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CutoffLimit {
    Converged { value: f64, lambda: f64, partial: Vec<(f64, f64)> },
    Divergent { partial: Vec<(f64, f64)> },
}

impl CutoffLimit {
    pub fn value(&self) -> Option<f64> {
        match self {
            CutoffLimit::Converged { value, .. } => Some(*value),
            CutoffLimit::Divergent { .. } => None,
        }
    }
}

impl DiscreteSpectrum {
    /// Validates canonical form: finite, strictly increasing eigenvalues, multiplicities >= 1.
    pub fn new(
        atoms: Vec<(f64, u64)>,
        truncation_rank: Option<u64>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        for (i, &(l, m)) in atoms.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::InvalidSpectrum(format!("atom {i}: eigenvalue {l} is not finite")));
            }
            if m == 0 {
                return Err(Error::InvalidSpectrum(format!("atom {i}: multiplicity must be >= 1")));
            }
        }
        if let Some(i) = atoms.windows(2).position(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidSpectrum(format!(
                "atoms must be strictly increasing: {} then {} at index {}",
                atoms[i].0,
                atoms[i + 1].0,
                i + 1
            )));
        }
        let total = atoms.iter().try_fold(0u64, |acc, a| acc.checked_add(a.1));
        let Some(total) = total else {
            return Err(Error::InvalidSpectrum("total multiplicity overflows".into()));
        };
        if let Some(r) = truncation_rank {
            if r != total {
                return Err(Error::InvalidSpectrum(format!(
                    "truncation_rank {r} differs from total multiplicity {total}"
                )));
            }
        }
        let atoms = atoms
            .into_iter()
            .map(|(l, m)| (if l == 0.0 { 0.0 } else { l }, m))
            .collect();
        Ok(Self::build(atoms, truncation_rank, source_label.into()))
    }

    fn build(atoms: Vec<(f64, u64)>, truncation_rank: Option<u64>, source_label: String) -> Self {
        let mut abs_order: Vec<usize> = (0..atoms.len()).collect();
        abs_order.sort_by(|&i, &j| atoms[i].0.abs().total_cmp(&atoms[j].0.abs()).then(i.cmp(&j)));
        let mut abs_values: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut abs_cumulative: Vec<u64> = Vec::with_capacity(atoms.len());
        let mut running = 0u64;
        for &i in &abs_order {
            let (l, m) = atoms[i];
            running += m;
            if abs_values.last() == Some(&l.abs()) {
                *abs_cumulative.last_mut().unwrap() = running;
            } else {
                abs_values.push(l.abs());
                abs_cumulative.push(running);
            }
        }
        DiscreteSpectrum {
            atoms,
            truncation_rank,
            source_label,
            abs_order,
            abs_values,
            abs_cumulative,
        }
    }

    /// Sorts and merges arbitrary `(eigenvalue, multiplicity)` pairs; zero multiplicities are dropped.
    pub fn from_unsorted(pairs: Vec<(f64, u64)>, source_label: impl Into<String>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| !p.0.is_finite()) {
            return Err(Error::InvalidSpectrum(format!("eigenvalue {} is not finite", p.0)));
        }
        Self::new(canonicalize(pairs), None, source_label)
    }

    /// Diagonal operator with the given entries, each of multiplicity one.
    pub fn diag(values: &[f64]) -> Result<Self> {
        Self::from_unsorted(values.iter().map(|&v| (v, 1)).collect(), "")
    }

    pub fn empty() -> Self {
        Self::build(Vec::new(), None, String::new())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    /// Marks this spectrum as a finite prefix of an infinite model.
    pub fn as_truncation(mut self) -> Self {
        self.truncation_rank = Some(self.total_multiplicity());
        self
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn truncation_rank(&self) -> Option<u64> {
        self.truncation_rank
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation_rank.is_some()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.abs_cumulative.last().copied().unwrap_or(0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.first().map_or(true, |a| a.0 >= 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.abs_values.last().copied().unwrap_or(0.0)
    }

    /// Smallest strictly positive eigenvalue.
    pub fn min_positive(&self) -> Option<f64> {
        self.atoms.iter().map(|a| a.0).find(|&l| l > 0.0)
    }

    pub fn multiplicity_of(&self, lambda: f64) -> u64 {
        match self.atoms.binary_search_by(|a| a.0.total_cmp(&lambda)) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0,
        }
    }

    /// Atoms ordered by increasing `|lambda|`.
    pub fn atoms_by_abs(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.abs_order.iter().map(move |&i| self.atoms[i])
    }

    /// Eigenvalues listed with multiplicity, ascending.
    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_multiplicity() as usize);
        for &(l, m) in &self.atoms {
            out.extend(std::iter::repeat(l).take(m as usize));
        }
        out
    }

    /// Number of eigenvalues with `|lambda| <= level`, counted with multiplicity.
    pub fn counting(&self, level: f64) -> u64 {
        if level.is_nan() || level < 0.0 {
            return 0;
        }
        let k = self.abs_values.partition_point(|&a| a <= level);
        if k == 0 {
            0
        } else {
            self.abs_cumulative[k - 1]
        }
    }

    /// Sum of eigenvalues with multiplicity, accumulated by increasing `|lambda|`.
    pub fn trace(&self) -> f64 {
        self.atoms_by_abs()
            .map(|(l, m)| l * m as f64)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Sum of `g(lambda) * mult`, accumulated by increasing `|lambda|`.
    pub fn weighted_sum(&self, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (l, m) in self.atoms_by_abs() {
            acc.add(g(l)? * m as f64);
        }
        Ok(acc.value())
    }

    /// Image under the functional calculus; equal images merge exactly.
    pub fn apply_calculus(&self, f: &FunctionSpec) -> Result<Self> {
        f.validate()?;
        let mut pairs = Vec::with_capacity(self.atoms.len());
        for &(l, m) in &self.atoms {
            let v = eval_function(f, l)?;
            if !v.is_finite() {
                return Err(Error::Domain {
                    function: f.to_string(),
                    value: l,
                });
            }
            pairs.push((v, m));
        }
        Ok(Self::build(
            canonicalize(pairs),
            self.truncation_rank,
            self.source_label.clone(),
        ))
    }

    /// Multiset union.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut pairs = self.atoms.clone();
        pairs.extend_from_slice(&other.atoms);
        let atoms = canonicalize(pairs);
        let total: u64 = atoms.iter().map(|a| a.1).sum();
        let rank = (self.is_truncated() || other.is_truncated()).then_some(total);
        Self::build(atoms, rank, join_labels(&self.source_label, "+", &other.source_label))
    }

    /// Products `a * b <= level_max` with multiplied multiplicities.
    pub fn tensor_product(&self, other: &Self, level_max: f64) -> Result<Self> {
        for s in [self, other] {
            if let Some(&(l, _)) = s.atoms.first().filter(|a| a.0 < 0.0) {
                return Err(Error::NegativeEigenvalue(l));
            }
        }
        if !(level_max > 0.0) {
            return Err(Error::Parameter(format!("level_max must be > 0, got {level_max}")));
        }
        let has_zero = |s: &Self| s.atoms.first().map_or(false, |a| a.0 == 0.0);
        if (has_zero(self) && other.is_truncated()) || (has_zero(other) && self.is_truncated()) {
            return Err(Error::ZeroAmbiguity);
        }
        let mut pairs = Vec::new();
        let mut pruned = false;
        for &(a, ma) in &self.atoms {
            for &(b, mb) in &other.atoms {
                let p = a * b;
                if p > level_max {
                    pruned = true;
                    break;
                }
                let m = ma.checked_mul(mb).ok_or_else(|| {
                    Error::InvalidSpectrum("tensor multiplicity overflows".into())
                })?;
                pairs.push((p, m));
            }
        }
        let atoms = canonicalize(pairs);
        let total: u64 = atoms.iter().map(|a| a.1).sum();
        let rank = (pruned || self.is_truncated() || other.is_truncated()).then_some(total);
        Ok(Self::build(
            atoms,
            rank,
            join_labels(&self.source_label, "x", &other.source_label),
        ))
    }

    /// `sum chi_L(lambda) f(lambda) mult` with the linear-ramp cutoff `chi_L`.
    pub fn cutoff_trace(&self, f: &FunctionSpec, level: f64) -> Result<f64> {
        let chi = FunctionSpec::cutoff_ramp(level);
        chi.validate()?;
        let mut acc = CompensatedSum::new();
        for (l, m) in self.atoms_by_abs() {
            let w = eval_function(&chi, l)?;
            if w == 0.0 {
                break;
            }
            acc.add(w * eval_function(f, l)? * m as f64);
        }
        Ok(acc.value())
    }

    /// First cutoff trace along `schedule` whose change from the previous entry is below `tol`.
    pub fn cutoff_trace_limit(
        &self,
        f: &FunctionSpec,
        schedule: &[f64],
        tol: f64,
    ) -> Result<CutoffLimit> {
        if !(tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be > 0, got {tol}")));
        }
        if schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("schedule must be strictly increasing".into()));
        }
        let mut partial: Vec<(f64, f64)> = Vec::with_capacity(schedule.len());
        for &level in schedule {
            let v = self.cutoff_trace(f, level)?;
            if let Some(&(_, prev)) = partial.last() {
                partial.push((level, v));
                if (v - prev).abs() < tol {
                    return Ok(CutoffLimit::Converged {
                        value: v,
                        lambda: level,
                        partial,
                    });
                }
            } else {
                partial.push((level, v));
            }
        }
        Ok(CutoffLimit::Divergent { partial })
    }

    /// Keeps the `n` eigenvalues of smallest modulus (with multiplicity).
    pub fn smallest_modulus_prefix(&self, n: u64) -> Self {
        let mut pairs = Vec::new();
        let mut left = n;
        for (l, m) in self.atoms_by_abs() {
            if left == 0 {
                break;
            }
            let take = m.min(left);
            pairs.push((l, take));
            left -= take;
        }
        Self::build(canonicalize(pairs), None, self.source_label.clone())
    }
}

/// Sorts by value and merges exactly equal entries; drops zero multiplicities.
fn canonicalize(mut pairs: Vec<(f64, u64)>) -> Vec<(f64, u64)> {
    for p in pairs.iter_mut() {
        if p.0 == 0.0 {
            p.0 = 0.0;
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, u64)> = Vec::with_capacity(pairs.len());
    for (l, m) in pairs {
        if m == 0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.0 == l => last.1 += m,
            _ => out.push((l, m)),
        }
    }
    out
}

fn join_labels(a: &str, op: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => String::new(),
        _ => format!("({a}) {op} ({b})"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(n: u64) -> DiscreteSpectrum {
        DiscreteSpectrum::new((1..=n).map(|k| (k as f64, 1)).collect(), Some(n), "poly").unwrap()
    }

    #[test]
    fn counting_examples() {
        assert_eq!(range(100).counting(10.5), 10);
        assert_eq!(range(100).counting(0.5), 0);
        let log = DiscreteSpectrum::new(
            (1..=20).map(|n| ((n as f64).exp(), 1)).collect(),
            Some(20),
            "log",
        )
        .unwrap();
        assert_eq!(log.counting(5f64.exp()), 5);
    }

    #[test]
    fn counting_uses_modulus_and_closed_inequality() {
        let s = DiscreteSpectrum::diag(&[-2.0, -1.0, 1.0, 3.0]).unwrap();
        assert_eq!(s.counting(1.0), 2);
        assert_eq!(s.counting(2.0), 3);
        assert_eq!(s.counting(f64::INFINITY), 4);
    }

    #[test]
    fn trace_examples() {
        assert_eq!(DiscreteSpectrum::diag(&[1.0, 2.0, 3.0]).unwrap().trace(), 6.0);
        assert_eq!(DiscreteSpectrum::empty().trace(), 0.0);
        let s = DiscreteSpectrum::new(vec![(0.5, 4)], None, "").unwrap();
        assert_eq!(s.trace(), 2.0);
    }

    #[test]
    fn apply_calculus_examples() {
        let s = DiscreteSpectrum::diag(&[1.0, 2.0, 3.0]).unwrap();
        let sq = s.apply_calculus(&FunctionSpec::power(2.0)).unwrap();
        assert_eq!(sq.atoms(), &[(1.0, 1), (4.0, 1), (9.0, 1)]);
        assert_eq!(s.apply_calculus(&FunctionSpec::Identity).unwrap(), s);
        let pm = DiscreteSpectrum::diag(&[-1.0, 1.0]).unwrap();
        let merged = pm.apply_calculus(&FunctionSpec::abs()).unwrap();
        assert_eq!(merged.atoms(), &[(1.0, 2)]);
    }

    #[test]
    fn apply_calculus_propagates_domain_errors() {
        let s = DiscreteSpectrum::diag(&[-1.0]).unwrap();
        assert!(matches!(
            s.apply_calculus(&FunctionSpec::power(0.5)),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn direct_sum_examples() {
        let a = DiscreteSpectrum::diag(&[1.0, 2.0]).unwrap();
        let b = DiscreteSpectrum::diag(&[2.0, 4.0]).unwrap();
        assert_eq!(a.direct_sum(&b).atoms(), &[(1.0, 1), (2.0, 2), (4.0, 1)]);
        assert_eq!(a.direct_sum(&DiscreteSpectrum::empty()).atoms(), a.atoms());

        let evens = DiscreteSpectrum::new((1..=100).map(|k| (2.0 * k as f64, 1)).collect(), Some(100), "")
            .unwrap();
        assert_eq!(range(100).direct_sum(&evens).counting(100.0), 150);
    }

    #[test]
    fn tensor_examples() {
        let s = DiscreteSpectrum::diag(&(1..=10).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
        assert_eq!(s.tensor_product(&s, 10.0).unwrap().counting(10.0), 27);

        let unit = DiscreteSpectrum::diag(&[1.0]).unwrap();
        let t = s.tensor_product(&unit, 6.5).unwrap();
        assert_eq!(t.atoms(), &s.atoms()[..6]);

        let a = DiscreteSpectrum::diag(&[2.0]).unwrap();
        let b = DiscreteSpectrum::diag(&[3.0]).unwrap();
        assert_eq!(a.tensor_product(&b, 10.0).unwrap().atoms(), &[(6.0, 1)]);
    }

    #[test]
    fn tensor_brute_force_multiplicity() {
        let s = DiscreteSpectrum::diag(&(1..=10).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
        let mut pairs = 0;
        for m in 1..=10 {
            for n in 1..=10 {
                if m * n <= 10 {
                    pairs += 1;
                }
            }
        }
        assert_eq!(s.tensor_product(&s, 10.0).unwrap().total_multiplicity(), pairs);
    }

    #[test]
    fn tensor_rejects_zero_with_truncated_partner() {
        let z = DiscreteSpectrum::diag(&[0.0, 1.0]).unwrap();
        assert_eq!(z.tensor_product(&range(5), 10.0), Err(Error::ZeroAmbiguity));
        let neg = DiscreteSpectrum::diag(&[-1.0]).unwrap();
        assert!(matches!(
            neg.tensor_product(&z, 1.0),
            Err(Error::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn cutoff_trace_examples() {
        let s = DiscreteSpectrum::diag(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.cutoff_trace(&FunctionSpec::Identity, 10.0).unwrap(), 6.0);
        assert_eq!(s.cutoff_trace(&FunctionSpec::Identity, 2.0).unwrap(), 4.5);
    }

    #[test]
    fn cutoff_limit_on_geometric_prefix() {
        let vals: Vec<f64> = (1..=50).map(|n| 0.5f64.powi(n)).collect();
        let s = DiscreteSpectrum::diag(&vals).unwrap();
        let schedule = [1.0, 2.0, 4.0, 8.0];
        let lim = s.cutoff_trace_limit(&FunctionSpec::Identity, &schedule, 1e-12).unwrap();
        let v = lim.value().unwrap();
        assert!((v - (1.0 - 0.5f64.powi(50))).abs() < 1e-15);
        assert_eq!(v, s.trace());
    }

    #[test]
    fn cutoff_limit_reports_divergence() {
        let s = range(100);
        let lim = s
            .cutoff_trace_limit(&FunctionSpec::Identity, &[1.0, 2.0, 4.0], 1e-9)
            .unwrap();
        assert!(matches!(lim, CutoffLimit::Divergent { ref partial } if partial.len() == 3));
    }

    #[test]
    fn validation() {
        assert!(DiscreteSpectrum::new(vec![(2.0, 1), (1.0, 1)], None, "").is_err());
        assert!(DiscreteSpectrum::new(vec![(1.0, 0)], None, "").is_err());
        assert!(DiscreteSpectrum::new(vec![(1.0, 2)], Some(3), "").is_err());
        assert!(DiscreteSpectrum::new(vec![(f64::NAN, 1)], None, "").is_err());
    }

    #[test]
    fn json_shape() {
        let s = DiscreteSpectrum::new(vec![(1.0, 1), (2.5, 3)], Some(4), "demo").unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"atoms":[[1.0,1],[2.5,3]],"truncation_rank":4,"source_label":"demo"}"#);
        let back: DiscreteSpectrum = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.counting(2.5), 4);
    }

    #[test]
    fn smallest_modulus_prefix_splits_multiplicity() {
        let s = DiscreteSpectrum::new(vec![(-1.0, 2), (0.5, 1), (3.0, 5)], None, "").unwrap();
        let p = s.smallest_modulus_prefix(4);
        assert_eq!(p.atoms(), &[(-1.0, 2), (0.5, 1), (3.0, 1)]);
    }
}
