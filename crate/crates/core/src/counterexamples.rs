//! Evaluators that drop one axiom: the tail limit (no dominated continuity)
//! and the operator norm (no projector locality).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{audit_axioms, AuditSuite, Axiom, AxiomReport, Evaluator, Verdict};
use crate::spectrum::DiscreteSpectrum;

pub const ANCHOR_DOMINATED: &str = "Dropping dominated continuity";
pub const ANCHOR_LOCALITY: &str = "Dropping projector-locality";

/// `diag(x_1, ..., x_m, tail, tail, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventuallyConstantDiagonal {
    pub prefix: Vec<f64>,
    pub tail: f64,
}

impl EventuallyConstantDiagonal {
    pub fn new(prefix: Vec<f64>, tail: f64) -> Self {
        EventuallyConstantDiagonal { prefix, tail }
    }

    pub fn identity() -> Self {
        Self::new(Vec::new(), 1.0)
    }

    /// Projection onto the first `k` basis vectors.
    pub fn projection(k: usize) -> Self {
        Self::new(vec![1.0; k], 0.0)
    }

    /// Entry `n`, 1-based.
    pub fn entry(&self, n: usize) -> f64 {
        assert!(n >= 1);
        self.prefix.get(n - 1).copied().unwrap_or(self.tail)
    }

    /// Keeps the first `k` entries and zeroes the rest.
    pub fn cut(&self, k: usize) -> Self {
        Self::new((1..=k).map(|n| self.entry(n)).collect(), 0.0)
    }

    pub fn sup_abs(&self) -> f64 {
        self.prefix
            .iter()
            .fold(self.tail.abs(), |m, x| m.max(x.abs()))
    }

    /// Block sum `self ⊕ other`; `self` must have a zero tail so the result stays eventually constant.
    pub fn block_sum(&self, other: &Self) -> Self {
        assert_eq!(self.tail, 0.0, "left block must be finitely supported");
        let mut prefix = self.prefix.clone();
        prefix.extend_from_slice(&other.prefix);
        Self::new(prefix, other.tail)
    }

    /// Spectrum of the prefix entries; the zero tail is left implicit.
    pub fn prefix_spectrum(&self) -> Result<DiscreteSpectrum> {
        DiscreteSpectrum::from_unsorted(self.prefix.iter().map(|&v| (v, 1)).collect(), "")
    }
}

/// The ordinary limit of an eventually-constant sequence.
pub fn tail_evaluate(d: &EventuallyConstantDiagonal) -> f64 {
    d.tail
}

/// Tail-limit evaluator; every finite spectrum is a zero-tail diagonal and evaluates to 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct TailEvaluator;

impl Evaluator for TailEvaluator {
    fn name(&self) -> String {
        "tail-limit".into()
    }

    fn domain(&self) -> String {
        "eventually-constant diagonal operators".into()
    }

    fn evaluate(&self, _s: &DiscreteSpectrum) -> Result<f64> {
        Ok(0.0)
    }

    fn evaluate_diagonal(&self, d: &EventuallyConstantDiagonal) -> Result<f64> {
        if !d.tail.is_finite() {
            return Err(Error::Parameter("diagonal entries must be finite".into()));
        }
        Ok(tail_evaluate(d))
    }
}

pub fn opnorm_evaluate(s: &DiscreteSpectrum) -> f64 {
    s.max_abs()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OpNormEvaluator;

impl Evaluator for OpNormEvaluator {
    fn name(&self) -> String {
        "operator-norm".into()
    }

    fn domain(&self) -> String {
        "finite spectra and eventually-constant diagonal operators".into()
    }

    fn evaluate(&self, s: &DiscreteSpectrum) -> Result<f64> {
        Ok(opnorm_evaluate(s))
    }

    fn evaluate_diagonal(&self, d: &EventuallyConstantDiagonal) -> Result<f64> {
        Ok(d.sup_abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomStatus {
    pub axiom: Axiom,
    pub verdict: Verdict,
}

fn statuses(report: &AxiomReport, axioms: &[Axiom]) -> Vec<AxiomStatus> {
    axioms
        .iter()
        .map(|&a| AxiomStatus {
            axiom: a,
            verdict: report.verdict(a),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominatedContinuityReport {
    pub paper_anchor: String,
    pub k_max: usize,
    /// `(k, E(X_k), |E(X_k) - E(X)|)`.
    pub sequence: Vec<(usize, f64, f64)>,
    pub limit_value: f64,
    pub violated: bool,
    pub verdict: String,
    pub other_axioms: Vec<AxiomStatus>,
}

/// Evaluates the tail limit along `sequence` and compares with the limit operator.
pub fn tail_sequence_report(
    sequence: &[EventuallyConstantDiagonal],
    limit: &EventuallyConstantDiagonal,
    tol: f64,
) -> DominatedContinuityReport {
    let limit_value = tail_evaluate(limit);
    let seq: Vec<(usize, f64, f64)> = sequence
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let v = tail_evaluate(d);
            (i + 1, v, (v - limit_value).abs())
        })
        .collect();
    let violated = seq.last().map_or(false, |s| s.2 > tol);
    let verdict = if violated {
        "A4 violated: monotone dominated sequence with non-convergent evaluation".to_string()
    } else {
        "no violation: evaluations converge to the value at the limit".to_string()
    };
    let audit = audit_axioms(&TailEvaluator, &AuditSuite::default());
    DominatedContinuityReport {
        paper_anchor: ANCHOR_DOMINATED.into(),
        k_max: sequence.len(),
        sequence: seq,
        limit_value,
        violated,
        verdict,
        other_axioms: statuses(&audit, &[Axiom::A1, Axiom::A2, Axiom::A3, Axiom::A5]),
    }
}

/// `E(P_k) = 0` for every `k` while `E(I) = 1`.
pub fn dominated_continuity_violation_report(k_max: usize) -> Result<DominatedContinuityReport> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be >= 1".into()));
    }
    let seq: Vec<_> = (1..=k_max).map(EventuallyConstantDiagonal::projection).collect();
    Ok(tail_sequence_report(&seq, &EventuallyConstantDiagonal::identity(), 0.0))
}

/// Control: the constant sequence `I, I, ...`.
pub fn dominated_continuity_control(k_max: usize) -> Result<DominatedContinuityReport> {
    if k_max == 0 {
        return Err(Error::Parameter("k_max must be >= 1".into()));
    }
    let id = EventuallyConstantDiagonal::identity();
    Ok(tail_sequence_report(&vec![id.clone(); k_max], &id, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityReport {
    pub paper_anchor: String,
    pub n: usize,
    pub c: f64,
    /// `E(c I_N)`.
    pub lhs: f64,
    /// `sum_j E(c P_j)`.
    pub rhs: f64,
    pub violated: bool,
    pub verdict: String,
    pub other_axioms: Vec<AxiomStatus>,
    pub paper_asserted_violations: Vec<Axiom>,
    pub additional_violations: Vec<Axiom>,
}

/// Splits `c I_N` into `N` rank-one blocks and evaluates both sides with the operator norm.
pub fn locality_violation_report(n: usize, c: f64) -> Result<LocalityReport> {
    if n < 2 {
        return Err(Error::Parameter(format!("N must be >= 2, got {n}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("c must be > 0, got {c}")));
    }
    let whole = DiscreteSpectrum::new(vec![(c, n as u64)], None, "c I_N")?;
    let block = DiscreteSpectrum::new(vec![(c, 1)], None, "c P_j")?;
    let lhs = opnorm_evaluate(&whole);
    let rhs: f64 = (0..n).map(|_| opnorm_evaluate(&block)).sum();
    let violated = lhs != rhs;
    let audit = audit_axioms(&OpNormEvaluator, &AuditSuite::default());
    let failed = audit.failed();
    Ok(LocalityReport {
        paper_anchor: ANCHOR_LOCALITY.into(),
        n,
        c,
        lhs,
        rhs,
        violated,
        verdict: if violated {
            "A3 violated".into()
        } else {
            "no violation".into()
        },
        other_axioms: statuses(&audit, &[Axiom::A1, Axiom::A5]),
        paper_asserted_violations: failed.iter().copied().filter(|a| *a == Axiom::A3).collect(),
        additional_violations: failed.into_iter().filter(|a| *a != Axiom::A3).collect(),
    })
}
