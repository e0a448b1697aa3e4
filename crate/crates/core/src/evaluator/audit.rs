use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Evaluator;
use crate::counterexamples::EventuallyConstantDiagonal;
use crate::function::FunctionSpec;
use crate::numeric::rel_deviation;
use crate::spectrum::DiscreteSpectrum;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditSuite {
    pub seed: u64,
    pub instances: usize,
    /// Upper bound on the number of distinct atoms per random spectrum.
    pub max_atoms: usize,
    /// Random integer eigenvalues are drawn from `0..=max_value`.
    pub max_value: u32,
    /// Length of the projection sequence `P_k` used for the infinite A4 check.
    pub k_max: usize,
    pub tol: f64,
    pub t_grid: Vec<f64>,
}

impl Default for AuditSuite {
    fn default() -> Self {
        AuditSuite {
            seed: 1729,
            instances: 200,
            max_atoms: 8,
            max_value: 20,
            k_max: 32,
            tol: 1e-9,
            t_grid: vec![0.0, 0.5, 1.0, 2.0, 3.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axiom {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl Axiom {
    pub const ALL: [Axiom; 5] = [Axiom::A1, Axiom::A2, Axiom::A3, Axiom::A4, Axiom::A5];

    pub fn title(self) -> &'static str {
        match self {
            Axiom::A1 => "Unitary invariance",
            Axiom::A2 => "Extensivity on orthogonal sums",
            Axiom::A3 => "Projector locality",
            Axiom::A4 => "Dominated continuity in the strong operator topology",
            Axiom::A5 => "Normalization and growth bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub description: String,
    pub inputs: Value,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomRecord {
    pub axiom: Axiom,
    pub title: String,
    pub verdict: Verdict,
    pub instances: usize,
    pub max_rel_deviation: f64,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub evaluator: String,
    pub domain: String,
    pub seed: u64,
    pub tol: f64,
    pub axioms: Vec<AxiomRecord>,
}

impl AxiomReport {
    pub fn record(&self, a: Axiom) -> &AxiomRecord {
        self.axioms.iter().find(|r| r.axiom == a).expect("all axioms audited")
    }

    pub fn verdict(&self, a: Axiom) -> Verdict {
        self.record(a).verdict
    }

    pub fn failed(&self) -> Vec<Axiom> {
        self.axioms
            .iter()
            .filter(|r| r.verdict == Verdict::Fail)
            .map(|r| r.axiom)
            .collect()
    }
}

/// Exact comparison when both sides are integers, relative tolerance otherwise.
fn agree(lhs: f64, rhs: f64, tol: f64) -> bool {
    if lhs == rhs {
        return true;
    }
    let integral = |x: f64| x.is_finite() && x.fract() == 0.0 && x.abs() < 9.0e15;
    if integral(lhs) && integral(rhs) {
        return false;
    }
    rel_deviation(lhs, rhs) <= tol
}

struct Tally {
    axiom: Axiom,
    instances: usize,
    max_dev: f64,
    witness: Option<Witness>,
    notes: Vec<String>,
    tol: f64,
}

impl Tally {
    fn new(axiom: Axiom, tol: f64) -> Self {
        Tally {
            axiom,
            instances: 0,
            max_dev: 0.0,
            witness: None,
            notes: Vec::new(),
            tol,
        }
    }

    fn compare(&mut self, description: impl FnOnce() -> String, inputs: impl FnOnce() -> Value, lhs: f64, rhs: f64) {
        self.instances += 1;
        let dev = rel_deviation(lhs, rhs);
        if dev > self.max_dev || dev.is_nan() {
            self.max_dev = dev;
        }
        if !agree(lhs, rhs, self.tol) && self.witness.is_none() {
            self.witness = Some(Witness {
                description: description(),
                inputs: inputs(),
                lhs,
                rhs,
            });
        }
    }

    fn error(&mut self, context: &str, inputs: Value, err: crate::Error) {
        self.instances += 1;
        self.max_dev = f64::INFINITY;
        if self.witness.is_none() {
            self.witness = Some(Witness {
                description: format!("{context}: evaluation failed: {err}"),
                inputs,
                lhs: f64::NAN,
                rhs: f64::NAN,
            });
        }
    }

    fn finish(self) -> AxiomRecord {
        let verdict = if self.witness.is_some() {
            Verdict::Fail
        } else if self.instances == 0 {
            Verdict::NotApplicable
        } else {
            Verdict::Pass
        };
        AxiomRecord {
            axiom: self.axiom,
            title: self.axiom.title().to_string(),
            verdict,
            instances: self.instances,
            max_rel_deviation: self.max_dev,
            witness: self.witness,
            notes: self.notes,
        }
    }
}

fn spec_json(s: &DiscreteSpectrum) -> Value {
    serde_json::to_value(s).expect("spectra serialize")
}

fn diag_json(d: &EventuallyConstantDiagonal) -> Value {
    serde_json::to_value(d).expect("diagonals serialize")
}

fn random_integer_atoms(rng: &mut ChaCha8Rng, suite: &AuditSuite) -> Vec<(f64, u64)> {
    let k = rng.gen_range(1..=suite.max_atoms.max(1));
    (0..k)
        .map(|_| {
            (
                rng.gen_range(0..=suite.max_value) as f64,
                rng.gen_range(1..=3u64),
            )
        })
        .collect()
}

fn random_spectrum(rng: &mut ChaCha8Rng, suite: &AuditSuite, integral: bool) -> DiscreteSpectrum {
    let mut atoms = random_integer_atoms(rng, suite);
    if !integral {
        for a in atoms.iter_mut() {
            a.0 += rng.gen_range(0.0..1.0);
        }
    }
    DiscreteSpectrum::from_unsorted(atoms, "").expect("finite random atoms")
}

fn random_prefix(rng: &mut ChaCha8Rng, suite: &AuditSuite) -> Vec<f64> {
    let n = rng.gen_range(0..=suite.max_atoms);
    (0..n)
        .map(|_| rng.gen_range(0..=suite.max_value) as f64)
        .collect()
}

/// Audits A1 to A5 on randomized finite and eventually-constant inputs.
///
/// Canonical instances run first so that witnesses are stable across seeds.
pub fn audit_axioms(e: &dyn Evaluator, suite: &AuditSuite) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
    let tol = suite.tol;
    let axioms = vec![
        audit_a1(e, suite, &mut rng, tol),
        audit_a2(e, suite, &mut rng, tol),
        audit_a3(e, suite, &mut rng, tol),
        audit_a4(e, suite, &mut rng, tol),
        audit_a5(e, suite, tol),
    ];
    AxiomReport {
        evaluator: e.name(),
        domain: e.domain(),
        seed: suite.seed,
        tol,
        axioms,
    }
}

fn audit_a1(e: &dyn Evaluator, suite: &AuditSuite, rng: &mut ChaCha8Rng, tol: f64) -> AxiomRecord {
    let mut t = Tally::new(Axiom::A1, tol);
    t.notes
        .push("unitary conjugation of a diagonal model permutes its entries; tested as relabeling invariance".into());
    for i in 0..suite.instances {
        // finite: same multiset listed in two orders
        let s = random_spectrum(rng, suite, i % 2 == 1);
        let mut listed = s.expand();
        listed.shuffle(rng);
        let relabeled = DiscreteSpectrum::from_unsorted(listed.iter().map(|&v| (v, 1)).collect(), "")
            .expect("finite values");
        match (e.evaluate(&s), e.evaluate(&relabeled)) {
            (Ok(a), Ok(b)) => t.compare(
                || "E(S) differs from E(S relabeled)".into(),
                || json!({ "spectrum": spec_json(&s), "relabeled_entries": listed }),
                a,
                b,
            ),
            (Err(err), _) | (_, Err(err)) => t.error("A1", json!({ "spectrum": spec_json(&s) }), err),
        }

        // eventually constant: permute the prefix
        let d = EventuallyConstantDiagonal::new(random_prefix(rng, suite), rng.gen_range(0..=2) as f64);
        let mut p = d.clone();
        p.prefix.shuffle(rng);
        match (e.evaluate_diagonal(&d), e.evaluate_diagonal(&p)) {
            (Ok(a), Ok(b)) => t.compare(
                || "E(D_x) differs from E(D_x permuted)".into(),
                || json!({ "diagonal": diag_json(&d), "permuted": diag_json(&p) }),
                a,
                b,
            ),
            (Err(_), Err(_)) => {}
            (Err(err), _) | (_, Err(err)) => t.error("A1", json!({ "diagonal": diag_json(&d) }), err),
        }
    }
    t.finish()
}

fn audit_a2(e: &dyn Evaluator, suite: &AuditSuite, rng: &mut ChaCha8Rng, tol: f64) -> AxiomRecord {
    let mut t = Tally::new(Axiom::A2, tol);
    t.notes.push(
        "block sums of eventually-constant diagonals keep at most one block with a nonzero tail".into(),
    );
    let unit = DiscreteSpectrum::diag(&[1.0]).expect("static");
    let mut pairs = vec![(unit.clone(), unit)];
    for i in 0..suite.instances {
        pairs.push((
            random_spectrum(rng, suite, i % 2 == 0),
            random_spectrum(rng, suite, i % 3 == 0),
        ));
    }
    for (s1, s2) in &pairs {
        let sum = s1.direct_sum(s2);
        match (e.evaluate(&sum), e.evaluate(s1), e.evaluate(s2)) {
            (Ok(lhs), Ok(a), Ok(b)) => t.compare(
                || "E(S1 + S2) differs from E(S1) + E(S2)".into(),
                || json!({ "s1": spec_json(s1), "s2": spec_json(s2) }),
                lhs,
                a + b,
            ),
            (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => {
                t.error("A2", json!({ "s1": spec_json(s1), "s2": spec_json(s2) }), err)
            }
        }
    }
    for _ in 0..suite.instances {
        let finite = EventuallyConstantDiagonal::new(random_prefix(rng, suite), 0.0);
        let infinite = EventuallyConstantDiagonal::new(random_prefix(rng, suite), rng.gen_range(0..=2) as f64);
        let sum = finite.block_sum(&infinite);
        match (
            e.evaluate_diagonal(&sum),
            e.evaluate_diagonal(&finite),
            e.evaluate_diagonal(&infinite),
        ) {
            (Ok(lhs), Ok(a), Ok(b)) => t.compare(
                || "E(D_x + D_y) differs from E(D_x) + E(D_y)".into(),
                || json!({ "x": diag_json(&finite), "y": diag_json(&infinite) }),
                lhs,
                a + b,
            ),
            // outside the evaluator's declared domain
            (Err(_), Err(_), _) | (Err(_), _, Err(_)) => {}
            (Err(err), _, _) | (_, Err(err), _) | (_, _, Err(err)) => t.error(
                "A2",
                json!({ "x": diag_json(&finite), "y": diag_json(&infinite) }),
                err,
            ),
        }
    }
    t.finish()
}

fn audit_a3(e: &dyn Evaluator, suite: &AuditSuite, rng: &mut ChaCha8Rng, tol: f64) -> AxiomRecord {
    let mut t = Tally::new(Axiom::A3, tol);
    t.notes
        .push("blocks lambda_j P_j realized as atoms (lambda_j, rank_j); coinciding lambda_j allowed".into());
    // c I_2 = c P_1 + c P_2 with c = 1
    let mut decompositions: Vec<Vec<(f64, u64)>> = vec![vec![(1.0, 1), (1.0, 1)]];
    for _ in 0..suite.instances {
        decompositions.push(random_integer_atoms(rng, suite));
    }
    for blocks in &decompositions {
        let x = DiscreteSpectrum::from_unsorted(blocks.clone(), "").expect("finite blocks");
        let lhs = e.evaluate(&x);
        let mut rhs = Ok(0.0);
        for &(l, r) in blocks {
            rhs = rhs.and_then(|acc: f64| {
                let b = DiscreteSpectrum::new(vec![(l, r)], None, "")?;
                Ok(acc + e.evaluate(&b)?)
            });
        }
        match (lhs, rhs) {
            (Ok(lhs), Ok(rhs)) => t.compare(
                || {
                    format!(
                        "E(sum_j lambda_j P_j) differs from sum_j E(lambda_j P_j) over {} blocks",
                        blocks.len()
                    )
                },
                || json!({ "blocks": blocks }),
                lhs,
                rhs,
            ),
            (Err(err), _) | (_, Err(err)) => t.error("A3", json!({ "blocks": blocks }), err),
        }
    }
    t.finish()
}

fn audit_a4(e: &dyn Evaluator, suite: &AuditSuite, rng: &mut ChaCha8Rng, tol: f64) -> AxiomRecord {
    let mut t = Tally::new(Axiom::A4, tol);
    t.notes.push(
        "finite: TruncateBand(k) images increase to S under the bound t I_n, t = max |lambda|".into(),
    );
    t.notes.push(
        "infinite: prefix cuts of D_x increase to D_x, including P_k up to I; checked only when E(D_x) is finite"
            .into(),
    );

    // infinite canonical first: P_k increasing to I
    let mut sequences = vec![EventuallyConstantDiagonal::identity()];
    for _ in 0..suite.instances / 4 {
        let d = EventuallyConstantDiagonal::new(random_prefix(rng, suite), rng.gen_range(1..=3) as f64);
        sequences.push(d);
    }
    for d in &sequences {
        let Ok(limit) = e.evaluate_diagonal(d) else {
            continue;
        };
        let bound = EventuallyConstantDiagonal::new(Vec::new(), d.sup_abs());
        match e.evaluate_diagonal(&bound) {
            Ok(v) if v.is_finite() => {}
            _ => continue,
        }
        if !limit.is_finite() {
            continue;
        }
        let k_last = d.prefix.len() + suite.k_max;
        match e.evaluate_diagonal(&d.cut(k_last)) {
            Ok(v) => t.compare(
                || {
                    format!(
                        "E of the first {k_last} diagonal entries stays away from E(D_x) along the increasing cut sequence"
                    )
                },
                || {
                    let seq: Vec<Value> = (1..=k_last)
                        .map(|k| json!([k, e.evaluate_diagonal(&d.cut(k)).ok()]))
                        .collect();
                    json!({ "limit_operator": diag_json(d), "sequence": seq })
                },
                v,
                limit,
            ),
            Err(err) => t.error("A4", json!({ "limit_operator": diag_json(d) }), err),
        }
    }

    for _ in 0..suite.instances {
        let s = random_spectrum(rng, suite, false);
        let target = match e.evaluate(&s) {
            Ok(v) => v,
            Err(err) => {
                t.error("A4", json!({ "spectrum": spec_json(&s) }), err);
                continue;
            }
        };
        let mut ks: Vec<f64> = s.atoms().iter().map(|a| a.0.abs()).filter(|&a| a > 0.0).collect();
        ks.dedup();
        let mut last = None;
        for &k in &ks {
            match s.apply_calculus(&FunctionSpec::truncate_band(k)).and_then(|sk| e.evaluate(&sk)) {
                Ok(v) => last = Some((k, v)),
                Err(err) => {
                    t.error("A4", json!({ "spectrum": spec_json(&s), "k": k }), err);
                    last = None;
                    break;
                }
            }
        }
        if let Some((k, v)) = last {
            t.compare(
                || format!("E(f_k(S)) at k = {k} differs from E(S)"),
                || json!({ "spectrum": spec_json(&s), "k": k }),
                v,
                target,
            );
        }
    }
    t.finish()
}

fn audit_a5(e: &dyn Evaluator, suite: &AuditSuite, tol: f64) -> AxiomRecord {
    let mut t = Tally::new(Axiom::A5, tol);
    t.notes
        .push("homogeneity E(t I) = t E(I) on finite I_n and on the infinite identity; normalization 0 < E(I) < inf on at least one".into());
    let mut normalized = false;
    let dims = [1u64, 2, (suite.max_atoms as u64).max(3)];
    for &n in &dims {
        let id = DiscreteSpectrum::new(vec![(1.0, n)], None, "").expect("static");
        let base = match e.evaluate(&id) {
            Ok(v) => v,
            Err(err) => {
                t.error("A5", json!({ "n": n }), err);
                continue;
            }
        };
        normalized |= base > 0.0 && base.is_finite();
        for &s in &suite.t_grid {
            let scaled = if s == 0.0 {
                DiscreteSpectrum::new(vec![(0.0, n)], None, "")
            } else {
                DiscreteSpectrum::new(vec![(s, n)], None, "")
            }
            .expect("finite scale");
            match e.evaluate(&scaled) {
                Ok(v) => t.compare(
                    || format!("E(t I_n) differs from t E(I_n) at t = {s}, n = {n}"),
                    || json!({ "t": s, "n": n }),
                    v,
                    s * base,
                ),
                Err(err) => t.error("A5", json!({ "t": s, "n": n }), err),
            }
        }
    }
    let id = EventuallyConstantDiagonal::identity();
    if let Ok(base) = e.evaluate_diagonal(&id) {
        if base.is_finite() {
            normalized |= base > 0.0;
            for &s in &suite.t_grid {
                let scaled = EventuallyConstantDiagonal::new(Vec::new(), s);
                match e.evaluate_diagonal(&scaled) {
                    Ok(v) => t.compare(
                        || format!("E(t I) differs from t E(I) at t = {s}"),
                        || json!({ "t": s, "identity": "infinite" }),
                        v,
                        s * base,
                    ),
                    Err(err) => t.error("A5", json!({ "t": s }), err),
                }
            }
        } else {
            t.notes.push(format!("E(I) = {base} on the infinite identity; only finite I_n used"));
        }
    }
    if !normalized && t.witness.is_none() {
        t.instances += 1;
        t.witness = Some(Witness {
            description: "no identity with 0 < E(I) < inf".into(),
            inputs: json!({ "dims": dims }),
            lhs: 0.0,
            rhs: 0.0,
        });
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::TraceFormEvaluator;

    #[test]
    fn trace_passes_everything() {
        let r = audit_axioms(&TraceFormEvaluator::trace(), &AuditSuite::default());
        assert!(r.failed().is_empty(), "{r:#?}");
        for a in Axiom::ALL {
            assert_eq!(r.verdict(a), Verdict::Pass, "{a:?}");
        }
    }

    #[test]
    fn nonlinear_profile_breaks_finite_homogeneity() {
        let e = TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 1.0).unwrap();
        let r = audit_axioms(&e, &AuditSuite::default());
        assert_eq!(r.failed(), vec![Axiom::A5]);
    }

    #[test]
    fn integral_comparison_is_exact() {
        assert!(!agree(3.0, 3.0000000001 * 0.0 + 4.0, 1e-9));
        assert!(agree(0.1 + 0.2, 0.3, 1e-9));
        assert!(agree(f64::INFINITY, f64::INFINITY, 1e-9));
    }
}
