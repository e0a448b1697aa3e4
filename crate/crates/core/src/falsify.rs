//! The falsification runs F1 to F4 and their common report shape.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counterexamples::{dominated_continuity_violation_report, TailEvaluator};
use crate::error::{Error, Result};
use crate::evaluator::{
    calibrated_evaluator, check_scaling_uniqueness, Evaluator, FnEvaluator, TraceFormEvaluator, TraceProfile,
    Uniqueness,
};
use crate::function::FunctionSpec;
use crate::growth::{
    classify_spectrum, default_grid, sum_growth_check, tensor_counting_convolution, tensor_growth_bound_check,
    transform_closure_check, GrowthConfig,
};
use crate::ingestion::{gen_model, ModelKind};
use crate::numeric::{geomspace, rel_deviation};
use crate::spectrum::DiscreteSpectrum;

pub const SCHEMA_VERSION: u32 = 1;

/// Deliberately broken inputs used to show that a run can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    /// F1: trace form plus a multiple of the number of distinct nonzero atoms.
    SabotagedEvaluator,
    /// F2: a polynomial and a stretched model presented as one class.
    MixedClasses,
    /// F3: the tail-limit evaluator in place of a trace form.
    TailEvaluator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// F1 hidden profiles.
    pub profiles: usize,
    /// F1 spectra per profile, F3 random spectra, F4 model pairs.
    pub instances: usize,
    pub max_atoms: usize,
    /// F2 direct-sum pairs per growth class.
    pub pairs_per_class: usize,
    /// F2 sampling grid size.
    pub grid_points: usize,
    pub tol: f64,
    pub control: Option<Control>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1729,
            profiles: 20,
            instances: 1000,
            max_atoms: 8,
            pairs_per_class: 50,
            grid_points: 48,
            tol: 1e-9,
            control: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parameter(format!("tol must be finite and > 0, got {}", self.tol)));
        }
        if self.max_atoms == 0 {
            return Err(Error::Parameter("max_atoms must be >= 1".into()));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub test_id: String,
    pub passed: bool,
    pub paper_anchor: String,
    /// Replayable failing inputs; never empty when `passed` is false.
    pub witnesses: Vec<Value>,
    pub metrics: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    pub config: RunConfig,
}

impl Report {
    fn new(test_id: &str, anchor: &str, config: &RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            test_id: test_id.into(),
            passed: true,
            paper_anchor: anchor.into(),
            witnesses: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            config: config.clone(),
        }
    }

    fn metric(&mut self, key: &str, v: impl Serialize) {
        self.metrics
            .insert(key.into(), serde_json::to_value(v).expect("metrics serialize"));
    }

    fn fail(&mut self, witness: Value) {
        self.passed = false;
        // the first few are enough to replay
        if self.witnesses.len() < 8 {
            self.witnesses.push(witness);
        }
    }

    fn error(&mut self, context: &str, err: &Error) {
        self.fail(json!({ "context": context, "error": err.to_string() }));
    }
}

fn spec_json(s: &DiscreteSpectrum) -> Value {
    serde_json::to_value(s).expect("spectra serialize")
}

// ---------------------------------------------------------------- F1

/// Atoms for F1 live on multiples of 1/4 in `(0, 20]`.
fn f1_grid() -> Vec<f64> {
    (1..=80).map(|k| k as f64 * 0.25).collect()
}

fn hidden_profile(rng: &mut ChaCha8Rng) -> FunctionSpec {
    match rng.gen_range(0..4) {
        0 => FunctionSpec::power(*[0.5, 1.0, 1.5, 2.0, 3.0].choose(rng).unwrap()),
        1 => {
            let mut knots = vec![(0.0, 0.0)];
            let (mut t, mut v) = (0.0, 0.0);
            for _ in 0..rng.gen_range(2..=5) {
                t += rng.gen_range(0.5..6.0);
                v += rng.gen_range(0.0..4.0);
                knots.push((t, v));
            }
            FunctionSpec::PiecewiseLinear { knots }
        }
        2 => FunctionSpec::compose(FunctionSpec::affine(1.0, -1.0), FunctionSpec::exp_scale(rng.gen_range(0.05..0.3))),
        _ => FunctionSpec::compose(FunctionSpec::LogPos, FunctionSpec::affine(1.0, 1.0)),
    }
}

fn on_grid_spectrum(rng: &mut ChaCha8Rng, grid: &[f64], max_atoms: usize) -> DiscreteSpectrum {
    let k = rng.gen_range(1..=max_atoms);
    let atoms = (0..k)
        .map(|_| {
            let v = if rng.gen_bool(0.1) { 0.0 } else { *grid.choose(rng).unwrap() };
            (v, rng.gen_range(1..=3u64))
        })
        .collect();
    DiscreteSpectrum::from_unsorted(atoms, "").expect("grid atoms are finite")
}

/// Rank-one calibration reproduces hidden trace-form evaluators, and scaled
/// pairs `(a h, c / a)` are recognized as the same evaluator.
pub fn run_f1(config: &RunConfig) -> Report {
    let mut r = Report::new("F1", "F1 trace-form representation", config);
    let grid = f1_grid();
    let mut rng = config.rng(1);
    if config.profiles == 0 || config.instances == 0 {
        r.notes.push("no instances".into());
        r.metric("vacuous", true);
        r.metric("instances_checked", 0);
        return r;
    }
    let mut checked = 0usize;
    let mut max_err = 0.0f64;
    let mut scale_checked = 0usize;
    let mut max_scale_err = 0.0f64;
    for p in 0..config.profiles {
        let h = hidden_profile(&mut rng);
        let c = rng.gen_range(0.5..5.0);
        let hidden = match TraceFormEvaluator::from_spec(h.clone(), c) {
            Ok(e) => e,
            Err(e) => {
                r.error("hidden profile", &e);
                continue;
            }
        };
        let sabotaged = FnEvaluator::new("trace-form + distinct-atom count", |s: &DiscreteSpectrum| {
            let distinct = s.atoms().iter().filter(|a| a.0 != 0.0).count() as f64;
            Ok(hidden.evaluate(s)? + 1e-3 * distinct)
        });
        let target: &dyn Evaluator = if config.control == Some(Control::SabotagedEvaluator) {
            &sabotaged
        } else {
            &hidden
        };
        let calibrated = match calibrated_evaluator(target, &grid) {
            Ok(e) => e,
            Err(e) => {
                r.error("calibration", &e);
                continue;
            }
        };
        for _ in 0..config.instances {
            let s = on_grid_spectrum(&mut rng, &grid, config.max_atoms);
            let (want, got) = match (target.evaluate(&s), calibrated.evaluate(&s)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    r.error("evaluation", &e);
                    continue;
                }
            };
            checked += 1;
            let dev = rel_deviation(want, got);
            max_err = max_err.max(dev);
            if dev > config.tol {
                r.fail(json!({
                    "profile_index": p,
                    "profile": h,
                    "c": c,
                    "evaluator": target.name(),
                    "spectrum": spec_json(&s),
                    "hidden": want,
                    "calibrated": got,
                    "rel_deviation": dev,
                }));
            }
        }
        let base = TraceProfile::Spec(h.clone());
        for a in [0.5, 1.0, 2.0, 10.0] {
            let scaled: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
                .chain(grid.iter().map(|&g| (g, a * h.eval(g).unwrap_or(f64::NAN))))
                .collect();
            let outcome = TraceProfile::table(scaled)
                .and_then(|t| check_scaling_uniqueness(&base, c, &t, c / a, &grid, config.tol));
            scale_checked += 1;
            match outcome {
                Ok(Uniqueness::Scalar { a: found }) => {
                    let dev = rel_deviation(found, a);
                    max_scale_err = max_scale_err.max(dev);
                    if dev > config.tol {
                        r.fail(json!({ "profile": h, "c": c, "a": a, "recovered": found }));
                    }
                }
                Ok(other) => r.fail(json!({ "profile": h, "c": c, "a": a, "outcome": other })),
                Err(e) => r.error("scaling uniqueness", &e),
            }
        }
    }
    r.metric("profiles", config.profiles);
    r.metric("instances_checked", checked);
    r.metric("max_rel_error", max_err);
    r.metric("scalings_checked", scale_checked);
    r.metric("max_scale_error", max_scale_err);
    r
}

// ---------------------------------------------------------------- F2

const CLASSES: [&str; 3] = ["poly", "stretched", "log"];

/// Two models of one class, sized so that both reach the same top eigenvalue
/// with a comparable number of atoms. Exponents differ by at most 5%.
pub fn same_class_pair(rng: &mut ChaCha8Rng, class: &str) -> Result<(DiscreteSpectrum, DiscreteSpectrum)> {
    let pair: [(ModelKind, u64); 2] = match class {
        "poly" => {
            let top = 1000.0;
            let d0 = rng.gen_range(0.75..1.5);
            [(); 2].map(|_| {
                let d = d0 * rng.gen_range(0.95..1.05);
                let count = rng.gen_range(2.0e4..1.0e5);
                let c = count / f64::powf(top, d);
                (ModelKind::Poly { c, d }, count as u64)
            })
        }
        "stretched" => {
            let top: f64 = 100.0;
            let alpha0 = rng.gen_range(0.45..0.55);
            [(); 2].map(|_| {
                let alpha = alpha0 * rng.gen_range(0.95..1.05);
                let log_count = rng.gen_range(2.0e4f64.ln()..1.0e5f64.ln());
                let c = log_count / top.powf(alpha);
                (ModelKind::stretched(c, alpha), log_count.exp() as u64)
            })
        }
        "log" => [(); 2].map(|_| {
            let c = rng.gen_range(0.75..2.0);
            (ModelKind::Log { c }, (30.0 * c) as u64)
        }),
        other => return Err(Error::Parameter(format!("unknown growth class {other}"))),
    };
    Ok((gen_model(&pair[0].0, pair[0].1)?, gen_model(&pair[1].0, pair[1].1)?))
}

fn shared_grid(a: &DiscreteSpectrum, b: &DiscreteSpectrum, points: usize) -> Result<Vec<f64>> {
    let lower = if a.max_abs() <= b.max_abs() { a } else { b };
    default_grid(lower, points)
}

fn f2_sums(r: &mut Report, config: &RunConfig, cfg: &GrowthConfig) {
    let mut rng = config.rng(2);
    for class in CLASSES {
        let (mut preserved, mut unresolved) = (0usize, 0usize);
        for i in 0..config.pairs_per_class {
            let checked = same_class_pair(&mut rng, class).and_then(|(a, b)| {
                let grid = shared_grid(&a, &b, config.grid_points)?;
                Ok((sum_growth_check(&a, &b, &grid, cfg)?, a, b))
            });
            let (rep, a, b) = match checked {
                Ok(x) => x,
                Err(e) => {
                    r.error(&format!("{class} pair {i}"), &e);
                    continue;
                }
            };
            let witness = || {
                json!({
                    "class": class,
                    "pair": i,
                    "models": [a.source_label(), b.source_label()],
                    "additive": rep.additive,
                    "verdicts": [&rep.class_1, &rep.class_2, &rep.class_sum],
                })
            };
            match rep.preserved {
                Some(true) if rep.additive => preserved += 1,
                None => {
                    unresolved += 1;
                    r.fail(witness());
                }
                _ => r.fail(witness()),
            }
        }
        r.metric(&format!("sum_{class}_preserved"), preserved);
        r.metric(&format!("sum_{class}_unresolved"), unresolved);
    }
}

fn f2_tensor(r: &mut Report) -> Result<()> {
    let small = DiscreteSpectrum::diag(&(1..=10).map(f64::from).collect::<Vec<_>>())?;
    let pairs = small.tensor_product(&small, 10.0)?.counting(10.0);
    let conv = tensor_counting_convolution(&small, &small, 10.0)?;
    r.metric("tensor_count_at_10", json!([pairs, conv]));
    if pairs != 27 || conv != 27 {
        r.fail(json!({ "check": "tensor count at 10", "pairs": pairs, "convolution": conv, "expected": 27 }));
    }
    let p = gen_model(&ModelKind::poly(), 10_000)?;
    let grid = geomspace(100.0, 10_000.0, 32);
    let t = tensor_growth_bound_check(&p, &p, 1.0, 1.0, 0.2, &grid, 2.0)?;
    r.metric("tensor_slope", t.slope);
    r.metric("tensor_routes_agree", t.routes_agree);
    if !t.holds || t.slope < 1.0 {
        r.fail(json!({ "check": "tensor bound", "slope": t.slope, "bound": t.slope_bound, "routes_agree": t.routes_agree }));
    }
    Ok(())
}

fn f2_power(r: &mut Report, config: &RunConfig, cfg: &GrowthConfig) -> Result<()> {
    let p = gen_model(&ModelKind::poly(), 100_000)?;
    let grid = default_grid(&p, config.grid_points)?;
    let mut fitted = Vec::new();
    for beta in [0.5, 2.0, 3.0] {
        let t = transform_closure_check(&p, &FunctionSpec::power(beta), &grid, cfg, 0.05)?;
        fitted.push(json!({ "beta": beta, "after": &t.after, "expected_d": t.expected_d }));
        if !t.holds {
            r.fail(json!({ "check": "power closure", "beta": beta, "report": t }));
        }
    }
    r.metric("power_closure", fitted);
    Ok(())
}

fn f2_mixed(r: &mut Report, config: &RunConfig, cfg: &GrowthConfig) -> Result<()> {
    let p = gen_model(&ModelKind::poly(), 100_000)?;
    let s = gen_model(&ModelKind::stretched(1.0, 0.5), 100_000)?;
    let vp = classify_spectrum(&p, &default_grid(&p, config.grid_points)?, cfg)?.verdict;
    let vs = classify_spectrum(&s, &default_grid(&s, config.grid_points)?, cfg)?.verdict;
    if !vp.same_class(&vs) {
        r.fail(json!({
            "check": "claimed same class",
            "models": [p.source_label(), s.source_label()],
            "verdicts": [vp, vs],
        }));
    }
    Ok(())
}

/// Growth-class closure under direct sums, tensor products and power transforms.
pub fn run_f2(config: &RunConfig) -> Report {
    let mut r = Report::new("F2", "F2 growth family closure", config);
    let cfg = GrowthConfig::default();
    if config.grid_points < cfg.min_points {
        r.error(
            "sampling grid",
            &Error::InsufficientSamples {
                needed: cfg.min_points,
                got: config.grid_points,
            },
        );
        return r;
    }
    if config.control == Some(Control::MixedClasses) {
        if let Err(e) = f2_mixed(&mut r, config, &cfg) {
            r.error("mixed classes", &e);
        }
        return r;
    }
    f2_sums(&mut r, config, &cfg);
    if let Err(e) = f2_tensor(&mut r) {
        r.error("tensor", &e);
    }
    if let Err(e) = f2_power(&mut r, config, &cfg) {
        r.error("power closure", &e);
    }
    r
}

// ---------------------------------------------------------------- F3

struct BandOutcome {
    gaps: Vec<f64>,
    values: Vec<f64>,
    limit: f64,
    trace_side: f64,
}

/// `E(f_k(D))` for `f_k = f 1_[-k, k]` and `k = 1..=ceil(max |lambda|) + 1`.
fn band_sequence(e: &TraceFormEvaluator, d: &DiscreteSpectrum, f: &FunctionSpec) -> Result<BandOutcome> {
    let limit = e.evaluate(&d.apply_calculus(f)?)?;
    let k_top = d.max_abs().ceil() as usize + 1;
    let mut gaps = Vec::with_capacity(k_top);
    let mut values = Vec::with_capacity(k_top);
    for k in 1..=k_top {
        let fk = FunctionSpec::compose(f.clone(), FunctionSpec::truncate_band(k as f64));
        let v = e.evaluate(&d.apply_calculus(&fk)?)?;
        values.push(v);
        gaps.push((v - limit).abs());
    }
    let trace_side = e.c * d.weighted_sum(|t| e.h(f.eval(t)?))?;
    Ok(BandOutcome {
        gaps,
        values,
        limit,
        trace_side,
    })
}

fn random_nonnegative(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteSpectrum {
    let k = rng.gen_range(1..=max_atoms);
    let atoms = (0..k)
        .map(|_| {
            let v = if rng.gen_bool(0.5) {
                rng.gen_range(0..=20u32) as f64
            } else {
                rng.gen_range(0.0..20.0)
            };
            (v, rng.gen_range(1..=3u64))
        })
        .collect();
    DiscreteSpectrum::from_unsorted(atoms, "").expect("finite atoms")
}

/// Dominated convergence along spectral truncations, plus the tail-limit control.
pub fn run_f3(config: &RunConfig) -> Report {
    let mut r = Report::new("F3", "F3 evaluator continuity under dominated limits", config);
    let control = dominated_continuity_violation_report(10);
    if config.control == Some(Control::TailEvaluator) {
        match control {
            Ok(rep) if rep.violated => r.fail(json!({
                "evaluator": TailEvaluator.name(),
                "sequence": "P_k -> I",
                "values": rep.sequence,
                "limit_value": rep.limit_value,
                "verdict": rep.verdict,
            })),
            Ok(_) => r.notes.push("tail evaluator unexpectedly continuous".into()),
            Err(e) => r.error("tail control", &e),
        }
        return r;
    }
    match control {
        Ok(rep) => {
            r.metric("tail_control_failed_as_predicted", rep.violated);
            if !rep.violated {
                r.fail(json!({ "check": "tail control", "report": rep }));
            }
        }
        Err(e) => r.error("tail control", &e),
    }

    let evaluators = [
        TraceFormEvaluator::trace(),
        TraceFormEvaluator::from_spec(FunctionSpec::power(2.0), 1.0).expect("valid profile"),
    ];
    let transforms = [FunctionSpec::Identity, FunctionSpec::power(2.0)];
    let mut rng = config.rng(3);
    let mut spectra = vec![gen_model(&ModelKind::poly(), 200).expect("valid model")];
    spectra.extend((0..config.instances).map(|_| random_nonnegative(&mut rng, config.max_atoms)));

    let (mut sequences, mut max_trace_dev) = (0usize, 0.0f64);
    for d in &spectra {
        for e in &evaluators {
            for f in &transforms {
                let out = match band_sequence(e, d, f) {
                    Ok(o) => o,
                    Err(err) => {
                        r.error("band sequence", &err);
                        continue;
                    }
                };
                sequences += 1;
                let saturate = d.max_abs().ceil().max(1.0) as usize;
                let monotone_gap = out.gaps.windows(2).all(|w| w[1] <= w[0]);
                let monotone_value = out.values.windows(2).all(|w| w[1] >= w[0]);
                let exact_tail = out.gaps[saturate - 1..].iter().all(|&g| g == 0.0);
                let trace_dev = rel_deviation(out.limit, out.trace_side);
                max_trace_dev = max_trace_dev.max(trace_dev);
                if !(monotone_gap && monotone_value && exact_tail) || trace_dev > config.tol {
                    r.fail(json!({
                        "evaluator": e.to_json(),
                        "f": f,
                        "spectrum": spec_json(d),
                        "gaps": out.gaps,
                        "limit": out.limit,
                        "trace_side": out.trace_side,
                    }));
                }
            }
        }
    }
    r.metric("sequences", sequences);
    r.metric("max_trace_side_deviation", max_trace_dev);
    r
}

// ---------------------------------------------------------------- F4

fn f4_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.5).collect()
}

/// Point indicators and hat functions on the shared grid.
fn separating_family(grid: &[f64]) -> Vec<FunctionSpec> {
    let step = grid[1] - grid[0];
    let mut family: Vec<FunctionSpec> = grid.iter().map(|&g| FunctionSpec::indicator(g, g)).collect();
    family.extend(grid.iter().map(|&g| FunctionSpec::PiecewiseLinear {
        knots: vec![
            (g - 2.0 * step, 0.0),
            (g - step, 0.0),
            (g, 1.0),
            (g + step, 0.0),
            (g + 2.0 * step, 0.0),
        ],
    }));
    family
}

fn random_grid_values(rng: &mut ChaCha8Rng, grid: &[f64], max_atoms: usize) -> Vec<f64> {
    let k = rng.gen_range(1..=max_atoms * 2);
    (0..k).map(|_| *grid.choose(rng).unwrap()).collect()
}

/// Finds the first family member whose trace distinguishes `x` from `y`.
fn separator(x: &DiscreteSpectrum, y: &DiscreteSpectrum, family: &[FunctionSpec]) -> Result<Option<(FunctionSpec, f64, f64)>> {
    let tr = TraceFormEvaluator::trace();
    for f in family {
        let a = tr.evaluate(&x.apply_calculus(f)?)?;
        let b = tr.evaluate(&y.apply_calculus(f)?)?;
        if a != b {
            return Ok(Some((f.clone(), a, b)));
        }
    }
    Ok(None)
}

/// Equal evaluations over the separating family force equal atom multisets.
pub fn run_f4(config: &RunConfig) -> Report {
    let mut r = Report::new("F4", "F4 stability of discrete models under interpolation", config);
    r.notes.push(
        "desk-scale approximation: bounded-variation interpolation is replaced by atom-multiset separation on a shared grid"
            .into(),
    );
    let grid = f4_grid();
    let family = separating_family(&grid);
    let mut rng = config.rng(4);
    let (mut equal, mut separated, mut by_indicator) = (0usize, 0usize, 0usize);
    for i in 0..config.instances {
        let xs = random_grid_values(&mut rng, &grid, config.max_atoms);
        let ys: Vec<f64> = match i % 3 {
            0 => {
                let mut v = xs.clone();
                v.shuffle(&mut rng);
                v
            }
            1 => {
                let mut v = xs.clone();
                let j = rng.gen_range(0..v.len());
                let old = v[j];
                while v[j] == old {
                    v[j] = *grid.choose(&mut rng).unwrap();
                }
                v
            }
            _ => random_grid_values(&mut rng, &grid, config.max_atoms),
        };
        let (x, y) = match (DiscreteSpectrum::diag(&xs), DiscreteSpectrum::diag(&ys)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => {
                r.error("model", &e);
                continue;
            }
        };
        let same = x.atoms() == y.atoms();
        match separator(&x, &y, &family) {
            Ok(None) if same => equal += 1,
            Ok(Some((f, _, _))) if !same => {
                separated += 1;
                if matches!(f, FunctionSpec::Indicator { .. }) {
                    by_indicator += 1;
                }
            }
            Ok(sep) => r.fail(json!({
                "x": xs,
                "y": ys,
                "multisets_equal": same,
                "separator": sep.map(|(f, a, b)| json!({ "f": f, "x": a, "y": b })),
            })),
            Err(e) => r.error("separation", &e),
        }
    }
    r.metric("pairs", config.instances);
    r.metric("equal_pairs", equal);
    r.metric("separated_pairs", separated);
    r.metric("separated_by_indicator", by_indicator);
    r
}

pub fn run_all(config: &RunConfig) -> Vec<Report> {
    vec![run_f1(config), run_f2(config), run_f3(config), run_f4(config)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            profiles: 4,
            instances: 50,
            pairs_per_class: 3,
            ..RunConfig::default()
        }
    }

    #[test]
    fn f1_passes_and_sabotage_fails() {
        let r = run_f1(&small());
        assert!(r.passed, "{:?}", r.witnesses);
        assert!(r.metrics["max_rel_error"].as_f64().unwrap() < 1e-9);
        let bad = run_f1(&RunConfig {
            control: Some(Control::SabotagedEvaluator),
            ..small()
        });
        assert!(!bad.passed);
        assert!(!bad.witnesses.is_empty());
    }

    #[test]
    fn f1_without_instances_is_vacuous() {
        let r = run_f1(&RunConfig {
            instances: 0,
            ..small()
        });
        assert!(r.passed);
        assert_eq!(r.notes, vec!["no instances".to_string()]);
    }

    #[test]
    fn f2_small_grid_surfaces_insufficient_samples() {
        let r = run_f2(&RunConfig {
            grid_points: 4,
            ..small()
        });
        assert!(!r.passed);
        assert!(r.witnesses[0]["error"].as_str().unwrap().contains("insufficient samples"));
    }

    #[test]
    fn f2_mixed_control_fails() {
        let r = run_f2(&RunConfig {
            control: Some(Control::MixedClasses),
            ..small()
        });
        assert!(!r.passed);
        assert_eq!(r.witnesses[0]["check"], "claimed same class");
    }

    #[test]
    fn f3_and_control() {
        let r = run_f3(&small());
        assert!(r.passed, "{:?}", r.witnesses);
        assert_eq!(r.metrics["tail_control_failed_as_predicted"], true);
        let bad = run_f3(&RunConfig {
            control: Some(Control::TailEvaluator),
            ..small()
        });
        assert!(!bad.passed);
    }

    #[test]
    fn f4_separates() {
        let r = run_f4(&small());
        assert!(r.passed, "{:?}", r.witnesses);
        assert!(r.metrics["separated_pairs"].as_u64().unwrap() > 0);
        assert!(r.metrics["equal_pairs"].as_u64().unwrap() > 0);
    }

    #[test]
    fn f4_single_atom_difference() {
        let grid = f4_grid();
        let family = separating_family(&grid);
        let x = DiscreteSpectrum::diag(&[1.0, 2.0]).unwrap();
        let y = DiscreteSpectrum::diag(&[1.0, 2.5]).unwrap();
        let (f, _, _) = separator(&x, &y, &family).unwrap().unwrap();
        assert_eq!(f, FunctionSpec::indicator(2.0, 2.0));
        let z = DiscreteSpectrum::diag(&[2.0, 1.0]).unwrap();
        assert!(separator(&x, &z, &family).unwrap().is_none());
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig { tol: 0.0, ..RunConfig::default() }.validate().is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
