//! Counting-function sampling, growth classification and closure checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{eval_function, generalized_inverse, FunctionSpec};
use crate::numeric::{fit_line, geomspace, r_squared, CompensatedSum};
use crate::spectrum::DiscreteSpectrum;

/// `(lambda, N(lambda))` pairs with strictly increasing `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingSamples {
    pub points: Vec<(f64, u64)>,
    #[serde(default)]
    pub source_label: String,
}

impl CountingSamples {
    pub fn new(points: Vec<(f64, u64)>, source_label: impl Into<String>) -> Result<Self> {
        if points.iter().any(|p| !(p.0 > 0.0 && p.0.is_finite())) {
            return Err(Error::Parameter("sample abscissae must be positive and finite".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Parameter("sample abscissae must be strictly increasing".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[0].1 > w[1].1) {
            return Err(Error::Parameter(format!(
                "counts must be nondecreasing: N({}) = {} > N({}) = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
        Ok(CountingSamples {
            points,
            source_label: source_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exact counts on `grid`; refuses grid points past the end of a truncated model.
pub fn sample_counting(s: &DiscreteSpectrum, grid: &[f64]) -> Result<CountingSamples> {
    if s.is_truncated() {
        if let Some(&g) = grid.iter().find(|&&g| g > s.max_abs()) {
            return Err(Error::GridBeyondTruncation {
                lambda: g,
                limit: s.max_abs(),
            });
        }
    }
    CountingSamples::new(
        grid.iter().map(|&g| (g, s.counting(g))).collect(),
        s.source_label(),
    )
}

/// Geometric grid from the third-smallest positive modulus up to `max |lambda|`.
pub fn default_grid(s: &DiscreteSpectrum, points: usize) -> Result<Vec<f64>> {
    let mut seen = 0u64;
    let mut lo = None;
    for (l, m) in s.atoms_by_abs() {
        if l == 0.0 {
            continue;
        }
        seen += m;
        if seen >= 3 {
            lo = Some(l.abs());
            break;
        }
    }
    let lo = lo.ok_or(Error::InsufficientSamples {
        needed: 3,
        got: seen as usize,
    })?;
    let hi = s.max_abs();
    if hi <= lo {
        return Err(Error::InsufficientSamples { needed: 2, got: 1 });
    }
    Ok(geomspace(lo, hi, points.max(2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum GrowthClass {
    /// `N ~ C lambda^d`.
    Poly {
        d: f64,
        #[serde(rename = "C")]
        big_c: f64,
    },
    /// `N ~ exp(c lambda^alpha)`.
    Stretched { c: f64, alpha: f64 },
    /// `N ~ c log lambda`.
    Log { c: f64 },
    Slower,
    Unclassified { reason: String },
}

impl GrowthClass {
    pub fn label(&self) -> &'static str {
        match self {
            GrowthClass::Poly { .. } => "poly",
            GrowthClass::Stretched { .. } => "stretched",
            GrowthClass::Log { .. } => "log",
            GrowthClass::Slower => "slower",
            GrowthClass::Unclassified { .. } => "unclassified",
        }
    }

    pub fn same_class(&self, other: &GrowthClass) -> bool {
        self.label() == other.label()
    }

    pub fn is_named(&self) -> bool {
        !matches!(self, GrowthClass::Unclassified { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthConfig {
    /// Fit on the upper fraction of the sampled `log lambda` range.
    pub window_fraction: f64,
    pub margin: f64,
    /// Slower-than-log when the `N` vs `log lambda` slope is at most this many standard errors.
    pub slower_factor: f64,
    pub min_points: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            window_fraction: 0.75,
            margin: 0.05,
            slower_factor: 0.1,
            min_points: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub model: String,
    /// `sqrt(1 - R^2)` of the predicted `log N`.
    pub residual: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub verdict: GrowthClass,
    pub candidates: Vec<CandidateFit>,
    pub window: (f64, f64),
    pub r2_gap: f64,
    pub notes: Vec<String>,
}

fn normalized_residual(observed: &[f64], predicted: &[f64]) -> f64 {
    let r2 = r_squared(observed, predicted);
    if r2.is_finite() {
        (1.0 - r2).max(0.0).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Three linearized regressions compared by their `log N` residuals.
pub fn classify_growth(samples: &CountingSamples, config: &GrowthConfig) -> Result<GrowthFit> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: config.min_points,
            got: 0,
        });
    }
    let first = samples.points[0].0.ln();
    let last = samples.points[samples.len() - 1].0.ln();
    let cut = first + (1.0 - config.window_fraction) * (last - first);
    let window: Vec<(f64, f64)> = samples
        .points
        .iter()
        .filter(|p| p.0.ln() >= cut - 1e-12 && p.1 >= 1)
        .map(|p| (p.0.ln(), p.1 as f64))
        .collect();
    if window.len() < config.min_points {
        return Err(Error::InsufficientSamples {
            needed: config.min_points,
            got: window.len(),
        });
    }
    let win = (window[0].0.exp(), window[window.len() - 1].0.exp());
    let mut notes = Vec::new();

    let x1: Vec<f64> = window.iter().map(|p| p.0).collect();
    let n1: Vec<f64> = window.iter().map(|p| p.1).collect();
    let log_fit = fit_line(&x1, &n1).ok_or(Error::InsufficientSamples {
        needed: 2,
        got: 1,
    })?;
    if log_fit.slope <= config.slower_factor * log_fit.slope_std_err {
        return Ok(GrowthFit {
            verdict: GrowthClass::Slower,
            candidates: Vec::new(),
            window: win,
            r2_gap: 0.0,
            notes: vec![format!(
                "N vs log lambda slope {} within {} standard errors of 0",
                log_fit.slope, config.slower_factor
            )],
        });
    }

    // common comparison set: log log N needs N >= 3
    let w3: Vec<(f64, f64)> = window.iter().copied().filter(|p| p.1 >= 3.0).collect();
    let (set, with_stretched) = if w3.len() >= config.min_points {
        (w3, true)
    } else {
        notes.push("fewer than min_points window samples with N >= 3; stretched model skipped".into());
        (window.clone(), false)
    };
    let x: Vec<f64> = set.iter().map(|p| p.0).collect();
    let n: Vec<f64> = set.iter().map(|p| p.1).collect();
    let y: Vec<f64> = n.iter().map(|v| v.ln()).collect();

    let mut candidates = Vec::new();
    let poly = fit_line(&x, &y).expect("distinct abscissae");
    let pred: Vec<f64> = x.iter().map(|&v| poly.predict(v)).collect();
    candidates.push(CandidateFit {
        model: "poly".into(),
        residual: normalized_residual(&y, &pred),
        slope: poly.slope,
        intercept: poly.intercept,
        points: x.len(),
    });
    let stretched = if with_stretched {
        let yy: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let fit = fit_line(&x, &yy).expect("distinct abscissae");
        let pred: Vec<f64> = x.iter().map(|&v| fit.predict(v).exp()).collect();
        candidates.push(CandidateFit {
            model: "stretched".into(),
            residual: normalized_residual(&y, &pred),
            slope: fit.slope,
            intercept: fit.intercept,
            points: x.len(),
        });
        Some(fit)
    } else {
        None
    };
    let lf = fit_line(&x, &n).expect("distinct abscissae");
    let pred: Vec<f64> = x
        .iter()
        .map(|&v| lf.predict(v).max(f64::MIN_POSITIVE).ln())
        .collect();
    candidates.push(CandidateFit {
        model: "log".into(),
        residual: normalized_residual(&y, &pred),
        slope: lf.slope,
        intercept: lf.intercept,
        points: x.len(),
    });

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[a].residual.total_cmp(&candidates[b].residual));
    let best = &candidates[order[0]];
    let gap = candidates[order[1]].residual - best.residual;

    let verdict = if !(gap >= config.margin) {
        GrowthClass::Unclassified {
            reason: format!(
                "best model {} beats {} by {gap:.4}, below margin {}",
                best.model, candidates[order[1]].model, config.margin
            ),
        }
    } else {
        match best.model.as_str() {
            "poly" if poly.slope > 0.0 => GrowthClass::Poly {
                d: poly.slope,
                big_c: poly.intercept.exp(),
            },
            "stretched" => {
                let fit = stretched.expect("stretched candidate present");
                if fit.slope > 0.0 && fit.slope < 1.0 {
                    GrowthClass::Stretched {
                        c: fit.intercept.exp(),
                        alpha: fit.slope,
                    }
                } else {
                    GrowthClass::Unclassified {
                        reason: format!("stretched exponent {} outside (0, 1)", fit.slope),
                    }
                }
            }
            "log" if lf.slope > 0.0 => GrowthClass::Log { c: lf.slope },
            m => GrowthClass::Unclassified {
                reason: format!("best model {m} has a nonpositive rate"),
            },
        }
    };
    Ok(GrowthFit {
        verdict,
        candidates,
        window: win,
        r2_gap: gap,
        notes,
    })
}

pub fn classify_spectrum(s: &DiscreteSpectrum, grid: &[f64], config: &GrowthConfig) -> Result<GrowthFit> {
    classify_growth(&sample_counting(s, grid)?, config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamViolation {
    pub lambda: f64,
    pub transformed_count: u64,
    pub reparametrized_count: u64,
    pub inverse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamReport {
    pub function: FunctionSpec,
    pub checked: usize,
    pub violations: Vec<ReparamViolation>,
}

impl ReparamReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `N_{f(S)}(L) = N_S(f^-1(L))` on every grid point.
///
/// When `f(0) > L` the level set is empty and the right side is taken as 0.
pub fn check_reparam_identity(s: &DiscreteSpectrum, f: &FunctionSpec, grid: &[f64]) -> Result<ReparamReport> {
    if let Some(&(l, _)) = s.atoms().first().filter(|a| a.0 < 0.0) {
        return Err(Error::NegativeEigenvalue(l));
    }
    let f0 = eval_function(f, 0.0)?;
    if f0 < 0.0 {
        return Err(Error::Parameter(format!("f(0) = {f0} < 0; counting uses |f|")));
    }
    let image = s.apply_calculus(f)?;
    let mut violations = Vec::new();
    for &level in grid {
        let inv = generalized_inverse(f, level)?;
        let lhs = image.counting(level);
        let rhs = if f0 > level { 0 } else { s.counting(inv) };
        if lhs != rhs {
            violations.push(ReparamViolation {
                lambda: level,
                transformed_count: lhs,
                reparametrized_count: rhs,
                inverse: inv,
            });
        }
    }
    Ok(ReparamReport {
        function: f.clone(),
        checked: grid.len(),
        violations,
    })
}

/// `sum over 1 <= lambda <= L of lambda^-(d_e + delta) mult`.
pub fn stieltjes_f(s: &DiscreteSpectrum, d_e: f64, delta: f64, level: f64) -> Result<f64> {
    if let Some(&(l, _)) = s.atoms().first().filter(|a| a.0 < 0.0) {
        return Err(Error::NegativeEigenvalue(l));
    }
    if !(d_e >= 0.0 && d_e.is_finite()) {
        return Err(Error::Parameter(format!("d_e must be >= 0, got {d_e}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(level >= 1.0) {
        return Err(Error::Parameter(format!("level must be >= 1, got {level}")));
    }
    let p = -(d_e + delta);
    Ok(s.atoms()
        .iter()
        .filter(|a| a.0 >= 1.0 && a.0 <= level)
        .map(|&(l, m)| l.powf(p) * m as f64)
        .collect::<CompensatedSum>()
        .value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionBoundReport {
    pub d_d: f64,
    pub d_e: f64,
    pub delta: f64,
    pub exponent: f64,
    /// `sup N(t) / t^d_d` over `1 <= t <=` the lower-half cutoff.
    pub c_counting: f64,
    /// `c_counting` times the integration-by-parts factor.
    pub c_delta: f64,
    /// Largest `F / lambda^exponent` on the upper half.
    pub upper_ratio: f64,
    pub points: Vec<(f64, f64)>,
    pub holds: bool,
}

/// Factor `K` with `F(L) <= K C L^exponent` whenever `N(t) <= C t^d_d` on `[1, L]`.
fn stieltjes_factor(d_d: f64, d_e: f64, delta: f64) -> f64 {
    let p = d_e + delta;
    let q = d_d - p;
    if q != 0.0 {
        1.0 + p / q.abs()
    } else {
        // ln L <= L^(2 delta) / (2 delta e)
        1.0 + p / (2.0 * delta * std::f64::consts::E)
    }
}

/// `F(L) <= C_delta L^max(d_d - d_e + delta, 0)`.
///
/// The counting constant is measured on the lower half of the grid and
/// turned into `C_delta` by integrating by parts; the bound is then checked
/// on the upper half.
pub fn convolution_bound_check(
    s: &DiscreteSpectrum,
    d_d: f64,
    d_e: f64,
    delta: f64,
    grid: &[f64],
) -> Result<ConvolutionBoundReport> {
    if grid.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: grid.len(),
        });
    }
    if !(d_d > 0.0 && d_d.is_finite()) {
        return Err(Error::Parameter(format!("d_d must be > 0, got {d_d}")));
    }
    if s.is_truncated() {
        if let Some(&g) = grid.iter().find(|&&g| g > s.max_abs()) {
            return Err(Error::GridBeyondTruncation {
                lambda: g,
                limit: s.max_abs(),
            });
        }
    }
    let exponent = (d_d - d_e + delta).max(0.0);
    let mut points = Vec::with_capacity(grid.len());
    for &g in grid {
        points.push((g, stieltjes_f(s, d_e, delta, g)?));
    }
    let half = grid.len() / 2;
    let cutoff = grid[..half.max(1)].iter().cloned().fold(1.0, f64::max);
    // N / t^d peaks at atoms, and at t = 1 for mass below 1
    let c_counting = std::iter::once(1.0)
        .chain(s.atoms().iter().map(|a| a.0.abs()).filter(|&t| t >= 1.0 && t <= cutoff))
        .map(|t| s.counting(t) as f64 / t.powf(d_d))
        .fold(0.0, f64::max);
    let c_delta = c_counting * stieltjes_factor(d_d, d_e, delta);
    let upper_ratio = points[half..]
        .iter()
        .map(|p| p.1 / p.0.powf(exponent))
        .fold(0.0, f64::max);
    Ok(ConvolutionBoundReport {
        d_d,
        d_e,
        delta,
        exponent,
        c_counting,
        c_delta,
        upper_ratio,
        holds: upper_ratio <= c_delta,
        points,
    })
}

/// `sum_j mult(a_j) N_{S2}(L / a_j)`.
pub fn tensor_counting_convolution(s1: &DiscreteSpectrum, s2: &DiscreteSpectrum, level: f64) -> Result<u64> {
    for s in [s1, s2] {
        if let Some(&(l, _)) = s.atoms().first().filter(|a| a.0 < 0.0) {
            return Err(Error::NegativeEigenvalue(l));
        }
    }
    let mut total = 0u64;
    for &(a, m) in s1.atoms() {
        let n = if a == 0.0 {
            if level >= 0.0 {
                s2.total_multiplicity()
            } else {
                0
            }
        } else {
            s2.counting(level / a)
        };
        if n == 0 && a > 0.0 {
            break;
        }
        total += m * n;
    }
    Ok(total)
}

/// Largest level at which counting of `s1 (x) s2` is uncensored by truncation.
pub fn tensor_reliable_limit(s1: &DiscreteSpectrum, s2: &DiscreteSpectrum) -> f64 {
    let mut limit = f64::INFINITY;
    if s2.is_truncated() {
        if let Some(a) = s1.min_positive() {
            limit = limit.min(a * s2.max_abs());
        }
    }
    if s1.is_truncated() {
        if let Some(b) = s2.min_positive() {
            limit = limit.min(b * s1.max_abs());
        }
    }
    limit
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorBoundReport {
    pub d1: f64,
    pub d2: f64,
    pub epsilon: f64,
    /// `(lambda, pair enumeration, convolution sum)`.
    pub counts: Vec<(f64, u64, u64)>,
    pub routes_agree: bool,
    pub fit_window: (f64, f64),
    pub slope: f64,
    pub slope_bound: f64,
    pub holds: bool,
}

/// Counts `S1 (x) S2` two ways and bounds the log-log slope over the top `fit_decades` decades.
pub fn tensor_growth_bound_check(
    s1: &DiscreteSpectrum,
    s2: &DiscreteSpectrum,
    d1: f64,
    d2: f64,
    epsilon: f64,
    grid: &[f64],
    fit_decades: f64,
) -> Result<TensorBoundReport> {
    if grid.is_empty() {
        return Err(Error::InsufficientSamples { needed: 2, got: 0 });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 0.0 {
        return Err(Error::Parameter("grid must be positive and strictly increasing".into()));
    }
    let limit = tensor_reliable_limit(s1, s2);
    if let Some(&g) = grid.iter().find(|&&g| g > limit) {
        return Err(Error::GridBeyondTruncation { lambda: g, limit });
    }
    let top = grid[grid.len() - 1];
    let product = s1.tensor_product(s2, top)?;
    let mut counts = Vec::with_capacity(grid.len());
    for &g in grid {
        counts.push((g, product.counting(g), tensor_counting_convolution(s1, s2, g)?));
    }
    let routes_agree = counts.iter().all(|c| c.1 == c.2);
    let lo = top / 10f64.powf(fit_decades);
    let fit_pts: Vec<(f64, f64)> = counts
        .iter()
        .filter(|c| c.0 >= lo * (1.0 - 1e-12) && c.1 > 0)
        .map(|c| (c.0.ln(), (c.1 as f64).ln()))
        .collect();
    if fit_pts.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: fit_pts.len(),
        });
    }
    let x: Vec<f64> = fit_pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = fit_pts.iter().map(|p| p.1).collect();
    let slope = fit_line(&x, &y).expect("distinct abscissae").slope;
    let slope_bound = d1 + d2 + epsilon;
    Ok(TensorBoundReport {
        d1,
        d2,
        epsilon,
        routes_agree,
        fit_window: (x[0].exp(), x[x.len() - 1].exp()),
        slope,
        slope_bound,
        holds: routes_agree && slope <= slope_bound,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumGrowthReport {
    /// `(lambda, N_1, N_2, N_sum)`.
    pub counts: Vec<(f64, u64, u64, u64)>,
    pub additive: bool,
    pub class_1: GrowthClass,
    pub class_2: GrowthClass,
    pub class_sum: GrowthClass,
    /// `None` when the summands are not in one named class.
    pub preserved: Option<bool>,
}

impl SumGrowthReport {
    pub fn holds(&self) -> bool {
        self.additive && self.preserved != Some(false)
    }
}

pub fn sum_growth_check(
    s1: &DiscreteSpectrum,
    s2: &DiscreteSpectrum,
    grid: &[f64],
    config: &GrowthConfig,
) -> Result<SumGrowthReport> {
    let sum = s1.direct_sum(s2);
    let a = sample_counting(s1, grid)?;
    let b = sample_counting(s2, grid)?;
    let c = sample_counting(&sum, grid)?;
    let counts: Vec<(f64, u64, u64, u64)> = grid
        .iter()
        .enumerate()
        .map(|(i, &g)| (g, a.points[i].1, b.points[i].1, c.points[i].1))
        .collect();
    let additive = counts.iter().all(|r| r.1 + r.2 == r.3);
    let class_of = |s: &CountingSamples| match classify_growth(s, config) {
        Ok(fit) => fit.verdict,
        Err(e) => GrowthClass::Unclassified {
            reason: e.to_string(),
        },
    };
    let (class_1, class_2, class_sum) = (class_of(&a), class_of(&b), class_of(&c));
    let preserved = (class_1.is_named() && class_1.same_class(&class_2))
        .then(|| class_sum.same_class(&class_1));
    Ok(SumGrowthReport {
        counts,
        additive,
        class_1,
        class_2,
        class_sum,
        preserved,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformClosureReport {
    pub function: FunctionSpec,
    pub before: GrowthClass,
    pub after: GrowthClass,
    /// For polynomial inputs and `Power(beta)`: `d / beta`.
    pub expected_d: Option<f64>,
    pub holds: bool,
}

/// Classifies `S` on `grid` and `f(S)` on `f(grid)`, then compares verdicts.
///
/// Only `Power` and `Power` composed with positive affine maps are admitted.
pub fn transform_closure_check(
    s: &DiscreteSpectrum,
    f: &FunctionSpec,
    grid: &[f64],
    config: &GrowthConfig,
    d_tol: f64,
) -> Result<TransformClosureReport> {
    let beta = admitted_power(f).ok_or_else(|| {
        Error::Parameter(format!("{f} is not an admitted regularly varying transform"))
    })?;
    let before = classify_spectrum(s, grid, config)?.verdict;
    let image = s.apply_calculus(f)?;
    let mut mapped = Vec::with_capacity(grid.len());
    for &g in grid {
        mapped.push(eval_function(f, g)?);
    }
    mapped.dedup();
    let after = classify_spectrum(&image, &mapped, config)?.verdict;
    let (expected_d, holds) = match (&before, &after) {
        (GrowthClass::Poly { d, .. }, GrowthClass::Poly { d: d2, .. }) => {
            let e = d / beta;
            (Some(e), (d2 - e).abs() <= d_tol * e.max(1.0))
        }
        (GrowthClass::Poly { d, .. }, _) => (Some(d / beta), false),
        (b, a) => (None, b.is_named() && b.same_class(a)),
    };
    Ok(TransformClosureReport {
        function: f.clone(),
        before,
        after,
        expected_d,
        holds,
    })
}

fn admitted_power(f: &FunctionSpec) -> Option<f64> {
    match f {
        FunctionSpec::Power { beta } => Some(*beta),
        FunctionSpec::Compose { outer, inner } => match (outer.as_ref(), inner.as_ref()) {
            (FunctionSpec::Affine { a, .. }, g) if *a > 0.0 => admitted_power(g),
            (g, FunctionSpec::Affine { a, .. }) if *a > 0.0 => admitted_power(g),
            _ => None,
        },
        _ => None,
    }
}
