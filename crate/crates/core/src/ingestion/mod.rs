//! Spectrum and sample I/O, model generators, and the graph front end.

mod graph;

use serde::{Deserialize, Serialize};

pub use graph::{graph_laplacian_spectrum, jacobi_eigenvalues, AdjacencyMatrix, JacobiOptions};

use crate::error::{Error, Result};
use crate::growth::CountingSamples;
use crate::spectrum::DiscreteSpectrum;

pub fn parse_spectrum(bytes: &[u8]) -> Result<DiscreteSpectrum> {
    serde_json::from_slice(bytes).map_err(|e| {
        if e.line() > 0 {
            return Error::from(e);
        }
        // invariant violations surface after the object closes
        let body = bytes.trim_ascii_end();
        let line = 1 + body.iter().filter(|&&b| b == b'\n').count();
        let column = body.len() - body.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        Error::Format {
            message: format!("atoms: {e}"),
            line,
            column,
        }
    })
}

pub fn write_spectrum(s: &DiscreteSpectrum) -> Vec<u8> {
    let mut out = serde_json::to_vec(s).expect("spectra serialize");
    out.push(b'\n');
    out
}

/// Growth models. Defaults reproduce `diag(n)`, `diag(((1/c) log(n+1))^(1/alpha))` and `diag(e^n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `lambda_n = (n / c)^(1/d)`, so `N ~ c lambda^d`.
    Poly {
        #[serde(default = "one")]
        c: f64,
        #[serde(default = "one")]
        d: f64,
    },
    /// `lambda_n = (log(n + 1) / c)^(1/alpha)`.
    Stretched { c: f64, alpha: f64 },
    /// `lambda_n = exp(n / c)`, so `N ~ c log lambda`.
    Log {
        #[serde(default = "one")]
        c: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelKind {
    pub fn poly() -> Self {
        ModelKind::Poly { c: 1.0, d: 1.0 }
    }

    pub fn stretched(c: f64, alpha: f64) -> Self {
        ModelKind::Stretched { c, alpha }
    }

    pub fn log() -> Self {
        ModelKind::Log { c: 1.0 }
    }

    pub fn label(&self) -> String {
        match self {
            ModelKind::Poly { c, d } => format!("poly(C={c}, d={d})"),
            ModelKind::Stretched { c, alpha } => format!("stretched(c={c}, alpha={alpha})"),
            ModelKind::Log { c } => format!("log(c={c})"),
        }
    }
}

/// First `n` eigenvalues of a growth model, flagged as a truncation.
pub fn gen_model(kind: &ModelKind, n: u64) -> Result<DiscreteSpectrum> {
    if n == 0 {
        return Err(Error::Parameter("model size must be >= 1".into()));
    }
    let pos = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{name} must be > 0, got {v}")))
        }
    };
    let values: Vec<f64> = match *kind {
        ModelKind::Poly { c, d } => {
            pos("C", c)?;
            pos("d", d)?;
            (1..=n)
                .map(|k| {
                    let x = k as f64 / c;
                    if d == 1.0 {
                        x
                    } else {
                        x.powf(1.0 / d)
                    }
                })
                .collect()
        }
        ModelKind::Stretched { c, alpha } => {
            pos("c", c)?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            (1..=n)
                .map(|k| (((k + 1) as f64).ln() / c).powf(1.0 / alpha))
                .collect()
        }
        ModelKind::Log { c } => {
            pos("c", c)?;
            (1..=n).map(|k| (k as f64 / c).exp()).collect()
        }
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("model overflows: eigenvalue {v}")));
    }
    Ok(DiscreteSpectrum::from_unsorted(values.into_iter().map(|v| (v, 1)).collect(), kind.label())?
        .as_truncation())
}

/// CSV with header `lambda,count`.
pub fn write_samples(samples: &CountingSamples) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "count"]).expect("in-memory write");
    for &(l, n) in &samples.points {
        w.write_record([format!("{l:?}"), n.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Deserialize)]
struct SampleRow {
    lambda: f64,
    count: u64,
}

pub fn parse_samples(bytes: &[u8]) -> Result<CountingSamples> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["lambda", "count"] {
        return Err(Error::Format {
            message: format!("expected header lambda,count, found {}", headers.iter().collect::<Vec<_>>().join(",")),
            line: 1,
            column: 0,
        });
    }
    let mut points = Vec::new();
    for row in r.deserialize::<SampleRow>() {
        let row = row?;
        points.push((row.lambda, row.count));
    }
    CountingSamples::new(points, "")
}
