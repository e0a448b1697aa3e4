use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::DiscreteSpectrum;

/// Symmetric nonnegative weights with zero diagonal, stored dense row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    w: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Edge {
    Plain(usize, usize),
    Weighted(usize, usize, f64),
}

#[derive(Deserialize)]
struct AdjacencyRepr {
    n: usize,
    edges: Vec<Edge>,
}

#[derive(Serialize)]
struct AdjacencyOut {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("graph needs at least one vertex".into()));
        }
        Ok(AdjacencyMatrix { n, w: vec![0.0; n * n] })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = Self::new(n)?;
        for &(i, j, w) in edges {
            a.add_edge(i, j, w)?;
        }
        Ok(a)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, 1.0));
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::Parameter(format!("edge ({i}, {j}) outside 0..{}", self.n)));
        }
        if i == j {
            return Err(Error::Parameter(format!("self-loop at vertex {i}")));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Parameter(format!("edge ({i}, {j}) has invalid weight {w}")));
        }
        let old = self.w[i * self.n + j];
        if old != 0.0 && old != w {
            return Err(Error::Parameter(format!("edge ({i}, {j}) listed twice with different weights")));
        }
        self.w[i * self.n + j] = w;
        self.w[j * self.n + i] = w;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in 0..self.n {
                if !seen[j] && self.weight(i, j) > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// `Deg - A`, row-major.
    pub fn laplacian(&self) -> Vec<f64> {
        let n = self.n;
        let mut l: Vec<f64> = self.w.iter().map(|v| -v).collect();
        for i in 0..n {
            l[i * n + i] = self.w[i * n..(i + 1) * n].iter().sum();
        }
        l
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: AdjacencyRepr = serde_json::from_slice(bytes)?;
        let mut a = Self::new(r.n)?;
        for e in r.edges {
            let (i, j, w) = match e {
                Edge::Plain(i, j) => (i, j, 1.0),
                Edge::Weighted(i, j, w) => (i, j, w),
            };
            a.add_edge(i, j, w)?;
        }
        Ok(a)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weight(i, j);
                if w != 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
        serde_json::to_vec(&AdjacencyOut { n: self.n, edges }).expect("adjacency serializes")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// Stop once the off-diagonal Frobenius norm is below `tol * max(1, ||A||_F)`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions {
            tol: 1e-12,
            max_sweeps: 100,
        }
    }
}

fn off_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi sweeps, ascending.
pub fn jacobi_eigenvalues(matrix: &[f64], n: usize, opts: JacobiOptions) -> Result<Vec<f64>> {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let threshold = opts.tol * scale;
    let mut sweeps = 0;
    loop {
        let off = off_norm(&a, n);
        if off < threshold {
            break;
        }
        if sweeps == opts.max_sweeps {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Laplacian spectrum with the kernel snapped to 0 and near-equal eigenvalues merged.
pub fn graph_laplacian_spectrum(a: &AdjacencyMatrix, tol: f64) -> Result<DiscreteSpectrum> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be > 0, got {tol}")));
    }
    let n = a.n();
    let eig = jacobi_eigenvalues(
        &a.laplacian(),
        n,
        JacobiOptions {
            tol,
            ..JacobiOptions::default()
        },
    )?;
    let snapped: Vec<f64> = eig
        .into_iter()
        .map(|v| if v.abs() < 10.0 * tol { 0.0 } else { v })
        .collect();
    // clusters of sorted values within relative 1e-9, represented by their mean
    let mut atoms: Vec<(f64, u64)> = Vec::new();
    let mut cluster: Vec<f64> = Vec::new();
    let flush = |cluster: &mut Vec<f64>, atoms: &mut Vec<(f64, u64)>| {
        if !cluster.is_empty() {
            let mean = if cluster.iter().all(|v| *v == 0.0) {
                0.0
            } else {
                cluster.iter().sum::<f64>() / cluster.len() as f64
            };
            atoms.push((mean, cluster.len() as u64));
            cluster.clear();
        }
    };
    for v in snapped {
        if let Some(&first) = cluster.first() {
            if (v - first).abs() > 1e-9 * v.abs().max(first.abs()) {
                flush(&mut cluster, &mut atoms);
            }
        }
        cluster.push(v);
    }
    flush(&mut cluster, &mut atoms);
    DiscreteSpectrum::new(atoms, None, format!("graph laplacian, n = {n}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_two() {
        let s = graph_laplacian_spectrum(&AdjacencyMatrix::path(2).unwrap(), 1e-12).unwrap();
        assert_eq!(s.atoms().len(), 2);
        assert_eq!(s.atoms()[0], (0.0, 1));
        assert!((s.atoms()[1].0 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn complete_three() {
        let s = graph_laplacian_spectrum(&AdjacencyMatrix::complete(3).unwrap(), 1e-12).unwrap();
        assert_eq!(s.atoms().len(), 2);
        assert_eq!(s.atoms()[0], (0.0, 1));
        assert!((s.atoms()[1].0 - 3.0).abs() < 1e-10);
        assert_eq!(s.atoms()[1].1, 2);
    }

    #[test]
    fn single_vertex() {
        let s = graph_laplacian_spectrum(&AdjacencyMatrix::new(1).unwrap(), 1e-12).unwrap();
        assert_eq!(s.atoms(), &[(0.0, 1)]);
    }

    #[test]
    fn small_closed_forms() {
        // path on 3 vertices: 0, 1, 3; cycle on 4: 0, 2, 2, 4; star K_{1,3}: 0, 1, 1, 4
        let p3 = graph_laplacian_spectrum(&AdjacencyMatrix::path(3).unwrap(), 1e-12).unwrap();
        let want = [0.0, 1.0, 3.0];
        for (a, b) in p3.expand().iter().zip(want) {
            assert!((a - b).abs() < 1e-10);
        }
        let c4 = AdjacencyMatrix::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let got = graph_laplacian_spectrum(&c4, 1e-12).unwrap().expand();
        for (a, b) in got.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-10);
        }
        let star = AdjacencyMatrix::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let got = graph_laplacian_spectrum(&star, 1e-12).unwrap().expand();
        for (a, b) in got.iter().zip([0.0, 1.0, 1.0, 4.0]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalue_sum_is_degree_sum() {
        let mut edges = Vec::new();
        for i in 0..12 {
            edges.push((i, (i + 1) % 12, 1.0 + i as f64 * 0.25));
            edges.push((i, (i + 5) % 12, 0.5));
        }
        let a = AdjacencyMatrix::from_edges(12, &edges).unwrap();
        let eig = jacobi_eigenvalues(&a.laplacian(), 12, JacobiOptions::default()).unwrap();
        let deg: f64 = (0..12).map(|i| a.laplacian()[i * 12 + i]).sum();
        let sum: f64 = eig.iter().sum();
        assert!((sum - deg).abs() <= 1e-10 * deg);
    }

    #[test]
    fn no_convergence_is_reported() {
        let a = AdjacencyMatrix::complete(6).unwrap();
        let r = jacobi_eigenvalues(
            &a.laplacian(),
            6,
            JacobiOptions {
                tol: 1e-12,
                max_sweeps: 0,
            },
        );
        assert!(matches!(r, Err(Error::NoConvergence { sweeps: 0, .. })));
    }

    #[test]
    fn json_round_trip() {
        let a = AdjacencyMatrix::from_json(br#"{"n":3,"edges":[[0,1],[1,2,2.5]]}"#).unwrap();
        assert_eq!(a.weight(2, 1), 2.5);
        assert!(a.is_connected());
        assert_eq!(AdjacencyMatrix::from_json(&a.to_json()).unwrap(), a);
        assert!(AdjacencyMatrix::from_json(br#"{"n":2,"edges":[[0,0]]}"#).is_err());
        assert!(!AdjacencyMatrix::from_json(br#"{"n":3,"edges":[[0,1]]}"#).unwrap().is_connected());
    }
}
