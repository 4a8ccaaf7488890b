//! Residual-certified eigenpairs and eigenvalue stability verdicts.

mod matrix;
mod poly;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use matrix::ComplexMatrix;
pub use poly::{approx_roots, char_poly, Cluster, Polynomial, RootSet};

use crate::dd::{DdComplex, DoubleDouble};
use crate::error::{positive, Result};
use crate::real::CertifiedReal;

/// Default Gram independence threshold.
pub const DEFAULT_TAU: f64 = 1e-6;

const U: f64 = f64::EPSILON / 2.0;
const DD_U: f64 = 1.0 / (1u128 << 104) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxEigenPair {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
    /// `‖A v̂ − λ̂ v̂‖₂`.
    pub residual: CertifiedReal,
    /// Index of the root cluster the pair was grown from.
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub pairs: Vec<ApproxEigenPair>,
    pub roots: RootSet,
    /// Smallest eigenvalue of the Gram matrix of the returned vectors.
    pub gram_min: f64,
    pub tau: f64,
    pub epsilon: f64,
    /// Some pair reached the requested residual. When false, `pairs` holds
    /// the single best attempt.
    pub success: bool,
}

/// Certified `‖A v − λ v‖₂`, evaluated in double-double.
pub fn certified_residual(a: &ComplexMatrix, lambda: Complex64, v: &[Complex64]) -> CertifiedReal {
    let n = a.n();
    let mut sum = DoubleDouble::ZERO;
    let mut worst: f64 = 0.0;
    let lam = DdComplex::new(lambda.re, lambda.im);
    for i in 0..n {
        let mut acc = DdComplex::default();
        let mut mag = 0.0;
        for j in 0..n {
            let aij = a.get(i, j);
            acc = acc + DdComplex::new(aij.re, aij.im) * DdComplex::new(v[j].re, v[j].im);
            mag += aij.norm() * v[j].norm();
        }
        acc = acc - lam * DdComplex::new(v[i].re, v[i].im);
        mag += lambda.norm() * v[i].norm();
        worst = worst.max(mag);
        sum = sum + acc.norm_sqr();
    }
    let norm = sum.sqrt().to_f64();
    // Each component is off by at most (4n + 8) dd roundings of its magnitude.
    let component = (4 * n + 8) as f64 * DD_U * worst * 1.5;
    let radius = (n as f64).sqrt() * component + 4.0 * U * norm + f64::from_bits(1);
    CertifiedReal::new(norm, radius.next_up()).expect("finite residual")
}

fn normalize(v: &mut [Complex64]) -> bool {
    let s = v.iter().fold(DoubleDouble::ZERO, |acc, z| acc + DdComplex::new(z.re, z.im).norm_sqr());
    let norm = s.sqrt().to_f64();
    if !(norm > 0.0 && norm.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    true
}

fn inverse_step(a: &DMatrix<Complex64>, shift: Complex64, v: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.nrows();
    let scale = shift.norm().max(a.norm()).max(1.0);
    let mut offset = 1e-13 * scale;
    for _ in 0..8 {
        let sigma = shift + Complex64::from_polar(offset, 0.7);
        let m = a - DMatrix::identity(n, n) * sigma;
        if let Some(x) = m.lu().solve(&DVector::from_column_slice(v)) {
            let mut x: Vec<Complex64> = x.iter().copied().collect();
            if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && normalize(&mut x) {
                return Some(x);
            }
        }
        offset *= 1e3;
    }
    None
}

fn rayleigh(a: &ComplexMatrix, v: &[Complex64]) -> Complex64 {
    a.mul_vec(v).iter().zip(v).map(|(av, vi)| vi.conj() * av).sum()
}

fn inverse_iteration(a: &ComplexMatrix, dm: &DMatrix<Complex64>, shift: Complex64, start: Vec<Complex64>) -> Option<(Complex64, Vec<Complex64>)> {
    let mut v = start;
    for _ in 0..3 {
        v = inverse_step(dm, shift, &v)?;
    }
    let mut lambda = rayleigh(a, &v);
    for _ in 0..2 {
        v = inverse_step(dm, lambda, &v)?;
        lambda = rayleigh(a, &v);
    }
    Some((lambda, v))
}

/// Smallest eigenvalue of the Gram matrix `V*V`.
pub fn gram_min_eigenvalue(vectors: &[Vec<Complex64>]) -> f64 {
    if vectors.is_empty() {
        return 1.0;
    }
    let k = vectors.len();
    let g = DMatrix::from_fn(k, k, |i, j| vectors[i].iter().zip(&vectors[j]).map(|(x, y)| x.conj() * y).sum::<Complex64>());
    SymmetricEigen::new(g).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn start_vector(n: usize, seed: u64, against: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    for w in against {
        let c: Complex64 = w.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
        v.iter_mut().zip(w).for_each(|(vi, wi)| *vi -= c * wi);
    }
    normalize(&mut v);
    v
}

pub fn approx_eigenpairs(a: &ComplexMatrix, eps: f64) -> Result<EigenDecomposition> {
    approx_eigenpairs_with_tau(a, eps, DEFAULT_TAU)
}

/// Inverse iteration from each root cluster, keeping vectors while the
/// Gram matrix stays above `tau` and the certified residual within `eps`.
pub fn approx_eigenpairs_with_tau(a: &ComplexMatrix, eps: f64, tau: f64) -> Result<EigenDecomposition> {
    positive("eigenpair accuracy", eps)?;
    positive("independence threshold", tau)?;
    let n = a.n();
    let roots = approx_roots(&char_poly(a), eps)?;
    let dm = a.to_dmatrix();

    // Candidates per cluster; attempt t of a cluster starts orthogonal to the
    // cluster's earlier attempts.
    let candidates: Vec<Vec<(Complex64, Vec<Complex64>, CertifiedReal)>> = roots
        .clusters
        .par_iter()
        .enumerate()
        .map(|(ci, cluster)| {
            let mut found: Vec<(Complex64, Vec<Complex64>, CertifiedReal)> = Vec::new();
            for t in 0..cluster.multiplicity() {
                let prior: Vec<Vec<Complex64>> = found.iter().map(|f| f.1.clone()).collect();
                let start = start_vector(n, (ci as u64) << 16 | t as u64, &prior);
                if let Some((lambda, v)) = inverse_iteration(a, &dm, cluster.center, start) {
                    let r = certified_residual(a, lambda, &v);
                    found.push((lambda, v, r));
                }
            }
            found
        })
        .collect();

    let mut pairs: Vec<ApproxEigenPair> = Vec::new();
    let mut best: Option<ApproxEigenPair> = None;
    for (ci, found) in candidates.into_iter().enumerate() {
        for (lambda, vector, residual) in found {
            let pair = ApproxEigenPair { lambda, vector, residual, cluster: ci };
            if best.as_ref().is_none_or(|b| residual.hi() < b.residual.hi()) {
                best = Some(pair.clone());
            }
            if residual.hi() > eps {
                continue;
            }
            let mut vs: Vec<Vec<Complex64>> = pairs.iter().map(|p| p.vector.clone()).collect();
            vs.push(pair.vector.clone());
            if gram_min_eigenvalue(&vs) >= tau {
                pairs.push(pair);
            }
        }
    }
    let success = !pairs.is_empty();
    if !success {
        pairs.extend(best);
    }
    let gram_min = gram_min_eigenvalue(&pairs.iter().map(|p| p.vector.clone()).collect::<Vec<_>>());
    Ok(EigenDecomposition { pairs, roots, gram_min, tau, epsilon: eps, success })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Undecided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    /// Encloses `max_i Re λ_i`.
    pub margin: CertifiedReal,
    pub epsilon_used: f64,
    pub roots: RootSet,
}

/// Hurwitz test on the certified root clusters of the characteristic
/// polynomial, each widened to at least `eps`.
pub fn hurwitz_verdict(a: &ComplexMatrix, eps: f64) -> Result<StabilityVerdict> {
    positive("verdict resolution", eps)?;
    let roots = approx_roots(&char_poly(a), eps)?;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in &roots.clusters {
        let r = c.radius.max(eps);
        lo = lo.max((c.center.re - r).next_down());
        hi = hi.max((c.center.re + r).next_up());
    }
    let verdict = if hi < 0.0 {
        Verdict::Stable
    } else if lo > 0.0 {
        Verdict::Unstable
    } else {
        Verdict::Undecided
    };
    let mid = lo / 2.0 + hi / 2.0;
    let rad = (hi - mid).max(mid - lo).next_up();
    let margin = CertifiedReal::new(mid, rad)?;
    Ok(StabilityVerdict { verdict, margin, epsilon_used: eps, roots })
}
