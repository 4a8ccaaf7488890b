use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{positive, Error, Result};

const U: f64 = f64::EPSILON / 2.0;
const MAX_ITERATIONS: usize = 2000;

fn gamma(m: usize) -> f64 {
    let mu = m as f64 * U;
    mu / (1.0 - mu) * (1.0 + 4.0 * U)
}

fn up(x: f64) -> f64 {
    (x * (1.0 + 4.0 * U)).next_up()
}

/// Monic polynomial `Σ c_i λ^i` (`c_n = 1`), each coefficient known to
/// within `radii[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<Complex64>,
    pub radii: Vec<f64>,
}

impl Polynomial {
    /// From ascending coefficients; the leading one is normalized to 1.
    pub fn monic(coeffs: Vec<Complex64>) -> Result<Self> {
        let lead = *coeffs.last().ok_or_else(|| Error::Argument("empty coefficient list".into()))?;
        if coeffs.len() < 2 || lead == Complex64::new(0.0, 0.0) {
            return Err(Error::Argument("polynomial must have degree at least 1".into()));
        }
        if lead != Complex64::new(1.0, 0.0) {
            return Err(Error::Argument("polynomial must be monic".into()));
        }
        let radii = vec![0.0; coeffs.len()];
        Ok(Self { coeffs, radii })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::monic(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `(p(z), p'(z))` by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_with_derivative(z).0
    }

    /// Bound on `|p̂(z) − p̃(z)|` for the Horner value `p̂` and any `p̃`
    /// whose coefficients lie within the radii.
    pub fn eval_error(&self, z: Complex64) -> f64 {
        let r = z.norm();
        let (mut s, mut e, mut pow) = (0.0, 0.0, 1.0);
        for (c, rad) in self.coeffs.iter().zip(&self.radii) {
            s += c.norm() * pow;
            e += rad * pow;
            pow *= r;
        }
        up(gamma(2 * self.degree() + 6) * up(s) + up(e))
    }

    /// Every root has modulus at most this (Fujiwara).
    pub fn root_bound(&self) -> f64 {
        let n = self.degree();
        let mut m: f64 = 0.0;
        for k in 1..=n {
            let c = self.coeffs[n - k].norm() + self.radii[n - k];
            let c = if k == n { c / 2.0 } else { c };
            m = m.max(c.powf(1.0 / k as f64));
        }
        up(2.0 * m)
    }
}

/// Coefficients of `det(λI − A)` by the Faddeev–LeVerrier recursion, with
/// a forward rounding-error bound on each.
pub fn char_poly(a: &ComplexMatrix) -> Polynomial {
    let n = a.n();
    let an = a.norm_inf();
    let g = gamma(n + 6);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut radii = vec![0.0; n + 1];
    coeffs[n] = Complex64::new(1.0, 0.0);
    let mut m = ComplexMatrix::new(n, vec![Complex64::new(0.0, 0.0); n * n]).expect("square zero matrix");
    let mut m_norm = 0.0;
    let mut m_err: f64 = 0.0;
    for k in 1..=n {
        let c = coeffs[n - k + 1];
        let mut next = a.mul(&m);
        let mut data = next.entries().to_vec();
        for i in 0..n {
            data[i * n + i] += c;
        }
        next = ComplexMatrix::new(n, data).expect("finite entries");
        let next_norm = next.norm_inf();
        m_err = up(an * m_err + g * up(an * m_norm + c.norm()) + radii[n - k + 1] + U * next_norm);
        m = next;
        m_norm = next_norm;
        let am = a.mul(&m);
        let trace: Complex64 = (0..n).map(|i| am.get(i, i)).sum();
        let ck = -trace / k as f64;
        coeffs[n - k] = ck;
        let trace_err = up(n as f64 * an * m_err + g * n as f64 * an * m_norm);
        radii[n - k] = up(trace_err / k as f64 + 2.0 * U * ck.norm());
    }
    Polynomial { coeffs, radii }
}

/// A connected component of root inclusion disks: it holds exactly
/// `members.len()` roots, all within `radius` of `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: Complex64,
    pub radius: f64,
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// `n·|W_j|` inclusion radii around each approximation.
    pub radii: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Every cluster radius is within the requested accuracy.
    pub converged: bool,
    pub iterations: usize,
}

impl RootSet {
    pub fn max_cluster_radius(&self) -> f64 {
        self.clusters.iter().map(|c| c.radius).fold(0.0, f64::max)
    }
}

fn aberth(p: &Polynomial) -> (Vec<Complex64>, usize) {
    let n = p.degree();
    let center = -p.coeffs[n - 1] / n as f64;
    let spread = p.root_bound().max(center.norm()).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|j| center + Complex64::from_polar(spread, 2.0 * std::f64::consts::PI * j as f64 / n as f64 + 0.4))
        .collect();
    let mut quiet = 0;
    for it in 0..MAX_ITERATIONS {
        let mut biggest: f64 = 0.0;
        for j in 0..n {
            let (v, dv) = p.eval_with_derivative(z[j]);
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            let w = v / dv;
            let s: Complex64 = (0..n).filter(|&k| k != j).map(|k| (z[j] - z[k]).inv()).sum();
            let step = w / (Complex64::new(1.0, 0.0) - w * s);
            if step.re.is_finite() && step.im.is_finite() {
                z[j] -= step;
                biggest = biggest.max(step.norm() / z[j].norm().max(1.0));
            }
        }
        if biggest <= 4.0 * f64::EPSILON {
            quiet += 1;
            if quiet >= 3 {
                return (z, it + 1);
            }
        } else {
            quiet = 0;
        }
    }
    (z, MAX_ITERATIONS)
}

fn inclusion_radii(p: &Polynomial, z: &[Complex64]) -> Vec<f64> {
    let n = z.len();
    (0..n)
        .map(|j| {
            let num = up(p.eval(z[j]).norm() + p.eval_error(z[j]));
            let den = (0..n).filter(|&k| k != j).map(|k| (z[j] - z[k]).norm()).product::<f64>()
                * (1.0 - 4.0 * n as f64 * U);
            if num == 0.0 {
                0.0
            } else if den > 0.0 {
                up(n as f64 * up(num / den))
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

fn clusters(z: &[Complex64], radii: &[f64], fallback: f64) -> Vec<Cluster> {
    let n = z.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for j in 0..n {
        for k in j + 1..n {
            if (z[j] - z[k]).norm() <= up(radii[j] + radii[k]) {
                let (a, b) = (find(&mut parent, j), find(&mut parent, k));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for j in 0..n {
        let r = find(&mut parent, j);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(j);
    }
    groups
        .into_iter()
        .map(|members| {
            if members.iter().any(|&j| !radii[j].is_finite()) {
                return Cluster { center: Complex64::new(0.0, 0.0), radius: fallback, members };
            }
            let center = members.iter().map(|&j| z[j]).sum::<Complex64>() / members.len() as f64;
            let radius = members.iter().map(|&j| up((z[j] - center).norm() + radii[j])).fold(0.0, f64::max);
            Cluster { center, radius: up(radius), members }
        })
        .collect()
}

/// Simultaneous (Aberth) iteration with Weierstrass inclusion disks.
///
/// Disks `|z − z_j| ≤ n|p(z_j)/Π_{k≠j}(z_j − z_k)|` cover all roots, and a
/// connected union of `m` disks holds exactly `m` roots; this stays true
/// for every polynomial within the coefficient radii. Roots that cannot be
/// separated at working precision come back as a cluster, and `converged`
/// is false when some cluster is wider than `eps`.
pub fn approx_roots(p: &Polynomial, eps: f64) -> Result<RootSet> {
    positive("root accuracy", eps)?;
    if p.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Argument("coefficients must be finite".into()));
    }
    let (roots, iterations) = aberth(p);
    let radii = inclusion_radii(p, &roots);
    let clusters = clusters(&roots, &radii, p.root_bound());
    let converged = clusters.iter().all(|c| c.radius <= eps);
    Ok(RootSet { roots, radii, clusters, converged, iterations })
}
