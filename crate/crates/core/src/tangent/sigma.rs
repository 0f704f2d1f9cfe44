use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cocycle::Cocycle;
use super::cone::{sample_cone_vector, ConePart};
use super::jacobian::symplectic_inverse;
use crate::error::{Error, Result};
use crate::sim::rng_from_seed;

/// Default number of descent starts.
pub const DEFAULT_STARTS: usize = 64;
const DESCENT_ITERS: usize = 200;
const MONOTONE_SAMPLES: usize = 256;
const DESCENT_MIN_Q: f64 = 1e-9;

/// Estimator report for the least expansion coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    pub value: f64,
    /// `ln(value)`, finite even when `value` overflows.
    pub log_value: f64,
    /// Unit vector of the (closed) cone whose ratio equals `value`, or the
    /// boundary direction along which it is approached.
    pub attaining_witness: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
    pub n: usize,
    /// Smallest ratio found by projective descent and boundary pencils.
    pub descent_value: f64,
    /// Value certified by the semidefinite characterization.
    pub certified_value: f64,
}

/// `G` with `v^T G v = sign * <dxi, deta>`.
fn form(dim2: usize, sign: f64) -> DMatrix<f64> {
    let d = dim2 / 2;
    let mut g = DMatrix::zeros(dim2, dim2);
    for k in 0..d {
        g[(k, d + k)] = 0.5 * sign;
        g[(d + k, k)] = 0.5 * sign;
    }
    g
}

fn quad(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(g * v))
}

fn lambda_min(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let k = eig.eigenvalues.imin();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Everything needed to evaluate `Q(Mv) / Q(v)` for one matrix and form.
struct Problem {
    m: DMatrix<f64>,
    g: DMatrix<f64>,
    /// `sym(M^T G M)`.
    s: DMatrix<f64>,
}

impl Problem {
    fn new(m: DMatrix<f64>, sign: f64) -> Self {
        let g = form(m.nrows(), sign);
        let s = m.transpose() * &g * &m;
        let s = (&s + s.transpose()) * 0.5;
        Problem { m, g, s }
    }

    fn ratio(&self, v: &DVector<f64>) -> f64 {
        quad(&self.s, v) / quad(&self.g, v)
    }

    /// Infimum of the ratio along `b + t w`, `t > 0`, for a boundary vector `b`
    /// and its partner `w` (halves swapped) with `Q(b + t w) = t |b|^2`.
    fn pencil(&self, b: &DVector<f64>) -> (f64, DVector<f64>) {
        let d = b.len() / 2;
        let w = DVector::from_iterator(2 * d, b.rows(d, d).iter().chain(b.rows(0, d).iter()).copied());
        let w = w * self.g[(0, d)].signum();
        let q = b.norm_squared();
        let a = quad(&self.s, b) / q;
        let cross = 2.0 * b.dot(&(&self.s * &w)) / q;
        let c = quad(&self.s, &w) / q;
        if a <= 0.0 || c <= 0.0 {
            // the infimum is approached as t -> 0 (a = 0) or t -> inf (c = 0)
            let dir = if a <= 0.0 { b.clone() } else { w.clone() };
            return (cross + 2.0 * (a.max(0.0) * c.max(0.0)).sqrt(), dir);
        }
        let t = (a / c).sqrt();
        let v = b + &w * t;
        (cross + 2.0 * (a * c).sqrt(), v)
    }

    /// Minimizes the ratio from `v` by backtracking gradient steps on the
    /// sphere, staying inside the open cone.
    fn descend(&self, mut v: DVector<f64>) -> (f64, DVector<f64>) {
        v.normalize_mut();
        let mut f = self.ratio(&v);
        let mut step = 0.1;
        for _ in 0..DESCENT_ITERS {
            let q = quad(&self.g, &v);
            let grad = (&self.s * &v - &self.g * &v * f) * (2.0 / q);
            let grad = &grad - &v * v.dot(&grad);
            let gn = grad.norm();
            if !(gn > 1e-15 * f.abs().max(1.0)) {
                break;
            }
            let mut improved = false;
            while step > 1e-14 {
                let mut trial = &v - &grad * (step / gn);
                trial.normalize_mut();
                // near the boundary the quotient is rounding noise; pencils cover it
                if quad(&self.g, &trial) > DESCENT_MIN_Q {
                    let ft = self.ratio(&trial);
                    if ft < f {
                        v = trial;
                        f = ft;
                        step *= 2.0;
                        improved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (f, v)
    }

    /// Largest `kappa` with `S - kappa G` positive semidefinite, searched
    /// below `hi`. Returns `None` if no such `kappa` is found.
    fn certified(&self, hi: f64, tol: f64) -> Option<(f64, DVector<f64>)> {
        let tol = tol * self.s.amax().max(1e-300);
        let lmin = |k: f64| lambda_min(&(&self.s - &self.g * k)).0;
        if lmin(hi) >= -tol {
            return Some((hi, lambda_min(&(&self.s - &self.g * hi)).1));
        }
        // lambda_min(S - k G) is concave in k: locate its maximum first
        let (mut a, mut b) = (0.0f64, hi);
        if lmin(a) < -tol {
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - phi * (b - a);
            let mut x2 = a + phi * (b - a);
            let (mut f1, mut f2) = (lmin(x1), lmin(x2));
            for _ in 0..200 {
                if f1.max(f2) >= -tol || b - a <= 1e-16 * hi {
                    break;
                }
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = lmin(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = lmin(x1);
                }
            }
            let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            if fx < -tol {
                return None;
            }
            a = x;
        }
        let mut b = hi;
        for _ in 0..200 {
            if b - a <= 1e-15 * b.abs().max(1e-300) {
                break;
            }
            let mid = 0.5 * (a + b);
            if lmin(mid) >= -tol {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some((a, lambda_min(&(&self.s - &self.g * a)).1))
    }
}

fn check_monotone<R: Rng>(p: &Problem, rng: &mut R, tol: f64) -> Result<()> {
    let dim = p.m.nrows() / 2;
    let sign = p.g[(0, dim)].signum();
    for k in 0..MONOTONE_SAMPLES {
        let part = if k % 2 == 0 { ConePart::Interior } else { ConePart::Boundary };
        let mut u = sample_cone_vector(rng, dim, part);
        if sign < 0.0 {
            u.dxi.iter_mut().for_each(|x| *x = -*x);
        }
        let v = u.to_dvector();
        let deficit = quad(&p.s, &v) - quad(&p.g, &v);
        if deficit < -tol * p.s.amax().max(1.0) {
            return Err(Error::NotMonotone { deficit });
        }
    }
    Ok(())
}

fn boundary_mesh(dim: usize) -> Vec<DVector<f64>> {
    let n = 2 * dim;
    let unit = |k: usize| DVector::from_fn(n, |r, _| if r == k { 1.0 } else { 0.0 });
    let mut out: Vec<DVector<f64>> = (0..n).map(unit).collect();
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                for s in [1.0, -1.0] {
                    out.push((unit(i) + unit(dim + j) * s) / 2f64.sqrt());
                }
            }
        }
    }
    out
}

fn estimate(m: &DMatrix<f64>, sign: f64, log_shift: f64, budget: usize, tol: f64, seed: u64, n: usize) -> Result<SigmaReport> {
    let rows = m.nrows();
    if rows == 0 || rows % 2 != 0 || m.ncols() != rows {
        return Err(Error::InvalidArgument(format!("sigma needs an even square matrix, got {}x{}", rows, m.ncols())));
    }
    let dim = rows / 2;
    let big = m.amax();
    if !(big > 0.0) || !big.is_finite() {
        return Err(Error::InvalidArgument("matrix has no finite nonzero entry".into()));
    }
    let p = Problem::new(m / big, sign);
    let mut rng = rng_from_seed(seed);
    // monotonicity is checked on the unnormalized scale
    let full = Problem::new(m.clone(), sign);
    if log_shift == 0.0 {
        check_monotone(&full, &mut rng, tol)?;
    }

    let mut best = (f64::INFINITY, DVector::zeros(rows));
    let mut consider = |cand: (f64, DVector<f64>)| {
        if cand.0 < best.0 {
            best = cand;
        }
    };
    for b in boundary_mesh(dim) {
        let b = if sign < 0.0 { flip(&b, dim) } else { b };
        consider(p.pencil(&b));
    }
    for k in 0..budget {
        let part = if k % 2 == 0 { ConePart::Interior } else { ConePart::Boundary };
        let u = sample_cone_vector(&mut rng, dim, part);
        let v = if sign < 0.0 { flip(&u.to_dvector(), dim) } else { u.to_dvector() };
        match part {
            ConePart::Interior => consider(p.descend(v)),
            ConePart::Boundary => consider(p.pencil(&v)),
        }
    }
    let descent = best.0;

    let mut value = descent;
    let mut witness = best.1.clone();
    let certified = p.certified(descent, tol);
    if let Some((kappa, null)) = &certified {
        if *kappa < value {
            value = *kappa;
            // the null vector attains the value when it lies in the open cone
            if quad(&p.g, null) > 0.0 {
                witness = null.clone();
            }
        }
    }
    let certified = certified.map(|x| x.0).unwrap_or(f64::NAN);
    let log_big = big.ln() + log_shift;
    let log_value = log_big + 0.5 * value.max(0.0).ln();
    let norm = witness.norm();
    if norm > 0.0 {
        witness /= norm;
    }
    Ok(SigmaReport {
        value: log_value.exp(),
        log_value,
        attaining_witness: witness.as_slice().to_vec(),
        budget,
        seed,
        n,
        descent_value: (log_big + 0.5 * descent.max(0.0).ln()).exp(),
        certified_value: (log_big + 0.5 * certified.max(0.0).ln()).exp(),
    })
}

/// `(dxi, deta) -> (-dxi, deta)`, mapping `C` onto `C'`.
fn flip(v: &DVector<f64>, dim: usize) -> DVector<f64> {
    let mut out = v.clone();
    out.rows_mut(0, dim).iter_mut().for_each(|x| *x = -*x);
    out
}

/// `sigma(M) = inf_{Q(v) > 0} sqrt(Q(Mv) / Q(v))`.
///
/// Multi-start projective descent over the cone interior, exact pencil
/// minimization along boundary directions, and a semidefinite certificate
/// (`sigma^2` is the largest `kappa` with `M^T G M - kappa G >= 0`); the
/// reported value is the smallest of these.
pub fn sigma_estimate(m: &DMatrix<f64>, budget: usize, tol: f64, seed: u64) -> Result<SigmaReport> {
    estimate(m, 1.0, 0.0, budget, tol, seed, 0)
}

/// Least expansion of `M^{-1}` on the complementary cone `Q < 0`.
pub fn sigma_prime_estimate(m: &DMatrix<f64>, budget: usize, tol: f64, seed: u64) -> Result<SigmaReport> {
    estimate(&symplectic_inverse(m), -1.0, 0.0, budget, tol, seed, 0)
}

/// [`sigma_estimate`] of a (possibly very long) cocycle, using its scaled
/// representation. Monotonicity of the factors is assumed.
pub fn sigma_of_cocycle(c: &Cocycle, budget: usize, tol: f64, seed: u64) -> Result<SigmaReport> {
    if c.dim() == 1 {
        return Ok(sigma_two_by_two(c, seed));
    }
    estimate(c.normalized(), 1.0, c.log_scale(), budget, tol, seed, c.n())
}

/// Closed form for `2x2` monotone matrices: `sigma = sqrt(ad) + sqrt(bc)`.
fn sigma_two_by_two(c: &Cocycle, seed: u64) -> SigmaReport {
    let m = c.normalized();
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let s = (a * d).max(0.0).sqrt() + (b * cc).max(0.0).sqrt();
    let log_value = s.ln() + c.log_scale();
    // minimizer ratio x / y = sqrt(bd / ac)
    let (x, y) = if a * cc > 0.0 && b * d > 0.0 {
        ((b * d).abs().sqrt(), (a * cc).abs().sqrt())
    } else if a * cc == 0.0 {
        (0.0, 1.0)
    } else {
        (1.0, 0.0)
    };
    let n = (x * x + y * y).sqrt();
    SigmaReport {
        value: log_value.exp(),
        log_value,
        attaining_witness: vec![x / n, y / n],
        budget: 0,
        seed,
        n: c.n(),
        descent_value: f64::NAN,
        certified_value: log_value.exp(),
    }
}
