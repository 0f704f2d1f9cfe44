//! Arbitrary-precision cocycle products.
//!
//! `sigma^2 / |M|^2` decays like `exp(-2 (lambda_1 - lambda_2) n)` along an
//! orbit, so for three or more balls double precision loses `sigma` after a
//! few hundred events. Products are therefore accumulated with a working
//! precision chosen from the expected growth.

use dashu_float::FBig;
use serde::{Deserialize, Serialize};

use super::jacobian::CollisionJacobian;
use super::orbit::JacobianStream;
use super::Cocycle;
use crate::error::{Error, Result};
use crate::sim::{BallState, CollisionKind, MassConfig};

type F = FBig;

/// Extra bits on top of the expected cancellation.
const GUARD_BITS: usize = 160;

fn big(x: f64, prec: usize) -> F {
    F::try_from(x).expect("finite coefficient").with_precision(prec).value()
}

fn ln_abs(x: &F) -> f64 {
    if *x == F::ZERO {
        return f64::NEG_INFINITY;
    }
    let x = if *x < F::ZERO { -x.clone() } else { x.clone() };
    x.with_precision(64).value().ln().to_f64().value()
}

fn abs(x: &F) -> F {
    if *x < F::ZERO {
        -x.clone()
    } else {
        x.clone()
    }
}

/// Cocycle product with a fixed working precision (bits).
#[derive(Debug, Clone)]
pub struct PreciseCocycle {
    dim: usize,
    prec: usize,
    /// Row-major `2d x 2d`.
    m: Vec<F>,
    n: usize,
}

impl PreciseCocycle {
    pub fn identity(dim: usize, prec: usize) -> Self {
        let r = 2 * dim;
        let m = (0..r * r)
            .map(|k| big(if k / r == k % r { 1.0 } else { 0.0 }, prec))
            .collect();
        PreciseCocycle { dim, prec, m, n: 0 }
    }

    /// Working precision sufficient for `sigma` of a product whose entries
    /// grow to about `exp(log_norm)`.
    pub fn precision_for(log_norm: f64) -> usize {
        (2.0 * log_norm.max(0.0) / std::f64::consts::LN_2).ceil() as usize + GUARD_BITS
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    fn at(&self, r: usize, c: usize) -> &F {
        &self.m[r * 2 * self.dim + c]
    }

    /// Left-multiply by one collision derivative.
    pub fn push(&mut self, jac: &CollisionJacobian) {
        let d = self.dim;
        let r2 = 2 * d;
        let p = self.prec;
        let coeff = big(jac.coeff, p);
        match jac.kind {
            CollisionKind::Floor => {
                for c in 0..r2 {
                    let add = &coeff * &self.m[c];
                    self.m[d * r2 + c] += add;
                }
            }
            CollisionKind::Pair(i) => {
                let r = i - 1;
                let g = big(jac.gamma, p);
                let one = big(1.0, p);
                let lo = &one - &g;
                let hi = &one + &g;
                for c in 0..r2 {
                    let x = |row: usize| &self.m[row * r2 + c];
                    let mut row = -x(r).clone() - &coeff * x(d + r);
                    if r > 0 {
                        row += &lo * x(r - 1);
                    }
                    if r + 1 < d {
                        row += &hi * x(r + 1);
                    }
                    let e = x(d + r).clone();
                    self.m[r * r2 + c] = row;
                    self.m[(d + r) * r2 + c] = -e.clone();
                    if r > 0 {
                        self.m[(d + r - 1) * r2 + c] += &lo * &e;
                    }
                    if r + 1 < d {
                        self.m[(d + r + 1) * r2 + c] += &hi * &e;
                    }
                }
            }
        }
        self.n += 1;
    }

    /// Rounded to double precision.
    pub fn to_cocycle(&self) -> Cocycle {
        let r2 = 2 * self.dim;
        let log_big = self.m.iter().map(ln_abs).fold(f64::NEG_INFINITY, f64::max);
        let shift = big(-log_big, 64).exp();
        let vals: Vec<f64> = self.m.iter().map(|x| (x * &shift).to_f64().value()).collect();
        Cocycle::from_parts(nalgebra::DMatrix::from_row_slice(r2, r2, &vals), log_big, self.n)
    }

    /// `(2 M^T G M)` with `v^T G v = <dxi, deta>`.
    fn two_s(&self) -> Vec<F> {
        let d = self.dim;
        let r2 = 2 * d;
        let mut s = vec![big(0.0, self.prec); r2 * r2];
        for a in 0..r2 {
            for b in a..r2 {
                let mut acc = big(0.0, self.prec);
                for k in 0..d {
                    acc += self.at(k, a) * self.at(d + k, b) + self.at(d + k, a) * self.at(k, b);
                }
                s[b * r2 + a] = acc.clone();
                s[a * r2 + b] = acc;
            }
        }
        s
    }

    /// `M^T G M - kappa G` is positive semidefinite exactly for `kappa` in
    /// `[sup_{Q<0} ratio, inf_{Q>0} ratio]`, an interval containing `1` for
    /// monotone products.
    fn feasibility(&self) -> impl Fn(f64) -> bool + '_ {
        let d = self.dim;
        let r2 = 2 * d;
        let s = self.two_s();
        let scale = s.iter().map(abs).fold(big(0.0, self.prec), |a, b| if b > a { b } else { a });
        let tol_bits = self.prec.saturating_sub(GUARD_BITS / 2) as f64;
        let tol = &scale * big((-tol_bits).exp2(), 64);
        move |ln_kappa: f64| -> bool {
            let kappa = big(ln_kappa, 64).exp().with_precision(self.prec).value();
            let mut a = s.clone();
            for k in 0..d {
                a[k * r2 + d + k] -= &kappa;
                a[(d + k) * r2 + k] -= &kappa;
            }
            psd(&mut a, r2, &tol)
        }
    }

    /// `ln Q(Mv) / Q(v)` at `v = (1, .., 1, s, .., s)`, `None` if the ratio is not positive.
    fn log_ratio_at(&self, s: f64) -> Option<f64> {
        let d = self.dim;
        let r2 = 2 * d;
        let p = self.prec;
        let v: Vec<F> = (0..r2).map(|k| big(if k < d { 1.0 } else { s }, p)).collect();
        let mv: Vec<F> = (0..r2)
            .map(|r| (0..r2).fold(big(0.0, p), |acc, c| acc + self.at(r, c) * &v[c]))
            .collect();
        let q = (0..d).fold(big(0.0, p), |acc, k| acc + &mv[k] * &mv[d + k]);
        ((q > F::ZERO) == (s > 0.0)).then(|| ln_abs(&q) - (d as f64).ln())
    }

    /// `ln sigma` of the product, to relative accuracy `rel_tol` in `sigma^2`.
    ///
    /// `sigma^2` is the largest `kappa` with `M^T G M - kappa G` positive
    /// semidefinite; it is bracketed between `1` (monotone factors) and the
    /// ratio at the all-ones vector and located by bisection on `ln kappa`.
    pub fn log_sigma(&self, rel_tol: f64) -> Result<f64> {
        let feasible = self.feasibility();
        if !feasible(0.0) {
            return Err(Error::NotMonotone { deficit: f64::NAN });
        }
        let mut hi = match self.log_ratio_at(1.0) {
            Some(h) => h,
            None => return Err(Error::NotMonotone { deficit: f64::NAN }),
        };
        if feasible(hi) {
            return Ok(0.5 * hi);
        }
        let mut lo = 0.0;
        while hi - lo > rel_tol {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.25 * (lo + hi))
    }

    /// `ln sigma'` of the inverse product on the complementary cone `Q < 0`.
    ///
    /// By congruence with `M`, `sigma'^2 = 1 / sup_{Q<0} Q(Mv)/Q(v)`, the
    /// reciprocal of the lower end of the feasible interval.
    pub fn log_sigma_prime(&self, rel_tol: f64) -> Result<f64> {
        let feasible = self.feasibility();
        if !feasible(0.0) {
            return Err(Error::NotMonotone { deficit: f64::NAN });
        }
        // the ratio at a Q < 0 vector is a lower bound for the lower end
        let mut lo = match self.log_ratio_at(-1.0) {
            Some(r) if r < 0.0 => r,
            _ => -1.0,
        };
        if feasible(lo) {
            if self.log_ratio_at(-1.0) == Some(lo) {
                return Ok(-0.5 * lo);
            }
            while feasible(lo) {
                lo *= 2.0;
                if lo < -1e6 {
                    return Ok(f64::INFINITY);
                }
            }
        }
        let mut hi = 0.0;
        while hi - lo > rel_tol {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(-0.25 * (lo + hi))
    }
}

/// Positive semidefiniteness of the symmetric `n x n` row-major matrix `a`
/// (destroyed), by diagonally pivoted elimination with absolute tolerance `tol`.
fn psd(a: &mut [F], n: usize, tol: &F) -> bool {
    let mut idx: Vec<usize> = (0..n).collect();
    let neg_tol = -tol.clone();
    for step in 0..n {
        let rest = &idx[step..];
        let (pos, &p) = rest
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1 * n + *x.1].partial_cmp(&a[*y.1 * n + *y.1]).unwrap())
            .unwrap();
        let piv = a[p * n + p].clone();
        if piv < neg_tol {
            return false;
        }
        if piv <= *tol {
            // every remaining diagonal is ~0: PSD only if the block vanishes
            return rest.iter().all(|&i| rest.iter().all(|&j| abs(&a[i * n + j]) <= *tol));
        }
        idx.swap(step, step + pos);
        for &i in &idx[step + 1..] {
            let f = &a[i * n + p] / &piv;
            for &j in &idx[step + 1..] {
                let sub = &f * &a[p * n + j];
                a[i * n + j] -= sub;
            }
        }
    }
    true
}

/// `ln sigma` of the cocycle after each of the first events of an orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTrace {
    pub log_sigma: Vec<f64>,
    pub precision: usize,
}

/// `ln sigma(d_x T^n)` for `n = 1..=events` along the orbit of `state`.
pub fn sigma_trace(cfg: &MassConfig, state: &BallState, events: usize, rel_tol: f64) -> Result<SigmaTrace> {
    let jacs: Vec<CollisionJacobian> = JacobianStream::new(cfg, state.clone())?
        .take(events)
        .map(|r| r.map(|(_, j)| j))
        .collect::<Result<_>>()?;
    let mut probe = Cocycle::identity(cfg.n() - 1);
    for j in &jacs {
        probe.push(j);
    }
    let log_norm = probe.log_scale() + probe.normalized().amax().ln();
    let prec = PreciseCocycle::precision_for(log_norm);
    let mut c = PreciseCocycle::identity(cfg.n() - 1, prec);
    let mut out = Vec::with_capacity(jacs.len());
    for j in &jacs {
        c.push(j);
        out.push(c.log_sigma(rel_tol)?);
    }
    Ok(SigmaTrace {
        log_sigma: out,
        precision: prec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::sample_state;
    use crate::tangent::sigma_of_cocycle;

    #[test]
    fn matches_double_precision_on_short_products() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s0 = sample_state(&cfg, 4).unwrap();
        let mut c = Cocycle::identity(2);
        let mut p = PreciseCocycle::identity(2, 256);
        for r in JacobianStream::new(&cfg, s0).unwrap().take(30) {
            let (_, j) = r.unwrap();
            c.push(&j);
            p.push(&j);
            let a = sigma_of_cocycle(&c, 16, 1e-13, 0).unwrap().log_value;
            let b = p.log_sigma(1e-12).unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        let back = p.to_cocycle();
        let diff = (back.normalized() * (back.log_scale()).exp() - c.matrix()).amax();
        assert!(diff <= 1e-12 * c.matrix().amax());
    }

    #[test]
    fn prime_matches_double_precision() {
        use crate::tangent::sigma_prime_estimate;
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s0 = sample_state(&cfg, 6).unwrap();
        let mut c = Cocycle::identity(2);
        let mut p = PreciseCocycle::identity(2, 256);
        for r in JacobianStream::new(&cfg, s0).unwrap().take(20) {
            let (_, j) = r.unwrap();
            c.push(&j);
            p.push(&j);
            let a = sigma_prime_estimate(&c.matrix(), 16, 1e-13, 0).unwrap().log_value;
            let b = p.log_sigma_prime(1e-12).unwrap();
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn two_ball_closed_form() {
        let cfg = MassConfig::new(&[2.0, 1.0], 1.0).unwrap();
        let s0 = sample_state(&cfg, 1).unwrap();
        let mut c = Cocycle::identity(1);
        let mut p = PreciseCocycle::identity(1, 512);
        for r in JacobianStream::new(&cfg, s0).unwrap().take(300) {
            let (_, j) = r.unwrap();
            c.push(&j);
            p.push(&j);
        }
        let a = sigma_of_cocycle(&c, 0, 1e-13, 0).unwrap().log_value;
        let b = p.log_sigma(1e-13).unwrap();
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn precision_doubling_is_stable() {
        let cfg = MassConfig::new(&[3.0, 2.0, 1.0], 6.0).unwrap();
        let s0 = sample_state(&cfg, 2).unwrap();
        let jacs: Vec<_> = JacobianStream::new(&cfg, s0).unwrap().take(400).map(|r| r.unwrap().1).collect();
        let mut probe = Cocycle::identity(2);
        jacs.iter().for_each(|j| probe.push(j));
        let prec = PreciseCocycle::precision_for(probe.log_scale() + probe.normalized().amax().ln());
        let run = |prec| {
            let mut p = PreciseCocycle::identity(2, prec);
            jacs.iter().for_each(|j| p.push(j));
            p.log_sigma(1e-12).unwrap()
        };
        let (a, b) = (run(prec), run(2 * prec));
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }
}
