//! Dense complex polynomials with coefficients in ascending order.

use nalgebra::Schur;

use crate::error::{Result, SzegoError};
use crate::hankel::CMat;
use crate::hardy::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub fn eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// Value and derivative at `z`.
pub fn eval_with_derivative(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(ZERO) + b.get(i).copied().unwrap_or(ZERO)).collect()
}

pub fn scale(a: &[C64], c: C64) -> Vec<C64> {
    a.iter().map(|x| x * c).collect()
}

/// Degree after dropping trailing coefficients with modulus `≤ tol·max|c|`.
pub fn effective_degree(coeffs: &[C64], tol: f64) -> usize {
    let big = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    coeffs.iter().rposition(|c| c.norm() > tol * big).unwrap_or(0)
}

/// `∏ (1 − p_j z)`.
pub fn from_reciprocal_roots(poles: &[C64]) -> Vec<C64> {
    poles.iter().fold(vec![ONE], |acc, &p| mul(&acc, &[ONE, -p]))
}

/// `∏ (z − r_j)`.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    roots.iter().fold(vec![ONE], |acc, &r| mul(&acc, &[-r, ONE]))
}

/// Roots of `Σ c_k z^k` from the eigenvalues of the companion matrix,
/// each polished by a few Newton steps on the original polynomial.
pub fn roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let deg = effective_degree(coeffs, 0.0);
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = coeffs[deg];
    let mut companion = CMat::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 0)
        .ok_or_else(|| SzegoError::Eigensolver("companion Schur decomposition did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut out: Vec<C64> = (0..deg).map(|i| t[(i, i)]).collect();
    for r in out.iter_mut() {
        *r = polish(&coeffs[..=deg], *r);
    }
    Ok(out)
}

fn polish(coeffs: &[C64], mut z: C64) -> C64 {
    let mut best = eval(coeffs, z).norm();
    for _ in 0..8 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 || p.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let val = eval(coeffs, next).norm();
        if !(val < best) {
            break;
        }
        z = next;
        best = val;
    }
    z
}

/// Taylor coefficients of `A/B` up to order `cutoff − 1`; requires `B(0) ≠ 0`.
pub fn series_quotient(num: &[C64], den: &[C64], cutoff: usize) -> Result<Vec<C64>> {
    let b0 = den.first().copied().unwrap_or(ZERO);
    if b0 == ZERO {
        return Err(SzegoError::InvalidParameter("denominator vanishes at the origin".into()));
    }
    let mut out = vec![ZERO; cutoff];
    for k in 0..cutoff {
        let mut acc = num.get(k).copied().unwrap_or(ZERO);
        for i in 1..den.len().min(k + 1) {
            acc -= den[i] * out[k - i];
        }
        out[k] = acc / b0;
    }
    Ok(out)
}
