//! Finite-rank Hankel operators and recovery of their rational symbols from
//! Fourier coefficients through linear recurrences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::hankel::{hankel_matrix, CMat};
use crate::hardy::{FourierSymbol, C64};
use crate::poly;
use crate::random::{random_complex, seeded};
use crate::rational::{RationalState, RationalSymbol};

/// Roots closer than this are merged into one root of higher multiplicity.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Roots with modulus at or above `1 − UNIT_MARGIN` are rejected.
pub const UNIT_MARGIN: f64 = 1e-10;
/// Default relative singular-value threshold for the recurrence nullspace.
pub const NULLSPACE_TOL: f64 = 1e-9;
/// Recurrence coefficients below this (relative to `‖c‖ = 1`) are treated as
/// exact zeros, so the polynomial part yields exact roots at the origin.
const COEFF_ZERO_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Number of singular values of the `k_op × k_op` Hankel matrix above
/// `tol · σ_max`.
pub fn numerical_rank(u: &FourierSymbol, k_op: usize, tol: f64) -> Result<usize> {
    let gamma = hankel_matrix(u, k_op)?.gamma;
    Ok(rank_of(&gamma, tol))
}

fn rank_of(m: &CMat, tol: f64) -> usize {
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// `Σ c_ℓ û(k+ℓ) = 0` with roots of `P(X) = Σ c_ℓ X^ℓ`; a root at `0` of
/// multiplicity `m` stands for a polynomial part of degree `< m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceModel {
    pub order: usize,
    /// Unit-norm recurrence coefficients `c₀ … c_N`.
    pub coefficients: Vec<C64>,
    /// Distinct roots.
    pub roots: Vec<C64>,
    pub multiplicities: Vec<usize>,
}

impl RecurrenceModel {
    /// Roots repeated according to multiplicity.
    pub fn expanded_roots(&self) -> Vec<C64> {
        self.roots.iter().zip(&self.multiplicities).flat_map(|(r, &m)| std::iter::repeat(*r).take(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub model: RecurrenceModel,
    /// Coefficient of each confluent basis element, grouped by root and
    /// ordered by power.
    pub amplitudes: Vec<Vec<C64>>,
    pub symbol: RationalSymbol,
    /// Singular values of the shifted-coefficient matrix, descending.
    pub singular_values: Vec<f64>,
    /// `‖û_fit − û‖ / ‖û‖` over the input coefficients.
    pub residual: f64,
}

impl Recovery {
    /// Pole/residue chart, available when all nonzero roots are simple and
    /// the root at the origin (if any) is simple.
    pub fn to_state(&self) -> Option<RationalState> {
        let mut residues = vec![];
        let mut poles = vec![];
        let mut constant = None;
        for ((r, &m), amp) in self.model.roots.iter().zip(&self.model.multiplicities).zip(&self.amplitudes) {
            if m != 1 {
                return None;
            }
            if *r == ZERO {
                constant = Some(amp[0]);
            } else {
                residues.push(amp[0]);
                poles.push(*r);
            }
        }
        RationalState::new(residues, poles, constant).ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recovery serializes")
    }
}

/// `binom(k+j, j) p^k`, the coefficients of `(1 − pz)^{−(j+1)}`; at `p = 0`
/// the basis element is `z^j`.
fn basis(p: C64, j: usize, k: usize) -> C64 {
    if p == ZERO {
        return if k == j { ONE } else { ZERO };
    }
    let mut binom = 1.0;
    for i in 1..=j {
        binom *= (k + i) as f64 / i as f64;
    }
    p.powu(k as u32) * binom
}

pub fn recover_rational(coeffs: &[C64], n: usize) -> Result<Recovery> {
    recover_rational_with_tol(coeffs, n, NULLSPACE_TOL)
}

/// Recovery with an explicit nullspace threshold (relative to `σ_max`).
pub fn recover_rational_with_tol(coeffs: &[C64], n: usize, tol: f64) -> Result<Recovery> {
    let k = coeffs.len();
    if n == 0 || k < 2 * n + 2 {
        return Err(SzegoError::InvalidParameter(format!("need N ≥ 1 and at least 2N+2 coefficients, got N = {n}, K = {k}")));
    }
    let shifted = DMatrix::from_fn(k - n, n + 1, |row, l| coeffs[row + l]);
    let svd = shifted.clone().svd(false, true);
    let mut order: Vec<usize> = (0..n + 1).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = singular_values[0];
    let nullity = singular_values.iter().filter(|&&s| s <= tol * smax).count();
    if smax == 0.0 || nullity != 1 {
        return Err(SzegoError::RankMismatch(if smax == 0.0 { n + 1 } else { nullity }));
    }
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let null_row = order[n];
    let mut c: Vec<C64> = (0..n + 1).map(|l| v_t[(null_row, l)].conj()).collect();
    // fix the phase so the leading nonzero coefficient is real positive
    let lead = *c.iter().rev().find(|x| x.norm() > COEFF_ZERO_TOL).expect("unit vector");
    let phase = lead.conj() / lead.norm();
    for x in c.iter_mut() {
        *x *= phase;
        if x.norm() <= COEFF_ZERO_TOL {
            *x = ZERO;
        }
    }

    let (roots, multiplicities) = clustered_roots(&c)?;
    for r in &roots {
        if r.norm() >= 1.0 - UNIT_MARGIN {
            return Err(SzegoError::NotInManifold(format!("recurrence root {r} lies outside the open unit disc")));
        }
    }

    // confluent partial-fraction fit
    let cols: Vec<(C64, usize)> =
        roots.iter().zip(&multiplicities).flat_map(|(&r, &m)| (0..m).map(move |j| (r, j))).collect();
    let design = DMatrix::from_fn(k, cols.len(), |row, col| basis(cols[col].0, cols[col].1, row));
    let target = DVector::from_column_slice(coeffs);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&target, 1e-14)
        .map_err(|e| SzegoError::Eigensolver(e.to_string()))?;
    let fit = &design * &beta;
    let scale = target.norm();
    let residual = if scale > 0.0 { (&fit - &target).norm() / scale } else { 0.0 };
    let mut amplitudes = vec![];
    let mut idx = 0;
    for &m in &multiplicities {
        amplitudes.push(beta.as_slice()[idx..idx + m].to_vec());
        idx += m;
    }
    let symbol = assemble_symbol(&roots, &multiplicities, &amplitudes)?;
    Ok(Recovery {
        model: RecurrenceModel { order: n, coefficients: c, roots, multiplicities },
        amplitudes,
        symbol,
        singular_values,
        residual,
    })
}

/// Distinct roots with multiplicities: leading zero coefficients give exact
/// roots at the origin, the rest come from the companion matrix, merged within
/// `CLUSTER_TOL`, with each merged root refined as a simple root of the
/// `(m−1)`-th derivative.
pub fn clustered_roots(coeffs: &[C64]) -> Result<(Vec<C64>, Vec<usize>)> {
    let zero_mult = coeffs.iter().position(|x| *x != ZERO).unwrap_or(0);
    let reduced = &coeffs[zero_mult..];
    let mut groups: Vec<Vec<C64>> = vec![];
    for r in poly::roots(reduced)? {
        match groups.iter_mut().find(|g| g.iter().any(|x| (x - r).norm() < CLUSTER_TOL)) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut roots = vec![];
    let mut mults = vec![];
    if zero_mult > 0 {
        roots.push(ZERO);
        mults.push(zero_mult);
    }
    for g in groups {
        let mean = g.iter().sum::<C64>() / g.len() as f64;
        let refined = if g.len() > 1 { refine_multiple(reduced, mean, g.len()) } else { mean };
        roots.push(refined);
        mults.push(g.len());
    }
    Ok((roots, mults))
}

fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

fn refine_multiple(coeffs: &[C64], mut z: C64, m: usize) -> C64 {
    let d = (1..m).fold(coeffs.to_vec(), |acc, _| derivative(&acc));
    let mut best = poly::eval(&d, z).norm();
    for _ in 0..8 {
        let (v, dv) = poly::eval_with_derivative(&d, z);
        if dv.norm() == 0.0 {
            break;
        }
        let next = z - v / dv;
        let val = poly::eval(&d, next).norm();
        if !(val < best) || (next - z).norm() > CLUSTER_TOL {
            break;
        }
        z = next;
        best = val;
    }
    z
}

/// `A/B` from `Σ β_{p,j}(1 − pz)^{−(j+1)} + Σ γ_j z^j`.
fn assemble_symbol(roots: &[C64], mults: &[usize], amps: &[Vec<C64>]) -> Result<RationalSymbol> {
    let factor_power = |p: C64, m: usize| (0..m).fold(vec![ONE], |acc, _| poly::mul(&acc, &[ONE, -p]));
    let den = roots.iter().zip(mults).filter(|(r, _)| **r != ZERO).fold(vec![ONE], |acc, (&r, &m)| poly::mul(&acc, &factor_power(r, m)));
    let mut num = vec![ZERO];
    for (i, (&p, &m)) in roots.iter().zip(mults).enumerate() {
        if p == ZERO {
            num = poly::add(&num, &poly::mul(&den, &amps[i]));
            continue;
        }
        let others = roots
            .iter()
            .zip(mults)
            .enumerate()
            .filter(|(l, (r, _))| *l != i && **r != ZERO)
            .fold(vec![ONE], |acc, (_, (&r, &ml))| poly::mul(&acc, &factor_power(r, ml)));
        for (j, &b) in amps[i].iter().enumerate() {
            let piece = poly::mul(&others, &factor_power(p, m - j - 1));
            num = poly::add(&num, &poly::scale(&piece, b));
        }
    }
    RationalSymbol::new(num, den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub rank: usize,
    pub cutoff: usize,
    pub noise: f64,
    /// True poles padded with zeros to the rank.
    pub true_poles: Vec<C64>,
    pub recovered_poles: Vec<C64>,
    pub multiplicities: Vec<usize>,
    pub max_pole_error: f64,
    pub coefficient_residual: f64,
    /// Largest coefficient error of the recovered symbol against the clean input.
    pub symbol_error: f64,
}

/// Rational state → Fourier coefficients (+ optional noise) → recovery.
pub fn roundtrip_check(state: &RationalState, cutoff: usize, noise: f64, seed: u64) -> Result<RoundtripReport> {
    roundtrip_symbol(&state.to_symbol()?, cutoff, noise, seed)
}

pub fn roundtrip_symbol(sym: &RationalSymbol, cutoff: usize, noise: f64, seed: u64) -> Result<RoundtripReport> {
    let clean = sym.to_fourier(cutoff)?;
    let mut rng = seeded(seed);
    let noisy: Vec<C64> = clean
        .coeffs()
        .iter()
        .map(|x| if noise > 0.0 { x + random_complex(&mut rng, noise) } else { *x })
        .collect();
    let rank = sym.rank();
    let tol = if noise > 0.0 { NULLSPACE_TOL.max(1e3 * noise) } else { NULLSPACE_TOL };
    let rec = recover_rational_with_tol(&noisy, rank, tol)?;
    let (den_roots, den_mults) = clustered_roots(&sym.denominator)?;
    let mut true_poles: Vec<C64> = den_roots
        .iter()
        .zip(&den_mults)
        .flat_map(|(r, &m)| std::iter::repeat(ONE / r).take(m))
        .collect();
    true_poles.resize(rank, ZERO);
    let recovered = rec.model.expanded_roots();
    let mut used = vec![false; recovered.len()];
    let mut max_pole_error: f64 = 0.0;
    for t in &true_poles {
        let best = (0..recovered.len())
            .filter(|&i| !used[i])
            .min_by(|&a, &b| (recovered[a] - t).norm().total_cmp(&(recovered[b] - t).norm()));
        match best {
            Some(i) => {
                used[i] = true;
                max_pole_error = max_pole_error.max((recovered[i] - t).norm());
            }
            None => max_pole_error = f64::INFINITY,
        }
    }
    let back = rec.symbol.to_fourier(cutoff)?;
    Ok(RoundtripReport {
        rank,
        cutoff,
        noise,
        true_poles,
        recovered_poles: rec.model.roots.clone(),
        multiplicities: rec.model.multiplicities.clone(),
        max_pole_error,
        coefficient_residual: rec.residual,
        symbol_error: back.max_abs_diff(&clean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_poles, random_residues};
    use crate::rational::rational_to_fourier;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn numerical_rank_examples() {
        let u = rational_to_fourier(&RationalState::single(c(1.5, 0.2), c(0.4, 0.3)), 64).unwrap();
        assert_eq!(numerical_rank(&u, 64, 1e-12).unwrap(), 1);
        let z = FourierSymbol::monomial(1, ONE);
        assert_eq!(numerical_rank(&z, 3, 1e-12).unwrap(), 2);
        let mut rng = seeded(50);
        let st = RationalState::new(random_residues(&mut rng, 4), random_poles(&mut rng, 4, 0.8, 0.1), None).unwrap();
        assert_eq!(numerical_rank(&rational_to_fourier(&st, 256).unwrap(), 128, 1e-10).unwrap(), 4);
        assert_eq!(numerical_rank(&FourierSymbol::zeros(4), 4, 1e-10).unwrap(), 0);
    }

    #[test]
    fn single_geometric_sequence() {
        let p = c(0.3, -0.6);
        let coeffs: Vec<C64> = (0..12).map(|k| p.powu(k)).collect();
        let rec = recover_rational(&coeffs, 1).unwrap();
        assert_eq!(rec.model.multiplicities, vec![1]);
        assert!((rec.model.roots[0] - p).norm() < 1e-14);
        assert!((rec.amplitudes[0][0] - ONE).norm() < 1e-13);
        assert!(rec.residual < 1e-14);
    }

    #[test]
    fn monomial_is_a_root_at_the_origin() {
        for m in 0..4 {
            let mut coeffs = vec![ZERO; 2 * (m + 1) + 4];
            coeffs[m] = ONE;
            let rec = recover_rational(&coeffs, m + 1).unwrap();
            assert_eq!(rec.model.roots, vec![ZERO]);
            assert_eq!(rec.model.multiplicities, vec![m + 1]);
            assert_eq!(rec.symbol.to_fourier(coeffs.len()).unwrap().max_abs_diff(&FourierSymbol::new(coeffs).unwrap()), 0.0);
        }
    }

    #[test]
    fn two_pole_example() {
        let st = RationalState::new(vec![c(2.0, 0.0), ONE], vec![c(0.3, 0.0), c(0.5, 0.2)], None).unwrap();
        let u = rational_to_fourier(&st, 24).unwrap();
        let rec = recover_rational(u.coeffs(), 2).unwrap();
        let back = rec.to_state().unwrap();
        for (a, p) in st.residues.iter().zip(&st.poles) {
            let j = back.poles.iter().position(|q| (q - p).norm() < 1e-10).expect("pole recovered");
            assert!((back.residues[j] - a).norm() < 1e-9);
        }
        assert!(rec.residual < 1e-13);
    }

    #[test]
    fn errors() {
        let p = c(0.5, 0.0);
        let coeffs: Vec<C64> = (0..20).map(|k| p.powu(k)).collect();
        assert!(matches!(recover_rational(&coeffs, 2), Err(SzegoError::RankMismatch(2))));
        assert!(recover_rational(&coeffs[..3], 1).is_err());
        let outside: Vec<C64> = (0..10).map(|k| c(1.2, 0.0).powu(k)).collect();
        assert!(matches!(recover_rational(&outside, 1), Err(SzegoError::NotInManifold(_))));
        let random: Vec<C64> = {
            let mut rng = seeded(51);
            (0..20).map(|_| random_complex(&mut rng, 1.0)).collect()
        };
        assert!(matches!(recover_rational(&random, 2), Err(SzegoError::RankMismatch(0))));
    }

    #[test]
    fn roundtrips() {
        let mut rng = seeded(52);
        let st = RationalState::new(random_residues(&mut rng, 3), random_poles(&mut rng, 3, 0.7, 0.05), None).unwrap();
        let r = roundtrip_check(&st, 64, 0.0, 0).unwrap();
        assert!(r.max_pole_error < 1e-9, "{r:?}");
        let st = RationalState::single(c(1.0, 0.5), c(0.4, -0.3));
        let r = roundtrip_check(&st, 64, 1e-8, 7).unwrap();
        assert!(r.max_pole_error < 1e-6, "{r:?}");
        // 1/(1 − pz)² + 0.5/(1 − qz): double pole at p
        let (p, q) = (c(0.4, 0.2), c(-0.5, 0.1));
        let den = poly::mul(&poly::from_reciprocal_roots(&[p, p]), &poly::from_reciprocal_roots(&[q]));
        let num = poly::add(&poly::from_reciprocal_roots(&[q]), &poly::scale(&poly::from_reciprocal_roots(&[p, p]), c(0.5, 0.0)));
        let sym = RationalSymbol::new(num, den).unwrap();
        let r = roundtrip_symbol(&sym, 64, 0.0, 0).unwrap();
        let pos = r.recovered_poles.iter().position(|x| (x - p).norm() < 1e-9).expect("double pole");
        assert_eq!(r.multiplicities[pos], 2);
        assert!(r.max_pole_error < 1e-9 && r.symbol_error < 1e-10, "{r:?}");
    }

    #[test]
    fn constant_chart_roundtrip() {
        let st = RationalState::new(vec![c(0.5, 0.1)], vec![c(0.4, 0.3)], Some(c(0.8, -0.2))).unwrap();
        let u = rational_to_fourier(&st, 32).unwrap();
        let rec = recover_rational(u.coeffs(), 2).unwrap();
        let back = rec.to_state().unwrap();
        assert!((back.constant.unwrap() - st.constant.unwrap()).norm() < 1e-12);
        assert!((back.poles[0] - st.poles[0]).norm() < 1e-12);
        let json = rec.to_json();
        assert!(json.contains("multiplicities"));
    }
}
