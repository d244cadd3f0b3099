//! Truncated Fourier symbols on the Hardy space of the circle.
//!
//! A [`FourierSymbol`] stores `û(0), …, û(K-1)` and represents
//! `u(z) = Σ û(k) z^k`. Two-sided sequences (needed for `|u|²` and other
//! intermediate products) live in [`TwoSidedSymbol`].

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Above this cutoff the cubic term is computed with a padded FFT instead of
/// exact convolution.
pub const EXACT_CONVOLUTION_LIMIT: usize = 512;

fn check_finite(coeffs: &[C64]) -> Result<()> {
    match coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
        Some(index) => Err(SzegoError::NonFinite { index }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SymbolRepr", into = "SymbolRepr")]
pub struct FourierSymbol {
    coeffs: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct SymbolRepr {
    cutoff: usize,
    coeffs: Vec<[f64; 2]>,
}

impl TryFrom<SymbolRepr> for FourierSymbol {
    type Error = SzegoError;

    fn try_from(repr: SymbolRepr) -> Result<Self> {
        if repr.coeffs.len() != repr.cutoff {
            return Err(SzegoError::Dimension { expected: repr.cutoff, got: repr.coeffs.len() });
        }
        FourierSymbol::new(repr.coeffs.iter().map(|&[re, im]| C64::new(re, im)).collect())
    }
}

impl From<FourierSymbol> for SymbolRepr {
    fn from(u: FourierSymbol) -> Self {
        SymbolRepr { cutoff: u.cutoff(), coeffs: u.coeffs.iter().map(|c| [c.re, c.im]).collect() }
    }
}

impl FourierSymbol {
    /// Builds a symbol from its coefficients. An empty list becomes the zero
    /// symbol with cutoff 1.
    pub fn new(mut coeffs: Vec<C64>) -> Result<Self> {
        check_finite(&coeffs)?;
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(cutoff: usize) -> Self {
        Self { coeffs: vec![ZERO; cutoff.max(1)] }
    }

    pub fn constant(c: C64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c·z^m` stored with the smallest cutoff holding it.
    pub fn monomial(m: usize, c: C64) -> Self {
        let mut coeffs = vec![ZERO; m + 1];
        coeffs[m] = c;
        Self { coeffs }
    }

    pub fn cutoff(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Coefficient at frequency `k`; zero beyond the cutoff.
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// Highest frequency with a nonzero coefficient (0 for the zero symbol).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != ZERO).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Zero-pads or truncates to exactly `cutoff` modes.
    pub fn resized(&self, cutoff: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(cutoff.max(1), ZERO);
        Self { coeffs }
    }

    pub fn map(&self, f: impl Fn(usize, C64) -> C64) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(k, &c)| f(k, c)).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|_, x| c * x)
    }

    /// Inner product `(u|v) = Σ û(k) conj(v̂(k))`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Momentum `(Du|u) = Σ k|û(k)|²`.
    pub fn momentum(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| k as f64 * c.norm_sqr()).sum()
    }

    /// `Σ (k+1)|û(k)|²`, which equals mass plus momentum.
    pub fn h_half_weighted_sq(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| (k + 1) as f64 * c.norm_sqr()).sum()
    }

    /// `‖u‖_{H^s}` with weight `(1+k²)^s`.
    pub fn hs_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (1.0 + (k * k) as f64).powf(s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `Du = z u'`.
    pub fn derivative(&self) -> Self {
        self.map(|k, c| c * k as f64)
    }

    /// `z ↦ u(e^{iψ} z)`.
    pub fn rotated(&self, psi: f64) -> Self {
        self.map(|k, c| c * C64::from_polar(1.0, psi * k as f64))
    }

    /// Horner evaluation at a point of the closed disc.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Full Cauchy product; cutoff `K₁ + K₂ - 1`.
    pub fn product(&self, other: &Self) -> Self {
        let mut out = vec![ZERO; self.cutoff() + other.cutoff() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.cutoff().max(other.cutoff());
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).norm()).fold(0.0, f64::max)
    }

    /// L² distance under zero padding.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("symbol serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SzegoError::InvalidParameter(e.to_string()))
    }
}

impl PartialEq for FourierSymbol {
    fn eq(&self, other: &Self) -> bool {
        let n = self.cutoff().max(other.cutoff());
        (0..n).all(|k| self.coeff(k) == other.coeff(k))
    }
}

fn zip_padded(a: &FourierSymbol, b: &FourierSymbol, f: impl Fn(C64, C64) -> C64) -> FourierSymbol {
    let n = a.cutoff().max(b.cutoff());
    FourierSymbol { coeffs: (0..n).map(|k| f(a.coeff(k), b.coeff(k))).collect() }
}

impl Add for &FourierSymbol {
    type Output = FourierSymbol;
    fn add(self, rhs: Self) -> FourierSymbol {
        zip_padded(self, rhs, |a, b| a + b)
    }
}

impl Sub for &FourierSymbol {
    type Output = FourierSymbol;
    fn sub(self, rhs: Self) -> FourierSymbol {
        zip_padded(self, rhs, |a, b| a - b)
    }
}

impl Neg for &FourierSymbol {
    type Output = FourierSymbol;
    fn neg(self) -> FourierSymbol {
        self.map(|_, c| -c)
    }
}

impl Mul<C64> for &FourierSymbol {
    type Output = FourierSymbol;
    fn mul(self, rhs: C64) -> FourierSymbol {
        self.scale(rhs)
    }
}

/// Coefficients on frequencies `min_freq, …, min_freq + len - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedSymbol {
    min_freq: i64,
    coeffs: Vec<C64>,
}

impl TwoSidedSymbol {
    pub fn new(min_freq: i64, coeffs: Vec<C64>) -> Result<Self> {
        check_finite(&coeffs)?;
        Ok(Self { min_freq, coeffs })
    }

    /// Builds a symbol from `(frequency, coefficient)` pairs.
    pub fn from_pairs(pairs: &[(i64, C64)]) -> Result<Self> {
        let Some(lo) = pairs.iter().map(|p| p.0).min() else {
            return Self::new(0, vec![]);
        };
        let hi = pairs.iter().map(|p| p.0).max().unwrap();
        let mut coeffs = vec![ZERO; (hi - lo + 1) as usize];
        for &(k, c) in pairs {
            coeffs[(k - lo) as usize] += c;
        }
        Self::new(lo, coeffs)
    }

    pub fn from_analytic(u: &FourierSymbol) -> Self {
        Self { min_freq: 0, coeffs: u.coeffs.clone() }
    }

    /// `ū` on the circle: frequencies `-(K-1), …, 0`.
    pub fn conj_of(u: &FourierSymbol) -> Self {
        let k = u.cutoff() as i64;
        Self { min_freq: -(k - 1), coeffs: u.coeffs.iter().rev().map(|c| c.conj()).collect() }
    }

    /// `|u|²` restricted to the circle, exactly Hermitian.
    pub fn modulus_squared(u: &FourierSymbol) -> Self {
        let k = u.cutoff();
        let c = u.coeffs();
        let mut out = vec![ZERO; 2 * k - 1];
        for m in 0..k {
            let b: C64 = (0..k - m).map(|j| c[j + m] * c[j].conj()).sum();
            out[k - 1 + m] = b;
            out[k - 1 - m] = b.conj();
        }
        Self { min_freq: -(k as i64 - 1), coeffs: out }
    }

    pub fn min_freq(&self) -> i64 {
        self.min_freq
    }

    pub fn max_freq(&self) -> i64 {
        self.min_freq + self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> C64 {
        let idx = k - self.min_freq;
        if idx < 0 {
            return ZERO;
        }
        self.coeffs.get(idx as usize).copied().unwrap_or(ZERO)
    }

    pub fn conj(&self) -> Self {
        Self { min_freq: -self.max_freq(), coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect() }
    }

    /// Convolution product of two trigonometric polynomials.
    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self { min_freq: 0, coeffs: vec![] };
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { min_freq: self.min_freq + other.min_freq, coeffs: out }
    }

    /// Largest deviation from `b̂(-k) = conj(b̂(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let lo = self.min_freq.min(-self.max_freq());
        let hi = self.max_freq().max(-self.min_freq);
        (lo..=hi).map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm()).fold(0.0, f64::max)
    }
}

/// Szegő projector: keeps the nonnegative frequencies.
pub fn szego_project(f: &TwoSidedSymbol) -> FourierSymbol {
    let hi = f.max_freq();
    if hi < 0 {
        return FourierSymbol::zeros(1);
    }
    FourierSymbol { coeffs: (0..=hi).map(|k| f.coeff(k)).collect() }
}

/// `Π(|u|²u)` with output cutoff `2K - 1`, i.e. every produced frequency.
pub fn cubic_nonlinearity(u: &FourierSymbol) -> FourierSymbol {
    cubic_nonlinearity_with_cutoff(u, 2 * u.cutoff() - 1)
}

/// `Π(|u|²u)` reported on frequencies `0..out_cutoff`.
pub fn cubic_nonlinearity_with_cutoff(u: &FourierSymbol, out_cutoff: usize) -> FourierSymbol {
    let out_cutoff = out_cutoff.max(1);
    if u.cutoff() > EXACT_CONVOLUTION_LIMIT {
        return cubic_by_fft(u, out_cutoff);
    }
    let k = u.cutoff();
    let c = u.coeffs();
    // b(m) = Σ_j û(j+m) conj(û(j)), m ∈ (-k, k), stored at m + k - 1
    let b = TwoSidedSymbol::modulus_squared(u);
    let b = b.coeffs();
    let n_max = out_cutoff.min(2 * k - 1);
    let mut out = vec![ZERO; out_cutoff];
    for (n, slot) in out.iter_mut().enumerate().take(n_max) {
        // m ranges over n-k+1 ..= n intersected with (-k, k)
        let m_lo = n as i64 - k as i64 + 1;
        let m_hi = (n as i64).min(k as i64 - 1);
        let mut acc = ZERO;
        for m in m_lo..=m_hi {
            acc += b[(m + k as i64 - 1) as usize] * c[(n as i64 - m) as usize];
        }
        *slot = acc;
    }
    FourierSymbol { coeffs: out }
}

fn cubic_by_fft(u: &FourierSymbol, out_cutoff: usize) -> FourierSymbol {
    let k = u.cutoff();
    let len = 3 * k;
    let mut planner = FftPlanner::<f64>::new();
    let mut grid = vec![ZERO; len];
    grid[..k].copy_from_slice(u.coeffs());
    planner.plan_fft_inverse(len).process(&mut grid);
    for v in grid.iter_mut() {
        *v *= v.norm_sqr();
    }
    planner.plan_fft_forward(len).process(&mut grid);
    let scale = 1.0 / len as f64;
    let n_max = out_cutoff.min(2 * k - 1);
    let mut out = vec![ZERO; out_cutoff];
    for (n, slot) in out.iter_mut().enumerate().take(n_max) {
        *slot = grid[n] * scale;
    }
    FourierSymbol { coeffs: out }
}

/// Values `u(e^{2πij/m})`, `j = 0, …, m-1`.
pub fn evaluate_on_grid(u: &FourierSymbol, m: usize) -> Result<Vec<C64>> {
    if m < 1 {
        return Err(SzegoError::InvalidParameter("grid size must be at least 1".into()));
    }
    let mut buf = vec![ZERO; m];
    for (k, c) in u.coeffs().iter().enumerate() {
        buf[k % m] += c;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    Ok(buf)
}

/// Inverse of [`evaluate_on_grid`]: the first `cutoff` Fourier coefficients of
/// uniformly sampled circle values.
pub fn coefficients_from_grid(values: &[C64], cutoff: usize) -> Result<FourierSymbol> {
    let m = values.len();
    if m == 0 {
        return Err(SzegoError::InvalidParameter("empty grid".into()));
    }
    let mut buf = values.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    FourierSymbol::new((0..cutoff).map(|k| if k < m { buf[k] * scale } else { ZERO }).collect())
}

/// Uniform grid angles `2πj/m`.
pub fn grid_angles(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub order: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSet {
    pub q: f64,
    pub m: f64,
    pub e: f64,
    pub hs_norms: Vec<NormEntry>,
    pub lp_norms: Vec<NormEntry>,
}

impl FunctionalSet {
    pub fn hs(&self, s: f64) -> Option<f64> {
        self.hs_norms.iter().find(|n| n.order == s).map(|n| n.value)
    }

    pub fn lp(&self, p: f64) -> Option<f64> {
        self.lp_norms.iter().find(|n| n.order == p).map(|n| n.value)
    }
}

fn quadrature_grid(u: &FourierSymbol) -> Vec<C64> {
    evaluate_on_grid(u, 4 * u.cutoff()).expect("grid size is positive")
}

/// `E = ∫|u|⁴` by trapezoidal quadrature on `4K` points, exact for the
/// trigonometric polynomial `|u|⁴`.
pub fn energy(u: &FourierSymbol) -> f64 {
    let grid = quadrature_grid(u);
    grid.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / grid.len() as f64
}

pub fn functionals(u: &FourierSymbol, s_list: &[f64], p_list: &[f64]) -> Result<FunctionalSet> {
    check_finite(u.coeffs())?;
    if let Some(p) = p_list.iter().find(|p| !(**p >= 1.0)) {
        return Err(SzegoError::InvalidParameter(format!("L^p exponent {p} is below 1")));
    }
    let grid = quadrature_grid(u);
    let n = grid.len() as f64;
    let e = grid.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n;
    let lp_norms = p_list
        .iter()
        .map(|&p| {
            let integral = grid.iter().map(|v| v.norm().powf(p)).sum::<f64>() / n;
            NormEntry { order: p, value: integral.powf(1.0 / p) }
        })
        .collect();
    let hs_norms = s_list.iter().map(|&s| NormEntry { order: s, value: u.hs_norm(s) }).collect();
    Ok(FunctionalSet { q: u.norm_sq(), m: u.momentum(), e, hs_norms, lp_norms })
}

/// `Q(Q + 2M) - E`, nonnegative up to rounding and zero exactly on rank-one
/// symbols.
pub fn sharp_inequality_gap(u: &FourierSymbol) -> f64 {
    let q = u.norm_sq();
    q * (q + 2.0 * u.momentum()) - energy(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_symbol, seeded};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rational_one(alpha: C64, p: C64, cutoff: usize) -> FourierSymbol {
        FourierSymbol::new((0..cutoff).map(|k| alpha * p.powu(k as u32)).collect()).unwrap()
    }

    #[test]
    fn projector_drops_negative_frequencies() {
        let f = TwoSidedSymbol::from_pairs(&[(-1, c(5.0, 0.0)), (0, c(1.0, 0.0)), (1, c(2.0, 0.0))]).unwrap();
        assert_eq!(szego_project(&f), FourierSymbol::from_real(&[1.0, 2.0]).unwrap());
        let neg = TwoSidedSymbol::from_pairs(&[(-3, c(1.0, 1.0)), (-1, c(2.0, 0.0))]).unwrap();
        assert!(szego_project(&neg).is_zero());
        let u = FourierSymbol::from_real(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(szego_project(&TwoSidedSymbol::from_analytic(&u)), u);
    }

    #[test]
    fn cubic_small_cases() {
        let one = FourierSymbol::constant(c(1.0, 0.0));
        assert_eq!(cubic_nonlinearity(&one), one);
        let z = FourierSymbol::monomial(1, c(1.0, 0.0));
        assert!(cubic_nonlinearity(&z).approx_eq(&z, 0.0));
        let u = FourierSymbol::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(cubic_nonlinearity(&u), FourierSymbol::from_real(&[3.0, 3.0, 1.0]).unwrap());
    }

    #[test]
    fn cubic_matches_two_sided_product() {
        let mut rng = seeded(3);
        for k in [1, 2, 5, 17] {
            let u = random_symbol(&mut rng, k, 1.0);
            let full = TwoSidedSymbol::modulus_squared(&u).mul(&TwoSidedSymbol::from_analytic(&u));
            let oracle = szego_project(&full);
            assert!(cubic_nonlinearity(&u).approx_eq(&oracle, 1e-13));
        }
    }

    #[test]
    fn fft_branch_agrees_with_convolution() {
        let mut rng = seeded(4);
        let u = random_symbol(&mut rng, 40, 0.3);
        let exact = cubic_nonlinearity(&u);
        let fast = cubic_by_fft(&u, 2 * u.cutoff() - 1);
        assert!(exact.approx_eq(&fast, 1e-13));
    }

    #[test]
    fn cubic_output_cutoff_pads_and_truncates() {
        let u = FourierSymbol::from_real(&[1.0, 1.0]).unwrap();
        assert_eq!(cubic_nonlinearity_with_cutoff(&u, 2).coeffs(), &[c(3.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(cubic_nonlinearity_with_cutoff(&u, 6).cutoff(), 6);
        assert_eq!(cubic_nonlinearity_with_cutoff(&u, 6), cubic_nonlinearity(&u));
    }

    #[test]
    fn functionals_of_simple_symbols() {
        let eps = 0.3;
        let u = FourierSymbol::from_real(&[eps, 1.0]).unwrap();
        let f = functionals(&u, &[0.5, 1.0], &[2.0, 4.0]).unwrap();
        assert!((f.q - (1.0 + eps * eps)).abs() < 1e-15);
        assert!((f.m - 1.0).abs() < 1e-15);
        assert!((f.lp(2.0).unwrap().powi(2) - f.q).abs() < 1e-13);
        assert!((f.lp(4.0).unwrap().powi(4) - f.e).abs() < 1e-12);
        assert!((f.hs(1.0).unwrap().powi(2) - (eps * eps + 2.0)).abs() < 1e-14);

        let alpha = c(0.8, -0.4);
        let p = c(0.3, 0.4);
        let phi = rational_one(alpha, p, 120);
        let r2 = p.norm_sqr();
        let a4 = alpha.norm_sqr().powi(2);
        let f = functionals(&phi, &[], &[]).unwrap();
        assert!((f.e - a4 * (1.0 + r2) / (1.0 - r2).powi(3)).abs() < 1e-12);
        assert!((f.q - alpha.norm_sqr() / (1.0 - r2)).abs() < 1e-12);
    }

    #[test]
    fn functionals_reject_bad_exponent() {
        let u = FourierSymbol::constant(c(1.0, 0.0));
        assert!(functionals(&u, &[], &[0.5]).is_err());
    }

    #[test]
    fn grid_evaluation_examples() {
        let one = FourierSymbol::constant(c(1.0, 0.0));
        assert_eq!(evaluate_on_grid(&one, 4).unwrap(), vec![c(1.0, 0.0); 4]);
        let z = FourierSymbol::monomial(1, c(1.0, 0.0));
        let v = evaluate_on_grid(&z, 4).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(evaluate_on_grid(&z, 0).is_err());
    }

    #[test]
    fn grid_roundtrip() {
        let mut rng = seeded(5);
        let u = random_symbol(&mut rng, 33, 1.0);
        let grid = evaluate_on_grid(&u, 2 * 33 - 1).unwrap();
        let back = coefficients_from_grid(&grid, 33).unwrap();
        assert!(back.approx_eq(&u, 1e-13));
    }

    #[test]
    fn sharp_gap_examples() {
        let phi = rational_one(c(1.0, 0.0), c(0.5, 0.0), 80);
        assert!(sharp_inequality_gap(&phi).abs() < 1e-10);
        let one = FourierSymbol::constant(c(1.0, 0.0));
        assert!(sharp_inequality_gap(&one).abs() < 1e-15);
        let u = FourierSymbol::from_real(&[1.0, 0.0, 1.0]).unwrap();
        assert!(sharp_inequality_gap(&u) > 0.1);
    }

    #[test]
    fn padded_equality_and_serialization() {
        let u = FourierSymbol::from_real(&[1.0, 2.0]).unwrap();
        assert_eq!(u, u.resized(7));
        assert_ne!(u, FourierSymbol::from_real(&[1.0, 2.0, 1e-300]).unwrap());
        let mut rng = seeded(6);
        let v = random_symbol(&mut rng, 9, 1.0);
        let back = FourierSymbol::from_json(&v.to_json()).unwrap();
        assert_eq!(back.coeffs(), v.coeffs());
        assert!(FourierSymbol::from_json(r#"{"cutoff":2,"coeffs":[[1.0,0.0]]}"#).is_err());
        assert!(FourierSymbol::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn two_sided_helpers() {
        let u = FourierSymbol::from_real(&[0.5, 1.0]).unwrap();
        let b = TwoSidedSymbol::modulus_squared(&u);
        assert_eq!(b.min_freq(), -1);
        assert!((b.coeff(0) - c(1.25, 0.0)).norm() < 1e-15);
        assert!((b.coeff(1) - c(0.5, 0.0)).norm() < 1e-15);
        assert!(b.hermitian_defect() < 1e-15);
        let direct = TwoSidedSymbol::conj_of(&u).mul(&TwoSidedSymbol::from_analytic(&u));
        for k in -1..=1 {
            assert!((direct.coeff(k) - b.coeff(k)).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn projector_is_self_adjoint(seed in 0u64..500) {
            let mut rng = seeded(seed);
            let f = random_symbol(&mut rng, 9, 1.0);
            let g = random_symbol(&mut rng, 6, 1.0);
            let f2 = TwoSidedSymbol::new(-4, f.coeffs().to_vec()).unwrap();
            // (Πf|g) = (f|g) for analytic g since g has no negative modes
            let lhs = szego_project(&f2).inner(&g);
            let rhs: C64 = (0..6).map(|k| f2.coeff(k as i64) * g.coeff(k).conj()).sum();
            prop_assert!((lhs - rhs).norm() < 1e-13);
            let pp = szego_project(&TwoSidedSymbol::from_analytic(&szego_project(&f2)));
            prop_assert_eq!(pp, szego_project(&f2));
        }

        #[test]
        fn parseval_and_half_weight(seed in 0u64..500, k in 1usize..128) {
            let mut rng = seeded(seed);
            let u = random_symbol(&mut rng, k, 1.0);
            let grid = evaluate_on_grid(&u, 4 * k).unwrap();
            let quad = grid.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.len() as f64;
            let q = u.norm_sq();
            prop_assert!((quad - q).abs() <= 1e-12 * q.max(1.0));
            prop_assert!((u.h_half_weighted_sq() - (u.momentum() + q)).abs() <= 1e-12 * q.max(1.0));
            prop_assert!(q <= u.h_half_weighted_sq());
        }

        #[test]
        fn sharp_gap_nonnegative(seed in 0u64..1000) {
            let mut rng = seeded(seed);
            let u = random_symbol(&mut rng, 16, 1.0);
            prop_assert!(sharp_inequality_gap(&u) >= -1e-10);
        }
    }
}
