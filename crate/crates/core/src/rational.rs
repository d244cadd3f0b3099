//! Rational invariant manifolds: pole/residue charts, their coordinate ODE,
//! explicit rank-one and rank-two solutions, Blaschke products and the
//! associated evolution laws.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::hardy::{FourierSymbol, C64};
use crate::ode::{drive, StepPlan, StepStats};
use crate::poly;

/// Minimum pole separation accepted by the coordinate ODE.
pub const COLLISION_THRESHOLD: f64 = 1e-8;
/// Minimum distance from the unit circle accepted by the coordinate ODE.
pub const CIRCLE_THRESHOLD: f64 = 1e-8;
/// Relative tolerance for detecting the stationary branch `Q = S̃`.
pub const STATIONARY_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);
const MINUS_I: C64 = C64::new(0.0, -1.0);

/// `u(z) = Σ α_j/(1 − p_j z) (+ α_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalState {
    pub residues: Vec<C64>,
    pub poles: Vec<C64>,
    /// Constant term; present in the chart where `1` lies in the range of `H_u`.
    pub constant: Option<C64>,
}

impl RationalState {
    pub fn new(residues: Vec<C64>, poles: Vec<C64>, constant: Option<C64>) -> Result<Self> {
        if residues.len() != poles.len() {
            return Err(SzegoError::Dimension { expected: poles.len(), got: residues.len() });
        }
        if residues.is_empty() && constant.is_none() {
            return Err(SzegoError::InvalidParameter("empty rational state".into()));
        }
        let all_finite = residues.iter().chain(&poles).chain(constant.iter()).all(|c| c.re.is_finite() && c.im.is_finite());
        if !all_finite {
            return Err(SzegoError::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(Self { residues, poles, constant })
    }

    pub fn single(alpha: C64, p: C64) -> Self {
        Self { residues: vec![alpha], poles: vec![p], constant: None }
    }

    /// Residues and poles with the constant appended as a residue at pole 0.
    pub fn extended(&self) -> (Vec<C64>, Vec<C64>) {
        let mut a = self.residues.clone();
        let mut p = self.poles.clone();
        if let Some(c) = self.constant {
            a.push(c);
            p.push(ZERO);
        }
        (a, p)
    }

    /// Number of terms including the constant.
    pub fn rank(&self) -> usize {
        self.residues.len() + usize::from(self.constant.is_some())
    }

    pub fn eval(&self, z: C64) -> C64 {
        let (a, p) = self.extended();
        a.iter().zip(&p).map(|(a, p)| a / (ONE - p * z)).sum()
    }

    /// Checks the chart conditions; `t` tags the diagnostic.
    pub fn check(&self, t: f64) -> Result<()> {
        let (_, p) = self.extended();
        for (index, q) in p.iter().enumerate() {
            let modulus = q.norm();
            if !(modulus < 1.0 - CIRCLE_THRESHOLD) {
                return Err(SzegoError::PoleOnCircle { index, modulus, t });
            }
        }
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let separation = (p[i] - p[j]).norm();
                if separation <= COLLISION_THRESHOLD {
                    return Err(SzegoError::PoleCollision { i, j, separation, t });
                }
            }
        }
        Ok(())
    }

    /// `S = |p_1⋯p_N|²` (zero in the constant-term chart).
    pub fn s_invariant(&self) -> f64 {
        if self.constant.is_some() {
            return 0.0;
        }
        self.poles.iter().product::<C64>().norm_sqr()
    }

    /// Leading numerator coefficient `a = (−1)^{N−1} p_1⋯p_{N−1} α_N` in the
    /// constant-term chart.
    pub fn leading_coefficient(&self) -> Option<C64> {
        let c = self.constant?;
        let sign = if self.poles.len() % 2 == 0 { 1.0 } else { -1.0 };
        Some(c * self.poles.iter().product::<C64>() * sign)
    }

    /// `S̃ = |α_N ∏ p_j|²` in the constant-term chart.
    pub fn s_tilde(&self) -> Option<f64> {
        self.leading_coefficient().map(|a| a.norm_sqr())
    }

    /// `Q = Σ α_j ᾱ_k / (1 − p_j p̄_k)`.
    pub fn mass(&self) -> f64 {
        let (a, p) = self.extended();
        let mut q = ZERO;
        for j in 0..a.len() {
            for k in 0..a.len() {
                q += a[j] * a[k].conj() / (ONE - p[j] * p[k].conj());
            }
        }
        q.re
    }

    /// `M = Σ α_j p_j ᾱ_k p̄_k / (1 − p_j p̄_k)²`.
    pub fn momentum(&self) -> f64 {
        let (a, p) = self.extended();
        let mut m = ZERO;
        for j in 0..a.len() {
            for k in 0..a.len() {
                m += a[j] * p[j] * (a[k] * p[k]).conj() / (ONE - p[j] * p[k].conj()).powi(2);
            }
        }
        m.re
    }

    pub fn to_symbol(&self) -> Result<RationalSymbol> {
        let (a, p) = self.extended();
        let den = poly::from_reciprocal_roots(&self.poles);
        let mut num = vec![ZERO];
        for j in 0..a.len() {
            let others: Vec<C64> = (0..self.poles.len()).filter(|&l| l != j).map(|l| self.poles[l]).collect();
            num = poly::add(&num, &poly::scale(&poly::from_reciprocal_roots(&others), a[j]));
        }
        let _ = p;
        RationalSymbol::new(num, den)
    }

    fn flatten(&self) -> Vec<C64> {
        let mut y = self.residues.clone();
        y.extend(&self.poles);
        y.extend(self.constant.iter());
        y
    }

    fn unflatten(&self, y: &[C64]) -> Self {
        let n = self.residues.len();
        Self {
            residues: y[..n].to_vec(),
            poles: y[n..2 * n].to_vec(),
            constant: self.constant.map(|_| y[2 * n]),
        }
    }
}

/// `û(k) = Σ α_j p_j^k (+ α_N δ_{k0})`.
pub fn rational_to_fourier(state: &RationalState, cutoff: usize) -> Result<FourierSymbol> {
    if let Some((index, p)) = state.poles.iter().enumerate().find(|(_, p)| p.norm() >= 1.0) {
        return Err(SzegoError::PoleOnCircle { index, modulus: p.norm(), t: 0.0 });
    }
    let cutoff = cutoff.max(1);
    let mut coeffs = vec![ZERO; cutoff];
    for (a, p) in state.residues.iter().zip(&state.poles) {
        let mut pk = ONE;
        for c in coeffs.iter_mut() {
            *c += a * pk;
            pk *= p;
        }
    }
    if let Some(c) = state.constant {
        coeffs[0] += c;
    }
    FourierSymbol::new(coeffs)
}

/// `Σ |α_j| |p_j|^K / (1 − |p_j|)`, an upper bound on the discarded tail.
pub fn fourier_tail_bound(state: &RationalState, cutoff: usize) -> f64 {
    state
        .residues
        .iter()
        .zip(&state.poles)
        .map(|(a, p)| a.norm() * p.norm().powi(cutoff as i32) / (1.0 - p.norm()))
        .sum()
}

fn eqn_rhs_at(state: &RationalState, t: f64) -> Result<RationalState> {
    state.check(t)?;
    let (a, p) = state.extended();
    let n = a.len();
    let mut da = vec![ZERO; n];
    let mut dp = vec![ZERO; n];
    for j in 0..n {
        let mut s1 = ZERO; // Σ_k ᾱ_k / (1 − p_j p̄_k)
        let mut s2 = ZERO; // Σ_k ᾱ_k / (1 − p_j p̄_k)²
        for k in 0..n {
            let d = ONE - p[j] * p[k].conj();
            s1 += a[k].conj() / d;
            s2 += a[k].conj() / (d * d);
        }
        let s3: C64 = (0..n).filter(|&l| l != j).map(|l| a[l] / (p[j] - p[l])).sum();
        let i_da = a[j] * a[j] * s2 + 2.0 * a[j] * p[j] * s1 * s3;
        let i_dp = a[j] * s1 * p[j];
        da[j] = MINUS_I * i_da;
        dp[j] = MINUS_I * i_dp;
    }
    let m = state.residues.len();
    Ok(RationalState {
        residues: da[..m].to_vec(),
        poles: dp[..m].to_vec(),
        constant: state.constant.map(|_| da[m]),
    })
}

/// Time derivative of the coordinates `(α_j, p_j[, α_N])` along the flow,
/// returned in the same layout as the state.
pub fn eqn_rhs(state: &RationalState) -> Result<RationalState> {
    eqn_rhs_at(state, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalSeries {
    pub times: Vec<f64>,
    pub states: Vec<RationalState>,
    pub s: Vec<f64>,
    pub s_tilde: Vec<Option<f64>>,
    pub stats: StepStats,
}

/// Integrates the coordinate ODE; aborts on pole collision or when a pole
/// approaches the circle.
pub fn integrate_rational(state0: &RationalState, plan: &StepPlan) -> Result<RationalSeries> {
    state0.check(0.0)?;
    let template = state0.clone();
    let mut series = RationalSeries { times: vec![], states: vec![], s: vec![], s_tilde: vec![], stats: StepStats::default() };
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> { Ok(eqn_rhs_at(&template.unflatten(y), t)?.flatten()) };
    series.stats = drive(plan, &state0.flatten(), rhs, |_, t, y| {
        let st = template.unflatten(y);
        series.times.push(t);
        series.s.push(st.s_invariant());
        series.s_tilde.push(st.s_tilde());
        series.states.push(st);
        Ok(())
    })?;
    Ok(series)
}

/// Closed-form rank-one orbit: `α(t) = α₀e^{−iωt}`, `p(t) = p₀e^{−ict}`.
pub fn m1_solution(alpha0: C64, p0: C64, t: f64) -> (C64, C64) {
    let (omega, c) = m1_frequencies(alpha0, p0);
    (alpha0 * C64::from_polar(1.0, -omega * t), p0 * C64::from_polar(1.0, -c * t))
}

/// `(ω, c) = (|α|²/(1−|p|²)², |α|²/(1−|p|²))`.
pub fn m1_frequencies(alpha0: C64, p0: C64) -> (f64, f64) {
    let d = 1.0 - p0.norm_sqr();
    let a2 = alpha0.norm_sqr();
    (a2 / (d * d), a2 / d)
}

/// `(Q, M, S̃)` of `(az + b)/(1 − pz)`.
pub fn mtilde1_invariants(a: C64, b: C64, p: C64) -> (f64, f64, f64) {
    let d = 1.0 - p.norm_sqr();
    let top = (a + b * p).norm_sqr();
    (top / d + b.norm_sqr(), top / (d * d), a.norm_sqr())
}

/// `(az + b)/(1 − pz)` truncated to `cutoff` modes.
pub fn mtilde1_to_fourier(a: C64, b: C64, p: C64, cutoff: usize) -> FourierSymbol {
    let lead = a + b * p;
    let mut coeffs = vec![ZERO; cutoff.max(1)];
    coeffs[0] = b;
    let mut pk = ONE;
    for c in coeffs.iter_mut().skip(1) {
        *c = lead * pk;
        pk *= p;
    }
    FourierSymbol::new(coeffs).expect("finite inputs")
}

/// `‖(az + b)/(1 − pz)‖_{H^s}` with weight `(1+k²)^s`, summed until the
/// geometric tail is negligible.
pub fn rational_hs_norm(a: C64, b: C64, p: C64, s: f64) -> f64 {
    let x = p.norm_sqr();
    let lead = (a + b * p).norm_sqr();
    let mut sum = 0.0;
    let mut xk = 1.0;
    let mut k = 1u64;
    loop {
        let term = (1.0 + (k * k) as f64).powf(s) * xk;
        sum += term;
        // once terms decrease, the remainder is below term·x/(1−x)·(growth)
        if k > 8 && term < 1e-18 * sum {
            break;
        }
        if xk == 0.0 {
            break;
        }
        xk *= x;
        k += 1;
    }
    (b.norm_sqr() + lead * sum).sqrt()
}

/// Right-hand side of the flow in the `(a, b, p)` chart of
/// `(az + b)/(1 − pz)`:
/// `iȧ = Qa`, `iḃ = (M+Q)b + M a p̄`, `iṗ = Qp + a b̄`.
pub fn mtilde1_rhs(y: &[C64]) -> Result<Vec<C64>> {
    let (a, b, p) = (y[0], y[1], y[2]);
    if !(p.norm() < 1.0 - CIRCLE_THRESHOLD) {
        return Err(SzegoError::PoleOnCircle { index: 0, modulus: p.norm(), t: f64::NAN });
    }
    let (q, m, _) = mtilde1_invariants(a, b, p);
    Ok(vec![MINUS_I * q * a, MINUS_I * ((m + q) * b + m * a * p.conj()), MINUS_I * (q * p + a * b.conj())])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTilde1Series {
    pub times: Vec<f64>,
    /// `(a, b, p)` per sample.
    pub states: Vec<[C64; 3]>,
    pub stats: StepStats,
}

/// Numerical integration in the `(a, b, p)` chart.
pub fn integrate_mtilde1(a0: C64, b0: C64, p0: C64, plan: &StepPlan) -> Result<MTilde1Series> {
    check_mtilde1(a0, b0, p0)?;
    let mut series = MTilde1Series { times: vec![], states: vec![], stats: StepStats::default() };
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        mtilde1_rhs(y).map_err(|e| match e {
            SzegoError::PoleOnCircle { index, modulus, .. } => SzegoError::PoleOnCircle { index, modulus, t },
            other => other,
        })
    };
    series.stats = drive(plan, &[a0, b0, p0], rhs, |_, t, y| {
        series.times.push(t);
        series.states.push([y[0], y[1], y[2]]);
        Ok(())
    })?;
    Ok(series)
}

fn check_mtilde1(a: C64, b: C64, p: C64) -> Result<()> {
    if a.norm() == 0.0 {
        return Err(SzegoError::NotInManifold("leading coefficient a vanishes".into()));
    }
    if !(p.norm() < 1.0) {
        return Err(SzegoError::NotInManifold(format!("|p| = {} is not below 1", p.norm())));
    }
    if (a + b * p).norm() <= 1e-14 * (a.norm() + b.norm()) {
        return Err(SzegoError::NotInManifold("numerator and denominator share a factor".into()));
    }
    Ok(())
}

/// Explicit solution data on the rank-two manifold with `1` in the range of `H_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTilde1Solution {
    pub a0: C64,
    pub b0: C64,
    pub p0: C64,
    pub q: f64,
    pub m: f64,
    pub s_tilde: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub omega: f64,
    pub f_plus0: C64,
    pub f_minus0: C64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub stationary: bool,
}

impl MTilde1Solution {
    pub fn new(a0: C64, b0: C64, p0: C64) -> Result<Self> {
        check_mtilde1(a0, b0, p0)?;
        let (q, m, s_tilde) = mtilde1_invariants(a0, b0, p0);
        let sigma1 = q + m;
        let disc = (sigma1 * sigma1 - 4.0 * m * s_tilde).max(0.0).sqrt();
        let r_plus = 0.5 * (sigma1 + disc);
        let r_minus = 0.5 * (sigma1 - disc);
        let stationary = (q - s_tilde).abs() <= STATIONARY_TOL * q;
        let (rho_min, rho_max) = if stationary {
            (p0.norm(), p0.norm())
        } else {
            let (sm, ss) = (m.sqrt(), s_tilde.sqrt());
            let root = 2.0 * (m * s_tilde).sqrt();
            ((sm - ss).abs() / (m + q - root).sqrt(), (sm + ss) / (m + q + root).sqrt())
        };
        Ok(Self {
            a0,
            b0,
            p0,
            q,
            m,
            s_tilde,
            r_plus,
            r_minus,
            omega: disc,
            f_plus0: r_plus * b0 + m * a0 * p0.conj(),
            f_minus0: r_minus * b0 + m * a0 * p0.conj(),
            rho_min,
            rho_max,
            stationary,
        })
    }

    /// `(a(t), b(t), p(t))`.
    pub fn at(&self, t: f64) -> (C64, C64, C64) {
        let phase_q = C64::from_polar(1.0, -self.q * t);
        let a = self.a0 * phase_q;
        if self.stationary {
            return (a, self.b0 * phase_q, self.p0);
        }
        let fp = self.f_plus0 * C64::from_polar(1.0, -self.r_plus * t);
        let fm = self.f_minus0 * C64::from_polar(1.0, -self.r_minus * t);
        let gap = self.r_plus - self.r_minus;
        let b = (fp - fm) / gap;
        let ma_pbar = (self.r_plus * fm - self.r_minus * fp) / gap;
        let p = (ma_pbar / (self.m * a)).conj();
        (a, b, p)
    }

    /// `E = Q² + 2M(Q − S̃)`.
    pub fn energy(&self) -> f64 {
        self.q * self.q + 2.0 * self.m * (self.q - self.s_tilde)
    }

    /// `(|f₊|, |f₋|)` predicted from the invariants:
    /// `√r₊(Q − r₋)` and `√r₋(r₊ − Q)`.
    pub fn f_moduli_from_invariants(&self) -> (f64, f64) {
        (self.r_plus.sqrt() * (self.q - self.r_minus), self.r_minus.sqrt() * (self.r_plus - self.q))
    }

    /// Period of `|p(t)|²`, infinite on the stationary branch.
    pub fn period(&self) -> f64 {
        if self.stationary || self.omega == 0.0 {
            f64::INFINITY
        } else {
            2.0 * PI / self.omega
        }
    }
}

pub fn mtilde1_solution(a0: C64, b0: C64, p0: C64, t: f64) -> Result<((C64, C64, C64), MTilde1Solution)> {
    let sol = MTilde1Solution::new(a0, b0, p0)?;
    Ok((sol.at(t), sol))
}

/// Least-squares fit `v ≈ A + B cos(Ωt) + C sin(Ωt)`; returns the fitted
/// coefficients and pointwise residuals.
pub fn fit_cosine(times: &[f64], values: &[f64], omega: f64) -> ([f64; 3], Vec<f64>) {
    let design = nalgebra::DMatrix::from_fn(times.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (omega * times[i]).cos(),
        _ => (omega * times[i]).sin(),
    });
    let rhs = nalgebra::DVector::from_column_slice(values);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .unwrap_or_else(|_| nalgebra::DVector::zeros(3));
    let fitted = &design * &coef;
    let resid = values.iter().zip(fitted.iter()).map(|(v, f)| v - f).collect();
    ([coef[0], coef[1], coef[2]], resid)
}

/// `b(z) = ∏ (z − p̄_j)/(1 − p_j z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    pub poles: Vec<C64>,
}

impl BlaschkeProduct {
    pub fn eval(&self, z: C64) -> C64 {
        self.poles.iter().map(|p| (z - p.conj()) / (ONE - p * z)).product()
    }

    pub fn to_fourier(&self, cutoff: usize) -> FourierSymbol {
        let num = self.poles.iter().fold(vec![ONE], |acc, p| poly::mul(&acc, &[-p.conj(), ONE]));
        let den = poly::from_reciprocal_roots(&self.poles);
        FourierSymbol::new(poly::series_quotient(&num, &den, cutoff).expect("den(0) = 1")).expect("finite")
    }
}

/// `u = A/B` with `B(0) = 1` and every root of `B` outside the closed disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalSymbol {
    pub numerator: Vec<C64>,
    pub denominator: Vec<C64>,
}

impl RationalSymbol {
    pub fn new(numerator: Vec<C64>, denominator: Vec<C64>) -> Result<Self> {
        let b0 = denominator.first().copied().unwrap_or(ZERO);
        if b0 == ZERO {
            return Err(SzegoError::NotInManifold("denominator vanishes at the origin".into()));
        }
        let trim = |v: Vec<C64>| -> Vec<C64> {
            let d = poly::effective_degree(&v, 0.0);
            v.into_iter().take(d + 1).map(|c| c / b0).collect()
        };
        let numerator = trim(numerator);
        let denominator = trim(denominator);
        if numerator.iter().all(|c| *c == ZERO) {
            return Err(SzegoError::NotInManifold("zero numerator".into()));
        }
        let sym = Self { numerator, denominator };
        for p in sym.poles()? {
            if !(p.norm() < 1.0) {
                return Err(SzegoError::NotInManifold(format!("pole {p} is not inside the unit disc")));
            }
            let r = ONE / p;
            let scale: f64 = sym.numerator.iter().enumerate().map(|(k, c)| c.norm() * r.norm().powi(k as i32)).sum();
            if poly::eval(&sym.numerator, r).norm() <= 1e-10 * scale {
                return Err(SzegoError::NotInManifold("numerator and denominator share a root".into()));
            }
        }
        Ok(sym)
    }

    pub fn numerator_degree(&self) -> usize {
        self.numerator.len() - 1
    }

    pub fn denominator_degree(&self) -> usize {
        self.denominator.len() - 1
    }

    /// Rank of the Hankel operator: `max(deg A + 1, deg B)`.
    pub fn rank(&self) -> usize {
        (self.numerator_degree() + 1).max(self.denominator_degree())
    }

    /// Reciprocals of the denominator roots.
    pub fn poles(&self) -> Result<Vec<C64>> {
        Ok(poly::roots(&self.denominator)?.into_iter().map(|r| ONE / r).collect())
    }

    /// True when `1 ∈ Im H_u`, i.e. the denominator degree is below the rank.
    pub fn has_constant_chart(&self) -> bool {
        self.denominator_degree() < self.rank()
    }

    pub fn eval(&self, z: C64) -> C64 {
        poly::eval(&self.numerator, z) / poly::eval(&self.denominator, z)
    }

    pub fn to_fourier(&self, cutoff: usize) -> Result<FourierSymbol> {
        FourierSymbol::new(poly::series_quotient(&self.numerator, &self.denominator, cutoff.max(1))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeDecomposition {
    pub rank: usize,
    /// Denominator poles padded with zeros to the rank.
    pub poles: Vec<C64>,
    pub blaschke: BlaschkeProduct,
    /// `v = 1 − P_u(1) = (−1)^N p_1⋯p_N b`.
    pub v: FourierSymbol,
    /// Preimage of `1` under `H_u`, present only when `1 ∈ Im H_u`.
    pub w: Option<FourierSymbol>,
    pub s: f64,
    pub s_tilde: Option<f64>,
    /// Coefficient of `z^{N−1}` in the numerator.
    pub leading: C64,
}

impl BlaschkeDecomposition {
    pub fn w_required(&self) -> Result<&FourierSymbol> {
        self.w.as_ref().ok_or_else(|| SzegoError::NotInManifold("1 is not in the range of H_u".into()))
    }

    /// `(−1)^N p_1⋯p_N`.
    pub fn v_factor(&self) -> C64 {
        let sign = if self.rank % 2 == 0 { 1.0 } else { -1.0 };
        self.poles.iter().product::<C64>() * sign
    }

    pub fn v_eval(&self, z: C64) -> C64 {
        self.v_factor() * self.blaschke.eval(z)
    }

    pub fn w_eval(&self, z: C64) -> Result<C64> {
        self.w_required()?;
        Ok(self.blaschke.eval(z) / (self.leading.conj() * z))
    }
}

/// Blaschke product of `u`, the vectors `v` and `w`, and the invariants
/// `S` and `S̃`, with symbols truncated to `cutoff` modes.
pub fn blaschke_decompose(sym: &RationalSymbol, cutoff: usize) -> Result<BlaschkeDecomposition> {
    let rank = sym.rank();
    let mut poles = sym.poles()?;
    let has_constant = sym.has_constant_chart();
    poles.resize(rank, ZERO);
    let blaschke = BlaschkeProduct { poles: poles.clone() };
    let leading = sym.numerator.get(rank - 1).copied().unwrap_or(ZERO);
    let s = poles.iter().product::<C64>().norm_sqr();
    let sign = if rank % 2 == 0 { 1.0 } else { -1.0 };
    let v = blaschke.to_fourier(cutoff).scale(poles.iter().product::<C64>() * sign);
    let (w, s_tilde) = if has_constant {
        // b = z·b̃, drop one padded zero pole
        let mut reduced = poles.clone();
        let idx = reduced.iter().rposition(|p| *p == ZERO).expect("padded zero pole");
        reduced.remove(idx);
        let w = BlaschkeProduct { poles: reduced }.to_fourier(cutoff).scale(ONE / leading.conj());
        (Some(w), Some(leading.norm_sqr()))
    } else {
        (None, None)
    };
    Ok(BlaschkeDecomposition { rank, poles, blaschke, v, w, s, s_tilde, leading })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    /// `max |i∂ₜv − |u|²v|` on the circle grid.
    pub v_residual: f64,
    /// `max |i∂ₜb − (|u|² − Q)b|`.
    pub b_residual: f64,
    /// `|Q − i∂ₜ(p_1⋯p_N)/(p_1⋯p_N)|` (only when the product is nonzero).
    pub product_residual: Option<f64>,
    /// `|i∂ₜa − Qa|` in the constant-term chart.
    pub a_residual: Option<f64>,
    /// `max |i∂ₜw − |u|²w|` in the constant-term chart.
    pub w_residual: Option<f64>,
}

/// Central finite-difference residuals of the evolution laws for `v`, `b`,
/// `p_1⋯p_N`, `a` and `w` along a coordinate trajectory, on a 256-point
/// circle grid.
pub fn evolution_checks(series: &RationalSeries) -> Result<EvolutionReport> {
    const GRID: usize = 256;
    if series.states.len() < 3 {
        return Err(SzegoError::InvalidParameter("need at least 3 samples".into()));
    }
    let zs: Vec<C64> = (0..GRID).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / GRID as f64)).collect();
    let decomps: Vec<BlaschkeDecomposition> =
        series.states.iter().map(|s| s.to_symbol().and_then(|sym| blaschke_decompose(&sym, 1))).collect::<Result<_>>()?;
    let constant_chart = series.states[0].constant.is_some();
    let mut report = EvolutionReport {
        product_residual: (!constant_chart).then_some(0.0),
        a_residual: constant_chart.then_some(0.0),
        w_residual: constant_chart.then_some(0.0),
        ..EvolutionReport::default()
    };
    for i in 1..series.states.len() - 1 {
        let h = series.times[i + 1] - series.times[i - 1];
        let st = &series.states[i];
        let q = st.mass();
        let (prev, cur, next) = (&decomps[i - 1], &decomps[i], &decomps[i + 1]);
        for &z in &zs {
            let u2 = st.eval(z).norm_sqr();
            let dv = (next.v_eval(z) - prev.v_eval(z)) / h;
            report.v_residual = report.v_residual.max((I * dv - u2 * cur.v_eval(z)).norm());
            let db = (next.blaschke.eval(z) - prev.blaschke.eval(z)) / h;
            report.b_residual = report.b_residual.max((I * db - (u2 - q) * cur.blaschke.eval(z)).norm());
            if let Some(w_res) = report.w_residual.as_mut() {
                let dw = (next.w_eval(z)? - prev.w_eval(z)?) / h;
                *w_res = w_res.max((I * dw - u2 * cur.w_eval(z)?).norm());
            }
        }
        if let Some(pr) = report.product_residual.as_mut() {
            let prod = |s: &RationalState| s.poles.iter().product::<C64>();
            let d = (prod(&series.states[i + 1]) - prod(&series.states[i - 1])) / h;
            *pr = pr.max((q - I * d / prod(st)).norm());
        }
        if let Some(ar) = report.a_residual.as_mut() {
            let lead = |s: &RationalState| s.leading_coefficient().expect("constant chart");
            let d = (lead(&series.states[i + 1]) - lead(&series.states[i - 1])) / h;
            *ar = ar.max((I * d - q * lead(st)).norm());
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsGrowthRow {
    pub eps: f64,
    /// `π / (ε√(4+ε²))`, the first time `|p|` reaches its maximum.
    pub t_eps: f64,
    pub hs_norm: f64,
    pub p_modulus: f64,
    pub rho_max: f64,
    /// Largest `H^s` norm sampled over the requested number of periods.
    pub sup_hs_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsGrowthTable {
    pub s: f64,
    pub rows: Vec<HsGrowthRow>,
    /// Least-squares slope of `log ‖u(t^ε)‖_{H^s}` against `log t^ε`.
    pub slope: f64,
}

/// `‖u^ε(t^ε)‖_{H^s}` for `u₀ = z + ε` from the exact solution, with the
/// fitted growth exponent across the sweep.
pub fn hs_growth_series(eps_list: &[f64], s: f64, n_periods: usize) -> Result<HsGrowthTable> {
    if !(s > 0.5) {
        return Err(SzegoError::InvalidParameter(format!("s = {s} must exceed 1/2")));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(SzegoError::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
        }
        let sol = MTilde1Solution::new(ONE, C64::new(eps, 0.0), ZERO)?;
        let t_eps = PI / (eps * (4.0 + eps * eps).sqrt());
        let (a, b, p) = sol.at(t_eps);
        let hs_norm = rational_hs_norm(a, b, p, s);
        let samples = 400 * n_periods.max(1);
        let horizon = sol.period() * n_periods.max(1) as f64;
        let mut sup_hs_norm: f64 = 0.0;
        for j in 0..=samples {
            let (a, b, p) = sol.at(horizon * j as f64 / samples as f64);
            sup_hs_norm = sup_hs_norm.max(rational_hs_norm(a, b, p, s));
        }
        rows.push(HsGrowthRow { eps, t_eps, hs_norm, p_modulus: p.norm(), rho_max: sol.rho_max, sup_hs_norm });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.t_eps.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.hs_norm.ln()).collect();
    Ok(HsGrowthTable { s, slope: least_squares_slope(&xs, &ys), rows })
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::rhs_szego;
    use crate::hankel::{hankel_matrix, hankel_square_spectrum, apply_hankel};
    use crate::hardy::energy;
    use crate::ode::{AdaptiveTolerances, Scheme};
    use crate::random::{random_poles, random_residues, seeded};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn plan(dt: f64, t_end: f64, every: usize) -> StepPlan {
        StepPlan { dt, t_end, sample_every: every, scheme: Scheme::Rk4, tolerances: AdaptiveTolerances::default() }
    }

    /// Finite-difference push-forward of a coordinate velocity to Fourier modes.
    fn pushed_field(state: &RationalState, velocity: &RationalState, cutoff: usize) -> FourierSymbol {
        let h = 1e-6;
        let shift = |sign: f64| {
            let mv = |x: &C64, v: &C64| x + v * (sign * h);
            RationalState {
                residues: state.residues.iter().zip(&velocity.residues).map(|(x, v)| mv(x, v)).collect(),
                poles: state.poles.iter().zip(&velocity.poles).map(|(x, v)| mv(x, v)).collect(),
                constant: state.constant.zip(velocity.constant).map(|(x, v)| mv(&x, &v)),
            }
        };
        let plus = rational_to_fourier(&shift(1.0), cutoff).unwrap();
        let minus = rational_to_fourier(&shift(-1.0), cutoff).unwrap();
        (&plus - &minus).scale(c(0.5 / h, 0.0))
    }

    /// Alternative reading of the pole equation with `α_k` in the numerator.
    fn index_variant(state: &RationalState) -> RationalState {
        let mut v = eqn_rhs(state).unwrap();
        let (a, p) = state.extended();
        for j in 0..state.poles.len() {
            let s: C64 = (0..a.len()).map(|k| a[k] * a[k].conj() / (ONE - p[j] * p[k].conj())).sum();
            v.poles[j] = MINUS_I * s * p[j];
        }
        v
    }

    #[test]
    fn fourier_examples() {
        let one = rational_to_fourier(&RationalState::single(ONE, ZERO), 4).unwrap();
        assert_eq!(one, FourierSymbol::constant(ONE));
        let g = rational_to_fourier(&RationalState::single(ONE, c(0.5, 0.0)), 3).unwrap();
        assert_eq!(g, FourierSymbol::from_real(&[1.0, 0.5, 0.25]).unwrap());
        assert!(rational_to_fourier(&RationalState::single(ONE, c(1.0, 0.0)), 3).is_err());
        let st = RationalState::new(vec![c(1.0, 1.0)], vec![c(0.9, 0.0)], Some(c(0.2, 0.0))).unwrap();
        let k = 40;
        let u = rational_to_fourier(&st, 2000).unwrap();
        let tail = u.coeffs()[k..].iter().map(|c| c.norm()).sum::<f64>();
        assert!(tail <= fourier_tail_bound(&st, k) * (1.0 + 1e-12));
    }

    #[test]
    fn rank_one_reduction_and_trivial_poles() {
        let (alpha, p) = (c(0.7, -0.3), c(0.2, 0.5));
        let d = eqn_rhs(&RationalState::single(alpha, p)).unwrap();
        let den = 1.0 - p.norm_sqr();
        let a2 = alpha.norm_sqr();
        assert!((I * d.residues[0] - alpha * a2 / (den * den)).norm() < 1e-15);
        assert!((I * d.poles[0] - p * a2 / den).norm() < 1e-15);
        let zero_poles = RationalState::new(vec![ONE], vec![ZERO], None).unwrap();
        assert_eq!(eqn_rhs(&zero_poles).unwrap().poles[0], ZERO);
    }

    #[test]
    fn chart_consistency_selects_printed_form() {
        let cutoff = 160;
        let mut rng = seeded(40);
        for _ in 0..5 {
            let poles = random_poles(&mut rng, 2, 0.7, 0.2);
            let state = RationalState::new(random_residues(&mut rng, 2), poles, None).unwrap();
            let spectral = rhs_szego(&rational_to_fourier(&state, cutoff).unwrap());
            let printed = pushed_field(&state, &eqn_rhs(&state).unwrap(), cutoff);
            let variant = pushed_field(&state, &index_variant(&state), cutoff);
            assert!(printed.max_abs_diff(&spectral) < 1e-6, "{}", printed.max_abs_diff(&spectral));
            assert!(variant.max_abs_diff(&spectral) > 1e-3);
        }
        // constant-term chart: same system with one pole at the origin
        let state = RationalState::new(vec![c(0.6, 0.2), c(-0.3, 0.4)], vec![c(0.5, 0.1), c(-0.2, -0.6)], Some(c(0.4, -0.1)))
            .unwrap();
        let spectral = rhs_szego(&rational_to_fourier(&state, cutoff).unwrap());
        let printed = pushed_field(&state, &eqn_rhs(&state).unwrap(), cutoff);
        assert!(printed.max_abs_diff(&spectral) < 1e-6);
    }

    #[test]
    fn collisions_and_circle_are_rejected() {
        let st = RationalState::new(vec![ONE, ONE], vec![c(0.3, 0.0), c(0.3 + 1e-9, 0.0)], None).unwrap();
        assert!(matches!(eqn_rhs(&st), Err(SzegoError::PoleCollision { .. })));
        let st = RationalState::single(ONE, c(1.0 - 1e-9, 0.0));
        assert!(matches!(eqn_rhs(&st), Err(SzegoError::PoleOnCircle { .. })));
    }

    #[test]
    fn conserved_quantities_in_coordinates() {
        let mut rng = seeded(41);
        let state = RationalState::new(random_residues(&mut rng, 3), random_poles(&mut rng, 3, 0.6, 0.1), None).unwrap();
        let u = rational_to_fourier(&state, 200).unwrap();
        assert!((state.mass() - u.norm_sq()).abs() < 1e-12);
        assert!((state.momentum() - u.momentum()).abs() < 1e-11);
        let series = integrate_rational(&state, &plan(1e-3, 2.0, 100)).unwrap();
        let s0 = series.s[0];
        assert!(series.s.iter().all(|s| (s - s0).abs() < 1e-9 * s0.max(1e-300)));
        let q0 = series.states[0].mass();
        assert!(series.states.iter().all(|s| (s.mass() - q0).abs() < 1e-9));
    }

    #[test]
    fn s_tilde_conserved_in_constant_chart() {
        let st = RationalState::new(vec![c(0.5, 0.1)], vec![c(0.4, 0.3)], Some(c(0.8, -0.2))).unwrap();
        let series = integrate_rational(&st, &plan(1e-3, 3.0, 50)).unwrap();
        let s0 = series.s_tilde[0].unwrap();
        for s in &series.s_tilde {
            assert!((s.unwrap() - s0).abs() < 1e-9);
        }
        assert!(series.s.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn m1_examples() {
        let (omega, speed) = m1_frequencies(ONE, c(0.5, 0.0));
        assert!((omega - 16.0 / 9.0).abs() < 1e-15 && (speed - 4.0 / 3.0).abs() < 1e-15);
        let (a, p) = m1_solution(ONE, ZERO, 2.0);
        assert!((a - C64::from_polar(1.0, -2.0)).norm() < 1e-15 && p == ZERO);
        let series = integrate_rational(&RationalState::single(ONE, c(0.5, 0.0)), &plan(1e-3, 10.0, 10000)).unwrap();
        let last = series.states.last().unwrap();
        let (a, p) = m1_solution(ONE, c(0.5, 0.0), 10.0);
        assert!((last.residues[0] - a).norm() < 1e-10 && (last.poles[0] - p).norm() < 1e-10);
    }

    #[test]
    fn mtilde1_stationary_and_eps_family() {
        let (_, sol) = mtilde1_solution(ONE, ZERO, ZERO, 0.0).unwrap();
        assert!(sol.stationary && sol.q == 1.0 && sol.m == 1.0 && sol.s_tilde == 1.0);
        let (a, b, p) = sol.at(1.5);
        assert!((a - C64::from_polar(1.0, -1.5)).norm() < 1e-15 && b == ZERO && p == ZERO);

        let eps = 0.1;
        let sol = MTilde1Solution::new(ONE, c(eps, 0.0), ZERO).unwrap();
        assert!((sol.omega - eps * (4.0 + eps * eps).sqrt()).abs() < 1e-14);
        for j in 0..50 {
            let t = j as f64 * 0.7;
            let (_, _, p) = sol.at(t);
            let expect = 2.0 / (4.0 + eps * eps) * (1.0 - (eps * t * (4.0 + eps * eps).sqrt()).cos());
            assert!((p.norm_sqr() - expect).abs() < 1e-12);
        }
        let (fp, fm) = sol.f_moduli_from_invariants();
        assert!((sol.f_plus0.norm() - fp).abs() < 1e-13 && (sol.f_minus0.norm() - fm).abs() < 1e-13);
        let u = mtilde1_to_fourier(ONE, c(eps, 0.0), ZERO, 8);
        assert!((energy(&u) - sol.energy()).abs() < 1e-13);
        assert!(MTilde1Solution::new(c(-0.5, 0.0), ONE, c(0.5, 0.0)).is_err());
        assert!(MTilde1Solution::new(ZERO, ONE, c(0.5, 0.0)).is_err());
    }

    #[test]
    fn mtilde1_closed_form_matches_ode_and_spectral_field() {
        let (a0, b0, p0) = (c(0.8, 0.3), c(-0.4, 0.5), c(0.3, -0.45));
        let sol = MTilde1Solution::new(a0, b0, p0).unwrap();
        let series = integrate_mtilde1(a0, b0, p0, &plan(5e-4, 5.0, 1000)).unwrap();
        for (t, y) in series.times.iter().zip(&series.states) {
            let (a, b, p) = sol.at(*t);
            assert!((y[0] - a).norm() + (y[1] - b).norm() + (y[2] - p).norm() < 1e-9, "t={t} {y:?} {:?}", (a, b, p));
        }
        // the (a, b, p) velocity pushed to Fourier modes equals the Szegő field
        let k = 120;
        let y = [a0, b0, p0];
        let v = mtilde1_rhs(&y).unwrap();
        let h = 1e-6;
        let at = |s: f64| mtilde1_to_fourier(y[0] + v[0] * s, y[1] + v[1] * s, y[2] + v[2] * s, k);
        let pushed = (&at(h) - &at(-h)).scale(c(0.5 / h, 0.0));
        assert!(pushed.max_abs_diff(&rhs_szego(&mtilde1_to_fourier(a0, b0, p0, k))) < 1e-7);
    }

    #[test]
    fn rho_bounds_enclose_orbit() {
        let (a0, b0, p0) = (c(0.8, 0.3), c(-0.4, 0.5), c(0.3, -0.45));
        let sol = MTilde1Solution::new(a0, b0, p0).unwrap();
        let n = 4000;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..=n {
            let (_, _, p) = sol.at(sol.period() * j as f64 / n as f64);
            lo = lo.min(p.norm());
            hi = hi.max(p.norm());
        }
        assert!(lo >= sol.rho_min - 1e-12 && hi <= sol.rho_max + 1e-12);
        assert!((lo - sol.rho_min).abs() < 1e-6 && (hi - sol.rho_max).abs() < 1e-6, "{lo} {hi} {sol:?}");
        let times: Vec<f64> = (0..200).map(|j| j as f64 * 2.0 * sol.period() / 200.0).collect();
        let vals: Vec<f64> = times.iter().map(|&t| sol.at(t).2.norm_sqr()).collect();
        let (_, resid) = fit_cosine(&times, &vals, sol.omega);
        assert!(resid.iter().all(|r| r.abs() < 1e-9));
    }

    #[test]
    fn blaschke_examples() {
        let p = c(0.3, -0.4);
        let alpha = c(1.2, 0.0);
        let sym = RationalState::single(alpha, p).to_symbol().unwrap();
        let d = blaschke_decompose(&sym, 64).unwrap();
        assert_eq!(d.rank, 1);
        assert!((d.poles[0] - p).norm() < 1e-14);
        assert!(d.w.is_none() && d.w_required().is_err());
        for j in 0..256 {
            let z = C64::from_polar(1.0, 2.0 * PI * j as f64 / 256.0);
            assert!((d.v_eval(z) - (-p) * d.blaschke.eval(z)).norm() < 1e-14);
            assert!((d.v_eval(z).norm() - p.norm()).abs() < 1e-14);
        }

        // z + ε has rank 2 with b = z² and w = z
        let eps = 0.3;
        let sym = RationalSymbol::new(vec![c(eps, 0.0), ONE], vec![ONE]).unwrap();
        let d = blaschke_decompose(&sym, 8).unwrap();
        assert_eq!(d.rank, 2);
        assert_eq!(d.s_tilde, Some(1.0));
        assert!(d.v.is_zero() && d.s == 0.0);
        let w = d.w_required().unwrap();
        assert_eq!(*w, FourierSymbol::monomial(1, ONE));
        let u = sym.to_fourier(8).unwrap();
        let hw = apply_hankel(&hankel_matrix(&u, 8).unwrap(), w).unwrap();
        assert!(hw.approx_eq(&FourierSymbol::constant(ONE), 1e-15));

        let mut rng = seeded(42);
        let poles = random_poles(&mut rng, 5, 0.95, 0.05);
        let b = BlaschkeProduct { poles };
        for j in 0..256 {
            let z = C64::from_polar(1.0, 2.0 * PI * j as f64 / 256.0);
            assert!((b.eval(z).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_to_kernel_equals_s() {
        let mut rng = seeded(43);
        for n in 1..=4 {
            let state = RationalState::new(random_residues(&mut rng, n), random_poles(&mut rng, n, 0.6, 0.15), None).unwrap();
            let k = 96;
            let u = rational_to_fourier(&state, k).unwrap();
            let spec = hankel_square_spectrum(&u, k, Some(1e-10)).unwrap();
            assert_eq!(spec.rank, n);
            // P_u(1) from the eigenvectors spanning Im H_u
            let mut proj = vec![ZERO; k];
            for col in 0..n {
                let e = spec.eigenvectors.column(col);
                let coef = e[0].conj();
                for r in 0..k {
                    proj[r] += e[r] * coef;
                }
            }
            proj[0] -= ONE;
            let dist2: f64 = proj.iter().map(|c| c.norm_sqr()).sum();
            let d = blaschke_decompose(&state.to_symbol().unwrap(), k).unwrap();
            assert!((dist2 - d.s).abs() < 1e-10, "n={n}: {dist2} vs {}", d.s);
            assert!((d.v.norm_sq() - d.s).abs() < 1e-10);
            let minus_v = d.v.scale(c(-1.0, 0.0));
            assert!(FourierSymbol::new(proj).unwrap().approx_eq(&minus_v, 1e-8));
        }
    }

    #[test]
    fn evolution_laws_on_orbits() {
        let series = integrate_rational(&RationalState::single(ONE, c(0.5, 0.0)), &plan(2e-4, 0.2, 1)).unwrap();
        let r = evolution_checks(&series).unwrap();
        assert!(r.v_residual < 1e-5 && r.b_residual < 1e-5, "{r:?}");
        assert!(r.product_residual.unwrap() < 1e-6);
        let st = RationalState::new(vec![c(0.5, 0.1)], vec![c(0.4, 0.3)], Some(c(0.8, -0.2))).unwrap();
        let series = integrate_rational(&st, &plan(2e-4, 0.2, 1)).unwrap();
        let r = evolution_checks(&series).unwrap();
        assert!(r.b_residual < 1e-5 && r.a_residual.unwrap() < 1e-6 && r.w_residual.unwrap() < 1e-5, "{r:?}");
        assert_eq!(r.v_residual, 0.0);
    }

    #[test]
    fn hs_growth_examples() {
        let table = hs_growth_series(&[0.1, 0.05, 0.025], 1.0, 1).unwrap();
        assert!((table.rows[0].t_eps - 15.69).abs() < 0.01);
        assert!((table.slope - 1.0).abs() < 0.1, "{table:?}");
        for row in &table.rows {
            assert!((row.p_modulus - row.rho_max).abs() < 1e-12);
            assert!(row.sup_hs_norm >= row.hs_norm * (1.0 - 1e-9));
            assert!(row.sup_hs_norm <= row.hs_norm * (1.0 + 1e-3));
        }
        assert!(hs_growth_series(&[0.1], 0.5, 1).is_err());
        assert!(hs_growth_series(&[1.5], 1.0, 1).is_err());
    }

    #[test]
    fn hs_norm_series_matches_fourier() {
        let (a, b, p) = (c(0.8, 0.3), c(-0.4, 0.5), c(0.3, -0.45));
        let u = mtilde1_to_fourier(a, b, p, 200);
        for s in [0.0, 1.0, 2.0] {
            assert!((rational_hs_norm(a, b, p, s) - u.hs_norm(s)).abs() < 1e-12);
        }
    }
}
