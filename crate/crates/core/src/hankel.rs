//! Matrix realizations of Hankel, Toeplitz and Lax operators.
//!
//! Hankel operators are antilinear, so operators are carried as a matrix plus
//! a conjugation flag ([`RealLinearOp`]): the antilinear operator with matrix
//! `A` acts as `h ↦ A·conj(h)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::hardy::{cubic_nonlinearity, FourierSymbol, TwoSidedSymbol, C64};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const I: C64 = C64::new(0.0, 1.0);

fn conj_mat(m: &CMat) -> CMat {
    m.map(|c| c.conj())
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// A real-linear operator that is either complex-linear (`h ↦ A h`) or
/// antilinear (`h ↦ A conj(h)`).
#[derive(Debug, Clone, PartialEq)]
pub struct RealLinearOp {
    pub matrix: CMat,
    pub antilinear: bool,
}

impl RealLinearOp {
    pub fn linear(matrix: CMat) -> Self {
        Self { matrix, antilinear: false }
    }

    pub fn antilinear(matrix: CMat) -> Self {
        Self { matrix, antilinear: true }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, h: &CVec) -> CVec {
        if self.antilinear {
            &self.matrix * h.map(|c| c.conj())
        } else {
            &self.matrix * h
        }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let matrix = if self.antilinear { &self.matrix * conj_mat(&rhs.matrix) } else { &self.matrix * &rhs.matrix };
        Self { matrix, antilinear: self.antilinear ^ rhs.antilinear }
    }

    fn combine(&self, rhs: &Self, sign: f64) -> Result<Self> {
        if self.antilinear != rhs.antilinear {
            return Err(SzegoError::InvalidParameter("cannot add a linear and an antilinear operator".into()));
        }
        if self.matrix.shape() != rhs.matrix.shape() {
            return Err(SzegoError::Dimension { expected: self.size(), got: rhs.size() });
        }
        Ok(Self { matrix: &self.matrix + rhs.matrix.scale(sign), antilinear: self.antilinear })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.combine(rhs, -1.0)
    }

    /// `h ↦ c·self(h)`.
    pub fn scale(&self, c: C64) -> Self {
        Self { matrix: &self.matrix * c, antilinear: self.antilinear }
    }

    /// `[self, rhs] = self∘rhs − rhs∘self`.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.compose(rhs).sub(&rhs.compose(self))
    }

    pub fn op_norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelRep {
    pub gamma: CMat,
    pub source_cutoff: usize,
}

impl HankelRep {
    pub fn size(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn op(&self) -> RealLinearOp {
        RealLinearOp::antilinear(self.gamma.clone())
    }

    /// Matrix of the complex-linear operator `H_u²`.
    pub fn square(&self) -> CMat {
        &self.gamma * conj_mat(&self.gamma)
    }
}

pub fn symbol_to_vec(h: &FourierSymbol, size: usize) -> CVec {
    CVec::from_iterator(size, (0..size).map(|k| h.coeff(k)))
}

pub fn vec_to_symbol(v: &CVec) -> FourierSymbol {
    FourierSymbol::new(v.iter().copied().collect()).expect("operator output is finite")
}

/// `gamma[k][l] = û(k+l)` of size `k_op`.
pub fn hankel_matrix(u: &FourierSymbol, k_op: usize) -> Result<HankelRep> {
    if k_op < 1 {
        return Err(SzegoError::InvalidParameter("operator size must be at least 1".into()));
    }
    let gamma = CMat::from_fn(k_op, k_op, |k, l| u.coeff(k + l));
    Ok(HankelRep { gamma, source_cutoff: u.cutoff() })
}

/// `H_u(h) = gamma · conj(h)`.
pub fn apply_hankel(rep: &HankelRep, h: &FourierSymbol) -> Result<FourierSymbol> {
    let n = rep.size();
    if h.cutoff() > n {
        return Err(SzegoError::Dimension { expected: n, got: h.cutoff() });
    }
    Ok(vec_to_symbol(&rep.op().apply(&symbol_to_vec(h, n))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzRep {
    pub matrix: CMat,
}

impl ToeplitzRep {
    pub fn op(&self) -> RealLinearOp {
        RealLinearOp::linear(self.matrix.clone())
    }
}

/// `entry[k][j] = b̂(k − j)`.
pub fn toeplitz_matrix(b: &TwoSidedSymbol, k_op: usize) -> ToeplitzRep {
    ToeplitzRep { matrix: CMat::from_fn(k_op, k_op, |k, j| b.coeff(k as i64 - j as i64)) }
}

/// Multiplication by `k` on the first `k_op` modes.
pub fn derivative_matrix(k_op: usize) -> CMat {
    CMat::from_fn(k_op, k_op, |k, j| if k == j { C64::new(k as f64, 0.0) } else { C64::new(0.0, 0.0) })
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues of `H_u²`, descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: CMat,
    pub rank: usize,
    /// Elementary symmetric functions `σ_1, …, σ_rank` of the retained eigenvalues.
    pub sigma: Vec<f64>,
    /// `|Σλ − (M + Q)|`.
    pub trace_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub sigma: Vec<f64>,
    pub trace_residual: f64,
}

impl SpectralData {
    pub fn report(&self) -> SpectralReport {
        SpectralReport {
            eigenvalues: self.eigenvalues.clone(),
            rank: self.rank,
            sigma: self.sigma.clone(),
            trace_residual: self.trace_residual,
        }
    }
}

/// `σ_j` of a list of values via the product `∏(1 + λ x)`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e.remove(0);
    e
}

/// Squared singular values of `gamma` with left singular vectors, descending.
///
/// `gamma` is complex symmetric, so `gamma·conj(gamma) = gamma·gamma*` and
/// these are the eigenpairs of `H_u²`. The SVD stays finite on the very
/// sparse matrices of low-degree symbols, where the Hermitian eigensolver
/// can break down.
fn hankel_square_svd(u: &FourierSymbol, k_op: usize, vectors: bool) -> Result<(Vec<f64>, Option<CMat>)> {
    let gamma = hankel_matrix(u, k_op)?.gamma;
    let svd = gamma.svd(vectors, false);
    let order = {
        let mut o: Vec<usize> = (0..svd.singular_values.len()).collect();
        o.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        o
    };
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SzegoError::Eigensolver("non-finite singular value".into()));
    }
    let vecs = match (vectors, svd.u) {
        (true, Some(uu)) => Some(CMat::from_fn(k_op, k_op, |r, c| uu[(r, order[c])])),
        (true, None) => return Err(SzegoError::Eigensolver("singular vectors unavailable".into())),
        (false, _) => None,
    };
    Ok((values, vecs))
}

/// Eigenvalues of `H_u²`, descending.
pub fn hankel_square_eigenvalues(u: &FourierSymbol, k_op: usize) -> Result<Vec<f64>> {
    Ok(hankel_square_svd(u, k_op, false)?.0)
}

/// Default relative rank threshold for an operator of size `k_op`.
pub fn default_rank_tol(k_op: usize) -> f64 {
    k_op as f64 * f64::EPSILON
}

/// Eigendecomposition of `H_u² = gamma·conj(gamma)`.
pub fn hankel_square_spectrum(u: &FourierSymbol, k_op: usize, rank_tol: Option<f64>) -> Result<SpectralData> {
    let (eigenvalues, eigenvectors) = hankel_square_svd(u, k_op, true)?;
    let eigenvectors = eigenvectors.expect("requested");
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(k_op));
    let lmax = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues.iter().filter(|&&l| lmax > 0.0 && l > tol * lmax).count();
    let sigma = elementary_symmetric(&eigenvalues[..rank]);
    let trace: f64 = eigenvalues.iter().sum();
    let trace_residual = (trace - u.h_half_weighted_sq()).abs();
    Ok(SpectralData { eigenvalues, eigenvectors, rank, sigma, trace_residual })
}

/// `H_u^j(1)` for `j = 0, …, n`, computed exactly at the symbol's cutoff
/// (the range of `H_u` lies in the span of the first `K` modes).
pub fn hankel_powers_of_one(u: &FourierSymbol, n: usize) -> Vec<FourierSymbol> {
    let k = u.cutoff();
    let op = RealLinearOp::antilinear(CMat::from_fn(k, k, |a, b| u.coeff(a + b)));
    let mut v = CVec::from_element(k, C64::new(0.0, 0.0));
    v[0] = C64::new(1.0, 0.0);
    let mut out = vec![vec_to_symbol(&v)];
    for _ in 0..n {
        v = op.apply(&v);
        out.push(vec_to_symbol(&v));
    }
    out
}

/// `J_n(u) = (H_u^n(1)|1)`.
pub fn conserved_j(u: &FourierSymbol, n: usize) -> C64 {
    hankel_powers_of_one(u, n)[n].coeff(0)
}

/// `B_u = (i/2) H_u² − i T_{|u|²}` as a linear operator.
pub fn lax_b_operator(u: &FourierSymbol, k_op: usize) -> Result<RealLinearOp> {
    let sq = hankel_matrix(u, k_op)?.square();
    let t = toeplitz_matrix(&TwoSidedSymbol::modulus_squared(u), k_op).matrix;
    Ok(RealLinearOp::linear(sq * (I * 0.5) - t * I))
}

/// `‖H_{Π(|u|²u)} − (T H + H T − H³)‖` with `T = T_{|u|²}`, evaluated at
/// operator size `4d + 1` where every product is exact.
pub fn rio_residual(u: &FourierSymbol) -> f64 {
    let d = u.degree();
    let k_op = 4 * d + 1;
    let f = cubic_nonlinearity(u);
    let hf = hankel_matrix(&f, k_op).expect("positive size").op();
    let h = hankel_matrix(u, k_op).expect("positive size").op();
    let t = toeplitz_matrix(&TwoSidedSymbol::modulus_squared(u), k_op).op();
    let rhs = t.compose(&h).add(&h.compose(&t)).and_then(|s| s.sub(&h.compose(&h).compose(&h)));
    hf.sub(&rhs.expect("both antilinear")).expect("both antilinear").op_norm()
}

fn j_gram(u: &FourierSymbol, n: usize) -> nalgebra::DMatrix<f64> {
    let powers = hankel_powers_of_one(u, 2 * n);
    // entries J_{2(m+n)} = (H^{2m}1 | H^{2n}1)
    nalgebra::DMatrix::from_fn(n, n, |a, b| powers[2 * (a + 1)].inner(&powers[2 * (b + 1)]).re)
}

/// `F_N(u) = det(J_{2(m+n)})_{1≤m,n≤N}`.
pub fn genericity_det(u: &FourierSymbol, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    j_gram(u, n).determinant()
}

/// `F_N` divided by the product of its diagonal entries; lies in `[0, 1]`.
pub fn genericity_det_scaled(u: &FourierSymbol, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let g = j_gram(u, n);
    let diag: f64 = (0..n).map(|i| g[(i, i)]).product();
    if diag <= 0.0 {
        return 0.0;
    }
    g.determinant() / diag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::energy;
    use crate::random::{random_polynomial, random_symbol, seeded};
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn geometric(alpha: C64, p: C64, k: usize) -> FourierSymbol {
        FourierSymbol::new((0..k).map(|j| alpha * p.powu(j as u32)).collect()).unwrap()
    }

    #[test]
    fn small_hankel_matrices() {
        let z = FourierSymbol::monomial(1, c(1.0));
        let g = hankel_matrix(&z, 2).unwrap().gamma;
        assert_eq!(g, CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
        let u = FourierSymbol::from_real(&[1.0, 1.0]).unwrap();
        let g = hankel_matrix(&u, 2).unwrap().gamma;
        assert_eq!(g, CMat::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(0.0)]));
        assert!(hankel_matrix(&u, 0).is_err());
    }

    #[test]
    fn apply_hankel_examples() {
        let mut rng = seeded(10);
        let u = random_symbol(&mut rng, 6, 1.0);
        let rep = hankel_matrix(&u, 6).unwrap();
        let one = FourierSymbol::constant(c(1.0));
        assert!(apply_hankel(&rep, &one).unwrap().approx_eq(&u, 0.0));
        let z = FourierSymbol::monomial(1, c(1.0));
        let rz = hankel_matrix(&z, 2).unwrap();
        assert_eq!(apply_hankel(&rz, &one).unwrap(), z);
        let h = random_symbol(&mut rng, 6, 1.0);
        let got = apply_hankel(&rep, &h).unwrap();
        for k in 0..6 {
            let brute: C64 = (0..6).map(|l| u.coeff(k + l) * h.coeff(l).conj()).sum();
            assert!((got.coeff(k) - brute).norm() < 1e-13);
        }
        assert!(apply_hankel(&rz, &random_symbol(&mut rng, 3, 1.0)).is_err());
    }

    #[test]
    fn spectrum_of_one_plus_z() {
        let u = FourierSymbol::from_real(&[1.0, 1.0]).unwrap();
        let rep = hankel_matrix(&u, 2).unwrap();
        let sq = rep.square();
        assert_eq!(sq, CMat::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(1.0)]));
        let spec = hankel_square_spectrum(&u, 3, None).unwrap();
        let s5 = 5f64.sqrt();
        assert!((spec.eigenvalues[0] - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - (3.0 - s5) / 2.0).abs() < 1e-14);
        assert_eq!(spec.rank, 2);
        assert!((spec.sigma[0] - 3.0).abs() < 1e-14);
        assert!((spec.sigma[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_symbols_have_rank_one() {
        for (alpha, p) in [(c(1.0), c(0.5)), (C64::new(0.3, -0.7), C64::new(-0.4, 0.6)), (c(2.0), c(0.0))] {
            let u = geometric(alpha, p, 64);
            let spec = hankel_square_spectrum(&u, 64, None).unwrap();
            assert_eq!(spec.rank, 1, "alpha={alpha} p={p} eig={:?}", &spec.eigenvalues[..3]);
        }
    }

    #[test]
    fn toeplitz_examples() {
        let one = TwoSidedSymbol::from_pairs(&[(0, c(1.0))]).unwrap();
        assert_eq!(toeplitz_matrix(&one, 4).matrix, CMat::identity(4, 4));
        let eps = 0.25;
        let u = FourierSymbol::from_real(&[eps, 1.0]).unwrap();
        let t = toeplitz_matrix(&TwoSidedSymbol::modulus_squared(&u), 5).matrix;
        for k in 0..5 {
            for j in 0..5 {
                let expect = match k as i64 - j as i64 {
                    0 => 1.0 + eps * eps,
                    1 | -1 => eps,
                    _ => 0.0,
                };
                assert!((t[(k, j)] - c(expect)).norm() < 1e-15);
            }
        }
        let mut rng = seeded(11);
        let v = random_symbol(&mut rng, 7, 1.0);
        let t = toeplitz_matrix(&TwoSidedSymbol::modulus_squared(&v), 9).matrix;
        assert!((&t - t.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn j_values() {
        let mut rng = seeded(12);
        let u = random_symbol(&mut rng, 10, 1.0);
        assert!((conserved_j(&u, 1) - u.coeff(0)).norm() < 1e-15);
        let q = u.norm_sq();
        assert!((conserved_j(&u, 2) - c(q)).norm() < 1e-12);
        let j4 = conserved_j(&u, 4);
        assert!((j4 - c((energy(&u) + q * q) / 2.0)).norm() < 1e-11 * j4.norm());
        assert!(conserved_j(&u, 6).im.abs() < 1e-12 * conserved_j(&u, 6).re);
    }

    #[test]
    fn lax_operator_examples() {
        let zero = FourierSymbol::zeros(4);
        assert_eq!(lax_b_operator(&zero, 7).unwrap().matrix, CMat::zeros(7, 7));
        let mut rng = seeded(13);
        let u = random_polynomial(&mut rng, 5, 1.0);
        let k_op = 11;
        let b = lax_b_operator(&u, k_op).unwrap();
        assert!((&b.matrix + b.matrix.adjoint()).norm() < 1e-12);
        let mut one = CVec::zeros(k_op);
        one[0] = c(1.0);
        let sq = hankel_matrix(&u, k_op).unwrap().square();
        let expect = (&sq * &one) * C64::new(0.0, -0.5);
        assert!((b.apply(&one) - expect).norm() < 1e-13);
    }

    #[test]
    fn rio_residual_examples() {
        assert_eq!(rio_residual(&FourierSymbol::zeros(3)), 0.0);
        assert!(rio_residual(&FourierSymbol::from_real(&[1.0, 1.0]).unwrap()) < 1e-12);
    }

    #[test]
    fn antilinear_composition_rules() {
        let mut rng = seeded(14);
        let a = CMat::from_fn(3, 3, |_, _| crate::random::random_complex(&mut rng, 1.0));
        let b = CMat::from_fn(3, 3, |_, _| crate::random::random_complex(&mut rng, 1.0));
        let h = CVec::from_fn(3, |_, _| crate::random::random_complex(&mut rng, 1.0));
        for fa in [false, true] {
            for fb in [false, true] {
                let oa = RealLinearOp { matrix: a.clone(), antilinear: fa };
                let ob = RealLinearOp { matrix: b.clone(), antilinear: fb };
                let direct = oa.apply(&ob.apply(&h));
                assert!((oa.compose(&ob).apply(&h) - direct).norm() < 1e-13);
            }
        }
        let lin = RealLinearOp::linear(a.clone());
        assert!(lin.add(&RealLinearOp::antilinear(a)).is_err());
    }

    #[test]
    fn genericity_examples() {
        let phi = geometric(C64::new(0.7, 0.2), C64::new(0.3, -0.5), 80);
        assert!(genericity_det_scaled(&phi, 2).abs() < 1e-10);
        let u = FourierSymbol::from_real(&[1.0, 1.0]).unwrap();
        assert!(genericity_det(&u, 2) > 1e-3);
        assert!(genericity_det(&u, 1) > 0.0);
        for n in 1..=4 {
            let mut coeffs = vec![0.0; n];
            coeffs[n - 1] = 1.0;
            if n >= 2 {
                coeffs[n - 2] = 1.0;
            }
            let v = FourierSymbol::from_real(&coeffs).unwrap();
            let (raw, scaled) = (genericity_det(&v, n), genericity_det_scaled(&v, n));
            assert!(raw > 0.0 && scaled > 1e-12, "N = {n}");
        }
    }

    #[test]
    fn elementary_symmetric_small() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0]), vec![6.0, 11.0, 6.0]);
        assert!(elementary_symmetric(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn hankel_symmetry_and_trace(seed in 0u64..200, k in 1usize..20) {
            let mut rng = seeded(seed);
            let u = random_symbol(&mut rng, k, 1.0);
            let rep = hankel_matrix(&u, k).unwrap();
            let h1 = random_symbol(&mut rng, k, 1.0);
            let h2 = random_symbol(&mut rng, k, 1.0);
            let a = apply_hankel(&rep, &h1).unwrap().inner(&h2);
            let b = apply_hankel(&rep, &h2).unwrap().inner(&h1);
            prop_assert!((a - b).norm() < 1e-13 * (1.0 + a.norm()));
            let spec = hankel_square_spectrum(&u, 2 * k - 1, None).unwrap();
            prop_assert!(spec.trace_residual < 1e-12 * u.h_half_weighted_sq().max(1.0));
            prop_assert!(spec.eigenvalues.iter().all(|&l| l >= -1e-12 * spec.eigenvalues[0]));
        }

        #[test]
        fn rio_identity_on_random_polynomials(seed in 0u64..100, d in 0usize..9) {
            let mut rng = seeded(seed);
            let u = random_polynomial(&mut rng, d, 1.0);
            prop_assert!(rio_residual(&u) < 1e-11);
        }
    }
}
