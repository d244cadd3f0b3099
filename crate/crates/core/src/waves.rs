//! Stationary and traveling waves `u(t, z) = e^{−iωt} u₀(e^{−ict} z)` and
//! their certification.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::flow::{integrate, Field, FlowConfig, MonitorOptions};
use crate::hankel::{derivative_matrix, hankel_matrix, toeplitz_matrix, RealLinearOp};
use crate::hardy::{cubic_nonlinearity_with_cutoff, evaluate_on_grid, FourierSymbol, TwoSidedSymbol, C64};
use crate::rational::BlaschkeProduct;

/// Geometric tail bound used to pick the cutoff of wave symbols.
pub const WAVE_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub c: f64,
    pub omega: f64,
    pub n: usize,
    pub ell: usize,
    pub p: C64,
    pub alpha: C64,
    /// Blaschke zeros' conjugates in the stationary case.
    pub poles: Vec<C64>,
    pub cutoff: usize,
}

impl WaveParams {
    /// `S = |p|^{2N}` (zero for stationary waves).
    pub fn s(&self) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.p.norm_sqr().powi(self.n as i32)
        }
    }

    /// `Q = |α|²/(1 − S)`.
    pub fn mass(&self) -> f64 {
        self.alpha.norm_sqr() / (1.0 - self.s())
    }
}

/// `u₀ = α ∏ (z − p̄_j)/(1 − p_j z)` with `ω = |α|²`.
pub fn stationary_wave(poles: &[C64], alpha: C64) -> Result<(FourierSymbol, WaveParams)> {
    if let Some(p) = poles.iter().find(|p| !(p.norm() < 1.0)) {
        return Err(SzegoError::InvalidParameter(format!("pole {p} is not inside the unit disc")));
    }
    let rmax = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let cutoff = tail_cutoff(rmax, 1).max(poles.len() + 1);
    let u = BlaschkeProduct { poles: poles.to_vec() }.to_fourier(cutoff).scale(alpha);
    let omega = alpha.norm_sqr();
    let grid = evaluate_on_grid(&u, 256)?;
    let worst = grid.iter().map(|v| (v.norm_sqr() - omega).abs()).fold(0.0, f64::max);
    if worst > 1e-11 * omega.max(1.0) {
        return Err(SzegoError::InvalidParameter(format!("|u|² deviates from ω by {worst:e}")));
    }
    let params = WaveParams { c: 0.0, omega, n: poles.len(), ell: 0, p: C64::new(0.0, 0.0), alpha, poles: poles.to_vec(), cutoff };
    Ok((u, params))
}

/// Smallest `K` with `r^{NK} < WAVE_TAIL`.
fn tail_cutoff(r: f64, n: usize) -> usize {
    if r == 0.0 {
        return 1;
    }
    (WAVE_TAIL.ln() / (n as f64 * r.ln())).ceil() as usize + 1
}

/// `u₀ = α z^ℓ / (1 − p^N z^N)` with `c = Q/N` and `ω = Q/(1−S) − ℓc`.
pub fn traveling_wave(n: usize, ell: usize, p: C64, alpha: C64) -> Result<(FourierSymbol, WaveParams)> {
    if n == 0 || ell >= n {
        return Err(SzegoError::InvalidParameter(format!("need N ≥ 1 and 0 ≤ ℓ < N, got N = {n}, ℓ = {ell}")));
    }
    if !(p.norm() > 0.0 && p.norm() < 1.0) {
        return Err(SzegoError::InvalidParameter(format!("need 0 < |p| < 1, got {}", p.norm())));
    }
    if alpha.norm() == 0.0 || !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(SzegoError::InvalidParameter("amplitude must be finite and nonzero".into()));
    }
    let ratio = p.powu(n as u32);
    let cutoff = (n * tail_cutoff(p.norm(), n) + ell + 1).max(2);
    let mut coeffs = vec![C64::new(0.0, 0.0); cutoff];
    let mut term = alpha;
    let mut k = ell;
    while k < cutoff {
        coeffs[k] = term;
        term *= ratio;
        k += n;
    }
    let s = ratio.norm_sqr();
    let q = alpha.norm_sqr() / (1.0 - s);
    let c = q / n as f64;
    let omega = q / (1.0 - s) - ell as f64 * c;
    let params = WaveParams { c, omega, n, ell, p, alpha, poles: vec![], cutoff };
    Ok((FourierSymbol::new(coeffs)?, params))
}

/// `‖cDu + ωu − Π(|u|²u)‖` with the nonlinearity kept at full width.
pub fn wave_residual(u: &FourierSymbol, c: f64, omega: f64) -> f64 {
    let k = u.cutoff();
    let full = 3 * k - 2;
    let lhs = u.map(|j, x| x * (c * j as f64 + omega)).resized(full);
    (&lhs - &cubic_nonlinearity_with_cutoff(u, full)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    /// `‖[D − T_{|u|²}/c, H_u²]‖`.
    pub commutator: f64,
    /// `‖AH_u + H_uA + (ω/c)H_u + H_u³/c‖`, when `ω` is given.
    pub operator_identity: Option<f64>,
}

/// Operator-norm commutator check at size `2K − 1`, which is exact for a
/// symbol with `K` modes.
pub fn commutator_check(u: &FourierSymbol, c: f64, omega: Option<f64>) -> Result<CommutatorReport> {
    if c == 0.0 || !c.is_finite() {
        return Err(SzegoError::InvalidParameter("velocity must be finite and nonzero".into()));
    }
    let k_op = 2 * u.cutoff() - 1;
    let h = hankel_matrix(u, k_op)?.op();
    let t = toeplitz_matrix(&TwoSidedSymbol::modulus_squared(u), k_op).op();
    let a = RealLinearOp::linear(derivative_matrix(k_op)).sub(&t.scale(C64::new(1.0 / c, 0.0)))?;
    let h2 = h.compose(&h);
    let commutator = a.commutator(&h2)?.op_norm();
    let operator_identity = match omega {
        Some(w) => {
            let lhs = a
                .compose(&h)
                .add(&h.compose(&a))?
                .add(&h.scale(C64::new(w / c, 0.0)))?
                .add(&h2.compose(&h).scale(C64::new(1.0 / c, 0.0)))?;
            Some(lhs.op_norm())
        }
        None => None,
    };
    Ok(CommutatorReport { commutator, operator_identity })
}

/// `‖u(t) − e^{−iωt}u₀(e^{−ict}·)‖` after integrating to `t_end`.
pub fn orbit_check(u0: &FourierSymbol, c: f64, omega: f64, t_end: f64, dt: f64) -> Result<f64> {
    let cfg = FlowConfig {
        dt,
        t_end,
        sample_every: usize::MAX,
        cutoff: u0.cutoff().max(2),
        monitors: MonitorOptions { hs_orders: vec![], spectrum: false, eig_count: 0, lax: false },
        ..FlowConfig::default()
    };
    let series = integrate(u0, &cfg, Field::Szego)?;
    let numeric = series.final_state().expect("final sample");
    let t = *series.times.last().expect("final sample");
    let exact = u0.resized(cfg.cutoff).map(|k, x| x * C64::from_polar(1.0, -(omega + c * k as f64) * t));
    Ok(numeric.distance(&exact))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveCertificate {
    pub params: WaveParams,
    pub mass: f64,
    pub wave_residual: f64,
    pub commutator: Option<f64>,
    pub operator_identity: Option<f64>,
    pub mass_velocity_gap: f64,
    pub orbit_error: Option<f64>,
}

impl WaveCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Residuals for a constructed wave; the orbit is integrated to `orbit_time`
/// when given.
pub fn certify(u: &FourierSymbol, params: &WaveParams, orbit_time: Option<f64>) -> Result<WaveCertificate> {
    let mass = u.norm_sq();
    let (commutator, operator_identity) = if params.c != 0.0 {
        let r = commutator_check(u, params.c, Some(params.omega))?;
        (Some(r.commutator), r.operator_identity)
    } else {
        (None, None)
    };
    let orbit_error = orbit_time.map(|t| orbit_check(u, params.c, params.omega, t, 1e-3)).transpose()?;
    Ok(WaveCertificate {
        params: params.clone(),
        mass,
        wave_residual: wave_residual(u, params.c, params.omega),
        commutator,
        operator_identity,
        mass_velocity_gap: if params.c != 0.0 { (mass - params.n as f64 * params.c).abs() } else { 0.0 },
        orbit_error,
    })
}
