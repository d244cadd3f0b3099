//! Galerkin time integration of the Szegő flow and its hierarchy, with
//! conservation, isospectrality and Lax-pair monitors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::hankel::{conserved_j, hankel_matrix, hankel_powers_of_one, hankel_square_eigenvalues, lax_b_operator};
use crate::hardy::{cubic_nonlinearity_with_cutoff, energy, FourierSymbol, C64};
use crate::ode::{drive, AdaptiveTolerances, Scheme, StepPlan, StepStats};

const MINUS_I: C64 = C64::new(0.0, -1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorOptions {
    /// Sobolev orders whose norms are recorded each sample.
    pub hs_orders: Vec<f64>,
    /// Record the spectrum of `H_u²` and its drift.
    pub spectrum: bool,
    /// How many leading eigenvalues to keep in the series (all are used for
    /// the drift).
    pub eig_count: usize,
    /// Record the instantaneous Lax residual `‖H_{∂ₜu} − [B_u, H_u]‖`.
    pub lax: bool,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { hs_orders: vec![1.0], spectrum: true, eig_count: 4, lax: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub sample_every: usize,
    /// Number of retained Fourier modes.
    pub cutoff: usize,
    pub tolerances: AdaptiveTolerances,
    pub monitors: MonitorOptions,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 10.0,
            scheme: Scheme::Rk4,
            sample_every: 100,
            cutoff: 128,
            tolerances: AdaptiveTolerances::default(),
            monitors: MonitorOptions::default(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 2 {
            return Err(SzegoError::InvalidParameter(format!("cutoff must be at least 2, got {}", self.cutoff)));
        }
        self.plan().validate()
    }

    pub fn plan(&self) -> StepPlan {
        StepPlan {
            dt: self.dt,
            t_end: self.t_end,
            sample_every: self.sample_every,
            scheme: self.scheme,
            tolerances: self.tolerances,
        }
    }
}

/// Vector field being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    Szego,
    /// Hamiltonian field of `J_{2n}`.
    Hierarchy(usize),
}

/// `−iΠ(|u|²u)` truncated to the cutoff of `u`.
pub fn rhs_szego(u: &FourierSymbol) -> FourierSymbol {
    cubic_nonlinearity_with_cutoff(u, u.cutoff()).scale(MINUS_I)
}

/// `(1/2i) Σ_{j<n} H^{2j}(1) H^{2n−2j−1}(1)` with every frequency kept.
pub fn hierarchy_field_full(u: &FourierSymbol, n: usize) -> Result<FourierSymbol> {
    if n == 0 {
        return Err(SzegoError::InvalidParameter("hierarchy index must be at least 1".into()));
    }
    let powers = hankel_powers_of_one(u, 2 * n - 1);
    let mut acc = FourierSymbol::zeros(2 * u.cutoff() - 1);
    for j in 0..n {
        acc = &acc + &powers[2 * j].product(&powers[2 * n - 2 * j - 1]);
    }
    Ok(acc.scale(C64::new(0.0, -0.5)))
}

/// Hamiltonian field of `J_{2n}` truncated to the cutoff of `u`.
pub fn hierarchy_field(u: &FourierSymbol, n: usize) -> Result<FourierSymbol> {
    Ok(hierarchy_field_full(u, n)?.resized(u.cutoff()))
}

pub fn field_rhs(u: &FourierSymbol, field: Field) -> Result<FourierSymbol> {
    match field {
        Field::Szego => Ok(rhs_szego(u)),
        Field::Hierarchy(n) => hierarchy_field(u, n),
    }
}

/// `ω(X, Y) = 4·Im(X|Y)`.
pub fn symplectic_pairing(x: &FourierSymbol, y: &FourierSymbol) -> f64 {
    let n = x.cutoff().max(y.cutoff());
    4.0 * x.resized(n).inner(&y.resized(n)).im
}

/// `{J_{2n}, J_{2p}}(u)` from the untruncated hierarchy fields.
pub fn poisson_bracket(u: &FourierSymbol, n: usize, p: usize) -> Result<f64> {
    Ok(symplectic_pairing(&hierarchy_field_full(u, n)?, &hierarchy_field_full(u, p)?))
}

/// Instantaneous Lax defect `‖H_{∂ₜu} − [B_u, H_u]‖` at operator size `2K − 1`,
/// where `∂ₜu` is the truncated Szegő field. It vanishes for the full flow and
/// measures the Galerkin truncation otherwise.
pub fn lax_defect(u: &FourierSymbol, dudt: &FourierSymbol) -> f64 {
    let k_op = 2 * u.cutoff() - 1;
    let h = hankel_matrix(u, k_op).expect("positive size").op();
    let hd = hankel_matrix(dudt, k_op).expect("positive size").op();
    let b = lax_b_operator(u, k_op).expect("positive size");
    let comm = b.compose(&h).sub(&h.compose(&b)).expect("both antilinear");
    hd.sub(&comm).expect("both antilinear").op_norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub q: f64,
    pub m: f64,
    pub e: f64,
    pub j6: f64,
    pub j8: f64,
    pub hs: Vec<f64>,
    /// Leading eigenvalues of `H_u²`, descending.
    pub eigenvalues: Vec<f64>,
    /// `max_i |λ_i(t) − λ_i(0)| / λ_max(0)` over the whole spectrum.
    pub spectrum_drift: f64,
    pub lax_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub field: Field,
    pub hs_orders: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<FourierSymbol>,
    pub monitors: Vec<MonitorRow>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub q_drift: f64,
    pub m_drift: f64,
    pub e_drift: f64,
    pub j6_drift: f64,
    pub j8_drift: f64,
    pub eigen_drift: f64,
    pub lax_residual: f64,
}

fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut first = None;
    let mut worst: f64 = 0.0;
    for v in values {
        let v0 = *first.get_or_insert(v);
        let scale = if v0.abs() > 0.0 { v0.abs() } else { 1.0 };
        worst = worst.max((v - v0).abs() / scale);
    }
    worst
}

fn monitor_row(
    u: &FourierSymbol,
    opts: &MonitorOptions,
    field: Field,
    spectrum0: &mut Option<Vec<f64>>,
) -> Result<MonitorRow> {
    let (eigenvalues, spectrum_drift) = if opts.spectrum {
        let eig = hankel_square_eigenvalues(u, u.cutoff())?;
        let reference = spectrum0.get_or_insert_with(|| eig.clone());
        let lmax = reference.first().copied().unwrap_or(0.0);
        let scale = if lmax > 0.0 { lmax } else { 1.0 };
        let drift = eig.iter().zip(reference.iter()).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max);
        (eig.into_iter().take(opts.eig_count).collect(), drift)
    } else {
        (vec![], 0.0)
    };
    let lax_residual = (opts.lax && field == Field::Szego).then(|| lax_defect(u, &rhs_szego(u)));
    Ok(MonitorRow {
        q: u.norm_sq(),
        m: u.momentum(),
        e: energy(u),
        j6: conserved_j(u, 6).re,
        j8: conserved_j(u, 8).re,
        hs: opts.hs_orders.iter().map(|&s| u.hs_norm(s)).collect(),
        eigenvalues,
        spectrum_drift,
        lax_residual,
    })
}

/// Integrates the Galerkin-truncated flow of `field` from `u0` (resized to
/// `cfg.cutoff`), sampling states and monitors.
pub fn integrate(u0: &FourierSymbol, cfg: &FlowConfig, field: Field) -> Result<TimeSeries> {
    cfg.validate()?;
    if let Field::Hierarchy(0) = field {
        return Err(SzegoError::InvalidParameter("hierarchy index must be at least 1".into()));
    }
    let k = cfg.cutoff;
    let y0 = u0.resized(k).into_coeffs();
    let mut series = TimeSeries {
        field,
        hs_orders: cfg.monitors.hs_orders.clone(),
        times: vec![],
        states: vec![],
        monitors: vec![],
        stats: StepStats::default(),
    };
    let mut spectrum0 = None;
    let rhs = |_t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let u = FourierSymbol::new(y.to_vec())?;
        Ok(field_rhs(&u, field)?.into_coeffs())
    };
    let stats = drive(&cfg.plan(), &y0, rhs, |_, t, y| {
        let u = FourierSymbol::new(y.to_vec()).map_err(|_| SzegoError::NanDetected { t })?;
        series.monitors.push(monitor_row(&u, &cfg.monitors, field, &mut spectrum0)?);
        series.times.push(t);
        series.states.push(u);
        Ok(())
    })?;
    series.stats = stats;
    Ok(series)
}

impl TimeSeries {
    /// Drift summary of the recorded monitors.
    pub fn report(&self) -> MonitorReport {
        let col = |f: fn(&MonitorRow) -> f64| relative_drift(self.monitors.iter().map(f));
        MonitorReport {
            q_drift: col(|r| r.q),
            m_drift: col(|r| r.m),
            e_drift: col(|r| r.e),
            j6_drift: col(|r| r.j6),
            j8_drift: col(|r| r.j8),
            eigen_drift: self.monitors.iter().map(|r| r.spectrum_drift).fold(0.0, f64::max),
            lax_residual: self.monitors.iter().filter_map(|r| r.lax_residual).fold(0.0, f64::max),
        }
    }

    pub fn final_state(&self) -> Option<&FourierSymbol> {
        self.states.last()
    }
}

/// Central-difference check of `d/dt H_u = [B_u, H_u]` along a sampled
/// trajectory, together with the spectrum drift relative to the first
/// sample and the drift of the recorded conserved quantities.
pub fn lax_residual_along(series: &TimeSeries) -> Result<MonitorReport> {
    if series.states.len() < 3 {
        return Err(SzegoError::InvalidParameter("need at least 3 samples".into()));
    }
    let k = series.states[0].cutoff();
    let k_op = 2 * k - 1;
    let mut worst: f64 = 0.0;
    for i in 1..series.states.len() - 1 {
        let dt = series.times[i + 1] - series.times[i - 1];
        let du = (&series.states[i + 1] - &series.states[i - 1]).scale(C64::new(1.0 / dt, 0.0));
        let u = &series.states[i];
        let h = hankel_matrix(u, k_op)?.op();
        let b = lax_b_operator(u, k_op)?;
        let comm = b.compose(&h).sub(&h.compose(&b))?;
        worst = worst.max(hankel_matrix(&du, k_op)?.op().sub(&comm)?.op_norm());
    }
    let spec0 = hankel_square_eigenvalues(&series.states[0], k)?;
    let scale = spec0.first().copied().filter(|&l| l > 0.0).unwrap_or(1.0);
    let mut eigen_drift: f64 = 0.0;
    for u in &series.states[1..] {
        let spec = hankel_square_eigenvalues(u, k)?;
        let d = spec.iter().zip(&spec0).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max);
        eigen_drift = eigen_drift.max(d);
    }
    let mut report = series.report();
    report.lax_residual = worst;
    report.eigen_drift = eigen_drift;
    Ok(report)
}

/// `‖u‖²` in the `(k+1)`-weighted `H^{1/2}` norm.
fn h_half_sq(u: &FourierSymbol) -> f64 {
    u.h_half_weighted_sq()
}

/// `G(q) = Σ (k+1) û(k) q^k` and its first two derivatives.
fn weighted_series(u: &FourierSymbol, q: C64) -> (C64, C64, C64) {
    let zero = C64::new(0.0, 0.0);
    let (mut g, mut g1, mut g2) = (zero, zero, zero);
    for (k, c) in u.coeffs().iter().enumerate().rev() {
        g2 = g2 * q + 2.0 * g1;
        g1 = g1 * q + g;
        g = g * q + c * (k + 1) as f64;
    }
    (g, g1, g2)
}

/// `max_θ |G(r e^{−iθ})|` by a 64-point angle scan refined with Newton steps.
fn max_modulus_on_circle(u: &FourierSymbol, r: f64) -> f64 {
    const GRID: usize = 64;
    let f = |theta: f64| weighted_series(u, C64::from_polar(r, -theta)).0.norm_sqr();
    let (mut theta, mut best) = (0.0, f(0.0));
    for j in 1..GRID {
        let t = 2.0 * std::f64::consts::PI * j as f64 / GRID as f64;
        let v = f(t);
        if v > best {
            theta = t;
            best = v;
        }
    }
    for _ in 0..20 {
        let q = C64::from_polar(r, -theta);
        let (g, g1, g2) = weighted_series(u, q);
        let dg = g1 * q * C64::new(0.0, -1.0);
        let d2g = -(q * q * g2) - q * g1;
        let fp = 2.0 * (dg * g.conj()).re;
        let fpp = 2.0 * (dg.norm_sqr() + (d2g * g.conj()).re);
        if fpp >= 0.0 || fp == 0.0 {
            break;
        }
        let candidate = theta - fp / fpp;
        let v = f(candidate);
        if v < best {
            break;
        }
        theta = candidate;
        best = v;
    }
    best.sqrt()
}

/// Distance in `H^{1/2}` from `u` to the torus `{α/(1−pz) : |α| = a, |p| = r}`.
///
/// The residue phase enters only through `Re(e^{−iφ} G)`, so it is eliminated
/// exactly; the pole phase is scanned on a 64-point grid and refined by
/// Newton iterations. The result is an upper bound on the infimum.
pub fn torus_distance(u: &FourierSymbol, a: f64, r: f64) -> Result<f64> {
    if !(a > 0.0) || !(r > 0.0 && r < 1.0) {
        return Err(SzegoError::InvalidParameter(format!("torus parameters out of range: a={a}, r={r}")));
    }
    let gmax = max_modulus_on_circle(u, r);
    let d2 = h_half_sq(u) + a * a / (1.0 - r * r).powi(2) - 2.0 * a * gmax;
    Ok(d2.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusFit {
    pub a: f64,
    pub r: f64,
    pub distance: f64,
}

/// Torus parameters `(a, r)` minimizing [`torus_distance`].
///
/// For fixed `r` the optimal amplitude is `a = max|G|·(1−r²)²`, leaving a
/// one-dimensional search in `r` (grid scan plus golden-section refinement).
pub fn best_torus(u: &FourierSymbol) -> Result<TorusFit> {
    let c = h_half_sq(u);
    let gain = |r: f64| {
        let g = max_modulus_on_circle(u, r);
        g * g * (1.0 - r * r).powi(2)
    };
    const SCAN: usize = 200;
    let rs: Vec<f64> = (1..SCAN).map(|j| j as f64 / SCAN as f64).collect();
    let (mut idx, mut best) = (0, f64::NEG_INFINITY);
    for (i, &r) in rs.iter().enumerate() {
        let v = gain(r);
        if v > best {
            idx = i;
            best = v;
        }
    }
    let mut lo = if idx == 0 { 1e-6 } else { rs[idx - 1] };
    let mut hi = if idx + 1 == rs.len() { 1.0 - 1e-9 } else { rs[idx + 1] };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (gain(x1), gain(x2));
    for _ in 0..80 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = gain(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = gain(x2);
        }
    }
    let r = 0.5 * (lo + hi);
    let a = max_modulus_on_circle(u, r) * (1.0 - r * r).powi(2);
    if !(a > 0.0) {
        return Err(SzegoError::InvalidParameter("symbol has no rank-one component".into()));
    }
    Ok(TorusFit { a, r, distance: (c - gain(r)).max(0.0).sqrt() })
}
