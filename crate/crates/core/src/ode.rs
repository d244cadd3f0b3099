//! One-step integrators for complex ODE systems `y' = f(t, y)`.
//!
//! Both the spectral flow and the coordinate charts reduce to flat complex
//! state vectors, so the integrators work on `&[C64]` and the callers pack and
//! unpack their own coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SzegoError};
use crate::hardy::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4,
    Rk45Adaptive,
}

impl std::str::FromStr for Scheme {
    type Err = SzegoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Scheme::Rk4),
            "rk45" | "rk45-adaptive" => Ok(Scheme::Rk45Adaptive),
            other => Err(SzegoError::InvalidParameter(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Steps below `h_min` abort the run.
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for AdaptiveTolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_min: 1e-12, h_max: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Fixed-step integration plan shared by every driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPlan {
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub scheme: Scheme,
    pub tolerances: AdaptiveTolerances,
}

impl StepPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SzegoError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(SzegoError::InvalidParameter(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(SzegoError::InvalidParameter("sample_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of base steps of size `dt` (the last one possibly shorter).
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn grid_time(&self, step: usize) -> f64 {
        if step >= self.n_steps() {
            self.t_end
        } else {
            step as f64 * self.dt
        }
    }

    /// Base-step indices at which the trajectory is sampled.
    pub fn sample_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.sample_every).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }
}

fn axpy(y: &[C64], h: f64, terms: &[(f64, &[C64])]) -> Vec<C64> {
    let mut out = y.to_vec();
    for &(coef, k) in terms {
        if coef == 0.0 {
            continue;
        }
        let s = h * coef;
        for (o, v) in out.iter_mut().zip(k) {
            *o += v * s;
        }
    }
    out
}

fn all_finite(y: &[C64]) -> bool {
    y.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// One classical Runge–Kutta step.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[C64], h: f64) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]))?;
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]))?;
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]))?;
    Ok(axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th- and embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand–Prince 5(4) with a PI step-size controller.
pub struct Dopri5 {
    pub tol: AdaptiveTolerances,
    pub stats: StepStats,
    h: f64,
    err_prev: f64,
}

impl Dopri5 {
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;

    pub fn new(tol: AdaptiveTolerances, h_init: f64) -> Self {
        Self { tol, stats: StepStats::default(), h: h_init.min(tol.h_max), err_prev: 1e-4 }
    }

    fn error_norm(&self, y: &[C64], y_new: &[C64], err: &[C64]) -> f64 {
        let mut acc = 0.0;
        for ((a, b), e) in y.iter().zip(y_new).zip(err) {
            let sc_re = self.tol.atol + self.tol.rtol * a.re.abs().max(b.re.abs());
            let sc_im = self.tol.atol + self.tol.rtol * a.im.abs().max(b.im.abs());
            acc += (e.re / sc_re).powi(2) + (e.im / sc_im).powi(2);
        }
        (acc / (2 * y.len()).max(1) as f64).sqrt()
    }

    /// Advances from `t` to exactly `t_target`, accepting only steps whose
    /// local error estimate is within tolerance.
    pub fn advance<F>(&mut self, f: &mut F, t: f64, y: &[C64], t_target: f64) -> Result<Vec<C64>>
    where
        F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    {
        let mut t = t;
        let mut y = y.to_vec();
        while t < t_target {
            let remaining = t_target - t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < self.tol.h_min && !last {
                return Err(SzegoError::StepUnderflow { t, h });
            }
            let k1 = f(t, &y)?;
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let k6 = f(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
            let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new)?;
            let err_vec = axpy(
                &vec![C64::new(0.0, 0.0); y.len()],
                h,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let err = self.error_norm(&y, &y_new, &err_vec);
            if !err.is_finite() || !all_finite(&y_new) {
                self.stats.rejected += 1;
                self.h = h * 0.2;
                if self.h < self.tol.h_min {
                    return Err(SzegoError::NanDetected { t: t + h });
                }
                continue;
            }
            if err <= 1.0 {
                let factor = if err == 0.0 {
                    5.0
                } else {
                    Self::SAFETY * err.powf(-(0.2 - 0.75 * Self::BETA)) * self.err_prev.powf(Self::BETA)
                };
                self.err_prev = err.max(1e-4);
                self.stats.accepted += 1;
                t = if last { t_target } else { t + h };
                y = y_new;
                if !last || factor < 1.0 {
                    self.h = (h * factor.clamp(0.2, 5.0)).min(self.tol.h_max);
                }
            } else {
                self.stats.rejected += 1;
                let factor = (Self::SAFETY * err.powf(-0.2)).clamp(0.2, 1.0);
                self.h = h * factor;
                if self.h < self.tol.h_min {
                    return Err(SzegoError::StepUnderflow { t, h: self.h });
                }
            }
        }
        Ok(y)
    }
}

/// Runs `plan` from `y0`, calling `on_sample(step_index, t, y)` at every
/// sampled base step (always including the first and last).
pub fn drive<F, S>(plan: &StepPlan, y0: &[C64], mut f: F, mut on_sample: S) -> Result<StepStats>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    S: FnMut(usize, f64, &[C64]) -> Result<()>,
{
    plan.validate()?;
    if !all_finite(y0) {
        return Err(SzegoError::NanDetected { t: 0.0 });
    }
    let samples = plan.sample_steps();
    let mut y = y0.to_vec();
    on_sample(0, 0.0, &y)?;
    match plan.scheme {
        Scheme::Rk4 => {
            let mut stats = StepStats::default();
            let mut next = 1;
            for step in 1..=plan.n_steps() {
                let t0 = plan.grid_time(step - 1);
                let t1 = plan.grid_time(step);
                y = rk4_step(&mut f, t0, &y, t1 - t0)?;
                if !all_finite(&y) {
                    return Err(SzegoError::NanDetected { t: t1 });
                }
                stats.accepted += 1;
                if next < samples.len() && samples[next] == step {
                    on_sample(step, t1, &y)?;
                    next += 1;
                }
            }
            Ok(stats)
        }
        Scheme::Rk45Adaptive => {
            let mut solver = Dopri5::new(plan.tolerances, plan.dt);
            for w in samples.windows(2) {
                let t0 = plan.grid_time(w[0]);
                let t1 = plan.grid_time(w[1]);
                y = solver.advance(&mut f, t0, &y, t1)?;
                on_sample(w[1], t1, &y)?;
            }
            Ok(solver.stats)
        }
    }
}
