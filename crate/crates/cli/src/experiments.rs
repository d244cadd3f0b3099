//! Experiment kinds: parsing (all validation happens here, before any
//! computation) and execution into an output directory.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::json;
use szego_core::flow::{
    best_torus, hierarchy_field, integrate, poisson_bracket, torus_distance, Field, FlowConfig, MonitorOptions,
};
use szego_core::hankel::{default_rank_tol, genericity_det, genericity_det_scaled, rio_residual};
use szego_core::hardy::sharp_inequality_gap;
use szego_core::kronecker::{numerical_rank, roundtrip_check, roundtrip_symbol};
use szego_core::ode::{AdaptiveTolerances, Scheme, StepPlan};
use szego_core::rational::{
    evolution_checks, fit_cosine, hs_growth_series, integrate_mtilde1, integrate_rational, m1_solution,
    mtilde1_invariants, mtilde1_to_fourier, rational_to_fourier, MTilde1Solution, RationalState, RationalSymbol,
};
use szego_core::random::{random_in_disc, random_poles, random_polynomial, random_residues, random_symbol, seeded};
use szego_core::waves::{certify, stationary_wave, traveling_wave, WaveCertificate};
use szego_core::{poly, FourierSymbol, SzegoError, C64};

use crate::config::{Config, ConfigError, ConfigResult};
use crate::output::{
    evaluate_checks, series_table, write_json, write_text, Check, MemberStatus, Relation, Summary, Table,
    SERIES_FILE, STATES_FILE, SUMMARY_FILE,
};
use crate::registry;

pub const KINDS: &[(&str, &str)] = &[
    ("evolve", "Galerkin integration with conservation, spectrum and exact-orbit monitors"),
    ("rational-evolve", "integration in pole/residue or (a, b, p) coordinates against closed forms"),
    ("hierarchy", "Poisson brackets of the conserved hierarchy on random polynomials"),
    ("waves", "construction and certification of traveling and stationary waves"),
    ("kronecker", "Hankel rank detection and rational recovery round trips"),
    ("hs-growth", "Sobolev norm growth along the family z + eps"),
    ("identities", "Lax identity, sharp inequality and genericity determinant suites"),
    ("torus-stability", "distance of a perturbed rank-one orbit to its best-fitting torus"),
    ("sweep", "runs member configurations, concurrently when requested"),
];

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub verbose: bool,
}

impl RunOptions {
    fn log(&self, msg: impl fmt::Display) {
        if self.verbose {
            eprintln!("[szego] {msg}");
        }
    }
}

enum ExecError {
    Compute(SzegoError),
    Io(io::Error),
}

impl From<SzegoError> for ExecError {
    fn from(e: SzegoError) -> Self {
        ExecError::Compute(e)
    }
}

impl From<io::Error> for ExecError {
    fn from(e: io::Error) -> Self {
        ExecError::Io(e)
    }
}

type ExecResult<T> = std::result::Result<T, ExecError>;

/// A fully validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Plan {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    experiment: Experiment,
}

#[derive(Debug, Clone)]
enum Experiment {
    Evolve { initial: InitialSpec, flow: FlowConfig, field: Field },
    RationalPoles { state: RationalState, plan: StepPlan, evolution_laws: bool },
    RationalAbp { a: C64, b: C64, p: C64, eps: Option<f64>, plan: StepPlan, periods: Option<f64> },
    Hierarchy { samples: usize, max_degree: usize, max_index: usize, scale: f64 },
    Waves { max_n: usize, p_list: Vec<C64>, alpha: C64, orbit_time: Option<f64>, stationary: Option<(Vec<C64>, C64)> },
    Kronecker { samples: usize, max_rank: usize, max_modulus: f64, min_separation: f64, cutoff: usize, noise: f64, confluent: bool },
    HsGrowth { eps: Vec<f64>, s: Vec<f64>, periods: usize },
    Identities { suites: Vec<String>, params: IdentityParams },
    Torus { initial: InitialSpec, flow: FlowConfig },
    Sweep { members: Vec<Plan>, parallel: bool },
}

#[derive(Debug, Clone)]
struct IdentityParams {
    rio_samples: usize,
    rio_max_degree: usize,
    sharp_samples: usize,
    sharp_cutoff: usize,
    sharp_m1_samples: usize,
    m1_max_modulus: f64,
    genericity_max_n: usize,
    genericity_m1_samples: usize,
}

/// Initial datum: a base family plus optional extra coefficients.
#[derive(Debug, Clone)]
struct InitialSpec {
    base: Initial,
    extra: Vec<C64>,
}

#[derive(Debug, Clone)]
enum Initial {
    Coeffs(Vec<C64>),
    /// `(az + b)/(1 − pz)`; `eps` is set for the family `z + eps`.
    Abp { a: C64, b: C64, p: C64, eps: Option<f64> },
    Phi { alpha: C64, p: C64 },
    Rational(RationalState),
    RandomPolynomial { degree: usize, scale: f64 },
}

/// Smallest cutoff with `r^K` below `1e-17`, at least `min`.
fn geometric_cutoff(r: f64, min: usize) -> usize {
    if r <= 0.0 {
        return min;
    }
    ((1e-17f64.ln() / r.ln()).ceil() as usize).max(min)
}

impl InitialSpec {
    fn fourier(&self, cutoff: usize, seed: u64) -> szego_core::Result<FourierSymbol> {
        let base = match &self.base {
            Initial::Coeffs(c) => FourierSymbol::new(c.clone())?,
            Initial::Abp { a, b, p, .. } => mtilde1_to_fourier(*a, *b, *p, cutoff),
            Initial::Phi { alpha, p } => rational_to_fourier(&RationalState::single(*alpha, *p), cutoff)?,
            Initial::Rational(st) => rational_to_fourier(st, cutoff)?,
            Initial::RandomPolynomial { degree, scale } => random_polynomial(&mut seeded(seed), *degree, *scale),
        };
        let extra = FourierSymbol::new(self.extra.clone())?;
        Ok((&base + &extra).resized(cutoff))
    }

    /// Closed-form orbit, when the datum lies on a solved manifold.
    fn exact(&self) -> szego_core::Result<Option<ExactOrbit>> {
        if self.extra.iter().any(|c| *c != C64::new(0.0, 0.0)) {
            return Ok(None);
        }
        Ok(match &self.base {
            Initial::Phi { alpha, p } => Some(ExactOrbit::Rank1 { alpha: *alpha, p: *p }),
            Initial::Rational(st) if st.constant.is_none() && st.poles.len() == 1 => {
                Some(ExactOrbit::Rank1 { alpha: st.residues[0], p: st.poles[0] })
            }
            Initial::Abp { a, b, p, .. } => Some(ExactOrbit::Rank2(MTilde1Solution::new(*a, *b, *p)?)),
            _ => None,
        })
    }
}

enum ExactOrbit {
    Rank1 { alpha: C64, p: C64 },
    Rank2(MTilde1Solution),
}

impl ExactOrbit {
    fn at(&self, t: f64, cutoff: usize) -> FourierSymbol {
        match self {
            ExactOrbit::Rank1 { alpha, p } => {
                let (a, q) = m1_solution(*alpha, *p, t);
                rational_to_fourier(&RationalState::single(a, q), cutoff).expect("pole stays inside")
            }
            ExactOrbit::Rank2(sol) => {
                let (a, b, p) = sol.at(t);
                mtilde1_to_fourier(a, b, p, cutoff)
            }
        }
    }
}

fn parse_initial(cfg: &Config) -> ConfigResult<InitialSpec> {
    let family = cfg.req_str("initial.family")?;
    let bad = |msg: String| ConfigError(format!("{}: initial data: {msg}", cfg.source));
    let base = match family.as_str() {
        "coeffs" => Initial::Coeffs(
            cfg.opt_complex_list("initial.coeffs")?.ok_or_else(|| bad("`initial.coeffs` is required".into()))?,
        ),
        "z+eps" => {
            let eps = cfg.req_f64("initial.eps")?;
            Initial::Abp { a: C64::new(1.0, 0.0), b: C64::new(eps, 0.0), p: C64::new(0.0, 0.0), eps: Some(eps) }
        }
        "abp" => Initial::Abp {
            a: cfg.req_complex("initial.a")?,
            b: cfg.req_complex("initial.b")?,
            p: cfg.req_complex("initial.p")?,
            eps: None,
        },
        "phi" => Initial::Phi { alpha: cfg.complex("initial.alpha", C64::new(1.0, 0.0))?, p: cfg.req_complex("initial.p")? },
        "rational" => {
            let residues = cfg.opt_complex_list("initial.residues")?.unwrap_or_default();
            let poles = cfg.opt_complex_list("initial.poles")?.unwrap_or_default();
            let constant = cfg.opt_complex("initial.constant")?;
            Initial::Rational(RationalState::new(residues, poles, constant).map_err(|e| bad(e.to_string()))?)
        }
        "random-polynomial" => {
            Initial::RandomPolynomial { degree: cfg.usize("initial.degree", 4)?, scale: cfg.f64("initial.scale", 1.0)? }
        }
        other => return Err(bad(format!("unknown family `{other}`"))),
    };
    match &base {
        Initial::Abp { p, .. } | Initial::Phi { p, .. } if !(p.norm() < 1.0) => {
            return Err(bad(format!("|p| = {} must be below 1", p.norm())))
        }
        Initial::Rational(st) if st.poles.iter().any(|p| !(p.norm() < 1.0)) => {
            return Err(bad("every pole must lie inside the unit disc".into()))
        }
        Initial::Coeffs(c) if c.is_empty() => return Err(bad("empty coefficient list".into())),
        _ => {}
    }
    let extra = cfg.opt_complex_list("initial.extra")?.unwrap_or_default();
    Ok(InitialSpec { base, extra })
}

fn parse_plan_keys(cfg: &Config, defaults: &FlowConfig) -> ConfigResult<StepPlan> {
    let scheme: Scheme = cfg
        .str("flow.scheme", "rk4")?
        .parse()
        .map_err(|e: SzegoError| ConfigError(format!("{}: key `flow.scheme`: {e}", cfg.source)))?;
    let d = AdaptiveTolerances::default();
    let plan = StepPlan {
        dt: cfg.f64("flow.dt", defaults.dt)?,
        t_end: cfg.f64("flow.t_end", defaults.t_end)?,
        sample_every: cfg.usize("flow.sample_every", defaults.sample_every)?,
        scheme,
        tolerances: AdaptiveTolerances {
            rtol: cfg.f64("flow.rtol", d.rtol)?,
            atol: cfg.f64("flow.atol", d.atol)?,
            h_min: cfg.f64("flow.h_min", d.h_min)?,
            h_max: cfg.f64("flow.h_max", d.h_max)?,
        },
    };
    plan.validate().map_err(|e| ConfigError(format!("{}: flow: {e}", cfg.source)))?;
    Ok(plan)
}

fn parse_flow(cfg: &Config) -> ConfigResult<FlowConfig> {
    let d = FlowConfig::default();
    let plan = parse_plan_keys(cfg, &d)?;
    let dm = MonitorOptions::default();
    let flow = FlowConfig {
        dt: plan.dt,
        t_end: plan.t_end,
        scheme: plan.scheme,
        sample_every: plan.sample_every,
        cutoff: cfg.usize("flow.cutoff", d.cutoff)?,
        tolerances: plan.tolerances,
        monitors: MonitorOptions {
            hs_orders: cfg.f64_list("monitors.hs_orders", &dm.hs_orders)?,
            spectrum: cfg.bool("monitors.spectrum", dm.spectrum)?,
            eig_count: cfg.usize("monitors.eig_count", dm.eig_count)?,
            lax: cfg.bool("monitors.lax", dm.lax)?,
        },
    };
    flow.validate().map_err(|e| ConfigError(format!("{}: flow: {e}", cfg.source)))?;
    Ok(flow)
}

fn parse_checks(cfg: &Config) -> ConfigResult<Vec<Check>> {
    let mut checks = vec![];
    for (key, value) in cfg.section("checks") {
        let (rel, metric) = key
            .split_once('.')
            .ok_or_else(|| ConfigError(format!("{}: check `checks.{key}` must be `checks.<relation>.<metric>`", cfg.source)))?;
        let relation = Relation::from_key(rel).ok_or_else(|| {
            ConfigError(format!("{}: unknown relation `{rel}` (below, at_most, at_least, above, equal)", cfg.source))
        })?;
        let threshold = match value {
            toml::Value::Float(x) => x,
            toml::Value::Integer(i) => i as f64,
            other => return Err(ConfigError(format!("{}: check `checks.{key}`: expected a number, got {other}", cfg.source))),
        };
        checks.push(Check { metric: metric.to_string(), relation, threshold });
    }
    Ok(checks)
}

fn config_error(cfg: &Config, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{}: {msg}", cfg.source))
}

/// Validates a configuration into a runnable plan; nothing is computed.
pub fn plan_from_config(cfg: &Config) -> ConfigResult<Plan> {
    let default_name = Path::new(&cfg.source).file_stem().and_then(|s| s.to_str()).unwrap_or("experiment").to_string();
    let name = cfg.str("name", &default_name)?;
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(config_error(cfg, format!("invalid experiment name `{name}`")));
    }
    let kind = cfg.req_str("kind")?;
    let seed = cfg.u64("seed", 0)?;
    let checks = parse_checks(cfg)?;
    let experiment = match kind.as_str() {
        "evolve" => {
            let field = match cfg.str("flow.field", "szego")?.as_str() {
                "szego" => Field::Szego,
                "hierarchy" => {
                    let n = cfg.usize("flow.hierarchy_index", 2)?;
                    if n == 0 {
                        return Err(config_error(cfg, "`flow.hierarchy_index` must be at least 1"));
                    }
                    Field::Hierarchy(n)
                }
                other => return Err(config_error(cfg, format!("unknown field `{other}`"))),
            };
            Experiment::Evolve { initial: parse_initial(cfg)?, flow: parse_flow(cfg)?, field }
        }
        "rational-evolve" => {
            let initial = parse_initial(cfg)?;
            let chart = cfg.str("rational.chart", "poles")?;
            let defaults = FlowConfig { t_end: 10.0, ..FlowConfig::default() };
            let plan = parse_plan_keys(cfg, &defaults)?;
            if !initial.extra.is_empty() {
                return Err(config_error(cfg, "`initial.extra` is not available in coordinate charts"));
            }
            match (chart.as_str(), initial.base) {
                ("abp", Initial::Abp { a, b, p, eps }) => {
                    let periods = cfg.opt_f64("rational.periods")?;
                    if periods.is_some_and(|n| !(n > 0.0)) {
                        return Err(config_error(cfg, "`rational.periods` must be positive"));
                    }
                    Experiment::RationalAbp { a, b, p, eps, plan, periods }
                }
                ("poles", Initial::Phi { alpha, p }) => Experiment::RationalPoles {
                    state: RationalState::single(alpha, p),
                    plan,
                    evolution_laws: cfg.bool("rational.evolution_laws", false)?,
                },
                ("poles", Initial::Rational(state)) => {
                    Experiment::RationalPoles { state, plan, evolution_laws: cfg.bool("rational.evolution_laws", false)? }
                }
                (c, _) => {
                    return Err(config_error(cfg, format!("chart `{c}` needs family `z+eps`/`abp` (abp) or `phi`/`rational` (poles)")))
                }
            }
        }
        "hierarchy" => Experiment::Hierarchy {
            samples: cfg.usize("hierarchy.samples", 50)?,
            max_degree: cfg.usize("hierarchy.max_degree", 6)?.max(1),
            max_index: cfg.usize("hierarchy.max_index", 4)?.max(1),
            scale: cfg.f64("hierarchy.scale", 0.5)?,
        },
        "waves" => {
            let polar = cfg
                .opt_complex_list("waves.p_polar")?
                .unwrap_or_else(|| vec![C64::new(0.3, 0.0), C64::new(0.6, 0.2)]);
            let p_list: Vec<C64> = polar.iter().map(|z| C64::from_polar(z.re, z.im * PI)).collect();
            if p_list.iter().any(|p| !(p.norm() > 0.0 && p.norm() < 1.0)) {
                return Err(config_error(cfg, "every wave modulus must lie in (0, 1)"));
            }
            let stationary = match cfg.opt_complex_list("waves.stationary_poles")? {
                Some(poles) => Some((poles, cfg.complex("waves.stationary_alpha", C64::new(1.0, 0.0))?)),
                None => None,
            };
            Experiment::Waves {
                max_n: cfg.usize("waves.max_n", 4)?.max(1),
                p_list,
                alpha: cfg.complex("waves.alpha", C64::new(1.0, 0.0))?,
                orbit_time: cfg.opt_f64("waves.orbit_time")?,
                stationary,
            }
        }
        "kronecker" => {
            let cutoff = cfg.usize("kronecker.cutoff", 128)?;
            let max_rank = cfg.usize("kronecker.max_rank", 6)?.max(1);
            if cutoff < 2 * max_rank + 2 {
                return Err(config_error(cfg, "`kronecker.cutoff` must be at least 2·max_rank + 2"));
            }
            Experiment::Kronecker {
                samples: cfg.usize("kronecker.samples", 50)?,
                max_rank,
                max_modulus: cfg.f64("kronecker.max_modulus", 0.9)?,
                min_separation: cfg.f64("kronecker.min_separation", 0.05)?,
                cutoff,
                noise: cfg.f64("kronecker.noise", 0.0)?,
                confluent: cfg.bool("kronecker.confluent", true)?,
            }
        }
        "hs-growth" => {
            let eps = cfg.f64_list("hs.eps", &[0.1, 0.05, 0.025])?;
            let s = cfg.f64_list("hs.s", &[1.0])?;
            if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(config_error(cfg, "`hs.eps` needs at least two values in (0, 1)"));
            }
            if s.iter().any(|s| !(*s > 0.5)) {
                return Err(config_error(cfg, "every order in `hs.s` must exceed 1/2"));
            }
            Experiment::HsGrowth { eps, s, periods: cfg.usize("hs.periods", 1)?.max(1) }
        }
        "identities" => {
            let mut suites = cfg.str_list("identities.suites")?;
            if suites.is_empty() {
                suites = vec!["rio".into(), "sharp".into(), "genericity".into()];
            }
            if let Some(bad) = suites.iter().find(|s| !["rio", "sharp", "genericity"].contains(&s.as_str())) {
                return Err(config_error(cfg, format!("unknown identity suite `{bad}`")));
            }
            Experiment::Identities {
                suites,
                params: IdentityParams {
                    rio_samples: cfg.usize("rio.samples", 100)?,
                    rio_max_degree: cfg.usize("rio.max_degree", 8)?,
                    sharp_samples: cfg.usize("sharp.samples", 1000)?,
                    sharp_cutoff: cfg.usize("sharp.cutoff", 32)?.max(1),
                    sharp_m1_samples: cfg.usize("sharp.m1_samples", 100)?,
                    m1_max_modulus: cfg.f64("identities.m1_max_modulus", 0.8)?,
                    genericity_max_n: cfg.usize("genericity.max_n", 4)?,
                    genericity_m1_samples: cfg.usize("genericity.m1_samples", 20)?,
                },
            }
        }
        "torus-stability" => Experiment::Torus { initial: parse_initial(cfg)?, flow: parse_flow(cfg)? },
        "sweep" => {
            let names = cfg.str_list("sweep.members")?;
            if names.is_empty() {
                return Err(config_error(cfg, "`sweep.members` must list at least one configuration"));
            }
            let mut members = vec![];
            for m in &names {
                let member_cfg = registry::resolve(m, &cfg.base_dir)?;
                let plan = plan_from_config(&member_cfg)?;
                member_cfg.finish()?;
                if members.iter().any(|p: &Plan| p.name == plan.name) {
                    return Err(config_error(cfg, format!("duplicate member name `{}`", plan.name)));
                }
                members.push(plan);
            }
            Experiment::Sweep { members, parallel: cfg.bool("sweep.parallel", true)? }
        }
        other => {
            let known: Vec<&str> = KINDS.iter().map(|(k, _)| *k).collect();
            return Err(config_error(cfg, format!("unknown kind `{other}` (expected one of {})", known.join(", "))));
        }
    };
    Ok(Plan { name, kind, seed, checks, experiment })
}

/// Parses, validates and runs `cfg`, writing artifacts into `out`.
pub fn run_config(cfg: &Config, out: &Path, opts: RunOptions) -> Result<Summary, RunError> {
    let plan = plan_from_config(cfg)?;
    cfg.finish()?;
    Ok(execute(&plan, out, opts)?)
}

pub fn run_path(path: &Path, out: &Path, opts: RunOptions) -> Result<Summary, RunError> {
    run_config(&Config::load(path)?, out, opts)
}

struct Produced {
    metrics: BTreeMap<String, f64>,
    table: Table,
    states: serde_json::Value,
    members: Vec<MemberStatus>,
}

impl Produced {
    fn new(table: Table) -> Self {
        Self { metrics: BTreeMap::new(), table, states: serde_json::Value::Null, members: vec![] }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// Runs a validated plan; computational failures are recorded in the summary.
pub fn execute(plan: &Plan, out: &Path, opts: RunOptions) -> io::Result<Summary> {
    std::fs::create_dir_all(out)?;
    opts.log(format_args!("{}: running `{}`", plan.name, plan.kind));
    let (metrics, members, error, artifacts) = match run_experiment(plan, out, opts) {
        Ok(p) => {
            write_text(out, SERIES_FILE, &p.table.to_csv())?;
            write_json(out, STATES_FILE, &p.states)?;
            (p.metrics, p.members, None, vec![SERIES_FILE.to_string(), STATES_FILE.to_string()])
        }
        Err(ExecError::Compute(e)) => (BTreeMap::new(), vec![], Some(e.to_string()), vec![]),
        Err(ExecError::Io(e)) => return Err(e),
    };
    let checks = evaluate_checks(&plan.checks, &metrics);
    let pass = error.is_none() && checks.iter().all(|c| c.pass) && members.iter().all(|m| m.pass);
    let mut artifacts = artifacts;
    artifacts.push(SUMMARY_FILE.to_string());
    let summary =
        Summary { name: plan.name.clone(), kind: plan.kind.clone(), seed: plan.seed, pass, error, metrics, checks, members, artifacts };
    write_text(out, SUMMARY_FILE, &summary.to_json())?;
    opts.log(format_args!("{}: {}", plan.name, if pass { "pass" } else { "fail" }));
    Ok(summary)
}

fn run_experiment(plan: &Plan, out: &Path, opts: RunOptions) -> ExecResult<Produced> {
    let seed = plan.seed;
    match &plan.experiment {
        Experiment::Evolve { initial, flow, field } => run_evolve(initial, flow, *field, seed),
        Experiment::RationalPoles { state, plan, evolution_laws } => run_rational_poles(state, plan, *evolution_laws),
        Experiment::RationalAbp { a, b, p, eps, plan, periods } => run_abp(*a, *b, *p, *eps, plan, *periods),
        Experiment::Hierarchy { samples, max_degree, max_index, scale } => {
            run_hierarchy(*samples, *max_degree, *max_index, *scale, seed)
        }
        Experiment::Waves { max_n, p_list, alpha, orbit_time, stationary } => {
            run_waves(*max_n, p_list, *alpha, *orbit_time, stationary.as_ref())
        }
        Experiment::Kronecker { samples, max_rank, max_modulus, min_separation, cutoff, noise, confluent } => {
            run_kronecker(*samples, *max_rank, *max_modulus, *min_separation, *cutoff, *noise, *confluent, seed)
        }
        Experiment::HsGrowth { eps, s, periods } => run_hs_growth(eps, s, *periods),
        Experiment::Identities { suites, params } => run_identities(suites, params, seed),
        Experiment::Torus { initial, flow } => run_torus(initial, flow, seed),
        Experiment::Sweep { members, parallel } => run_sweep(members, *parallel, out, opts),
    }
}

fn push_column(table: &mut Table, name: &str, values: &[f64]) {
    table.columns.push(name.to_string());
    for (row, v) in table.rows.iter_mut().zip(values) {
        row.push(*v);
    }
}

fn run_evolve(initial: &InitialSpec, flow: &FlowConfig, field: Field, seed: u64) -> ExecResult<Produced> {
    let u0 = initial.fourier(flow.cutoff, seed)?;
    let series = integrate(&u0, flow, field)?;
    let report = series.report();
    let mut table = series_table(&series, flow.monitors.eig_count);
    let mut out_metrics = BTreeMap::new();
    if field == Field::Szego {
        if let Some(orbit) = initial.exact()? {
            let errs: Vec<f64> =
                series.times.iter().zip(&series.states).map(|(t, u)| u.distance(&orbit.at(*t, flow.cutoff))).collect();
            push_column(&mut table, "exact_error", &errs);
            out_metrics.insert("exact_error_max".to_string(), errs.iter().copied().fold(0.0, f64::max));
            out_metrics.insert("exact_error_final".to_string(), errs.last().copied().unwrap_or(f64::NAN));
        }
    }
    let mut p = Produced::new(table);
    p.metrics = out_metrics;
    p.metric("q_drift", report.q_drift);
    p.metric("m_drift", report.m_drift);
    p.metric("e_drift", report.e_drift);
    p.metric("j6_drift", report.j6_drift);
    p.metric("j8_drift", report.j8_drift);
    if flow.monitors.spectrum {
        p.metric("eigen_drift", report.eigen_drift);
    }
    if flow.monitors.lax {
        p.metric("lax_residual_max", report.lax_residual);
    }
    p.metric("accepted_steps", series.stats.accepted as f64);
    p.metric("rejected_steps", series.stats.rejected as f64);
    p.metric("final_time", series.times.last().copied().unwrap_or(0.0));
    p.states = json!({ "times": series.times, "states": series.states });
    Ok(p)
}

fn relative_spread(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let v0 = v.first().copied().unwrap_or(0.0);
    let scale = if v0 != 0.0 { v0.abs() } else { 1.0 };
    v.iter().map(|x| (x - v0).abs() / scale).fold(0.0, f64::max)
}

fn run_rational_poles(state: &RationalState, plan: &StepPlan, laws: bool) -> ExecResult<Produced> {
    let series = integrate_rational(state, plan)?;
    let n = state.poles.len();
    let mut columns = vec!["t".to_string()];
    for j in 1..=n {
        for part in ["alpha_re", "alpha_im", "p_re", "p_im", "p_abs"] {
            columns.push(format!("{part}_{j}"));
        }
    }
    if state.constant.is_some() {
        columns.extend(["constant_re".to_string(), "constant_im".to_string()]);
    }
    columns.extend(["s", "s_tilde", "q", "m"].iter().map(|s| s.to_string()));
    let mut table = Table::new("pole/residue coordinates", columns);
    for (t, st) in series.times.iter().zip(&series.states) {
        let mut row = vec![*t];
        for (a, p) in st.residues.iter().zip(&st.poles) {
            row.extend([a.re, a.im, p.re, p.im, p.norm()]);
        }
        if let Some(c) = st.constant {
            row.extend([c.re, c.im]);
        }
        row.extend([st.s_invariant(), st.s_tilde().unwrap_or(f64::NAN), st.mass(), st.momentum()]);
        table.push(row);
    }
    let mut p = Produced::new(table);
    p.metric("q_drift", relative_spread(series.states.iter().map(RationalState::mass)));
    p.metric("m_drift", relative_spread(series.states.iter().map(RationalState::momentum)));
    if state.constant.is_none() {
        p.metric("s_drift", relative_spread(series.s.iter().copied()));
    } else {
        p.metric("s_tilde_drift", relative_spread(series.s_tilde.iter().map(|s| s.unwrap_or(f64::NAN))));
    }
    if state.constant.is_none() && n == 1 {
        let err = series
            .times
            .iter()
            .zip(&series.states)
            .map(|(t, st)| {
                let (a, q) = m1_solution(state.residues[0], state.poles[0], *t);
                (st.residues[0] - a).norm() + (st.poles[0] - q).norm()
            })
            .fold(0.0, f64::max);
        p.metric("exact_error_max", err);
    }
    if laws {
        let r = evolution_checks(&series)?;
        p.metric("v_law_residual", r.v_residual);
        p.metric("b_law_residual", r.b_residual);
        if let Some(x) = r.product_residual {
            p.metric("product_law_residual", x);
        }
        if let Some(x) = r.a_residual {
            p.metric("a_law_residual", x);
        }
        if let Some(x) = r.w_residual {
            p.metric("w_law_residual", x);
        }
    }
    p.states = json!({ "times": series.times, "states": series.states });
    Ok(p)
}

fn run_abp(a: C64, b: C64, p0: C64, eps: Option<f64>, plan: &StepPlan, periods: Option<f64>) -> ExecResult<Produced> {
    let sol = MTilde1Solution::new(a, b, p0)?;
    let mut plan = *plan;
    if let Some(n) = periods {
        if !sol.period().is_finite() {
            return Err(SzegoError::InvalidParameter("stationary orbit has no period".into()).into());
        }
        plan.t_end = n * sol.period();
    }
    let series = integrate_mtilde1(a, b, p0, &plan)?;
    let columns = [
        "t", "a_re", "a_im", "b_re", "b_im", "p_re", "p_im", "p_abs_sq", "p_abs_sq_closed", "p_abs_sq_formula", "closed_error", "q",
        "m", "s_tilde",
    ];
    let mut table = Table::new("(a, b, p) coordinates of (az + b)/(1 - pz)", columns.iter().map(|s| s.to_string()).collect());
    let formula = |t: f64| {
        eps.map(|e| {
            let w = e * (4.0 + e * e).sqrt();
            2.0 / (4.0 + e * e) * (1.0 - (w * t).cos())
        })
    };
    let (mut closed_max, mut formula_max) = (0.0f64, 0.0f64);
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    let mut inv = vec![];
    for (t, y) in series.times.iter().zip(&series.states) {
        let (ca, cb, cp) = sol.at(*t);
        let closed = (y[0] - ca).norm() + (y[1] - cb).norm() + (y[2] - cp).norm();
        closed_max = closed_max.max(closed);
        let p2 = y[2].norm_sqr();
        let f = formula(*t);
        if let Some(f) = f {
            formula_max = formula_max.max((p2 - f).abs());
        }
        pmin = pmin.min(y[2].norm());
        pmax = pmax.max(y[2].norm());
        let (q, m, st) = mtilde1_invariants(y[0], y[1], y[2]);
        inv.push((q, m, st));
        table.push(vec![
            *t,
            y[0].re,
            y[0].im,
            y[1].re,
            y[1].im,
            y[2].re,
            y[2].im,
            p2,
            cp.norm_sqr(),
            f.unwrap_or(f64::NAN),
            closed,
            q,
            m,
            st,
        ]);
    }
    let mut p = Produced::new(table);
    p.metric("closed_form_error_max", closed_max);
    if eps.is_some() {
        p.metric("p_abs_sq_formula_error_max", formula_max);
    }
    p.metric("rho_min", sol.rho_min);
    p.metric("rho_max", sol.rho_max);
    p.metric("rho_min_gap", (pmin - sol.rho_min).abs());
    p.metric("rho_max_gap", (pmax - sol.rho_max).abs());
    p.metric("omega", sol.omega);
    p.metric("period", sol.period());
    p.metric("q_drift", relative_spread(inv.iter().map(|x| x.0)));
    p.metric("m_drift", relative_spread(inv.iter().map(|x| x.1)));
    p.metric("s_tilde_drift", relative_spread(inv.iter().map(|x| x.2)));
    if !sol.stationary {
        let p2: Vec<f64> = series.states.iter().map(|y| y[2].norm_sqr()).collect();
        let (_, resid) = fit_cosine(&series.times, &p2, sol.omega);
        p.metric("cosine_fit_residual_max", resid.iter().map(|r| r.abs()).fold(0.0, f64::max));
    }
    p.states = json!({ "times": series.times, "states": series.states, "solution": sol });
    Ok(p)
}

fn run_hierarchy(samples: usize, max_degree: usize, max_index: usize, scale: f64, seed: u64) -> ExecResult<Produced> {
    let mut rng = seeded(seed);
    let mut table = Table::new(
        "Poisson brackets {J_2n, J_2p} on random polynomials",
        ["sample", "degree", "n", "p", "bracket"].iter().map(|s| s.to_string()).collect(),
    );
    let (mut bracket_max, mut first_field) = (0.0f64, 0.0f64);
    let mut symbols = vec![];
    for i in 0..samples {
        let degree = 1 + i % max_degree;
        let u = random_polynomial(&mut rng, degree, scale);
        for n in 1..=max_index {
            for q in n + 1..=max_index {
                let b = poisson_bracket(&u, n, q)?;
                bracket_max = bracket_max.max(b.abs());
                table.push(vec![i as f64, degree as f64, n as f64, q as f64, b]);
            }
        }
        let expected = u.scale(C64::new(0.0, -0.5));
        first_field = first_field.max(hierarchy_field(&u, 1)?.max_abs_diff(&expected));
        symbols.push(u);
    }
    let mut p = Produced::new(table);
    p.metric("bracket_max", bracket_max);
    p.metric("first_field_error_max", first_field);
    p.metric("samples", samples as f64);
    p.states = json!({ "symbols": symbols });
    Ok(p)
}

fn run_waves(
    max_n: usize,
    p_list: &[C64],
    alpha: C64,
    orbit_time: Option<f64>,
    stationary: Option<&(Vec<C64>, C64)>,
) -> ExecResult<Produced> {
    let columns = [
        "n", "ell", "p_abs", "p_arg", "c", "omega", "q", "wave_residual", "commutator", "operator_identity", "mass_velocity_gap",
        "orbit_error", "constant_chart_relation_gap",
    ];
    let mut table = Table::new("traveling wave certificates", columns.iter().map(|s| s.to_string()).collect());
    let mut certs: Vec<WaveCertificate> = vec![];
    let mut worst = BTreeMap::<&str, f64>::new();
    for n in 1..=max_n {
        for ell in 0..n {
            for &pole in p_list {
                let (u, w) = traveling_wave(n, ell, pole, alpha)?;
                let cert = certify(&u, &w, orbit_time)?;
                let relation = if ell + 1 == n { (cert.mass - ((n - 1) as f64 * w.c + w.omega)).abs() } else { f64::NAN };
                let nan = f64::NAN;
                let row = vec![
                    n as f64,
                    ell as f64,
                    pole.norm(),
                    pole.arg(),
                    w.c,
                    w.omega,
                    cert.mass,
                    cert.wave_residual,
                    cert.commutator.unwrap_or(nan),
                    cert.operator_identity.unwrap_or(nan),
                    cert.mass_velocity_gap,
                    cert.orbit_error.unwrap_or(nan),
                    relation,
                ];
                for (key, v) in [
                    ("wave_residual_max", cert.wave_residual),
                    ("commutator_max", cert.commutator.unwrap_or(nan)),
                    ("operator_identity_max", cert.operator_identity.unwrap_or(nan)),
                    ("mass_velocity_gap_max", cert.mass_velocity_gap),
                    ("orbit_error_max", cert.orbit_error.unwrap_or(nan)),
                    ("constant_chart_relation_gap_max", relation),
                ] {
                    if !v.is_nan() {
                        let e = worst.entry(key).or_insert(0.0);
                        *e = e.max(v);
                    }
                }
                table.push(row);
                certs.push(cert);
            }
        }
    }
    let mut p = Produced::new(table);
    for (k, v) in worst {
        p.metric(k, v);
    }
    p.metric("waves", certs.len() as f64);
    let mut stationary_cert = None;
    if let Some((poles, a)) = stationary {
        let (u, w) = stationary_wave(poles, *a)?;
        let cert = certify(&u, &w, Some(1.0))?;
        p.metric("stationary_residual", cert.wave_residual);
        p.metric("stationary_orbit_error", cert.orbit_error.unwrap_or(f64::NAN));
        stationary_cert = Some(cert);
    }
    p.states = json!({ "certificates": certs, "stationary": stationary_cert });
    Ok(p)
}

#[allow(clippy::too_many_arguments)]
fn run_kronecker(
    samples: usize,
    max_rank: usize,
    max_modulus: f64,
    min_separation: f64,
    cutoff: usize,
    noise: f64,
    confluent: bool,
    seed: u64,
) -> ExecResult<Produced> {
    let mut rng = seeded(seed);
    let mut table = Table::new(
        "rank detection and pole recovery",
        ["sample", "rank", "detected_rank", "pole_error", "coefficient_residual"].iter().map(|s| s.to_string()).collect(),
    );
    let (mut rank_failures, mut recovery_failures, mut pole_max) = (0usize, 0usize, 0.0f64);
    let mut reports = vec![];
    let k_op = cutoff / 2;
    for i in 0..samples {
        let n = 1 + i % max_rank;
        let state = RationalState::new(random_residues(&mut rng, n), random_poles(&mut rng, n, max_modulus, min_separation), None)?;
        let u = rational_to_fourier(&state, cutoff)?;
        let detected = numerical_rank(&u, k_op, default_rank_tol(k_op))?;
        if detected != n {
            rank_failures += 1;
        }
        let (err, resid) = match roundtrip_check(&state, cutoff, noise, seed.wrapping_add(i as u64)) {
            Ok(r) => {
                let out = (r.max_pole_error, r.coefficient_residual);
                reports.push(json!({ "sample": i, "state": state, "report": r }));
                out
            }
            Err(e) => {
                recovery_failures += 1;
                reports.push(json!({ "sample": i, "state": state, "error": e.to_string() }));
                (f64::INFINITY, f64::NAN)
            }
        };
        pole_max = pole_max.max(err);
        table.push(vec![i as f64, n as f64, detected as f64, err, resid]);
    }
    let mut p = Produced::new(table);
    p.metric("instances", samples as f64);
    p.metric("rank_failures", rank_failures as f64);
    p.metric("recovery_failures", recovery_failures as f64);
    p.metric("pole_error_max", pole_max);
    let mut confluent_report = None;
    if confluent {
        // 1/(1 − pz)² + 0.5/(1 − qz)
        let (pp, q) = (C64::new(0.4, 0.2), C64::new(-0.5, 0.1));
        let den = poly::mul(&poly::from_reciprocal_roots(&[pp, pp]), &poly::from_reciprocal_roots(&[q]));
        let num = poly::add(
            &poly::from_reciprocal_roots(&[q]),
            &poly::scale(&poly::from_reciprocal_roots(&[pp, pp]), C64::new(0.5, 0.0)),
        );
        let sym = RationalSymbol::new(num, den)?;
        let r = roundtrip_symbol(&sym, cutoff, noise, seed)?;
        let mult = r
            .recovered_poles
            .iter()
            .zip(&r.multiplicities)
            .find(|(x, _)| (*x - pp).norm() < 1e-6)
            .map_or(0, |(_, m)| *m);
        p.metric("confluent_multiplicity", mult as f64);
        p.metric("confluent_pole_error", r.max_pole_error);
        confluent_report = Some(r);
    }
    p.states = json!({ "instances": reports, "confluent": confluent_report });
    Ok(p)
}

fn run_hs_growth(eps: &[f64], orders: &[f64], periods: usize) -> ExecResult<Produced> {
    let mut table = Table::new(
        "H^s norm of u(t_eps) for u0 = z + eps",
        ["s", "eps", "t_eps", "hs_norm", "p_abs", "rho_max", "sup_hs_norm"].iter().map(|s| s.to_string()).collect(),
    );
    let mut tables = vec![];
    let mut worst: f64 = 0.0;
    let mut slopes = vec![];
    for &s in orders {
        let t = hs_growth_series(eps, s, periods)?;
        for r in &t.rows {
            table.push(vec![s, r.eps, r.t_eps, r.hs_norm, r.p_modulus, r.rho_max, r.sup_hs_norm]);
        }
        let expected = 2.0 * s - 1.0;
        worst = worst.max((t.slope - expected).abs() / expected);
        slopes.push((s, t.slope));
        tables.push(t);
    }
    let mut p = Produced::new(table);
    for (s, slope) in slopes {
        p.metric(&format!("slope_s{s}"), slope);
    }
    p.metric("slope_rel_error_max", worst);
    p.states = json!({ "tables": tables });
    Ok(p)
}

fn run_identities(suites: &[String], q: &IdentityParams, seed: u64) -> ExecResult<Produced> {
    let mut table = Table::new(
        "identity suites: 1 rio residual, 2 sharp gap (random), 3 sharp gap (rank one), 4 scaled F2 (rank one), 5 F_N(z^(N-1) + z^(N-2))",
        ["suite", "index", "value"].iter().map(|s| s.to_string()).collect(),
    );
    let mut rng = seeded(seed);
    let mut metrics = BTreeMap::new();
    let one = C64::new(1.0, 0.0);
    let rank_one = |rng: &mut szego_core::random::SuiteRng| -> szego_core::Result<FourierSymbol> {
        let alpha = random_residues(rng, 1)[0];
        let p = random_in_disc(rng, q.m1_max_modulus);
        rational_to_fourier(&RationalState::single(alpha, p), geometric_cutoff(p.norm(), 8))
    };
    if suites.iter().any(|s| s == "rio") {
        let mut worst: f64 = 0.0;
        for i in 0..q.rio_samples {
            let u = random_polynomial(&mut rng, i % (q.rio_max_degree + 1), 1.0);
            let r = rio_residual(&u);
            worst = worst.max(r);
            table.push(vec![1.0, i as f64, r]);
        }
        metrics.insert("rio_residual_max", worst);
    }
    if suites.iter().any(|s| s == "sharp") {
        let mut gap_min = f64::INFINITY;
        for i in 0..q.sharp_samples {
            let g = sharp_inequality_gap(&random_symbol(&mut rng, q.sharp_cutoff, 1.0));
            gap_min = gap_min.min(g);
            table.push(vec![2.0, i as f64, g]);
        }
        let mut gap_m1 = f64::NEG_INFINITY;
        for i in 0..q.sharp_m1_samples {
            let g = sharp_inequality_gap(&rank_one(&mut rng)?);
            gap_m1 = gap_m1.max(g);
            table.push(vec![3.0, i as f64, g]);
        }
        metrics.insert("sharp_gap_min", gap_min);
        metrics.insert("sharp_rank_one_gap_max", gap_m1);
    }
    if suites.iter().any(|s| s == "genericity") {
        let mut worst: f64 = 0.0;
        for i in 0..q.genericity_m1_samples {
            let f = genericity_det_scaled(&rank_one(&mut rng)?, 2);
            worst = worst.max(f.abs());
            table.push(vec![4.0, i as f64, f]);
        }
        metrics.insert("genericity_rank_one_scaled_max", worst);
        metrics.insert("genericity_one_plus_z", genericity_det(&FourierSymbol::new(vec![one, one])?, 2));
        let mut least = f64::INFINITY;
        for n in 2..=q.genericity_max_n.max(2) {
            let mut c = vec![C64::new(0.0, 0.0); n];
            c[n - 1] = one;
            c[n - 2] = one;
            let f = genericity_det(&FourierSymbol::new(c)?, n);
            least = least.min(f.abs());
            table.push(vec![5.0, n as f64, f]);
        }
        metrics.insert("genericity_polynomial_min", least);
    }
    let mut p = Produced::new(table);
    for (k, v) in metrics {
        p.metric(k, v);
    }
    p.states = json!({ "suites": suites });
    Ok(p)
}

fn run_torus(initial: &InitialSpec, flow: &FlowConfig, seed: u64) -> ExecResult<Produced> {
    let u0 = initial.fourier(flow.cutoff, seed)?;
    let fit = best_torus(&u0)?;
    let series = integrate(&u0, flow, Field::Szego)?;
    let mut table = Table::new("distance to the best initial torus", ["t", "distance", "q", "m"].iter().map(|s| s.to_string()).collect());
    let mut sup: f64 = 0.0;
    for ((t, u), m) in series.times.iter().zip(&series.states).zip(&series.monitors) {
        let d = torus_distance(u, fit.a, fit.r)?;
        sup = sup.max(d);
        table.push(vec![*t, d, m.q, m.m]);
    }
    let mut p = Produced::new(table);
    p.metric("initial_distance", fit.distance);
    p.metric("sup_distance", sup);
    p.metric("torus_a", fit.a);
    p.metric("torus_r", fit.r);
    p.metric("q_drift", series.report().q_drift);
    p.states = json!({ "fit": fit, "times": series.times, "initial": u0, "final": series.final_state() });
    Ok(p)
}

fn run_sweep(members: &[Plan], parallel: bool, out: &Path, opts: RunOptions) -> ExecResult<Produced> {
    let dirs: Vec<PathBuf> = members.iter().map(|m| out.join(&m.name)).collect();
    let results: Vec<io::Result<Summary>> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                members.iter().zip(&dirs).map(|(m, d)| scope.spawn(move || execute(m, d, opts))).collect();
            handles.into_iter().map(|h| h.join().expect("member thread panicked")).collect()
        })
    } else {
        members.iter().zip(&dirs).map(|(m, d)| execute(m, d, opts)).collect()
    };
    let mut table = Table::new("sweep members in order", ["member", "pass"].iter().map(|s| s.to_string()).collect());
    let mut statuses = vec![];
    for (i, r) in results.into_iter().enumerate() {
        let s = r?;
        table.push(vec![i as f64, if s.pass { 1.0 } else { 0.0 }]);
        statuses.push(MemberStatus { name: s.name, pass: s.pass });
    }
    let mut p = Produced::new(table);
    p.metric("members_failed", statuses.iter().filter(|s| !s.pass).count() as f64);
    p.states = json!({ "members": statuses.iter().map(|s| &s.name).collect::<Vec<_>>() });
    p.members = statuses;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(text: &str) -> ConfigResult<Plan> {
        let cfg = Config::parse(text, "inline", Path::new("."))?;
        let p = plan_from_config(&cfg)?;
        cfg.finish()?;
        Ok(p)
    }

    #[test]
    fn invalid_parameters_rejected_before_compute() {
        assert!(plan("kind = \"evolve\"\n[initial]\nfamily = \"phi\"\np = 1.5\n").is_err());
        assert!(plan("kind = \"evolve\"\n[initial]\nfamily = \"phi\"\np = 0.5\n[flow]\ndt = -1\n").is_err());
        assert!(plan("kind = \"bogus\"\n").unwrap_err().0.contains("unknown kind"));
        assert!(plan("kind = \"hs-growth\"\nhs.s = [0.25]\n").is_err());
        assert!(plan("kind = \"identities\"\nchecks.sideways.x = 1\n").is_err());
        assert!(plan("kind = \"sweep\"\n").is_err());
        assert!(plan("kind = \"rational-evolve\"\n[initial]\nfamily = \"coeffs\"\ncoeffs = [1]\n").is_err());
        assert!(plan("kind = \"identities\"\nname = \"../x\"\n").is_err());
    }

    #[test]
    fn checks_parse() {
        let p = plan("kind = \"identities\"\n[checks.below]\nrio_residual_max = 1e-11\n[checks.equal]\nrank = 3\n").unwrap();
        assert_eq!(p.checks.len(), 2);
        assert!(p.checks.iter().any(|c| c.relation == Relation::Equal && c.threshold == 3.0));
    }

    #[test]
    fn initial_families() {
        let cfg = Config::parse("initial.family = \"z+eps\"\ninitial.eps = 0.1\ninitial.extra = [0, 0, 0.01]\n", "t", Path::new("."))
            .unwrap();
        let spec = parse_initial(&cfg).unwrap();
        let u = spec.fourier(4, 0).unwrap();
        assert_eq!(u.coeffs(), &[C64::new(0.1, 0.0), C64::new(1.0, 0.0), C64::new(0.01, 0.0), C64::new(0.0, 0.0)]);
        assert!(spec.exact().unwrap().is_none());
        assert_eq!(geometric_cutoff(0.5, 8), 57);
    }
}
