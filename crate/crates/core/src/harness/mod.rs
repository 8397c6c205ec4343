//! Scenario configuration, orchestration and artifact output.

mod config;
mod mutant;
mod output;
mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::correction::CorrectionFn;
use crate::diagnostics::{
    attainment_audit, corrected_total_energy_audit, decay_lemma_check, entropy_audit, fit_exponential_rate,
    kinetic_energy_audit, kinetic_energy_series, l1_bound_audit, lyapunov_series, min_principle_audit,
    snad_bound_check, theoretical_mu_estimate, AttainmentGap, AuditContext, Convention, CorrectedTotalAudit,
    InequalityTag, LemmaPart, MuEstimate, ResidualSeries,
};
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinModel, GalerkinState};
use crate::quadrature::QuadratureGrid;
use crate::steady::{solve_steady_temperature, SteadyTemperature};
use crate::timestepper::{integrate, EventKind, Trajectory};

pub use config::{
    lyapunov_alpha_window, parse_config, AuditSwitches, ConvexityPlanSpec, CorrectionGridSpec, FluidSpec,
    InitialData, OutputSpec, Resolution, RunConfig, SamplingPlanSpec, TemperatureInit, ValidationSpec, VelocityInit,
};
pub use mutant::Mutant;
pub use output::{read_time_series, sha256_hex};
pub use presets::{preset, PRESETS};

/// Environment variable overriding the output root directory.
pub const OUTPUT_ROOT_ENV: &str = "NSF_OUTPUT_ROOT";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_AUDIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER_ABORT: i32 = 3;

/// Exit code for an error raised before any output was produced.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Solver { .. } | Error::Positivity { .. } => EXIT_SOLVER_ABORT,
        _ => EXIT_CONFIG,
    }
}

/// Output root: `$NSF_OUTPUT_ROOT` if set, else `runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Pass,
    AuditFailure,
    SolverAbort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub name: String,
    pub pass: bool,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub convention: Option<Convention>,
    pub worst_time: Option<f64>,
    pub worst_label: Option<String>,
    /// Secondary quantities reported alongside the verdict.
    pub details: BTreeMap<String, f64>,
    pub error: Option<String>,
    pub file: Option<String>,
}

impl AuditEntry {
    fn from_series(series: &ResidualSeries, file: String) -> Self {
        let worst = series.worst_index();
        Self {
            name: series.tag.name().to_owned(),
            pass: series.passes(),
            worst_margin: series.worst_margin(),
            tolerance: series.tolerance,
            convention: Some(series.convention),
            worst_time: worst.map(|k| series.times[k]),
            worst_label: worst.and_then(|k| series.labels.get(k).cloned()),
            details: BTreeMap::new(),
            error: None,
            file: Some(file),
        }
    }

    fn failed(tag: InequalityTag, error: String) -> Self {
        Self {
            name: tag.name().to_owned(),
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            tolerance: f64::NAN,
            convention: None,
            worst_time: None,
            worst_label: None,
            details: BTreeMap::new(),
            error: Some(error),
            file: None,
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_owned(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitEntry {
    pub series: String,
    pub status: CheckStatus,
    pub mu_fit: Option<f64>,
    pub r_squared: Option<f64>,
    pub window: [f64; 2],
    pub points: usize,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: CheckStatus,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl CheckEntry {
    fn new(name: &str, pass: bool, value: Option<f64>, threshold: Option<f64>, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn skipped(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            status: CheckStatus::Skipped,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventCounts {
    pub min_principle: usize,
    pub dt_halved: usize,
    pub positivity_fault: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub name: String,
    pub status: RunStatus,
    pub pass: bool,
    pub abort: Option<String>,
    pub dt: f64,
    pub snapshots: usize,
    pub t_final: f64,
    pub theta_bounds: [f64; 2],
    pub audits: Vec<AuditEntry>,
    pub fits: Vec<FitEntry>,
    pub theoretical_mu: Option<MuEstimate>,
    pub checks: Vec<CheckEntry>,
    pub attainment: Option<AttainmentGap>,
    pub events: EventCounts,
    pub mutant: Option<Mutant>,
    /// Every artifact written, relative to the run directory.
    pub files: Vec<String>,
    pub provenance: Provenance,
}

impl SummaryReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Pass => EXIT_PASS,
            RunStatus::AuditFailure => EXIT_AUDIT_FAILURE,
            RunStatus::SolverAbort => EXIT_SOLVER_ABORT,
        }
    }

    pub fn audit(&self, name: &str) -> Option<&AuditEntry> {
        self.audits.iter().find(|a| a.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, series: &str) -> Option<&FitEntry> {
        self.fits.iter().find(|f| f.series == series)
    }
}

/// Everything built before time stepping.
pub struct Setup {
    pub steady: SteadyTemperature,
    pub model: GalerkinModel,
    pub initial: GalerkinState,
    pub theta_bounds: (f64, f64),
    pub correction: CorrectionFn,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let params = cfg.fluid.build()?;
        let r = &cfg.resolution;
        let grid = QuadratureGrid::new(r.quadrature_order.unwrap_or_else(|| QuadratureGrid::default_order(r.max_mode())));
        let given = cfg.theta_bounds.map(|[lo, hi]| (lo, hi));
        let boundary = match given {
            Some(b) => b,
            None => cfg.boundary.boundary_range(&params, 64)?,
        };
        let [kx, ky] = r.temperature_modes;
        let steady = solve_steady_temperature(&cfg.boundary, &params, (kx, ky), &grid, boundary)?;
        let [mx, my] = r.velocity_modes;
        let model = GalerkinModel::new((mx, my), (kx, ky), &steady, &params, grid, cfg.coupling)?;
        let initial = initial_state(&model, &steady, &cfg.initial)?;
        let theta_bounds = match given {
            Some(b) => b,
            None => {
                let f = model
                    .fields(&initial)
                    .map_err(|e| Error::config(format!("initial temperature: {e}")))?;
                (boundary.0.min(f.temp.theta.min()), boundary.1.max(f.temp.theta.max()))
            }
        };
        let correction = cfg.correction.build(theta_bounds.0, theta_bounds.1)?;
        Ok(Self {
            steady,
            model,
            initial,
            theta_bounds,
            correction,
        })
    }
}

fn quartic_bump(x: f64, y: f64) -> f64 {
    (16.0 * x * (1.0 - x) * y * (1.0 - y)).powi(2)
}

pub fn initial_state(model: &GalerkinModel, steady: &SteadyTemperature, init: &InitialData) -> Result<GalerkinState> {
    let mut a = vec![0.0; model.nv()];
    match init.velocity {
        VelocityInit::Zero => {}
        VelocityInit::SingleMode { m, n, amplitude } => {
            let k = model
                .velocity
                .modes()
                .iter()
                .position(|&mode| mode == (m, n))
                .ok_or_else(|| Error::config(format!("velocity mode ({m}, {n}) not in the basis")))?;
            a[k] = amplitude;
        }
        VelocityInit::Random { seed, energy } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (c, (m, n)) in a.iter_mut().zip(model.velocity.modes()) {
                *c = rng.gen_range(-1.0..=1.0) / (m * m + n * n) as f64;
            }
            let e = model.velocity.l2_norm_sq(&a);
            let scale = if e > 0.0 { (energy / e).sqrt() } else { 0.0 };
            a.iter_mut().for_each(|c| *c *= scale);
        }
    }
    let c = match init.temperature {
        TemperatureInit::Steady => vec![0.0; model.nt()],
        TemperatureInit::Constant { value } => model.project_temperature(|_, _| value)?,
        TemperatureInit::Bump { amplitude } => model.project_temperature(|x, y| {
            steady.eval_at(x, y).map(|(t, _)| t).unwrap_or(f64::NAN) + amplitude * quartic_bump(x, y)
        })?,
    };
    Ok(GalerkinState { t: 0.0, a, c })
}

/// Result of one scenario: the report and where its artifacts live.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub summary: SummaryReport,
    pub dir: PathBuf,
}

fn run_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    let sub = cfg.output_dir.clone().unwrap_or_else(|| cfg.name.clone());
    let p = PathBuf::from(sub);
    if p.is_absolute() {
        p
    } else {
        root.join(p)
    }
}

/// Runs a validated scenario, writing CSV artifacts and `summary.json`
/// into the run directory under `root`.
pub fn run_scenario(cfg: &RunConfig, root: &Path) -> Result<ScenarioOutcome> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let setup = Setup::build(cfg)?;
    let dir = run_dir(cfg, root);
    fs::create_dir_all(&dir)?;
    let (mut traj, abort) = match integrate(&setup.model, &setup.initial, &cfg.controls) {
        Ok(t) => (t, None),
        Err(aborted) => (aborted.partial, Some(aborted.error.to_string())),
    };
    if let Some(m) = &cfg.mutant {
        m.apply(&mut traj);
    }
    let summary = audit_and_write(cfg, &setup, &traj, abort, &dir)?;
    Ok(ScenarioOutcome { summary, dir })
}

const ENERGY_SLACK: f64 = 1e-13;

struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Artifacts<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<String> {
        let f = output::write(self.dir, name, contents)?;
        self.files.push(f.clone());
        Ok(f)
    }
}

fn audit_and_write(
    cfg: &RunConfig,
    setup: &Setup,
    traj: &Trajectory,
    abort: Option<String>,
    dir: &Path,
) -> Result<SummaryReport> {
    let mut art = Artifacts { dir, files: Vec::new() };
    let sw = &cfg.audits;
    let tol = &cfg.tolerances;
    let model = &setup.model;
    let (theta_lo, theta_hi) = setup.theta_bounds;
    let mut audits = Vec::new();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    let mut attainment = None;
    let theoretical_mu = theoretical_mu_estimate(&model.velocity, &model.params).ok();

    let ctx = if traj.snapshots.is_empty() {
        Err(Error::Contract("trajectory has no snapshots".into()))
    } else {
        AuditContext::new(model, traj)
    };
    match ctx {
        Err(e) => {
            let msg = e.to_string();
            let enabled = [
                (sw.kinetic, InequalityTag::Kinetic),
                (sw.entropy, InequalityTag::Entropy),
                (sw.corrected_total, InequalityTag::CorrectedTotal),
                (sw.l1_bound, InequalityTag::L1Bound),
                (sw.min_principle, InequalityTag::MinPrinciple),
                (sw.attainment, InequalityTag::Attainment),
            ];
            audits.extend(
                enabled
                    .iter()
                    .filter(|(on, _)| *on)
                    .map(|(_, tag)| AuditEntry::failed(*tag, msg.clone())),
            );
        }
        Ok(ctx) => {
            let (entropy, total) = std::thread::scope(|s| {
                let entropy = sw.entropy.then(|| s.spawn(|| entropy_audit(&ctx, tol)));
                let total = sw
                    .corrected_total
                    .then(|| s.spawn(|| corrected_total_energy_audit(&ctx, &setup.correction, tol)));
                (
                    entropy.map(|h| h.join().expect("audit thread panicked")),
                    total.map(|h| h.join().expect("audit thread panicked")),
                )
            });
            let times = ctx.times.clone();
            let energy = kinetic_energy_series(&ctx);
            art.put("energy.csv", &output::time_series_csv(&times, &energy))?;

            if sw.kinetic {
                let k = kinetic_energy_audit(&ctx, tol);
                let f = art.put("kinetic.csv", &output::residual_csv(&k, &[]))?;
                audits.push(AuditEntry::from_series(&k, f).detail("max_abs", k.max_abs()));
                let worst = energy
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                let slack = ENERGY_SLACK * energy[0].max(f64::MIN_POSITIVE);
                checks.push(CheckEntry::new(
                    "energy_non_increasing",
                    energy.len() < 2 || worst <= slack,
                    Some(worst.max(0.0)),
                    Some(slack),
                    "largest snapshot-to-snapshot increase of the kinetic energy",
                ));
            }
            if let Some(e) = entropy {
                audits.push(match e {
                    Ok(series) => {
                        let f = art.put("entropy.csv", &output::residual_csv(&series, &[]))?;
                        AuditEntry::from_series(&series, f)
                    }
                    Err(err) => AuditEntry::failed(InequalityTag::Entropy, err.to_string()),
                });
            }
            if let Some(t) = total {
                audits.push(match t {
                    Ok(t) => total_entry(&t, &mut art)?,
                    Err(err) => AuditEntry::failed(InequalityTag::CorrectedTotal, err.to_string()),
                });
            }
            if sw.l1_bound {
                let s = l1_bound_audit(&ctx, theta_hi, tol);
                let f = art.put("l1_bound.csv", &output::residual_csv(&s, &[]))?;
                audits.push(AuditEntry::from_series(&s, f));
            }
            if sw.min_principle {
                let s = min_principle_audit(&ctx, theta_lo, tol);
                let f = art.put("min_principle.csv", &output::residual_csv(&s, &[]))?;
                audits.push(AuditEntry::from_series(&s, f));
            }
            if sw.attainment {
                let (gap, s) = attainment_audit(&ctx, tol);
                let f = art.put("attainment.csv", &output::residual_csv(&s, &[]))?;
                audits.push(
                    AuditEntry::from_series(&s, f)
                        .detail("t1", gap.t1)
                        .detail("velocity_gap", gap.velocity)
                        .detail("temperature_gap", gap.temperature),
                );
                attainment = Some(gap);
            }

            let window = sw.fit_window.unwrap_or_else(|| {
                let n = times.len();
                [times[n / 2], times[n - 1]]
            });
            if sw.decay {
                let fit = fit_entry("kinetic_energy", &times, &energy, window);
                decay_checks(cfg, &times, &energy, &fit, theoretical_mu, &mut checks);
                fits.push(fit);
            }
            if sw.lyapunov {
                let lyap = lyapunov_series(&ctx, &cfg.lyapunov);
                art.put("lyapunov.csv", &output::time_series_csv(&times, &lyap))?;
                let fit = fit_entry("lyapunov", &times, &lyap, window);
                lyapunov_checks(cfg, &lyap, &fit, &mut checks);
                fits.push(fit);
            }
            if !fits.is_empty() {
                art.put("fits.csv", &output::fits_csv(&fits))?;
            }
        }
    }

    let n = traj.snapshots.len();
    let mut picked: Vec<usize> = cfg
        .output
        .field_snapshots
        .iter()
        .filter_map(|&k| {
            let idx = if k < 0 { n as i64 + k } else { k };
            (0..n as i64).contains(&idx).then_some(idx as usize)
        })
        .collect();
    picked.sort_unstable();
    picked.dedup();
    for k in picked {
        let csv = output::field_csv(model, &traj.snapshots[k], cfg.output.field_grid)?;
        art.put(&format!("fields_{k:05}.csv"), &csv)?;
    }

    let events = EventCounts {
        min_principle: traj.count(|e| matches!(e, EventKind::MinPrinciple { .. })),
        dt_halved: traj.count(|e| matches!(e, EventKind::DtHalved { .. })),
        positivity_fault: traj.count(|e| matches!(e, EventKind::PositivityFault { .. })),
        newton_iterations: traj.newton_iterations.iter().sum(),
    };
    let all_pass =
        audits.iter().all(|a| a.pass) && checks.iter().all(|c| c.status != CheckStatus::Fail);
    let status = match (&abort, all_pass) {
        (Some(_), _) => RunStatus::SolverAbort,
        (None, true) => RunStatus::Pass,
        (None, false) => RunStatus::AuditFailure,
    };
    let config_json = serde_json::to_string(cfg).map_err(|e| Error::config(e.to_string()))?;
    let summary = SummaryReport {
        name: cfg.name.clone(),
        status,
        pass: status == RunStatus::Pass,
        abort,
        dt: cfg.controls.dt,
        snapshots: n,
        t_final: traj.snapshots.last().map_or(0.0, |s| s.t),
        theta_bounds: [theta_lo, theta_hi],
        audits,
        fits,
        theoretical_mu,
        checks,
        attainment,
        events,
        mutant: cfg.mutant.clone(),
        files: art.files,
        provenance: Provenance {
            config_sha256: sha256_hex(config_json.as_bytes()),
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
        },
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::config(e.to_string()))?;
    fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

fn total_entry(t: &CorrectedTotalAudit, art: &mut Artifacts) -> Result<AuditEntry> {
    let f = art.put(
        "corrected_total.csv",
        &output::residual_csv(&t.inequality, &[("equality", &t.equality.values)]),
    )?;
    art.put("corrected_total_sign.csv", &output::residual_csv(&t.sign_term, &[]))?;
    let sign_min = t.sign_term.values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut entry = AuditEntry::from_series(&t.inequality, f)
        .detail("equality_max_abs", t.equality.max_abs())
        .detail("sign_term_min", sign_min)
        .detail("sign_term_margin", t.sign_term.worst_margin());
    entry.pass = entry.pass && t.sign_term.passes();
    Ok(entry)
}

fn fit_entry(series: &str, times: &[f64], values: &[f64], window: [f64; 2]) -> FitEntry {
    let skipped = |reason: String| FitEntry {
        series: series.to_owned(),
        status: CheckStatus::Skipped,
        mu_fit: None,
        r_squared: None,
        window,
        points: 0,
        reason: Some(reason),
    };
    if values.iter().all(|v| *v == 0.0) {
        return skipped("series identically zero".into());
    }
    match fit_exponential_rate(times, values, window) {
        Ok(fit) => FitEntry {
            series: series.to_owned(),
            status: CheckStatus::Pass,
            mu_fit: Some(fit.mu_fit),
            r_squared: Some(fit.r_squared),
            window,
            points: fit.points,
            reason: None,
        },
        Err(e) => skipped(e.to_string()),
    }
}

fn decay_checks(
    cfg: &RunConfig,
    times: &[f64],
    energy: &[f64],
    fit: &FitEntry,
    mu: Option<MuEstimate>,
    checks: &mut Vec<CheckEntry>,
) {
    let tol = &cfg.tolerances;
    let p = cfg.fluid.p;
    let (Some(mu_fit), Some(r2)) = (fit.mu_fit, fit.r_squared) else {
        let why = fit.reason.clone().unwrap_or_default();
        for name in ["energy_fit_r_squared", "energy_mu_ratio", "energy_decay_bound"] {
            checks.push(CheckEntry::skipped(name, why.clone()));
        }
        return;
    };
    checks.push(CheckEntry::new(
        "energy_fit_r_squared",
        r2 >= tol.fit_r_squared,
        Some(r2),
        Some(tol.fit_r_squared),
        "log-linear R² of the kinetic energy on the fit window",
    ));
    match mu {
        Some(mu) if p >= 2.0 => {
            let threshold = tol.mu_ratio * mu.mu;
            checks.push(CheckEntry::new(
                "energy_mu_ratio",
                mu_fit >= threshold,
                Some(mu_fit),
                Some(threshold),
                "fitted rate against the discrete rate estimate",
            ));
            checks.push(match decay_lemma_check(times, energy, mu.mu, LemmaPart::Exponential) {
                Ok(r) => CheckEntry::new(
                    "energy_decay_bound",
                    r.pass,
                    Some(r.worst_margin),
                    Some(0.0),
                    format!("exponential decay lemma with C1 = {:.6e} over {} pairs", mu.mu, r.pairs),
                ),
                Err(e) => CheckEntry::new("energy_decay_bound", false, None, None, e.to_string()),
            });
        }
        _ => {
            checks.push(CheckEntry::skipped(
                "energy_mu_ratio",
                "rate estimate covers only small data below p = 2",
            ));
            let r = snad_bound_check(times, energy, mu_fit, p);
            checks.push(CheckEntry::new(
                "energy_decay_bound",
                r.pass,
                Some(r.worst_margin),
                Some(0.0),
                format!(
                    "{} bound with the fitted rate; largest rate satisfying it: {:.6e}",
                    if r.applies { "large-data" } else { "small-data" },
                    r.admissible_mu
                ),
            ));
        }
    }
}

fn lyapunov_checks(cfg: &RunConfig, lyap: &[f64], fit: &FitEntry, checks: &mut Vec<CheckEntry>) {
    if lyap.iter().all(|v| *v == 0.0) {
        checks.push(CheckEntry::skipped("lyapunov_strictly_decreasing", "series identically zero"));
    } else {
        let worst = lyap
            .windows(2)
            .skip(1)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckEntry::new(
            "lyapunov_strictly_decreasing",
            lyap.len() < 3 || worst < 0.0,
            Some(worst),
            Some(0.0),
            "largest snapshot-to-snapshot change after the second snapshot",
        ));
    }
    match fit.r_squared {
        Some(r2) => checks.push(CheckEntry::new(
            "lyapunov_fit_r_squared",
            r2 >= cfg.tolerances.fit_r_squared,
            Some(r2),
            Some(cfg.tolerances.fit_r_squared),
            "log-linear R² of the Lyapunov functional on the fit window",
        )),
        None => checks.push(CheckEntry::skipped(
            "lyapunov_fit_r_squared",
            fit.reason.clone().unwrap_or_default(),
        )),
    }
}

/// Runs several configs concurrently on `jobs` worker threads, each into
/// its own run directory. Results come back in input order.
pub fn run_sweep(cfgs: &[RunConfig], root: &Path, jobs: usize) -> Vec<Result<ScenarioOutcome>> {
    let mut dirs: Vec<PathBuf> = cfgs.iter().map(|c| run_dir(c, root)).collect();
    dirs.sort();
    if dirs.windows(2).any(|w| w[0] == w[1]) {
        return cfgs
            .iter()
            .map(|_| Err(Error::config("sweep configs must have distinct output directories")))
            .collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<ScenarioOutcome>>>> =
        cfgs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, cfgs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k >= cfgs.len() {
                    break;
                }
                let r = run_scenario(&cfgs[k], root);
                *slots[k].lock().expect("sweep slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("sweep slot poisoned").expect("job not run"))
        .collect()
}
