//! Implicit time integration of `M ẋ = F(x)` by damped Newton iterations
//! with a finite-difference Jacobian, with step halving on failure.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinModel, GalerkinState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitEuler,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControls {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub snapshot_every: usize,
    pub min_principle_tol: f64,
    pub max_halvings: u32,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_end: 0.4,
            scheme: Scheme::ImplicitEuler,
            newton_tol: 1e-11,
            newton_max_iter: 30,
            snapshot_every: 1,
            min_principle_tol: 1e-6,
            max_halvings: 8,
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            errs.push(format!("t_end = {} must be non-negative", self.t_end));
        }
        if !(self.newton_tol > 0.0) {
            errs.push("newton_tol must be positive".into());
        }
        if !(self.min_principle_tol > 0.0) {
            errs.push("min_principle_tol must be positive".into());
        }
        if self.newton_max_iter == 0 {
            errs.push("newton_max_iter must be at least 1".into());
        }
        if self.snapshot_every == 0 {
            errs.push("snapshot_every must be at least 1".into());
        }
        errs
    }

    /// Number of steps of size `dt` needed to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// θ dropped below θ_ − tol at some quadrature point.
    MinPrinciple { min_theta: f64, theta_lo: f64 },
    /// A Newton solve failed and the step was retried with a smaller dt.
    DtHalved { level: u32, reason: String },
    /// θ ≤ 0 was met inside a Newton solve.
    PositivityFault { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub step: usize,
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<GalerkinState>,
    pub events: Vec<Event>,
    /// Newton iterations per accepted step (summed over sub-steps).
    pub newton_iterations: Vec<usize>,
    pub dt: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }
}

/// Integration stopped early; carries the partial trajectory.
#[derive(Debug)]
pub struct Aborted {
    pub error: Error,
    pub partial: Trajectory,
}

#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
}

struct Residual<'a> {
    model: &'a GalerkinModel,
    mass: &'a DMatrix<f64>,
    x: &'a DVector<f64>,
    t_new: f64,
    dt: f64,
    scheme: Scheme,
}

impl Residual<'_> {
    fn eval(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let nv = self.model.nv();
        let at = match self.scheme {
            Scheme::ImplicitEuler => y.clone(),
            Scheme::Midpoint => 0.5 * (self.x + y),
        };
        let state = GalerkinState::from_vector(self.t_new, &at, nv);
        let (fv, ft) = self.model.assemble_rhs(&state)?;
        let mut f = DVector::zeros(y.len());
        f.rows_mut(0, nv).copy_from(&fv);
        f.rows_mut(nv, ft.len()).copy_from(&ft);
        Ok(self.mass * (y - self.x) - self.dt * f)
    }

    fn jacobian(&self, y: &DVector<f64>, r0: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut j = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        for k in 0..n {
            let h = f64::EPSILON.sqrt() * y[k].abs().max(1.0);
            yp[k] = y[k] + h;
            let rk = self.eval(&yp)?;
            j.set_column(k, &((rk - r0) / h));
            yp[k] = y[k];
        }
        Ok(j)
    }
}

/// One implicit step of size `dt` from `state`.
pub fn step(model: &GalerkinModel, state: &GalerkinState, dt: f64, controls: &StepControls) -> Result<(GalerkinState, StepStats)> {
    let mass = model.mass_matrix();
    step_with_mass(model, &mass, state, dt, controls)
}

fn step_with_mass(
    model: &GalerkinModel,
    mass: &DMatrix<f64>,
    state: &GalerkinState,
    dt: f64,
    controls: &StepControls,
) -> Result<(GalerkinState, StepStats)> {
    let x = state.to_vector();
    let res = Residual {
        model,
        mass,
        x: &x,
        t_new: state.t + dt,
        dt,
        scheme: controls.scheme,
    };
    let tol = controls.newton_tol * (1.0 + x.amax());
    let mut y = x.clone();
    let mut r = res.eval(&y)?;
    let mut rnorm = r.amax();
    let mut lu = None;
    let mut iterations = 0;
    while rnorm > tol {
        if iterations >= controls.newton_max_iter {
            return Err(Error::Solver {
                message: format!("Newton did not converge in {iterations} iterations"),
                residual: rnorm,
            });
        }
        iterations += 1;
        if lu.is_none() {
            lu = Some(res.jacobian(&y, &r)?.lu());
        }
        let delta = lu
            .as_ref()
            .and_then(|f| f.solve(&(-&r)))
            .ok_or_else(|| Error::Solver { message: "singular Jacobian".into(), residual: rnorm })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = &y + lambda * &delta;
            match res.eval(&trial) {
                Ok(rt) if rt.amax() < rnorm => {
                    accepted = Some((trial, rt));
                    break;
                }
                Err(e @ Error::Positivity { .. }) if lambda < 1e-3 => return Err(e),
                _ => lambda *= 0.5,
            }
        }
        match accepted {
            Some((trial, rt)) => {
                let new_norm = rt.amax();
                // Keep the chord Jacobian while it contracts well.
                if lambda < 1.0 || new_norm > 0.25 * rnorm {
                    lu = None;
                }
                y = trial;
                r = rt;
                rnorm = new_norm;
            }
            None if lu.is_some() => {
                // The chord direction failed; refresh the Jacobian once.
                lu = Some(res.jacobian(&y, &r)?.lu());
                let delta = lu.as_ref().and_then(|f| f.solve(&(-&r))).ok_or_else(|| Error::Solver {
                    message: "singular Jacobian".into(),
                    residual: rnorm,
                })?;
                let trial = &y + &delta;
                let rt = res.eval(&trial)?;
                if rt.amax() >= rnorm {
                    return Err(Error::Solver {
                        message: "line search failed".into(),
                        residual: rnorm,
                    });
                }
                y = trial;
                rnorm = rt.amax();
                r = rt;
                lu = None;
            }
            None => {
                return Err(Error::Solver {
                    message: "line search failed".into(),
                    residual: rnorm,
                })
            }
        }
    }
    Ok((
        GalerkinState::from_vector(state.t + dt, &y, model.nv()),
        StepStats { iterations, residual: rnorm },
    ))
}

fn min_theta(model: &GalerkinModel, state: &GalerkinState) -> f64 {
    model.temperature.grid_fields(&state.c).theta.min()
}

/// Advances `state0` to `controls.t_end`, recording snapshots and events.
pub fn integrate(model: &GalerkinModel, state0: &GalerkinState, controls: &StepControls) -> std::result::Result<Trajectory, Box<Aborted>> {
    let mut traj = Trajectory {
        dt: controls.dt,
        ..Trajectory::default()
    };
    if let Some(e) = controls.validate().into_iter().next() {
        return Err(Box::new(Aborted {
            error: Error::config(e),
            partial: traj,
        }));
    }
    let mass = model.mass_matrix();
    let theta_lo = model.temperature.steady.theta_lo;
    let mut state = state0.clone();
    traj.snapshots.push(state.clone());
    let check_min = |traj: &mut Trajectory, state: &GalerkinState, step: usize| {
        let m = min_theta(model, state);
        if m < theta_lo - controls.min_principle_tol {
            traj.events.push(Event {
                step,
                t: state.t,
                kind: EventKind::MinPrinciple { min_theta: m, theta_lo },
            });
        }
    };
    check_min(&mut traj, &state, 0);
    let n = controls.n_steps();
    for k in 1..=n {
        let t_target = state0.t + k as f64 * controls.dt;
        let dt = t_target - state.t;
        let mut level = 0;
        let next = loop {
            let subs = 1usize << level;
            let h = dt / subs as f64;
            let mut s = state.clone();
            let mut iters = 0;
            let mut failure = None;
            for _ in 0..subs {
                match step_with_mass(model, &mass, &s, h, controls) {
                    Ok((ns, st)) => {
                        iters += st.iterations;
                        s = ns;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
            match failure {
                None => {
                    s.t = t_target;
                    traj.newton_iterations.push(iters);
                    break s;
                }
                Some(e) => {
                    if let Error::Positivity { index, value } = e {
                        traj.events.push(Event {
                            step: k,
                            t: state.t,
                            kind: EventKind::PositivityFault { index, value },
                        });
                    }
                    if level >= controls.max_halvings {
                        return Err(Box::new(Aborted { error: e, partial: traj }));
                    }
                    level += 1;
                    traj.events.push(Event {
                        step: k,
                        t: state.t,
                        kind: EventKind::DtHalved {
                            level,
                            reason: e.to_string(),
                        },
                    });
                }
            }
        };
        state = next;
        check_min(&mut traj, &state, k);
        if k % controls.snapshot_every == 0 || k == n {
            traj.snapshots.push(state.clone());
        }
    }
    Ok(traj)
}
