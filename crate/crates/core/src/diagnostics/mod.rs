//! Audits of the weak-solution inequalities along a finished trajectory,
//! exponential-rate fitting, and checks of the abstract decay lemma.

mod audits;
mod decay;
mod testfns;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinModel, GridFields};
use crate::timestepper::Trajectory;

pub use audits::{
    attainment_audit, corrected_total_energy_audit, entropy_audit, kinetic_energy_audit, kinetic_energy_series,
    l1_bound_audit, lyapunov_series, min_principle_audit, AttainmentGap, CorrectedTotalAudit,
};
pub use decay::{
    decay_lemma_check, fit_exponential_rate, snad_bound_check, theoretical_mu_estimate, DecayFit, DecayLemmaReport,
    LemmaPart, MuEstimate, SnadReport,
};
pub use testfns::{boundary_one_weights, space_bumps, time_hats, BoundaryWeight, SpaceBump, TimeHat};

/// Which inequality of the weak formulation a series audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InequalityTag {
    Kinetic,
    Entropy,
    CorrectedTotal,
    L1Bound,
    MinPrinciple,
    Attainment,
}

impl InequalityTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Kinetic => "KINETIC",
            Self::Entropy => "ENTROPY",
            Self::CorrectedTotal => "CORRECTED_TOTAL",
            Self::L1Bound => "L1_BOUND",
            Self::MinPrinciple => "MIN_PRINCIPLE",
            Self::Attainment => "ATTAINMENT",
        }
    }
}

/// How residual values are judged against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `value ≤ tol`.
    AtMost,
    /// `value ≥ −tol`.
    AtLeast,
    /// `|value| ≤ tol`.
    Magnitude,
}

/// Residual values indexed by time (and optionally a test-function label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub tag: InequalityTag,
    pub convention: Convention,
    pub tolerance: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Empty for plain time series; otherwise one label per value.
    pub labels: Vec<String>,
}

impl ResidualSeries {
    pub fn new(tag: InequalityTag, convention: Convention, tolerance: f64, times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "residual series lengths differ");
        Self {
            tag,
            convention,
            tolerance,
            times,
            values,
            labels: Vec::new(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.values.len(), "label count differs from value count");
        self.labels = labels;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn margin_of(&self, v: f64) -> f64 {
        match self.convention {
            Convention::AtMost => self.tolerance - v,
            Convention::AtLeast => v + self.tolerance,
            Convention::Magnitude => self.tolerance - v.abs(),
        }
    }

    /// Smallest slack over all entries; negative means a violation.
    /// NaN entries count as violations.
    pub fn worst_margin(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| if v.is_nan() { f64::NEG_INFINITY } else { self.margin_of(v) })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self) -> bool {
        self.worst_margin() >= 0.0
    }

    /// Index of the entry with the smallest margin.
    pub fn worst_index(&self) -> Option<usize> {
        (0..self.len()).min_by(|&i, &j| {
            let (a, b) = (self.margin_of(self.values[i]), self.margin_of(self.values[j]));
            a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Less)
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tolerance budgets. Time-discretisation budgets have the form
/// `c1 · dt + c2`; the kinetic budget scales `c1 · dt` by the largest
/// dissipation rate `2∫S:Dv` seen along the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub kinetic_c1: f64,
    pub kinetic_c2: f64,
    pub entropy_c1: f64,
    pub entropy_c2: f64,
    pub total_energy_c1: f64,
    pub total_energy_c2: f64,
    pub sign_term: f64,
    pub l1_bound: f64,
    pub min_principle: f64,
    pub attainment_rate: f64,
    pub attainment: f64,
    pub fit_r_squared: f64,
    pub mu_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kinetic_c1: 1.0,
            kinetic_c2: 1e-10,
            entropy_c1: 1.0,
            entropy_c2: 1e-8,
            total_energy_c1: 1.0,
            total_energy_c2: 1e-8,
            sign_term: 1e-12,
            l1_bound: 0.0,
            min_principle: 1e-6,
            attainment_rate: 100.0,
            attainment: 1e-12,
            fit_r_squared: 0.99,
            mu_ratio: 0.9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Vec<String> {
        let fields = [
            ("kinetic_c1", self.kinetic_c1),
            ("kinetic_c2", self.kinetic_c2),
            ("entropy_c1", self.entropy_c1),
            ("entropy_c2", self.entropy_c2),
            ("total_energy_c1", self.total_energy_c1),
            ("total_energy_c2", self.total_energy_c2),
            ("sign_term", self.sign_term),
            ("l1_bound", self.l1_bound),
            ("min_principle", self.min_principle),
            ("attainment_rate", self.attainment_rate),
            ("attainment", self.attainment),
            ("mu_ratio", self.mu_ratio),
        ];
        let mut errs: Vec<String> = fields
            .iter()
            .filter(|(_, v)| !(*v >= 0.0 && v.is_finite()))
            .map(|(k, v)| format!("tolerances.{k} = {v} must be finite and non-negative"))
            .collect();
        if !(0.0..=1.0).contains(&self.fit_r_squared) {
            errs.push(format!("tolerances.fit_r_squared = {} outside [0, 1]", self.fit_r_squared));
        }
        errs
    }

    pub fn entropy(&self, dt: f64) -> f64 {
        self.entropy_c1 * dt + self.entropy_c2
    }

    pub fn total_energy(&self, dt: f64) -> f64 {
        self.total_energy_c1 * dt + self.total_energy_c2
    }
}

/// Grid fields of every snapshot of a trajectory, computed once and shared
/// by all audits.
pub struct AuditContext<'a> {
    pub model: &'a GalerkinModel,
    pub times: Vec<f64>,
    pub fields: Vec<GridFields>,
    /// Nominal step of the run that produced the snapshots.
    pub dt: f64,
    weights: DMatrix<f64>,
}

impl<'a> AuditContext<'a> {
    /// Fails with a positivity fault if any snapshot has θ ≤ 0 at a node.
    pub fn new(model: &'a GalerkinModel, traj: &Trajectory) -> Result<Self> {
        if traj.snapshots.is_empty() {
            return Err(Error::Contract("trajectory has no snapshots".into()));
        }
        let fields = traj.snapshots.iter().map(|s| model.fields(s)).collect::<Result<Vec<_>>>()?;
        let q = model.grid.order;
        let w = &model.grid.weights;
        Ok(Self {
            model,
            times: traj.times(),
            fields,
            dt: traj.dt,
            weights: DMatrix::from_fn(q, q, |i, j| w[i] * w[j]),
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `∫_Ω g` for a grid field.
    pub fn integrate(&self, g: &DMatrix<f64>) -> f64 {
        self.weights.component_mul(g).sum()
    }

    /// `∫_Ω g` for a field given pointwise by node index.
    pub fn integrate_with(&self, g: impl Fn(usize, usize) -> f64) -> f64 {
        let q = self.model.grid.order;
        let mut total = 0.0;
        for j in 0..q {
            for i in 0..q {
                total += self.weights[(i, j)] * g(i, j);
            }
        }
        total
    }

    pub fn nodes(&self) -> &[f64] {
        &self.model.grid.nodes
    }
}

/// Cumulative trapezoid integral `∫_{t_0}^{t_k} g`.
pub fn cumulative_trapezoid(times: &[f64], g: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; times.len()];
    for k in 1..times.len() {
        acc[k] = acc[k - 1] + 0.5 * (times[k] - times[k - 1]) * (g[k] + g[k - 1]);
    }
    acc
}
