use serde::{Deserialize, Serialize};

use crate::timestepper::Trajectory;

/// Hand corruption applied to a finished trajectory before the audits run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mutant {
    /// Subtracts `shift` from the first temperature coefficient of every
    /// snapshot from `from_fraction` of the run onward.
    TemperatureOverwrite { from_fraction: f64, shift: f64 },
    /// Multiplies the velocity coefficients by `factor` from `from_fraction`
    /// of the run onward.
    EnergyInjection { from_fraction: f64, factor: f64 },
    /// Subtracts `shift` from the first temperature coefficient of the
    /// initial snapshot only.
    ColdStart { shift: f64 },
}

impl Mutant {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match *self {
            Mutant::TemperatureOverwrite { from_fraction, shift } => {
                check_fraction(from_fraction, &mut errs);
                if !shift.is_finite() {
                    errs.push("mutant.shift must be finite".into());
                }
            }
            Mutant::EnergyInjection { from_fraction, factor } => {
                check_fraction(from_fraction, &mut errs);
                if !(factor.is_finite() && factor >= 0.0) {
                    errs.push(format!("mutant.factor = {factor} must be finite and non-negative"));
                }
            }
            Mutant::ColdStart { shift } => {
                if !shift.is_finite() {
                    errs.push("mutant.shift must be finite".into());
                }
            }
        }
        errs
    }

    /// Which snapshots a replay touches, as `first..len`.
    fn first_index(&self, len: usize) -> usize {
        match *self {
            Mutant::TemperatureOverwrite { from_fraction, .. } | Mutant::EnergyInjection { from_fraction, .. } => {
                ((len as f64 * from_fraction).floor() as usize).min(len.saturating_sub(1))
            }
            Mutant::ColdStart { .. } => 0,
        }
    }

    pub fn apply(&self, traj: &mut Trajectory) {
        let first = self.first_index(traj.snapshots.len());
        match *self {
            Mutant::TemperatureOverwrite { shift, .. } => {
                for s in &mut traj.snapshots[first..] {
                    if let Some(c) = s.c.first_mut() {
                        *c -= shift;
                    }
                }
            }
            Mutant::EnergyInjection { factor, .. } => {
                for s in &mut traj.snapshots[first..] {
                    s.a.iter_mut().for_each(|a| *a *= factor);
                }
            }
            Mutant::ColdStart { shift } => {
                if let Some(c) = traj.snapshots.first_mut().and_then(|s| s.c.first_mut()) {
                    *c -= shift;
                }
            }
        }
    }
}

fn check_fraction(f: f64, errs: &mut Vec<String>) {
    if !(0.0..1.0).contains(&f) {
        errs.push(format!("mutant.from_fraction = {f} outside [0, 1)"));
    }
}
