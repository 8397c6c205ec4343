use serde::{Deserialize, Serialize};

use crate::constitutive::{FluidParams, SamplingPlan, ScalarLaw};
use crate::correction::{CorrectionGrid, CorrectionSpec};
use crate::diagnostics::Tolerances;
use crate::error::{Error, Result};
use crate::galerkin::Coupling;
use crate::lyapunov::{ConvexityPlan, LyapunovParams};
use crate::steady::BoundaryData;
use crate::timestepper::StepControls;

use super::mutant::Mutant;

/// Full description of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub name: String,
    /// Relative to the output root unless absolute.
    pub output_dir: Option<String>,
    pub resolution: Resolution,
    pub fluid: FluidSpec,
    pub coupling: Coupling,
    pub boundary: BoundaryData,
    /// `[θ_, θ̄]`; defaults to the range of the boundary data widened by the
    /// initial temperature.
    pub theta_bounds: Option<[f64; 2]>,
    pub correction: CorrectionSpec,
    pub lyapunov: LyapunovParams,
    pub initial: InitialData,
    pub controls: StepControls,
    pub tolerances: Tolerances,
    pub audits: AuditSwitches,
    pub output: OutputSpec,
    pub validation: ValidationSpec,
    pub mutant: Option<Mutant>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            output_dir: None,
            resolution: Resolution::default(),
            fluid: FluidSpec::default(),
            coupling: Coupling::default(),
            boundary: BoundaryData::Constant { value: 2.0 },
            theta_bounds: None,
            correction: CorrectionSpec::Prototype { alpha: 0.6 },
            lyapunov: LyapunovParams { alpha: 0.6, beta: 1.0 },
            initial: InitialData::default(),
            controls: StepControls::default(),
            tolerances: Tolerances::default(),
            audits: AuditSwitches::default(),
            output: OutputSpec::default(),
            validation: ValidationSpec::default(),
            mutant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolution {
    pub velocity_modes: [usize; 2],
    pub temperature_modes: [usize; 2],
    /// Gauss points per direction; `None` picks the default for the modes.
    pub quadrature_order: Option<usize>,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            velocity_modes: [4, 4],
            temperature_modes: [8, 8],
            quadrature_order: None,
        }
    }
}

impl Resolution {
    pub fn max_mode(&self) -> usize {
        let [mx, my] = self.velocity_modes;
        let [kx, ky] = self.temperature_modes;
        (2 * mx).max(2 * my).max(kx).max(ky)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidSpec {
    pub p: f64,
    pub delta: f64,
    pub nu: ScalarLaw,
    pub kappa: ScalarLaw,
}

impl Default for FluidSpec {
    fn default() -> Self {
        Self {
            p: 2.0,
            delta: 1.0,
            nu: ScalarLaw::constant(1.0),
            kappa: ScalarLaw::constant(1.0),
        }
    }
}

impl FluidSpec {
    pub fn build(&self) -> Result<FluidParams> {
        FluidParams::new(self.p, self.delta, self.nu.clone(), self.kappa.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityInit {
    Zero,
    /// Coefficient `amplitude` on the stream mode `(m, n)`.
    SingleMode { m: usize, n: usize, amplitude: f64 },
    /// Seeded random coefficients, rescaled to `‖v₀‖₂² = energy`.
    Random { seed: u64, energy: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TemperatureInit {
    Steady,
    Constant { value: f64 },
    /// `θ̂ + amplitude · (16 x(1−x) y(1−y))²`.
    Bump { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub velocity: VelocityInit,
    pub temperature: TemperatureInit,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            velocity: VelocityInit::Zero,
            temperature: TemperatureInit::Steady,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSwitches {
    pub kinetic: bool,
    pub entropy: bool,
    pub corrected_total: bool,
    pub l1_bound: bool,
    pub min_principle: bool,
    pub attainment: bool,
    pub lyapunov: bool,
    pub decay: bool,
    /// Fit window `[t_a, t_b]`; `None` means the second half of the run.
    pub fit_window: Option<[f64; 2]>,
}

impl Default for AuditSwitches {
    fn default() -> Self {
        Self {
            kinetic: true,
            entropy: true,
            corrected_total: true,
            l1_bound: true,
            min_principle: true,
            attainment: true,
            lyapunov: true,
            decay: true,
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Points per direction of the uniform grid used for field snapshots.
    pub field_grid: usize,
    /// Snapshot indices whose fields are written; negative counts from the end.
    pub field_snapshots: Vec<i64>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            field_grid: 21,
            field_snapshots: vec![0, -1],
        }
    }
}

/// Sampling plans of the stand-alone validators.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSpec {
    pub sampling: SamplingPlanSpec,
    pub correction_grid: CorrectionGridSpec,
    pub convexity: ConvexityPlanSpec,
    /// Exponent of the convexity check; defaults to `lyapunov.alpha`.
    pub convexity_alpha: Option<f64>,
}

macro_rules! plan_wrapper {
    ($name:ident, $inner:ty) => {
        /// Serde wrapper comparing by serialised value.
        #[derive(Debug, Clone, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl PartialEq for $name {
            fn eq(&self, other: &Self) -> bool {
                serde_json::to_value(&self.0).ok() == serde_json::to_value(&other.0).ok()
            }
        }
    };
}

plan_wrapper!(SamplingPlanSpec, SamplingPlan);
plan_wrapper!(CorrectionGridSpec, CorrectionGrid);
plan_wrapper!(ConvexityPlanSpec, ConvexityPlan);

/// Lower end of the exponent range for which the Lyapunov decay is claimed.
const P_STABILITY_LO: f64 = 8.0 / 5.0;
const P_STABILITY_HI: f64 = 11.0 / 5.0;

/// Admissible `α` for the Lyapunov decay at exponent `p`, as `(lo_open, lo, hi)`:
/// `α ∈ (1/2, 2/3] ∩ [2 − 5p/6, 2/3]` for `p ≤ 2`, `(1/2, 2/3]` above.
pub fn lyapunov_alpha_window(p: f64) -> Option<(f64, f64)> {
    if !(P_STABILITY_LO..=P_STABILITY_HI).contains(&p) {
        return None;
    }
    let lo = if p <= 2.0 { (2.0 - 5.0 * p / 6.0).max(0.5) } else { 0.5 };
    Some((lo, 2.0 / 3.0))
}

impl RunConfig {
    /// Every problem found, not only the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            errs.push(format!("name = {:?} must be a non-empty file-name component", self.name));
        }
        let r = &self.resolution;
        if r.velocity_modes.contains(&0) || r.temperature_modes.contains(&0) {
            errs.push("resolution: every mode count must be at least 1".into());
        }
        if r.velocity_modes.iter().any(|m| *m > 8) || r.temperature_modes.iter().any(|m| *m > 16) {
            errs.push("resolution: at most 8 velocity and 16 temperature modes per direction".into());
        }
        if let Some(q) = r.quadrature_order {
            if !(2..=256).contains(&q) {
                errs.push(format!("resolution.quadrature_order = {q} outside [2, 256]"));
            }
        }
        if let Err(e) = self.fluid.build() {
            errs.push(format!("fluid: {e}"));
        }
        if let Some([lo, hi]) = self.theta_bounds {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                errs.push(format!("theta_bounds = [{lo}, {hi}] must satisfy 0 < lo <= hi"));
            }
        }
        if let Err(e) = LyapunovParams::new(self.lyapunov.alpha, self.lyapunov.beta) {
            errs.push(format!("lyapunov: {e}"));
        }
        if self.audits.lyapunov {
            let (p, alpha) = (self.fluid.p, self.lyapunov.alpha);
            match lyapunov_alpha_window(p) {
                None => errs.push(format!(
                    "lyapunov audit needs p in [8/5, 11/5] (the alpha window (1/2, 2/3] ∩ [2 - 5p/6, 2/3] is empty below p = 8/5); got p = {p}"
                )),
                Some((lo, hi)) => {
                    if !(alpha > lo || (alpha == lo && lo > 0.5)) || alpha > hi {
                        errs.push(format!(
                            "lyapunov.alpha = {alpha} outside the stability window (1/2, 2/3] ∩ [2 - 5p/6, 2/3] = [{lo:.6}, {hi:.6}] for p = {p}"
                        ));
                    }
                }
            }
        }
        match &self.correction {
            CorrectionSpec::Prototype { alpha } if !(*alpha > 0.0 && *alpha < 1.0) => {
                errs.push(format!("correction.alpha = {alpha} outside (0, 1)"));
            }
            CorrectionSpec::Custom { gamma, .. } if !(*gamma > -1.0 && *gamma < 0.0) => {
                errs.push(format!("correction.gamma = {gamma} outside (-1, 0)"));
            }
            _ => {}
        }
        match self.initial.velocity {
            VelocityInit::SingleMode { m, n, amplitude } => {
                let [mx, my] = r.velocity_modes;
                if m == 0 || n == 0 || m > mx || n > my {
                    errs.push(format!("initial.velocity mode ({m}, {n}) outside the {mx}x{my} basis"));
                }
                if !amplitude.is_finite() {
                    errs.push("initial.velocity.amplitude must be finite".into());
                }
            }
            VelocityInit::Random { energy, .. } if !(energy >= 0.0 && energy.is_finite()) => {
                errs.push(format!("initial.velocity.energy = {energy} must be non-negative"));
            }
            _ => {}
        }
        match self.initial.temperature {
            TemperatureInit::Constant { value } if !(value > 0.0 && value.is_finite()) => {
                errs.push(format!("initial.temperature.value = {value} must be positive"));
            }
            TemperatureInit::Bump { amplitude } if !amplitude.is_finite() => {
                errs.push("initial.temperature.amplitude must be finite".into());
            }
            _ => {}
        }
        errs.extend(self.controls.validate().into_iter().map(|e| format!("controls: {e}")));
        errs.extend(self.tolerances.validate());
        if let Some([a, b]) = self.audits.fit_window {
            if !(a < b && a >= 0.0 && b <= self.controls.t_end + 1e-12) {
                errs.push(format!(
                    "audits.fit_window = [{a}, {b}] must lie inside [0, t_end = {}]",
                    self.controls.t_end
                ));
            }
        }
        if self.output.field_grid < 2 {
            errs.push("output.field_grid must be at least 2".into());
        }
        if let Some(m) = &self.mutant {
            errs.extend(m.validate());
        }
        errs
    }
}

/// Parses TOML, or JSON when the text starts with `{`, then validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid JSON config: {e}")))?
    } else {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid TOML config: {e}")))?
    };
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}
