//! Power-law Cauchy stress, temperature-dependent viscosity and conductivity,
//! and a sampling validator for the growth, coercivity and monotonicity
//! conditions the stress law must satisfy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar material law of temperature, used for both viscosity and conductivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarLaw {
    /// `value`, independent of temperature.
    Constant { value: f64 },
    /// `base + amp * s / (1 + s)`; bounded between `base` and `base + amp`.
    Rational { base: f64, amp: f64 },
    /// `base + slope * s`; unbounded above when `slope > 0`.
    Affine { base: f64, slope: f64 },
    /// Piecewise linear through `points` (sorted by abscissa), constant outside.
    Tabulated { points: Vec<[f64; 2]> },
}

impl ScalarLaw {
    pub fn constant(value: f64) -> Self {
        ScalarLaw::Constant { value }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ScalarLaw::Constant { value } => *value,
            ScalarLaw::Rational { base, amp } => base + amp * s / (1.0 + s),
            ScalarLaw::Affine { base, slope } => base + slope * s,
            ScalarLaw::Tabulated { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if s <= first[0] {
                    return first[1];
                }
                if s >= last[0] {
                    return last[1];
                }
                let k = points.partition_point(|p| p[0] <= s) - 1;
                let (a, b) = (points[k], points[k + 1]);
                a[1] + (b[1] - a[1]) * (s - a[0]) / (b[0] - a[0])
            }
        }
    }

    /// Infimum and supremum over s > 0 (the supremum may be infinite).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ScalarLaw::Constant { value } => (*value, *value),
            ScalarLaw::Rational { base, amp } => {
                let end = base + amp;
                (base.min(end), base.max(end))
            }
            ScalarLaw::Affine { base, slope } => {
                if *slope >= 0.0 {
                    (*base, if *slope == 0.0 { *base } else { f64::INFINITY })
                } else {
                    (f64::NEG_INFINITY, *base)
                }
            }
            ScalarLaw::Tabulated { points } => points.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])),
            ),
        }
    }

    /// Primitive `∫_0^s law(z) dz`, in closed form for every family.
    pub fn primitive(&self, s: f64) -> f64 {
        match self {
            ScalarLaw::Constant { value } => value * s,
            ScalarLaw::Rational { base, amp } => base * s + amp * (s - s.ln_1p()),
            ScalarLaw::Affine { base, slope } => base * s + 0.5 * slope * s * s,
            ScalarLaw::Tabulated { points } => {
                let mut acc = 0.0;
                let mut x = 0.0;
                let mut y = self.eval(0.0);
                for p in points.iter().filter(|p| p[0] > 0.0) {
                    if p[0] >= s {
                        break;
                    }
                    acc += 0.5 * (y + p[1]) * (p[0] - x);
                    x = p[0];
                    y = p[1];
                }
                acc + 0.5 * (y + self.eval(s)) * (s - x)
            }
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        if let ScalarLaw::Tabulated { points } = self {
            if points.is_empty() {
                return Err(Error::config(format!("{what}: tabulated law needs points")));
            }
            if points.windows(2).any(|w| w[0][0] >= w[1][0]) {
                return Err(Error::config(format!(
                    "{what}: tabulated abscissae must be strictly increasing"
                )));
            }
        }
        let (lo, _) = self.bounds();
        if !(lo > 0.0) {
            return Err(Error::Domain(format!(
                "{what} must be bounded below by a positive constant (inf = {lo})"
            )));
        }
        Ok(())
    }
}

/// Constitutive data of the fluid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Power-law exponent.
    pub p: f64,
    /// Offset in `(delta + |D|)^(p-2)`.
    pub delta: f64,
    pub nu: ScalarLaw,
    pub kappa: ScalarLaw,
    pub nu_lo: f64,
    pub nu_hi: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
}

impl FluidParams {
    pub fn new(p: f64, delta: f64, nu: ScalarLaw, kappa: ScalarLaw) -> Result<Self> {
        if !(p > 1.2 && p < 2.2) {
            return Err(Error::Domain(format!("power-law exponent p = {p} outside (6/5, 11/5)")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta = {delta} must be finite and >= 0")));
        }
        nu.check("viscosity")?;
        kappa.check("conductivity")?;
        let (nu_lo, nu_hi) = nu.bounds();
        if !nu_hi.is_finite() {
            return Err(Error::Domain("viscosity must be bounded above".into()));
        }
        let (kappa_lo, kappa_hi) = kappa.bounds();
        Ok(Self {
            p,
            delta,
            nu,
            kappa,
            nu_lo,
            nu_hi,
            kappa_lo,
            kappa_hi,
        })
    }

    /// Newtonian fluid with constant viscosity and conductivity.
    pub fn newtonian(nu: f64, kappa: f64) -> Self {
        Self::new(2.0, 0.0, ScalarLaw::constant(nu), ScalarLaw::constant(kappa))
            .expect("positive constants are admissible")
    }

    /// Scalar factor `nu(theta) (delta + |D|)^(p-2)` with the convention that
    /// the stress vanishes at `|D| = 0` (relevant when delta = 0).
    #[inline]
    pub fn stress_factor(&self, theta: f64, d_norm: f64) -> f64 {
        if d_norm == 0.0 && self.delta == 0.0 {
            return 0.0;
        }
        let base = self.delta + d_norm;
        let power = if self.p == 2.0 { 1.0 } else { base.powf(self.p - 2.0) };
        self.nu.eval(theta) * power
    }

    #[inline]
    pub fn conductivity(&self, theta: f64) -> f64 {
        self.kappa.eval(theta)
    }
}

/// Symmetric d×d tensor, d ∈ {2, 3}. Unused entries stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    dim: usize,
    m: [[f64; 3]; 3],
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        Self { dim, m: [[0.0; 3]; 3] }
    }

    /// Builds from row-major entries; rejects asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(dim == 2 || dim == 3) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Contract(format!("expected a square 2x2 or 3x3 matrix, got {dim} rows")));
        }
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Contract(format!(
                        "tensor not symmetric: entry ({i},{j}) = {} vs ({j},{i}) = {}",
                        rows[i][j], rows[j][i]
                    )));
                }
                t.m[i][j] = rows[i][j];
            }
        }
        Ok(t)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            t.m[i][i] = *v;
        }
        t
    }

    /// 2D tensor from its three independent entries.
    pub fn sym2(xx: f64, xy: f64, yy: f64) -> Self {
        let mut t = Self::zeros(2);
        t.m[0][0] = xx;
        t.m[0][1] = xy;
        t.m[1][0] = xy;
        t.m[1][1] = yy;
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn ddot(&self, other: &SymTensor) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, a: f64) -> SymTensor {
        let mut t = *self;
        for row in t.m.iter_mut() {
            for x in row.iter_mut() {
                *x *= a;
            }
        }
        t
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        let mut t = *self;
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] -= other.m[i][j];
            }
        }
        t
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        self.sub(&other.scale(-1.0))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| self.m[i][j] == self.m[j][i]))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("temperature must be positive, got {theta}")))
    }
}

/// `S*(theta, D) = nu(theta) (delta + |D|)^(p-2) D`.
pub fn stress_eval(theta: f64, d: &SymTensor, params: &FluidParams) -> Result<SymTensor> {
    check_theta(theta)?;
    if !d.is_symmetric() {
        return Err(Error::Contract("strain rate tensor is not symmetric".into()));
    }
    Ok(d.scale(params.stress_factor(theta, d.norm())))
}

/// `S*(theta, D) : D`.
pub fn dissipation(theta: f64, d: &SymTensor, params: &FluidParams) -> Result<f64> {
    Ok(stress_eval(theta, d, params)?.ddot(d))
}

pub fn conductivity_eval(theta: f64, params: &FluidParams) -> Result<f64> {
    check_theta(theta)?;
    Ok(params.conductivity(theta))
}

/// Anything that maps (theta, D) to a stress; lets the validator audit
/// laws other than the built-in power law.
pub trait StressLaw {
    fn stress(&self, theta: f64, d: &SymTensor) -> Result<SymTensor>;
}

impl StressLaw for FluidParams {
    fn stress(&self, theta: f64, d: &SymTensor) -> Result<SymTensor> {
        stress_eval(theta, d, self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    pub seed: u64,
    pub samples: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Entries of D are drawn uniformly from [-d_max, d_max].
    pub d_max: f64,
    pub dim: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            seed: 20_240_901,
            samples: 100_000,
            theta_min: 0.1,
            theta_max: 10.0,
            d_max: 5.0,
            dim: 2,
        }
    }
}

/// Worst-case margins over the sample set; every margin is "holds iff >= 0".
#[derive(Debug, Clone, Serialize)]
pub struct ConstitutiveReport {
    pub samples: usize,
    /// Smallest K with |S| <= K (delta + |D|)^(p-1) on the samples.
    pub growth_constant: f64,
    pub coercivity_margin: f64,
    pub monotonicity_margin: f64,
    /// Largest |S(theta, 0)| seen.
    pub zero_stress_max: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

pub const SIGN_TOLERANCE: f64 = 1e-12;

fn random_sym(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymTensor {
    let mut t = SymTensor::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let x = rng.gen_range(-scale..=scale);
            t.m[i][j] = x;
            t.m[j][i] = x;
        }
    }
    t
}

/// Samples the growth, coercivity, monotonicity and zero-stress conditions.
/// Coercivity is measured against `nu_lo (delta + |D|)^(p-2) |D|^2`.
pub fn validate_constitutive<L: StressLaw + ?Sized>(
    law: &L,
    params: &FluidParams,
    plan: &SamplingPlan,
) -> ConstitutiveReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut growth: f64 = 0.0;
    let mut coercivity = f64::INFINITY;
    let mut monotonicity = f64::INFINITY;
    let mut zero_max: f64 = 0.0;
    let mut violations = Vec::new();
    let mut errors = 0usize;

    for k in 0..plan.samples {
        let theta = rng.gen_range(plan.theta_min..=plan.theta_max);
        let d1 = random_sym(&mut rng, plan.dim, plan.d_max);
        // Mix far-apart and nearly coincident pairs.
        let d2 = match k % 3 {
            0 => random_sym(&mut rng, plan.dim, plan.d_max),
            1 => d1.add(&random_sym(&mut rng, plan.dim, 1e-3 * plan.d_max)),
            _ => d1.scale(rng.gen_range(0.0..2.0)),
        };
        let (s1, s2, s0) = match (
            law.stress(theta, &d1),
            law.stress(theta, &d2),
            law.stress(theta, &SymTensor::zeros(plan.dim)),
        ) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                errors += 1;
                continue;
            }
        };
        let n1 = d1.norm();
        if n1 > 0.0 || params.delta > 0.0 {
            growth = growth.max(s1.norm() / (params.delta + n1).powf(params.p - 1.0));
        }
        let lower = if n1 == 0.0 {
            0.0
        } else {
            params.nu_lo * (params.delta + n1).powf(params.p - 2.0) * n1 * n1
        };
        coercivity = coercivity.min(s1.ddot(&d1) - lower);
        monotonicity = monotonicity.min(s1.sub(&s2).ddot(&d1.sub(&d2)));
        zero_max = zero_max.max(s0.norm());
    }

    if errors > 0 {
        violations.push(format!("{errors} samples raised evaluation errors"));
    }
    if !growth.is_finite() {
        violations.push("growth bound: no finite constant fits the samples".into());
    }
    if coercivity < -SIGN_TOLERANCE {
        violations.push(format!("coercivity violated, worst margin {coercivity:.3e}"));
    }
    if monotonicity < -SIGN_TOLERANCE {
        violations.push(format!("monotonicity violated, worst margin {monotonicity:.3e}"));
    }
    if zero_max > SIGN_TOLERANCE {
        violations.push(format!("S(theta, 0) != 0, max norm {zero_max:.3e}"));
    }
    ConstitutiveReport {
        samples: plan.samples,
        growth_constant: growth,
        coercivity_margin: coercivity,
        monotonicity_margin: monotonicity,
        zero_stress_max: zero_max,
        pass: violations.is_empty(),
        violations,
    }
}
