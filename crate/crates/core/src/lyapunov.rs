//! Kirchhoff primitive `G`, the weighted primitive `H^α`, the relative
//! distance `f_α`, and the Lyapunov density built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::{FluidParams, ScalarLaw};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_integrate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    pub alpha: f64,
    pub beta: f64,
}

impl LyapunovParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")));
        }
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta = {beta} must be positive")));
        }
        Ok(Self { alpha, beta })
    }
}

const H_TOL: f64 = 1e-14;

/// `G(s) = ∫_0^s κ(z) dz`.
#[allow(non_snake_case)]
pub fn G_eval(s: f64, params: &FluidParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("G needs s >= 0, got {s}")));
    }
    Ok(params.kappa.primitive(s))
}

/// `∫_a^b G(z)^{-α} dz` for a, b > 0.
pub fn h_alpha_between(a: f64, b: f64, alpha: f64, params: &FluidParams) -> f64 {
    if let ScalarLaw::Constant { value } = params.kappa {
        let e = 1.0 - alpha;
        return value.powf(-alpha) * (b.powf(e) - a.powf(e)) / e;
    }
    adaptive_integrate(&|z| params.kappa.primitive(z).powf(-alpha), a, b, H_TOL)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")))
    }
}

fn check_positive(name: &str, s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {s}")))
    }
}

/// `H^α(s) = ∫_1^s G(z)^{-α} dz`.
#[allow(non_snake_case)]
pub fn H_alpha_eval(s: f64, alpha: f64, params: &FluidParams) -> Result<f64> {
    check_positive("s", s)?;
    check_alpha(alpha)?;
    Ok(h_alpha_between(1.0, s, alpha, params))
}

/// `f_α(s, t) = s − t − (H^α(s) − H^α(t)) G(t)^α`.
pub fn f_alpha_eval(s: f64, t: f64, alpha: f64, params: &FluidParams) -> Result<f64> {
    check_positive("s", s)?;
    check_positive("t", t)?;
    check_alpha(alpha)?;
    Ok(f_alpha(s, t, alpha, params))
}

pub(crate) fn f_alpha(s: f64, t: f64, alpha: f64, params: &FluidParams) -> f64 {
    if s == t {
        return 0.0;
    }
    s - t - h_alpha_between(t, s, alpha, params) * params.kappa.primitive(t).powf(alpha)
}

/// `∂_1 f_α(s, t) = 1 − (G(t) / G(s))^α`.
pub fn d1_f_alpha(s: f64, t: f64, alpha: f64, params: &FluidParams) -> f64 {
    1.0 - (params.kappa.primitive(t) / params.kappa.primitive(s)).powf(alpha)
}

/// `L_{α,β}(v, θ, θ̂) = β|v|² + f_α(θ, θ̂)`.
pub fn lyapunov_density(
    v: &[f64],
    theta: f64,
    theta_hat: f64,
    lp: &LyapunovParams,
    params: &FluidParams,
) -> Result<f64> {
    let kinetic: f64 = v.iter().map(|x| x * x).sum();
    Ok(lp.beta * kinetic + f_alpha_eval(theta, theta_hat, lp.alpha, params)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexityPlan {
    pub seed: u64,
    pub samples: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ConvexityPlan {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 100_000,
            lo: 0.5,
            hi: 10.0,
        }
    }
}

pub const CONVEXITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub alpha: f64,
    pub samples: usize,
    pub min_value: f64,
    /// (s, t, r) at the minimum.
    pub worst_sample: [f64; 3],
    pub violations: usize,
    pub pass: bool,
}

/// Samples `f_α(s², t) − f_α(r², t) − 2r ∂₁f_α(r², t)(s − r) − (s − r)²`,
/// which must be non-negative for the square-root distance estimate to hold.
pub fn check_f_convexity(alpha: f64, params: &FluidParams, plan: &ConvexityPlan) -> ConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut min_value = f64::INFINITY;
    let mut worst = [0.0; 3];
    let mut violations = 0;
    for _ in 0..plan.samples {
        let s: f64 = rng.gen_range(plan.lo..plan.hi);
        let t: f64 = rng.gen_range(plan.lo..plan.hi);
        let r: f64 = rng.gen_range(plan.lo..plan.hi);
        let value = convexity_expression(s, t, r, alpha, params);
        if value < -CONVEXITY_TOLERANCE {
            violations += 1;
        }
        if value < min_value {
            min_value = value;
            worst = [s, t, r];
        }
    }
    ConvexityReport {
        alpha,
        samples: plan.samples,
        min_value,
        worst_sample: worst,
        violations,
        pass: violations == 0,
    }
}

pub fn convexity_expression(s: f64, t: f64, r: f64, alpha: f64, params: &FluidParams) -> f64 {
    let (s2, r2) = (s * s, r * r);
    let gt = params.kappa.primitive(t).powf(alpha);
    // f(s², t) − f(r², t) without forming the two large terms separately.
    let diff = s2 - r2 - h_alpha_between(r2, s2, alpha, params) * gt;
    diff - 2.0 * r * d1_f_alpha(r2, t, alpha, params) * (s - r) - (s - r) * (s - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> FluidParams {
        FluidParams::newtonian(1.0, 1.0)
    }

    fn rational() -> FluidParams {
        FluidParams::new(2.0, 0.0, ScalarLaw::constant(1.0), ScalarLaw::Rational { base: 1.0, amp: 1.0 }).unwrap()
    }

    #[test]
    fn g_examples() {
        assert_eq!(G_eval(2.0, &unit()).unwrap(), 2.0);
        assert_eq!(G_eval(0.0, &unit()).unwrap(), 0.0);
        let p = rational();
        let g1 = G_eval(1.0, &p).unwrap();
        assert!((g1 - (2.0 - 2f64.ln())).abs() < 1e-15);
        let quad = adaptive_integrate(&|z| p.kappa.eval(z), 0.0, 1.0, 1e-15);
        assert!((g1 - quad).abs() < 1e-14);
        assert!(G_eval(-1.0, &p).is_err());
    }

    #[test]
    fn h_examples() {
        let p = unit();
        assert_eq!(H_alpha_eval(1.0, 0.5, &p).unwrap(), 0.0);
        assert!((H_alpha_eval(4.0, 0.5, &p).unwrap() - 2.0).abs() < 1e-15);
        assert!((H_alpha_eval(0.25, 0.5, &p).unwrap() + 1.0).abs() < 1e-15);
        assert!(H_alpha_eval(0.0, 0.5, &p).is_err());
        assert!(H_alpha_eval(2.0, 1.0, &p).is_err());
        // Quadrature path agrees with closed form when kappa is constant but tabulated.
        let tab = FluidParams::new(
            2.0,
            0.0,
            ScalarLaw::constant(1.0),
            ScalarLaw::Tabulated { points: vec![[0.5, 1.0], [5.0, 1.0]] },
        )
        .unwrap();
        assert!((H_alpha_eval(4.0, 0.5, &tab).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn f_and_density_examples() {
        let p = unit();
        assert_eq!(f_alpha_eval(3.3, 3.3, 0.7, &p).unwrap(), 0.0);
        assert!((f_alpha_eval(4.0, 1.0, 0.5, &p).unwrap() - 1.0).abs() < 1e-15);
        let lp = LyapunovParams::new(0.5, 2.0).unwrap();
        assert_eq!(lyapunov_density(&[0.0, 0.0], 2.0, 2.0, &lp, &p).unwrap(), 0.0);
        assert_eq!(lyapunov_density(&[1.0, 0.0], 2.0, 2.0, &lp, &p).unwrap(), 2.0);
        assert!((lyapunov_density(&[0.0, 0.0], 4.0, 1.0, &lp, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convexity_boundary_at_one_half() {
        let p = unit();
        let plan = ConvexityPlan { samples: 20_000, ..Default::default() };
        assert!(check_f_convexity(0.6, &p, &plan).pass);
        let bad = check_f_convexity(0.4, &p, &plan);
        assert!(!bad.pass && bad.violations > 0);
        assert_eq!(convexity_expression(2.0, 3.0, 2.0, 0.6, &p), 0.0);
    }

    #[test]
    fn sufficient_alpha_for_variable_conductivity() {
        // kappa in [1, 2] gives kappa_hi / (2 kappa_lo) = 1, outside (0, 1); for an
        // increasing kappa, x kappa(x) >= G(x) and alpha > 1/2 is already enough.
        let p = rational();
        let plan = ConvexityPlan { samples: 5_000, ..Default::default() };
        let r = check_f_convexity(0.6, &p, &plan);
        assert!(r.pass, "{r:?}");
    }

    proptest! {
        #[test]
        fn bound_g(s in 0.0f64..50.0) {
            let p = rational();
            let g = G_eval(s, &p).unwrap();
            prop_assert!(p.kappa_lo * s <= g + 1e-12 && g <= p.kappa_hi * s + 1e-12);
        }

        #[test]
        fn f_nonnegative_and_derivative_matches(s in 0.5f64..10.0, t in 0.5f64..10.0, alpha in 0.05f64..0.95) {
            let p = rational();
            let f = f_alpha_eval(s, t, alpha, &p).unwrap();
            prop_assert!(f >= -1e-12);
            let h = 1e-4 * s;
            let fd = (f_alpha_eval(s + h, t, alpha, &p).unwrap() - f_alpha_eval(s - h, t, alpha, &p).unwrap()) / (2.0 * h);
            let d = d1_f_alpha(s, t, alpha, &p);
            prop_assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()));
        }

        #[test]
        fn density_midpoint_convex(
            v1 in -2f64..2.0, v2 in -2f64..2.0, th1 in 0.5f64..6.0, th2 in 0.5f64..6.0, that in 0.5f64..6.0,
        ) {
            let p = rational();
            let lp = LyapunovParams::new(0.6, 1.5).unwrap();
            let l = |v: f64, th: f64| lyapunov_density(&[v, 0.0], th, that, &lp, &p).unwrap();
            let mid = l(0.5 * (v1 + v2), 0.5 * (th1 + th2));
            prop_assert!(mid <= 0.5 * (l(v1, th1) + l(v2, th2)) + 1e-12);
        }
    }
}
