//! Correction weights `b(s, s̃)` with decay exponent γ ∈ (−1, 0), their
//! primitives `B(s, s̃) = ∫_{θ_}^{s} b(σ, s̃) dσ`, and a grid validator for
//! the defining inequalities.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_integrate_pieces;

/// Evaluators of a correction family. `primitive` and `d2_primitive` return
/// `None` when no closed form exists; `CorrectionFn` then integrates.
pub trait CorrectionFamily: Send + Sync + fmt::Debug {
    fn b(&self, s: f64, st: f64) -> f64;
    fn d1b(&self, s: f64, st: f64) -> f64;
    fn d2b(&self, s: f64, st: f64) -> f64;
    fn primitive(&self, _s: f64, _st: f64, _theta_lo: f64) -> Option<f64> {
        None
    }
    fn d2_primitive(&self, _s: f64, _st: f64, _theta_lo: f64) -> Option<f64> {
        None
    }
    /// Points in `s` (at fixed `st`) where `b` is only C¹.
    fn knots_in_s(&self, _st: f64) -> Vec<f64> {
        Vec::new()
    }
    /// Points in `st` (at fixed `s`) where `b` is only C¹.
    fn knots_in_st(&self, _s: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// `b(s, s̃) = (s̃ / s)^α`.
#[derive(Debug, Clone, Copy)]
pub struct PowerRatio {
    pub alpha: f64,
}

impl CorrectionFamily for PowerRatio {
    fn b(&self, s: f64, st: f64) -> f64 {
        (st / s).powf(self.alpha)
    }
    fn d1b(&self, s: f64, st: f64) -> f64 {
        -self.alpha * (st / s).powf(self.alpha) / s
    }
    fn d2b(&self, s: f64, st: f64) -> f64 {
        self.alpha * (st / s).powf(self.alpha) / st
    }
    fn primitive(&self, s: f64, st: f64, theta_lo: f64) -> Option<f64> {
        let e = 1.0 - self.alpha;
        Some(st.powf(self.alpha) * (s.powf(e) - theta_lo.powf(e)) / e)
    }
    fn d2_primitive(&self, s: f64, st: f64, theta_lo: f64) -> Option<f64> {
        let e = 1.0 - self.alpha;
        Some(self.alpha * st.powf(self.alpha - 1.0) * (s.powf(e) - theta_lo.powf(e)) / e)
    }
}

/// `b(s, s̃) = h(s / s̃)` with `h` a monotone C¹ cubic interpolant of tabulated
/// samples, continued by `h_n (r / r_n)^γ` past the last sample.
#[derive(Debug, Clone)]
pub struct TabulatedRatio {
    r: Vec<f64>,
    h: Vec<f64>,
    slopes: Vec<f64>,
    gamma: f64,
}

impl TabulatedRatio {
    pub fn new(samples: &[[f64; 2]], gamma: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::config("tabulated correction needs at least two samples"));
        }
        if samples.windows(2).any(|w| w[0][0] >= w[1][0]) || samples[0][0] <= 0.0 {
            return Err(Error::config("tabulated correction abscissae must be positive and increasing"));
        }
        let r: Vec<f64> = samples.iter().map(|p| p[0]).collect();
        let h: Vec<f64> = samples.iter().map(|p| p[1]).collect();
        let n = r.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (h[i + 1] - h[i]) / (r[i + 1] - r[i])).collect();
        // Fritsch–Carlson monotone slopes.
        let mut slopes = vec![0.0; n];
        slopes[0] = delta[0];
        for i in 1..n - 1 {
            slopes[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                let w1 = 2.0 * (r[i + 1] - r[i]) + (r[i] - r[i - 1]);
                let w2 = (r[i + 1] - r[i]) + 2.0 * (r[i] - r[i - 1]);
                (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
            };
        }
        slopes[n - 1] = gamma * h[n - 1] / r[n - 1];
        Ok(Self { r, h, slopes, gamma })
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.r.len();
        if x >= self.r[n - 1] {
            let v = self.h[n - 1] * (x / self.r[n - 1]).powf(self.gamma);
            return (v, self.gamma * v / x);
        }
        if x <= self.r[0] {
            // Linear continuation keeps the function C¹ at the first sample.
            return (self.h[0] + self.slopes[0] * (x - self.r[0]), self.slopes[0]);
        }
        let k = self.r.partition_point(|&ri| ri <= x) - 1;
        let dx = self.r[k + 1] - self.r[k];
        let t = (x - self.r[k]) / dx;
        let (h0, h1, m0, m1) = (self.h[k], self.h[k + 1], self.slopes[k] * dx, self.slopes[k + 1] * dx);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * h0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * h1
            + (t3 - t2) * m1;
        let dv = ((6.0 * t2 - 6.0 * t) * h0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * h1
            + (3.0 * t2 - 2.0 * t) * m1)
            / dx;
        (v, dv)
    }
}

impl CorrectionFamily for TabulatedRatio {
    fn b(&self, s: f64, st: f64) -> f64 {
        self.eval(s / st).0
    }
    fn d1b(&self, s: f64, st: f64) -> f64 {
        self.eval(s / st).1 / st
    }
    fn d2b(&self, s: f64, st: f64) -> f64 {
        -self.eval(s / st).1 * s / (st * st)
    }
    fn knots_in_s(&self, st: f64) -> Vec<f64> {
        self.r.iter().map(|r| r * st).collect()
    }
    fn knots_in_st(&self, s: f64) -> Vec<f64> {
        self.r.iter().map(|r| s / r).collect()
    }
}

/// Cumulative primitive nodes are `theta_lo * CACHE_RATIO^k`.
const CACHE_RATIO: f64 = 1.25;
const QUAD_TOL: f64 = 1e-14;

/// A γ-correction function together with its admissible temperature window.
pub struct CorrectionFn {
    pub gamma: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    family: Arc<dyn CorrectionFamily>,
    /// Per-s̃ cumulative primitive values at geometric nodes.
    cache: RwLock<HashMap<u64, Vec<f64>>>,
}

impl fmt::Debug for CorrectionFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CorrectionFn")
            .field("gamma", &self.gamma)
            .field("theta_lo", &self.theta_lo)
            .field("theta_hi", &self.theta_hi)
            .field("family", &self.family)
            .finish()
    }
}

impl Clone for CorrectionFn {
    fn clone(&self) -> Self {
        Self::from_family(self.family.clone(), self.gamma, self.theta_lo, self.theta_hi)
    }
}

/// Configuration-level description of a correction family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CorrectionSpec {
    Prototype { alpha: f64 },
    /// `b = h(s / s̃)` with `h` tabulated as `[ratio, value]` pairs.
    Custom { gamma: f64, samples: Vec<[f64; 2]> },
}

impl CorrectionSpec {
    pub fn build(&self, theta_lo: f64, theta_hi: f64) -> Result<CorrectionFn> {
        match self {
            CorrectionSpec::Prototype { alpha } => prototype_correction(*alpha, theta_lo, theta_hi),
            CorrectionSpec::Custom { gamma, samples } => {
                if !(*gamma > -1.0 && *gamma < 0.0) {
                    return Err(Error::Domain(format!("gamma = {gamma} outside (-1, 0)")));
                }
                check_window(theta_lo, theta_hi)?;
                let family = TabulatedRatio::new(samples, *gamma)?;
                if family.r[0] > theta_lo / theta_hi {
                    return Err(Error::config(format!(
                        "tabulated correction must start at ratio <= {:.6}",
                        theta_lo / theta_hi
                    )));
                }
                Ok(CorrectionFn::from_family(Arc::new(family), *gamma, theta_lo, theta_hi))
            }
        }
    }
}

fn check_window(theta_lo: f64, theta_hi: f64) -> Result<()> {
    if theta_lo > 0.0 && theta_lo <= theta_hi && theta_hi.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("need 0 < theta_lo <= theta_hi, got [{theta_lo}, {theta_hi}]")))
    }
}

/// `b(ϑ, ϑ̂) = (ϑ̂/ϑ)^α`, `B = ϑ̂^α (ϑ^{1−α} − θ_^{1−α}) / (1 − α)`, γ = −α.
pub fn prototype_correction(alpha: f64, theta_lo: f64, theta_hi: f64) -> Result<CorrectionFn> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    check_window(theta_lo, theta_hi)?;
    Ok(CorrectionFn::from_family(Arc::new(PowerRatio { alpha }), -alpha, theta_lo, theta_hi))
}

impl CorrectionFn {
    pub fn from_family(family: Arc<dyn CorrectionFamily>, gamma: f64, theta_lo: f64, theta_hi: f64) -> Self {
        Self {
            gamma,
            theta_lo,
            theta_hi,
            family,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn family(&self) -> &dyn CorrectionFamily {
        self.family.as_ref()
    }

    fn check(&self, s: f64, st: f64) -> Result<()> {
        if !(s >= self.theta_lo) || !s.is_finite() {
            return Err(Error::Domain(format!("s = {s} below theta_lo = {}", self.theta_lo)));
        }
        if !(st >= self.theta_lo && st <= self.theta_hi) {
            return Err(Error::Domain(format!(
                "s_tilde = {st} outside [{}, {}]",
                self.theta_lo, self.theta_hi
            )));
        }
        Ok(())
    }

    pub fn b_eval(&self, s: f64, st: f64) -> Result<f64> {
        self.check(s, st)?;
        Ok(self.family.b(s, st))
    }

    pub fn d1b_eval(&self, s: f64, st: f64) -> Result<f64> {
        self.check(s, st)?;
        Ok(self.family.d1b(s, st))
    }

    pub fn d2b_eval(&self, s: f64, st: f64) -> Result<f64> {
        self.check(s, st)?;
        Ok(self.family.d2b(s, st))
    }

    #[allow(non_snake_case)]
    pub fn B_eval(&self, s: f64, st: f64) -> Result<f64> {
        self.check(s, st)?;
        Ok(self.primitive_unchecked(s, st))
    }

    #[allow(non_snake_case)]
    pub fn d2B_eval(&self, s: f64, st: f64) -> Result<f64> {
        self.check(s, st)?;
        Ok(self.d2_primitive_unchecked(s, st))
    }

    pub(crate) fn primitive_unchecked(&self, s: f64, st: f64) -> f64 {
        if let Some(v) = self.family.primitive(s, st, self.theta_lo) {
            return v;
        }
        let k = ((s / self.theta_lo).ln() / CACHE_RATIO.ln()).floor().max(0.0) as usize;
        let node = self.theta_lo * CACHE_RATIO.powi(k as i32);
        let base = self.cached_node(k, st);
        base + self.integrate_b(node, s, st)
    }

    pub(crate) fn d2_primitive_unchecked(&self, s: f64, st: f64) -> f64 {
        self.family
            .d2_primitive(s, st, self.theta_lo)
            .unwrap_or_else(|| {
                let knots = self.family.knots_in_s(st);
                adaptive_integrate_pieces(&|x| self.family.d2b(x, st), self.theta_lo, s, &knots, QUAD_TOL)
            })
    }

    fn integrate_b(&self, a: f64, b: f64, st: f64) -> f64 {
        let knots = self.family.knots_in_s(st);
        adaptive_integrate_pieces(&|x| self.family.b(x, st), a, b, &knots, QUAD_TOL)
    }

    fn cached_node(&self, k: usize, st: f64) -> f64 {
        let key = st.to_bits();
        if let Some(v) = self.cache.read().expect("cache poisoned").get(&key).and_then(|t| t.get(k)) {
            return *v;
        }
        let mut guard = self.cache.write().expect("cache poisoned");
        let table = guard.entry(key).or_insert_with(|| vec![0.0]);
        while table.len() <= k {
            let j = table.len();
            let a = self.theta_lo * CACHE_RATIO.powi(j as i32 - 1);
            let b = self.theta_lo * CACHE_RATIO.powi(j as i32);
            let last = table[j - 1];
            table.push(last + self.integrate_b(a, b, st));
        }
        table[k]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionGrid {
    pub s_points: usize,
    pub st_points: usize,
    /// Upper end of the s-range; `None` means 10·θ̄.
    pub s_max: Option<f64>,
}

impl Default for CorrectionGrid {
    fn default() -> Self {
        Self {
            s_points: 200,
            st_points: 20,
            s_max: None,
        }
    }
}

pub const DERIVATIVE_TOLERANCE: f64 = 1e-8;
pub const SIGN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CorrectionReport {
    pub gamma: f64,
    pub min_b: f64,
    pub max_diag_error: f64,
    pub max_d1b: f64,
    pub max_primitive_at_lo: f64,
    /// Smallest constant making every growth bound hold on the grid.
    pub fitted_c: f64,
    pub fd_error_d1b: f64,
    pub fd_error_d2b: f64,
    #[serde(rename = "fd_error_d2B")]
    pub fd_error_d2_primitive: f64,
    pub quadrature_error_primitive: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Fourth-order derivative estimate that avoids stencils straddling a C¹ knot.
fn fd_derivative<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64, knots: &[f64]) -> f64 {
    let straddles = |a: f64, b: f64| knots.iter().any(|&k| k > a && k < b);
    if !straddles(x - 2.0 * h, x + 2.0 * h) {
        return (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
    }
    let sign = if straddles(x, x + 4.0 * h) { -1.0 } else { 1.0 };
    let g = |j: f64| f(x + sign * j * h);
    sign * (-25.0 * g(0.0) + 48.0 * g(1.0) - 36.0 * g(2.0) + 16.0 * g(3.0) - 3.0 * g(4.0)) / (12.0 * h)
}

fn rel_err(exact: f64, approx: f64, scale: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(scale).max(1e-300)
}

/// Checks every inequality of the correction-function definition on a grid
/// over `[θ_, s_max] × [θ_, θ̄]`, plus finite-difference consistency of the
/// derivative evaluators and quadrature consistency of the primitive.
pub fn validate_correction(f: &CorrectionFn, grid: &CorrectionGrid) -> CorrectionReport {
    let fam = f.family();
    let lo = f.theta_lo;
    let hi = f.theta_hi;
    let s_max = grid.s_max.unwrap_or(10.0 * hi).max(lo);
    let g = f.gamma;
    let ns = grid.s_points.max(2);
    let nt = grid.st_points.max(1);
    let s_nodes: Vec<f64> = (0..ns)
        .map(|i| lo * (s_max / lo).powf(i as f64 / (ns - 1) as f64))
        .collect();
    let st_nodes: Vec<f64> = (0..nt)
        .map(|j| if nt == 1 { lo } else { lo + (hi - lo) * j as f64 / (nt - 1) as f64 })
        .collect();

    let mut min_b = f64::INFINITY;
    let mut max_diag: f64 = 0.0;
    let mut max_d1b = f64::NEG_INFINITY;
    let mut max_b_lo: f64 = 0.0;
    let mut c: f64 = 0.0;
    let (mut e1, mut e2, mut e3, mut eq): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);

    for &st in &st_nodes {
        max_diag = max_diag.max((fam.b(st, st) - 1.0).abs());
        max_b_lo = max_b_lo.max(f.primitive_unchecked(lo, st).abs());
        let ks = fam.knots_in_s(st);
        for &s in &s_nodes {
            let b = fam.b(s, st);
            let d1 = fam.d1b(s, st);
            let d2 = fam.d2b(s, st);
            let big_b = f.primitive_unchecked(s, st);
            let d2_big = f.d2_primitive_unchecked(s, st);
            min_b = min_b.min(b);
            max_d1b = max_d1b.max(d1);
            c = c
                .max(b / s.powf(g))
                .max(-d1 / s.powf(g - 1.0))
                .max(d2.abs() / s.powf(g))
                .max(d2_big.abs() / s.powf(1.0 + g))
                .max(big_b.abs() / s.powf(1.0 + g));

            let hs = 1e-3 * s;
            let fd1 = fd_derivative(&|x| fam.b(x, st), s, hs, &ks);
            e1 = e1.max(rel_err(d1, fd1, 1e-3 * b.abs() / s));
            let ht = 1e-3 * st;
            let kt = fam.knots_in_st(s);
            let fd2 = fd_derivative(&|y| fam.b(s, y), st, ht, &kt);
            e2 = e2.max(rel_err(d2, fd2, 1e-3 * b.abs() / st));
            // B(s, ·) also kinks where the lower limit crosses a sample.
            let mut kb = kt.clone();
            kb.extend(fam.knots_in_st(lo));
            let fd3 = fd_derivative(&|y| f.primitive_unchecked(s, y), st, ht, &kb);
            e3 = e3.max(rel_err(d2_big, fd3, 1e-3 * big_b.abs() / st));
            let quad = adaptive_integrate_pieces(&|x| fam.b(x, st), lo, s, &ks, QUAD_TOL);
            eq = eq.max((big_b - quad).abs() / (1.0 + big_b.abs()));
        }
    }

    let mut violations = Vec::new();
    if min_b < -SIGN_TOLERANCE {
        violations.push(format!("b >= 0 violated (min {min_b:.3e})"));
    }
    if max_diag > SIGN_TOLERANCE {
        violations.push(format!("b(s~, s~) = 1 violated (max error {max_diag:.3e})"));
    }
    if max_d1b > SIGN_TOLERANCE {
        violations.push(format!("d1 b <= 0 violated (max {max_d1b:.3e})"));
    }
    if max_b_lo > SIGN_TOLERANCE {
        violations.push(format!("B(theta_lo, s~) = 0 violated ({max_b_lo:.3e})"));
    }
    if !c.is_finite() {
        violations.push("no finite constant C satisfies the growth bounds".into());
    }
    for (name, err) in [("d1b", e1), ("d2b", e2), ("d2B", e3), ("B quadrature", eq)] {
        if !(err <= DERIVATIVE_TOLERANCE) {
            violations.push(format!("{name} inconsistent with finite differences/quadrature ({err:.3e})"));
        }
    }
    CorrectionReport {
        gamma: g,
        min_b,
        max_diag_error: max_diag,
        max_d1b,
        max_primitive_at_lo: max_b_lo,
        fitted_c: c,
        fd_error_d1b: e1,
        fd_error_d2b: e2,
        fd_error_d2_primitive: e3,
        quadrature_error_primitive: eq,
        pass: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_integrate;
    use proptest::prelude::*;

    #[test]
    fn prototype_values() {
        let f = prototype_correction(0.5, 1.0, 3.0).unwrap();
        assert!((f.b_eval(4.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.B_eval(4.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((f.d1b_eval(4.0, 1.0).unwrap() + 0.0625).abs() < 1e-15);
        for st in [1.0, 2.0, 3.0] {
            assert_eq!(f.b_eval(st, st).unwrap(), 1.0);
            assert!((f.d2b_eval(st, st).unwrap() - 0.5 / st).abs() < 1e-15);
            assert_eq!(f.B_eval(1.0, st).unwrap(), 0.0);
        }
        assert_eq!(f.gamma, -0.5);
    }

    #[test]
    fn rejects_bad_alpha_and_domain() {
        assert!(matches!(prototype_correction(1.0, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(prototype_correction(0.0, 1.0, 2.0), Err(Error::Domain(_))));
        let f = prototype_correction(0.5, 1.0, 2.0).unwrap();
        assert!(matches!(f.b_eval(0.5, 1.5), Err(Error::Domain(_))));
        assert!(matches!(f.b_eval(1.5, 2.5), Err(Error::Domain(_))));
    }

    #[test]
    fn prototype_validates_for_admissible_alpha() {
        for alpha in [0.2, 0.55, 0.6, 0.66, 0.9] {
            let f = prototype_correction(alpha, 1.0, 2.0).unwrap();
            let r = validate_correction(&f, &CorrectionGrid::default());
            assert!(r.pass, "alpha={alpha}: {:?}", r.violations);
        }
    }

    #[derive(Debug)]
    struct Increasing;
    impl CorrectionFamily for Increasing {
        fn b(&self, s: f64, st: f64) -> f64 {
            (s / st).sqrt()
        }
        fn d1b(&self, s: f64, st: f64) -> f64 {
            0.5 / (s * st).sqrt()
        }
        fn d2b(&self, s: f64, st: f64) -> f64 {
            -0.5 * s.sqrt() * st.powf(-1.5)
        }
    }

    #[derive(Debug)]
    struct DoubledDiagonal;
    impl CorrectionFamily for DoubledDiagonal {
        fn b(&self, s: f64, st: f64) -> f64 {
            2.0 * (st / s).sqrt()
        }
        fn d1b(&self, s: f64, st: f64) -> f64 {
            -(st / s).sqrt() / s
        }
        fn d2b(&self, s: f64, st: f64) -> f64 {
            (st / s).sqrt() / st
        }
    }

    #[test]
    fn mutants_fail() {
        let inc = CorrectionFn::from_family(Arc::new(Increasing), -0.5, 1.0, 2.0);
        let r = validate_correction(&inc, &CorrectionGrid::default());
        assert!(!r.pass);
        assert!(r.max_d1b > 0.0);
        let dbl = CorrectionFn::from_family(Arc::new(DoubledDiagonal), -0.5, 1.0, 2.0);
        let r = validate_correction(&dbl, &CorrectionGrid::default());
        assert!(!r.pass);
        assert!((r.max_diag_error - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_family_matches_prototype_shape() {
        // Samples of r^(-0.6) on a fine grid; the tail continues the power law.
        let samples: Vec<[f64; 2]> = (-15..=25)
            .map(|i| {
                let r = 1.1f64.powi(i);
                [r, if i == 0 { 1.0 } else { r.powf(-0.6) }]
            })
            .collect();
        let spec = CorrectionSpec::Custom { gamma: -0.6, samples };
        let f = spec.build(1.0, 3.0).unwrap();
        let report = validate_correction(
            &f,
            &CorrectionGrid { s_points: 40, st_points: 5, s_max: Some(60.0) },
        );
        assert!(report.pass, "{:?}", report.violations);
        let proto = prototype_correction(0.6, 1.0, 3.0).unwrap();
        let b_tab = f.B_eval(7.0, 2.0).unwrap();
        let b_proto = proto.B_eval(7.0, 2.0).unwrap();
        assert!((b_tab - b_proto).abs() < 1e-3 * b_proto);
    }

    #[test]
    fn cache_is_consistent_with_direct_quadrature() {
        let samples = vec![[0.2, 1.9], [0.5, 1.5], [1.0, 1.0], [2.0, 0.7], [4.0, 0.45]];
        let f = CorrectionSpec::Custom { gamma: -0.5, samples }.build(1.0, 2.0).unwrap();
        for s in [1.0, 1.3, 2.0, 5.5, 40.0] {
            let direct = adaptive_integrate(&|x| f.family().b(x, 1.5), 1.0, s, 1e-14);
            // Second call reads the cache.
            for _ in 0..2 {
                assert!((f.B_eval(s, 1.5).unwrap() - direct).abs() < 1e-12 * (1.0 + direct));
            }
        }
    }

    proptest! {
        #[test]
        fn primitive_matches_quadrature(alpha in 0.05f64..0.95, s in 1.0f64..50.0, st in 1.0f64..2.0) {
            let f = prototype_correction(alpha, 1.0, 2.0).unwrap();
            let big = f.B_eval(s, st).unwrap();
            let quad = adaptive_integrate(&|x| f.b_eval(x, st).unwrap(), 1.0, s, 1e-14);
            prop_assert!((big - quad).abs() <= 1e-8 * (1.0 + big.abs()));
        }

        #[test]
        fn decreasing_in_s(alpha in 0.05f64..0.95, s1 in 1.0f64..50.0, ds in 0.0f64..50.0, st in 1.0f64..2.0) {
            let f = prototype_correction(alpha, 1.0, 2.0).unwrap();
            prop_assert!(f.b_eval(s1 + ds, st).unwrap() <= f.b_eval(s1, st).unwrap());
        }
    }
}
