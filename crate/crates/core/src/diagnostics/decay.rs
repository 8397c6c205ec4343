use serde::{Deserialize, Serialize};

use crate::constitutive::FluidParams;
use crate::error::{Error, Result};
use crate::galerkin::{generalized_min_eigenvalue, VelocityBasis};

/// Least-squares fit of `log value = c − μ t` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub mu_fit: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub points: usize,
    pub theoretical_mu: Option<f64>,
}

pub fn fit_exponential_rate(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Contract("times and values differ in length".into()));
    }
    let [ta, tb] = window;
    if !(ta < tb) {
        return Err(Error::Window(format!("empty window [{ta}, {tb}]")));
    }
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::Window("empty series".into()));
    };
    let slack = 1e-12 * (1.0 + last.abs());
    if ta < first - slack || tb > last + slack {
        return Err(Error::Window(format!(
            "window [{ta}, {tb}] outside series range [{first}, {last}]"
        )));
    }
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < ta - slack || t > tb + slack {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::Window(format!("nonpositive value {v} at t = {t}")));
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::Window(format!("window [{ta}, {tb}] holds fewer than two samples")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let scale = my.abs().max(1.0);
    let r_squared = if syy <= (1e-13 * scale).powi(2) * n {
        1.0
    } else {
        let sse: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mt)).powi(2)).sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let mu_fit = if slope == 0.0 { 0.0 } else { -slope };
    Ok(DecayFit {
        mu_fit,
        r_squared,
        window,
        points: pts.len(),
        theoretical_mu: None,
    })
}

/// Discrete decay-rate estimate `ν_ · λ_min(A, M)` on the velocity space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mu: f64,
    pub lambda_min: f64,
    /// Set for `p < 2`, where the estimate covers only `‖v‖₂ ≤ 1`.
    pub small_data_only: bool,
}

pub fn theoretical_mu_estimate(basis: &VelocityBasis, params: &FluidParams) -> Result<MuEstimate> {
    let lambda_min = generalized_min_eigenvalue(&basis.stiffness, &basis.mass)?;
    Ok(MuEstimate {
        mu: params.nu_lo * lambda_min,
        lambda_min,
        small_data_only: params.p < 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaPart {
    /// `f(t) + C₁∫ₛᵗ f ≤ f(s)` ⟹ `f(t) ≤ f(s) e^{−C₁(t−s)}`.
    Exponential,
    /// `max(1, f(t) + C₁∫ₛᵗ f^α) ≤ f(s)` ⟹ `f(t) ≤ (f(s)/(1 + C₁(t−s)))^{1/α}`.
    Algebraic { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLemmaReport {
    pub pairs: usize,
    /// Smallest `bound − f(t)` over all pairs, relative to `f(s)`.
    pub worst_margin: f64,
    pub worst_pair: [f64; 2],
    pub pass: bool,
}

const HYPOTHESIS_RTOL: f64 = 1e-4;
const CONCLUSION_RTOL: f64 = 1e-10;

/// Checks the hypothesis of the decay lemma on every sample pair `s < t`
/// (time integrals by trapezoid rule) and then its conclusion.
pub fn decay_lemma_check(times: &[f64], values: &[f64], c1: f64, part: LemmaPart) -> Result<DecayLemmaReport> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Contract("decay lemma needs at least two aligned samples".into()));
    }
    if !(c1 > 0.0) {
        return Err(Error::Contract(format!("C1 = {c1} must be positive")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Contract("sample times must increase strictly".into()));
    }
    if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Hypothesis(format!("sample {k} is not positive ({v})")));
    }
    let exponent = match part {
        LemmaPart::Exponential => 1.0,
        LemmaPart::Algebraic { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Contract(format!("alpha = {alpha} outside (0, 1)")));
            }
            alpha
        }
    };
    let powered: Vec<f64> = values.iter().map(|v| v.powf(exponent)).collect();
    let integral = super::cumulative_trapezoid(times, &powered);

    let n = times.len();
    for s in 0..n {
        let fs = values[s];
        if let LemmaPart::Algebraic { .. } = part {
            if fs < 1.0 - HYPOTHESIS_RTOL {
                return Err(Error::Hypothesis(format!("f({}) = {fs} below 1", times[s])));
            }
        }
        for t in s + 1..n {
            let lhs = values[t] + c1 * (integral[t] - integral[s]);
            if lhs > fs * (1.0 + HYPOTHESIS_RTOL) {
                return Err(Error::Hypothesis(format!(
                    "f({}) + C1 * integral = {lhs} exceeds f({}) = {fs}",
                    times[t], times[s]
                )));
            }
        }
    }

    let mut worst = f64::INFINITY;
    let mut worst_pair = [times[0], times[0]];
    for s in 0..n {
        for t in s + 1..n {
            let gap = times[t] - times[s];
            let bound = match part {
                LemmaPart::Exponential => values[s] * (-c1 * gap).exp(),
                LemmaPart::Algebraic { alpha } => (values[s] / (1.0 + c1 * gap)).powf(1.0 / alpha),
            };
            let margin = (bound - values[t]) / values[s];
            if margin < worst {
                worst = margin;
                worst_pair = [times[s], times[t]];
            }
        }
    }
    Ok(DecayLemmaReport {
        pairs: n * (n - 1) / 2,
        worst_margin: worst,
        worst_pair,
        pass: worst >= -CONCLUSION_RTOL,
    })
}

/// Large-data bound `f(t) ≤ e^{−μt} e^{f(0)−1} f(0)^{2/p}` with `f = ‖v‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnadReport {
    pub mu: f64,
    pub applies: bool,
    /// Smallest `bound(t) − f(t)` relative to `f(0)`.
    pub worst_margin: f64,
    /// Largest rate for which the bound holds at every sample.
    pub admissible_mu: f64,
    pub pass: bool,
}

pub fn snad_bound_check(times: &[f64], energy: &[f64], mu: f64, p: f64) -> SnadReport {
    let (Some(&t0), Some(&f0)) = (times.first(), energy.first()) else {
        return SnadReport {
            mu,
            applies: false,
            worst_margin: 0.0,
            admissible_mu: f64::INFINITY,
            pass: true,
        };
    };
    let applies = p < 2.0 && f0 > 1.0;
    let prefactor = if applies {
        (f0 - 1.0).exp() * f0.powf(2.0 / p)
    } else {
        f0
    };
    let worst = times
        .iter()
        .zip(energy)
        .map(|(&t, &f)| (prefactor * (-mu * (t - t0)).exp() - f) / f0.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let admissible_mu = times
        .iter()
        .zip(energy)
        .filter(|(&t, _)| t > t0)
        .map(|(&t, &f)| if f > 0.0 { (prefactor / f).ln() / (t - t0) } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min);
    SnadReport {
        mu,
        applies,
        worst_margin: worst,
        admissible_mu,
        pass: worst >= -CONCLUSION_RTOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    #[test]
    fn exact_exponential_fit() {
        let t = grid(50, 2.0);
        let v: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let fit = fit_exponential_rate(&t, &v, [0.0, 2.0]).unwrap();
        assert!((fit.mu_fit - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_exponential_fit_within_two_percent() {
        let t = grid(200, 4.0);
        let mu = 1.7;
        let v: Vec<f64> = t.iter().map(|t| 2.5 * (-mu * t).exp() * (1.0 + 0.01 * t.sin())).collect();
        let fit = fit_exponential_rate(&t, &v, [0.0, 4.0]).unwrap();
        assert!((fit.mu_fit - mu).abs() <= 0.02 * mu, "{}", fit.mu_fit);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = grid(10, 1.0);
        let v = vec![0.7; t.len()];
        let fit = fit_exponential_rate(&t, &v, [0.0, 1.0]).unwrap();
        assert_eq!(fit.mu_fit, 0.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn window_errors() {
        let t = grid(10, 1.0);
        let mut v = vec![1.0; t.len()];
        v[5] = 0.0;
        assert!(matches!(fit_exponential_rate(&t, &v, [0.0, 1.0]), Err(Error::Window(_))));
        assert!(fit_exponential_rate(&t, &v, [0.6, 1.0]).is_ok());
        assert!(matches!(fit_exponential_rate(&t, &v, [0.5, 2.0]), Err(Error::Window(_))));
        assert!(matches!(fit_exponential_rate(&t, &v, [0.9, 0.95]), Err(Error::Window(_))));
    }

    #[test]
    fn part_one_saturates_on_exponential() {
        let c1 = 1.3;
        let t = grid(400, 2.0);
        let v: Vec<f64> = t.iter().map(|t| 4.0 * (-c1 * t).exp()).collect();
        let r = decay_lemma_check(&t, &v, c1, LemmaPart::Exponential).unwrap();
        assert!(r.pass);
        assert!(r.worst_margin.abs() <= 1e-10, "{}", r.worst_margin);
    }

    #[test]
    fn part_one_strict_margin_on_faster_decay() {
        let c1 = 0.8;
        let t = grid(200, 2.0);
        let v: Vec<f64> = t.iter().map(|t| (-2.0 * c1 * t).exp()).collect();
        let r = decay_lemma_check(&t, &v, c1, LemmaPart::Exponential).unwrap();
        assert!(r.pass);
        assert!(r.worst_margin >= 0.0);
        let strict = decay_lemma_check(&t[..20], &v[..20], c1, LemmaPart::Exponential).unwrap();
        assert!(strict.worst_margin > 0.0);
    }

    #[test]
    fn part_two_power_ode_oracle() {
        let (c1, alpha, f0): (f64, f64, f64) = (0.5, 0.6, 9.0);
        let e = 1.0 - alpha;
        let f = |t: f64| (f0.powf(e) - c1 * e * t).powf(1.0 / e);
        let t_one = (f0.powf(e) - 1.0) / (c1 * e);
        let t = grid(400, t_one);
        let v: Vec<f64> = t.iter().map(|&s| f(s).max(1.0)).collect();
        let r = decay_lemma_check(&t, &v, c1, LemmaPart::Algebraic { alpha }).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn non_monotone_series_is_a_hypothesis_error() {
        let t = grid(20, 1.0);
        let v: Vec<f64> = t.iter().map(|t| 2.0 + (6.0 * t).sin()).collect();
        for part in [LemmaPart::Exponential, LemmaPart::Algebraic { alpha: 0.6 }] {
            assert!(matches!(decay_lemma_check(&t, &v, 0.5, part), Err(Error::Hypothesis(_))));
        }
    }

    #[test]
    fn part_two_rejects_values_below_one() {
        let t = grid(10, 1.0);
        let v: Vec<f64> = t.iter().map(|t| 0.9 * (-t).exp()).collect();
        assert!(matches!(
            decay_lemma_check(&t, &v, 0.1, LemmaPart::Algebraic { alpha: 0.6 }),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn mu_estimate_single_mode_matches_rayleigh_quotient() {
        let g = QuadratureGrid::new(16);
        let basis = VelocityBasis::new(1, 1, &g).unwrap();
        let params = FluidParams::newtonian(1.0, 1.0);
        let est = theoretical_mu_estimate(&basis, &params).unwrap();
        let expected = basis.stiffness[(0, 0)] / basis.mass[(0, 0)];
        assert!((est.mu - expected).abs() < 1e-10 * expected);
        assert!(!est.small_data_only);

        let doubled = FluidParams::newtonian(2.0, 1.0);
        let est2 = theoretical_mu_estimate(&basis, &doubled).unwrap();
        assert!((est2.mu - 2.0 * est.mu).abs() < 1e-10 * est.mu);
    }

    #[test]
    fn mu_estimate_non_increasing_in_basis_size() {
        let g = QuadratureGrid::new(20);
        let params = FluidParams::newtonian(1.0, 1.0);
        let mut last = f64::INFINITY;
        for m in 1..=4 {
            let basis = VelocityBasis::new(m, m, &g).unwrap();
            let est = theoretical_mu_estimate(&basis, &params).unwrap();
            assert!(est.mu <= last * (1.0 + 1e-12));
            last = est.mu;
        }
    }

    #[test]
    fn snad_bound_on_slow_large_data() {
        let t = grid(50, 1.0);
        let energy: Vec<f64> = t.iter().map(|t| 3.0 * (-0.5 * t).exp()).collect();
        let r = snad_bound_check(&t, &energy, 0.5, 1.8);
        assert!(r.applies && r.pass);
        assert!(r.admissible_mu > 0.5);
        assert!(snad_bound_check(&t, &energy, r.admissible_mu, 1.8).pass);
        assert!(!snad_bound_check(&t, &energy, 1.01 * r.admissible_mu, 1.8).pass);
        let bad: Vec<f64> = energy.iter().enumerate().map(|(k, e)| if k == 30 { 1e3 } else { *e }).collect();
        assert!(!snad_bound_check(&t, &bad, 0.5, 1.8).pass);
    }
}
