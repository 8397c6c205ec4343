use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::testfns::{boundary_one_weights, space_bumps, tabulate, time_hats, TimeHat};
use super::{cumulative_trapezoid, AuditContext, Convention, InequalityTag, ResidualSeries, Tolerances};
use crate::correction::CorrectionFn;
use crate::error::Result;
use crate::galerkin::GridFields;
use crate::lyapunov::{f_alpha, LyapunovParams};

const HATS: usize = 4;

fn kinetic_density(f: &GridFields) -> DMatrix<f64> {
    f.vel.v1.component_mul(&f.vel.v1) + f.vel.v2.component_mul(&f.vel.v2)
}

/// `‖v(t_k)‖₂²` at every snapshot.
pub fn kinetic_energy_series(ctx: &AuditContext) -> Vec<f64> {
    ctx.fields.iter().map(|f| ctx.integrate(&kinetic_density(f))).collect()
}

/// `‖v(t)‖² + 2∫_0^t∫ S:Dv − ‖v(0)‖²`, judged by magnitude against
/// `c1 · dt · max_t 2∫S:Dv + c2`.
pub fn kinetic_energy_audit(ctx: &AuditContext, tolerances: &Tolerances) -> ResidualSeries {
    let energy = kinetic_energy_series(ctx);
    let dissipation: Vec<f64> = ctx.fields.iter().map(|f| ctx.integrate(&f.dissipation)).collect();
    let peak = dissipation.iter().fold(0.0_f64, |m, d| m.max(2.0 * d));
    let tol = tolerances.kinetic_c1 * ctx.dt * peak + tolerances.kinetic_c2;
    let dissipated = cumulative_trapezoid(&ctx.times, &dissipation);
    let values = energy
        .iter()
        .zip(&dissipated)
        .map(|(e, d)| e + 2.0 * d - energy[0])
        .collect();
    ResidualSeries::new(InequalityTag::Kinetic, Convention::Magnitude, tol, ctx.times.clone(), values)
}

/// Space-time pairing `−∫∫ g ∂_tψ + ∫∫ h ψ` with snapshot values `g_k`, `h_k`.
fn pair_with_hat(times: &[f64], hat: &TimeHat, g: &[f64], h: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in hat.lo..hat.hi {
        let dt = times[k + 1] - times[k];
        let slope = hat.slope(times, k);
        total -= slope * 0.5 * dt * (g[k] + g[k + 1]);
        let (p0, p1) = (hat.value(times, k), hat.value(times, k + 1));
        total += 0.5 * dt * (h[k] * p0 + h[k + 1] * p1);
    }
    total
}

/// Entropy inequality `LHS − RHS ≥ −tol` for every (bump, hat) pair; one
/// entry per pair, placed at the hat's peak time.
pub fn entropy_audit(ctx: &AuditContext, tolerances: &Tolerances) -> Result<ResidualSeries> {
    let tol = tolerances.entropy(ctx.dt);
    let hats = time_hats(ctx.len(), HATS)?;
    let bumps = space_bumps();
    let times = &ctx.times;
    let mut values = Vec::new();
    let mut at = Vec::new();
    let mut labels = Vec::new();
    for bump in &bumps {
        let [phi, phi_x, phi_y] = tabulate(ctx.nodes(), |x, y| bump.eval(x, y));
        let mut g = Vec::with_capacity(ctx.len());
        let mut h = Vec::with_capacity(ctx.len());
        for f in &ctx.fields {
            let t = &f.temp;
            g.push(ctx.integrate_with(|i, j| t.theta[(i, j)].ln() * phi[(i, j)]));
            h.push(ctx.integrate_with(|i, j| {
                let theta = t.theta[(i, j)];
                let eta = theta.ln();
                let (ex, ey) = (t.theta_x[(i, j)] / theta, t.theta_y[(i, j)] / theta);
                let (px, py) = (phi_x[(i, j)], phi_y[(i, j)]);
                let kappa = f.kappa[(i, j)];
                let advect = eta * (f.vel.v1[(i, j)] * px + f.vel.v2[(i, j)] * py);
                let flux = kappa * (ex * px + ey * py);
                let source = (f.dissipation[(i, j)] / theta + kappa * (ex * ex + ey * ey)) * phi[(i, j)];
                -advect + flux - source
            }));
        }
        for hat in &hats {
            values.push(pair_with_hat(times, hat, &g, &h));
            at.push(times[hat.mid]);
            labels.push(format!("{}|{}", bump.label(), hat.label(times)));
        }
    }
    Ok(ResidualSeries::new(InequalityTag::Entropy, Convention::AtLeast, tol, at, values).with_labels(labels))
}

/// Corrected total energy inequality, the Galerkin-level equality obtained
/// by adding the sign-definite term back, and that term itself per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedTotalAudit {
    /// Four-integral left-hand side per (weight, hat) pair, expected `≤ tol`.
    pub inequality: ResidualSeries,
    /// Same pairs with the sign-definite term added; expected near zero.
    pub equality: ResidualSeries,
    /// `min_φ ∫(S:Dv b − κ|∇θ|² ∂₁b) φ` per snapshot, expected `≥ −tol`.
    pub sign_term: ResidualSeries,
}

struct CorrectionTables {
    b: DMatrix<f64>,
    d1b: DMatrix<f64>,
    d2b: DMatrix<f64>,
    primitive: DMatrix<f64>,
}

fn correction_tables(f: &GridFields, theta_hat: &DMatrix<f64>, corr: &CorrectionFn) -> CorrectionTables {
    let fam = corr.family();
    let th = &f.temp.theta;
    CorrectionTables {
        b: th.zip_map(theta_hat, |s, st| fam.b(s, st)),
        d1b: th.zip_map(theta_hat, |s, st| fam.d1b(s, st)),
        d2b: th.zip_map(theta_hat, |s, st| fam.d2b(s, st)),
        primitive: th.zip_map(theta_hat, |s, st| corr.primitive_unchecked(s, st)),
    }
}

pub fn corrected_total_energy_audit(
    ctx: &AuditContext,
    corr: &CorrectionFn,
    tolerances: &Tolerances,
) -> Result<CorrectedTotalAudit> {
    let tol_te = tolerances.total_energy(ctx.dt);
    let tol_sign = tolerances.sign_term;
    let hats = time_hats(ctx.len(), HATS)?;
    let weights = boundary_one_weights();
    let times = &ctx.times;
    let temp_basis = &ctx.model.temperature;
    let (hat_x, hat_y) = (&temp_basis.theta_hat_x, &temp_basis.theta_hat_y);
    let tables: Vec<CorrectionTables> = ctx
        .fields
        .iter()
        .map(|f| correction_tables(f, &temp_basis.theta_hat, corr))
        .collect();

    let mut ineq = Vec::new();
    let mut eq = Vec::new();
    let mut at = Vec::new();
    let mut labels = Vec::new();
    let mut sign_min = vec![f64::INFINITY; ctx.len()];
    for weight in &weights {
        let [phi, phi_x, phi_y] = tabulate(ctx.nodes(), |x, y| weight.eval(x, y));
        let mut g = Vec::with_capacity(ctx.len());
        let mut h = Vec::with_capacity(ctx.len());
        let mut s = Vec::with_capacity(ctx.len());
        for (k, (f, tb)) in ctx.fields.iter().zip(&tables).enumerate() {
            let t = &f.temp;
            g.push(ctx.integrate_with(|i, j| {
                let v2 = f.vel.v1[(i, j)].powi(2) + f.vel.v2[(i, j)].powi(2);
                0.5 * v2 + t.theta[(i, j)] - tb.primitive[(i, j)] * phi[(i, j)]
            }));
            h.push(ctx.integrate_with(|i, j| {
                let (tx, ty) = (t.theta_x[(i, j)], t.theta_y[(i, j)]);
                let kappa = f.kappa[(i, j)];
                let advect = (f.vel.v1[(i, j)] * tx + f.vel.v2[(i, j)] * ty) * tb.b[(i, j)] * phi[(i, j)];
                let flux = kappa * (tx * phi_x[(i, j)] + ty * phi_y[(i, j)]) * tb.b[(i, j)];
                let lift = kappa * (tx * hat_x[(i, j)] + ty * hat_y[(i, j)]) * tb.d2b[(i, j)] * phi[(i, j)];
                -advect - flux - lift
            }));
            let sk = ctx.integrate_with(|i, j| {
                let grad_sq = t.theta_x[(i, j)].powi(2) + t.theta_y[(i, j)].powi(2);
                (f.dissipation[(i, j)] * tb.b[(i, j)] - f.kappa[(i, j)] * grad_sq * tb.d1b[(i, j)]) * phi[(i, j)]
            });
            sign_min[k] = sign_min[k].min(sk);
            s.push(sk);
        }
        let zeros = vec![0.0; ctx.len()];
        for hat in &hats {
            let lhs = pair_with_hat(times, hat, &g, &h);
            ineq.push(lhs);
            eq.push(lhs + pair_with_hat(times, hat, &zeros, &s));
            at.push(times[hat.mid]);
            labels.push(format!("{}|{}", weight.label(), hat.label(times)));
        }
    }
    Ok(CorrectedTotalAudit {
        inequality: ResidualSeries::new(InequalityTag::CorrectedTotal, Convention::AtMost, tol_te, at.clone(), ineq)
            .with_labels(labels.clone()),
        equality: ResidualSeries::new(InequalityTag::CorrectedTotal, Convention::Magnitude, tol_te, at, eq)
            .with_labels(labels),
        sign_term: ResidualSeries::new(
            InequalityTag::CorrectedTotal,
            Convention::AtLeast,
            tol_sign,
            times.clone(),
            sign_min,
        ),
    })
}

/// `‖θ(t)‖₁ − ∫(½|v₀|² + max(θ̄, θ₀))`, expected `≤ tol`.
pub fn l1_bound_audit(ctx: &AuditContext, theta_hi: f64, tolerances: &Tolerances) -> ResidualSeries {
    let tol = tolerances.l1_bound;
    let f0 = &ctx.fields[0];
    let bound = ctx.integrate_with(|i, j| {
        let v2 = f0.vel.v1[(i, j)].powi(2) + f0.vel.v2[(i, j)].powi(2);
        0.5 * v2 + theta_hi.max(f0.temp.theta[(i, j)])
    });
    let values = ctx
        .fields
        .iter()
        .map(|f| ctx.integrate_with(|i, j| f.temp.theta[(i, j)].abs()) - bound)
        .collect();
    ResidualSeries::new(InequalityTag::L1Bound, Convention::AtMost, tol, ctx.times.clone(), values)
}

/// `θ_ − min θ(t)` over quadrature nodes, expected `≤ tol`.
pub fn min_principle_audit(ctx: &AuditContext, theta_lo: f64, tolerances: &Tolerances) -> ResidualSeries {
    let tol = tolerances.min_principle;
    let values = ctx.fields.iter().map(|f| theta_lo - f.temp.theta.min()).collect();
    ResidualSeries::new(InequalityTag::MinPrinciple, Convention::AtMost, tol, ctx.times.clone(), values)
}

/// Distance of a snapshot to the initial one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttainmentGap {
    pub t1: f64,
    /// `‖v(t₁) − v₀‖₂²`.
    pub velocity: f64,
    /// `‖θ(t₁) − θ₀‖₁`.
    pub temperature: f64,
}

fn gap(ctx: &AuditContext, k: usize) -> AttainmentGap {
    let (f0, f) = (&ctx.fields[0], &ctx.fields[k]);
    AttainmentGap {
        t1: ctx.times[k],
        velocity: ctx.integrate_with(|i, j| {
            (f.vel.v1[(i, j)] - f0.vel.v1[(i, j)]).powi(2) + (f.vel.v2[(i, j)] - f0.vel.v2[(i, j)]).powi(2)
        }),
        temperature: ctx.integrate_with(|i, j| (f.temp.theta[(i, j)] - f0.temp.theta[(i, j)]).abs()),
    }
}

/// Gaps at the first snapshot after the initial one, plus an ATTAINMENT
/// series `gap(t) − rate·(t − t₀)` over the first fifth of the run,
/// expected `≤ tol`.
pub fn attainment_audit(ctx: &AuditContext, tolerances: &Tolerances) -> (AttainmentGap, ResidualSeries) {
    let (rate, tol) = (tolerances.attainment_rate, tolerances.attainment);
    if ctx.len() < 2 {
        let g = gap(ctx, 0);
        let series = ResidualSeries::new(InequalityTag::Attainment, Convention::AtMost, tol, vec![g.t1], vec![0.0]);
        return (g, series);
    }
    let first = gap(ctx, 1);
    let span = ((ctx.len() - 1) / 5).max(1);
    let t0 = ctx.times[0];
    let (times, values): (Vec<f64>, Vec<f64>) = (0..=span)
        .map(|k| {
            let g = gap(ctx, k);
            (g.t1, g.velocity + g.temperature - rate * (g.t1 - t0))
        })
        .unzip();
    (
        first,
        ResidualSeries::new(InequalityTag::Attainment, Convention::AtMost, tol, times, values),
    )
}

/// `t ↦ ∫ β|v|² + f_α(θ, θ̂)`.
pub fn lyapunov_series(ctx: &AuditContext, lp: &LyapunovParams) -> Vec<f64> {
    let params = &ctx.model.params;
    let theta_hat = &ctx.model.temperature.theta_hat;
    ctx.fields
        .iter()
        .map(|f| {
            let kinetic = ctx.integrate(&kinetic_density(f));
            let thermal = ctx.integrate_with(|i, j| f_alpha(f.temp.theta[(i, j)], theta_hat[(i, j)], lp.alpha, params));
            lp.beta * kinetic + thermal
        })
        .collect()
}
