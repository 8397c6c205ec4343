//! Divergence-free stream-function velocity basis, lifted sine temperature
//! basis, and the semi-discrete right-hand sides `M_v ȧ = F_v`, `M_θ ċ = F_θ`.
//!
//! All grid quantities are `q × q` matrices whose row index runs over the
//! x-nodes and column index over the y-nodes, so that flat index `i * q + j`
//! agrees with [`QuadratureGrid::point`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constitutive::FluidParams;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;
use crate::steady::{sine_tables, SteadyTemperature};

/// 1D tables for `sin²(mπx)`, its first and second derivatives, m = 1..=M.
#[derive(Debug, Clone)]
struct StreamTables {
    s2: DMatrix<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
}

impl StreamTables {
    fn new(modes: usize, nodes: &[f64]) -> Self {
        let q = nodes.len();
        let freq = |m: usize| (m + 1) as f64 * PI;
        let s2 = DMatrix::from_fn(modes, q, |m, i| (freq(m) * nodes[i]).sin().powi(2));
        let d1 = DMatrix::from_fn(modes, q, |m, i| freq(m) * (2.0 * freq(m) * nodes[i]).sin());
        let d2 = DMatrix::from_fn(modes, q, |m, i| 2.0 * freq(m).powi(2) * (2.0 * freq(m) * nodes[i]).cos());
        Self { s2, d1, d2 }
    }
}

fn stream_point(m: usize, x: f64) -> (f64, f64, f64) {
    let w = m as f64 * PI;
    let s = (w * x).sin();
    (s * s, w * (2.0 * w * x).sin(), 2.0 * w * w * (2.0 * w * x).cos())
}

/// `M_x × M_y` velocity modes `w = (∂_y ψ, −∂_x ψ)` with
/// `ψ_{mn} = sin²(mπx) sin²(nπy)`. Coefficient index is `(m−1)·M_y + (n−1)`.
#[derive(Debug, Clone)]
pub struct VelocityBasis {
    pub mx: usize,
    pub my: usize,
    tx: StreamTables,
    ty: StreamTables,
    weights: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    /// `A_ij = ∫ Dw_i : Dw_j`.
    pub stiffness: DMatrix<f64>,
}

/// Velocity and velocity gradient on the grid.
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub v1x: DMatrix<f64>,
    pub v1y: DMatrix<f64>,
    pub v2x: DMatrix<f64>,
}

impl VelocityGrid {
    /// `∂_y v_2 = −∂_x v_1` identically.
    pub fn v2y(&self) -> DMatrix<f64> {
        -&self.v1x
    }
}

fn kron_sum(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    DMatrix::from_fn(na * nb, na * nb, |r, s| {
        let (i, j) = (r / nb, r % nb);
        let (k, l) = (s / nb, s % nb);
        a[(i, k)] * b[(j, l)] + c[(i, k)] * d[(j, l)]
    })
}

fn weight_matrix(grid: &QuadratureGrid) -> DMatrix<f64> {
    let q = grid.order;
    DMatrix::from_fn(q, q, |i, j| grid.weights[i] * grid.weights[j])
}

impl VelocityBasis {
    pub fn new(mx: usize, my: usize, grid: &QuadratureGrid) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::config("velocity basis needs at least one mode per direction"));
        }
        let tx = StreamTables::new(mx, &grid.nodes);
        let ty = StreamTables::new(my, &grid.nodes);
        let w1d = DMatrix::from_diagonal(&DVector::from_column_slice(&grid.weights));
        let gram = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * &w1d * b.transpose();
        let mass = kron_sum(&gram(&tx.s2, &tx.s2), &gram(&ty.d1, &ty.d1), &gram(&tx.d1, &tx.d1), &gram(&ty.s2, &ty.s2));
        let mut basis = Self {
            mx,
            my,
            tx,
            ty,
            weights: weight_matrix(grid),
            mass,
            stiffness: DMatrix::zeros(0, 0),
        };
        let n = basis.len();
        let mut stiffness = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            let f = basis.grid_fields(e.as_slice());
            let shear = 0.5 * (&f.v1y + &f.v2x);
            let col = basis.project_symmetric(&(2.0 * &f.v1x), &shear);
            stiffness.set_column(j, &col);
        }
        basis.stiffness = 0.5 * (&stiffness + stiffness.transpose());
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> Vec<(usize, usize)> {
        (1..=self.mx).flat_map(|m| (1..=self.my).map(move |n| (m, n))).collect()
    }

    fn coeff_matrix(&self, a: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.mx, self.my, a)
    }

    pub fn grid_fields(&self, a: &[f64]) -> VelocityGrid {
        let am = self.coeff_matrix(a);
        let (tx, ty) = (&self.tx, &self.ty);
        let left_s2 = tx.s2.transpose() * &am;
        let left_d1 = tx.d1.transpose() * &am;
        VelocityGrid {
            v1: &left_s2 * &ty.d1,
            v2: -(&left_d1 * &ty.s2),
            v1x: &left_d1 * &ty.d1,
            v1y: &left_s2 * &ty.d2,
            v2x: -(tx.d2.transpose() * &am * &ty.s2),
        }
    }

    /// `∫ G : ∇w_i` for a symmetric grid tensor `G`, given `G11 − G22` and `G12`.
    /// Weights are applied here.
    pub fn project_symmetric(&self, g_diff: &DMatrix<f64>, g12: &DMatrix<f64>) -> DVector<f64> {
        let (tx, ty) = (&self.tx, &self.ty);
        let wd = g_diff.component_mul(&self.weights);
        let wo = g12.component_mul(&self.weights);
        let f = &tx.d1 * wd * ty.d1.transpose() + &tx.s2 * &wo * ty.d2.transpose() - &tx.d2 * wo * ty.s2.transpose();
        DVector::from_row_slice(f.transpose().as_slice())
    }

    /// `∫ g · w_i` for a grid vector field `g`.
    pub fn project_vector(&self, g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> DVector<f64> {
        let (tx, ty) = (&self.tx, &self.ty);
        let w1 = g1.component_mul(&self.weights);
        let w2 = g2.component_mul(&self.weights);
        let f = &tx.s2 * w1 * ty.d1.transpose() - &tx.d1 * w2 * ty.s2.transpose();
        DVector::from_row_slice(f.transpose().as_slice())
    }

    /// Velocity `(v1, v2)` and gradient `[[∂x v1, ∂y v1], [∂x v2, ∂y v2]]` at a point.
    pub fn eval_at(&self, a: &[f64], x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let xs: Vec<_> = (1..=self.mx).map(|m| stream_point(m, x)).collect();
        let ys: Vec<_> = (1..=self.my).map(|n| stream_point(n, y)).collect();
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (i, (s2x, d1x, d2x)) in xs.iter().enumerate() {
            for (j, (s2y, d1y, d2y)) in ys.iter().enumerate() {
                let c = a[i * self.my + j];
                v[0] += c * s2x * d1y;
                v[1] -= c * d1x * s2y;
                g[0][0] += c * d1x * d1y;
                g[0][1] += c * s2x * d2y;
                g[1][0] -= c * d2x * s2y;
            }
        }
        g[1][1] = -g[0][0];
        (v, g)
    }

    /// Kinetic quantity `‖v‖₂² = aᵀ M a`.
    pub fn l2_norm_sq(&self, a: &[f64]) -> f64 {
        let av = DVector::from_column_slice(a);
        (av.transpose() * &self.mass * &av)[(0, 0)]
    }
}

/// `K_x × K_y` Dirichlet modes `sin(kπx) sin(lπy)` around the lifting θ̂.
/// Coefficient index is `(k−1)·K_y + (l−1)`.
#[derive(Debug, Clone)]
pub struct TemperatureBasis {
    pub kx: usize,
    pub ky: usize,
    zx: DMatrix<f64>,
    dzx: DMatrix<f64>,
    zy: DMatrix<f64>,
    dzy: DMatrix<f64>,
    weights: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub steady: SteadyTemperature,
    /// θ̂ and its gradient on the grid.
    pub theta_hat: DMatrix<f64>,
    pub theta_hat_x: DMatrix<f64>,
    pub theta_hat_y: DMatrix<f64>,
}

/// Temperature and its gradient on the grid.
#[derive(Debug, Clone)]
pub struct TemperatureGrid {
    pub theta: DMatrix<f64>,
    pub theta_x: DMatrix<f64>,
    pub theta_y: DMatrix<f64>,
}

impl TemperatureBasis {
    pub fn new(kx: usize, ky: usize, steady: &SteadyTemperature, grid: &QuadratureGrid) -> Result<Self> {
        if kx == 0 || ky == 0 {
            return Err(Error::config("temperature basis needs at least one mode per direction"));
        }
        let q = grid.order;
        if 2 * q < kx.max(ky) + 2 {
            return Err(Error::config(format!(
                "quadrature order {q} too low for {kx}×{ky} temperature modes"
            )));
        }
        let (zx, dzx) = sine_tables(kx, &grid.nodes);
        let (zy, dzy) = sine_tables(ky, &grid.nodes);
        let w1d = DMatrix::from_diagonal(&DVector::from_column_slice(&grid.weights));
        let gx = &zx * &w1d * zx.transpose();
        let gy = &zy * &w1d * zy.transpose();
        let zero_x = DMatrix::zeros(kx, kx);
        let zero_y = DMatrix::zeros(ky, ky);
        let mass = kron_sum(&gx, &gy, &zero_x, &zero_y);
        let mut theta_hat = DMatrix::zeros(q, q);
        let mut theta_hat_x = DMatrix::zeros(q, q);
        let mut theta_hat_y = DMatrix::zeros(q, q);
        let reuse = steady.grid.order == q && steady.grid.nodes == grid.nodes;
        for i in 0..q {
            for j in 0..q {
                let (t, g) = if reuse {
                    (steady.theta[i * q + j], steady.grad[i * q + j])
                } else {
                    steady.eval_at(grid.nodes[i], grid.nodes[j])?
                };
                theta_hat[(i, j)] = t;
                theta_hat_x[(i, j)] = g[0];
                theta_hat_y[(i, j)] = g[1];
            }
        }
        Ok(Self {
            kx,
            ky,
            zx,
            dzx,
            zy,
            dzy,
            weights: weight_matrix(grid),
            mass,
            steady: steady.clone(),
            theta_hat,
            theta_hat_x,
            theta_hat_y,
        })
    }

    pub fn len(&self) -> usize {
        self.kx * self.ky
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Correction part `Σ c_kl z_k z_l` and its gradient on the grid.
    pub fn correction_fields(&self, c: &[f64]) -> TemperatureGrid {
        let cm = DMatrix::from_row_slice(self.kx, self.ky, c);
        let left = self.zx.transpose() * &cm;
        TemperatureGrid {
            theta: &left * &self.zy,
            theta_x: self.dzx.transpose() * &cm * &self.zy,
            theta_y: left * &self.dzy,
        }
    }

    pub fn grid_fields(&self, c: &[f64]) -> TemperatureGrid {
        let mut f = self.correction_fields(c);
        f.theta += &self.theta_hat;
        f.theta_x += &self.theta_hat_x;
        f.theta_y += &self.theta_hat_y;
        f
    }

    /// `∫ (g · ∇ζ_k + h ζ_k)` for grid fields `g = (g1, g2)` and `h`.
    pub fn project(&self, g1: &DMatrix<f64>, g2: &DMatrix<f64>, h: &DMatrix<f64>) -> DVector<f64> {
        let w1 = g1.component_mul(&self.weights);
        let w2 = g2.component_mul(&self.weights);
        let wh = h.component_mul(&self.weights);
        let f = &self.dzx * w1 * self.zy.transpose() + &self.zx * w2 * self.dzy.transpose() + &self.zx * wh * self.zy.transpose();
        DVector::from_row_slice(f.transpose().as_slice())
    }

    /// θ and ∇θ at a point of the closed square.
    pub fn eval_at(&self, c: &[f64], x: f64, y: f64) -> Result<(f64, [f64; 2])> {
        let (mut t, mut g) = self.steady.eval_at(x, y)?;
        for k in 0..self.kx {
            let wk = (k + 1) as f64 * PI;
            let (sx, cx) = (wk * x).sin_cos();
            for l in 0..self.ky {
                let wl = (l + 1) as f64 * PI;
                let (sy, cy) = (wl * y).sin_cos();
                let a = c[k * self.ky + l];
                t += a * sx * sy;
                g[0] += a * wk * cx * sy;
                g[1] += a * sx * wl * cy;
            }
        }
        Ok((t, g))
    }
}

/// Which couplings of the full system are active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coupling {
    /// Velocity convection `(v ⊗ v) : ∇w`.
    pub convection: bool,
    /// Dissipative heating `S : Dv` in the temperature equation.
    pub heating: bool,
    /// When false the temperature coefficients are held fixed.
    pub evolve_temperature: bool,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            convection: true,
            heating: true,
            evolve_temperature: true,
        }
    }
}

/// Coefficients of a Galerkin approximation at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinState {
    pub t: f64,
    /// Velocity coefficients.
    pub a: Vec<f64>,
    /// Temperature coefficients relative to θ̂.
    pub c: Vec<f64>,
}

impl GalerkinState {
    pub fn steady(nv: usize, nt: usize) -> Self {
        Self {
            t: 0.0,
            a: vec![0.0; nv],
            c: vec![0.0; nt],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.a.len() + self.c.len(), self.a.iter().chain(&self.c).copied())
    }

    pub fn from_vector(t: f64, x: &DVector<f64>, nv: usize) -> Self {
        Self {
            t,
            a: x.rows(0, nv).iter().copied().collect(),
            c: x.rows(nv, x.len() - nv).iter().copied().collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.c).all(|x| x.is_finite())
    }
}

/// All fields of a state on the quadrature grid, with the constitutive
/// quantities derived from them.
#[derive(Debug, Clone)]
pub struct GridFields {
    pub vel: VelocityGrid,
    pub temp: TemperatureGrid,
    /// Stress components `S11, S12, S22`.
    pub s11: DMatrix<f64>,
    pub s12: DMatrix<f64>,
    pub s22: DMatrix<f64>,
    /// `S : Dv`.
    pub dissipation: DMatrix<f64>,
    /// `κ(θ)`.
    pub kappa: DMatrix<f64>,
}

/// One point sample of all fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub v: [f64; 2],
    pub grad_v: [[f64; 2]; 2],
    pub theta: f64,
    pub grad_theta: [f64; 2],
}

/// Velocity and temperature bases on a common grid, with the constitutive data.
#[derive(Debug, Clone)]
pub struct GalerkinModel {
    pub grid: QuadratureGrid,
    pub velocity: VelocityBasis,
    pub temperature: TemperatureBasis,
    pub params: FluidParams,
    pub coupling: Coupling,
}

impl GalerkinModel {
    pub fn new(
        modes_v: (usize, usize),
        modes_t: (usize, usize),
        steady: &SteadyTemperature,
        params: &FluidParams,
        grid: QuadratureGrid,
        coupling: Coupling,
    ) -> Result<Self> {
        let velocity = VelocityBasis::new(modes_v.0, modes_v.1, &grid)?;
        let temperature = TemperatureBasis::new(modes_t.0, modes_t.1, steady, &grid)?;
        Ok(Self {
            grid,
            velocity,
            temperature,
            params: params.clone(),
            coupling,
        })
    }

    pub fn nv(&self) -> usize {
        self.velocity.len()
    }

    pub fn nt(&self) -> usize {
        self.temperature.len()
    }

    /// Block-diagonal mass matrix of the full system.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let (nv, nt) = (self.nv(), self.nt());
        let mut m = DMatrix::zeros(nv + nt, nv + nt);
        m.view_mut((0, 0), (nv, nv)).copy_from(&self.velocity.mass);
        m.view_mut((nv, nv), (nt, nt)).copy_from(&self.temperature.mass);
        m
    }

    /// Fields on the grid; fails with a positivity fault if θ ≤ 0 anywhere.
    pub fn fields(&self, state: &GalerkinState) -> Result<GridFields> {
        let vel = self.velocity.grid_fields(&state.a);
        let temp = self.temperature.grid_fields(&state.c);
        let q = self.grid.order;
        if let Some((k, value)) = temp.theta.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            // Column-major storage: entry (i, j) sits at j * q + i.
            let (i, j) = (k % q, k / q);
            return Err(Error::Positivity {
                index: i * q + j,
                value: *value,
            });
        }
        let params = &self.params;
        let mut s11 = DMatrix::zeros(q, q);
        let mut s12 = DMatrix::zeros(q, q);
        let mut s22 = DMatrix::zeros(q, q);
        let mut dissipation = DMatrix::zeros(q, q);
        let mut kappa = DMatrix::zeros(q, q);
        for j in 0..q {
            for i in 0..q {
                let d11 = vel.v1x[(i, j)];
                let d12 = 0.5 * (vel.v1y[(i, j)] + vel.v2x[(i, j)]);
                let norm_sq = 2.0 * d11 * d11 + 2.0 * d12 * d12;
                let theta = temp.theta[(i, j)];
                let factor = params.stress_factor(theta, norm_sq.sqrt());
                s11[(i, j)] = factor * d11;
                s12[(i, j)] = factor * d12;
                s22[(i, j)] = -factor * d11;
                dissipation[(i, j)] = factor * norm_sq;
                kappa[(i, j)] = params.kappa.eval(theta);
            }
        }
        Ok(GridFields {
            vel,
            temp,
            s11,
            s12,
            s22,
            dissipation,
            kappa,
        })
    }

    /// Load vectors `F_v(j) = ∫ (v⊗v − S) : ∇w_j` and
    /// `F_θ(k) = ∫ θ v·∇ζ_k − κ(θ)∇θ·∇ζ_k + (S:Dv) ζ_k`.
    pub fn assemble_rhs(&self, state: &GalerkinState) -> Result<(DVector<f64>, DVector<f64>)> {
        let f = self.fields(state)?;
        Ok((self.velocity_load(&f), self.temperature_load(&f)))
    }

    pub fn velocity_load(&self, f: &GridFields) -> DVector<f64> {
        let (v1, v2) = (&f.vel.v1, &f.vel.v2);
        let mut g_diff = &f.s22 - &f.s11;
        let mut g12 = -&f.s12;
        if self.coupling.convection {
            g_diff += v1.component_mul(v1) - v2.component_mul(v2);
            g12 += v1.component_mul(v2);
        }
        self.velocity.project_symmetric(&g_diff, &g12)
    }

    pub fn temperature_load(&self, f: &GridFields) -> DVector<f64> {
        if !self.coupling.evolve_temperature {
            return DVector::zeros(self.nt());
        }
        let t = &f.temp;
        let q1 = t.theta.component_mul(&f.vel.v1) - f.kappa.component_mul(&t.theta_x);
        let q2 = t.theta.component_mul(&f.vel.v2) - f.kappa.component_mul(&t.theta_y);
        let heat = if self.coupling.heating {
            f.dissipation.clone()
        } else {
            DMatrix::zeros(self.grid.order, self.grid.order)
        };
        self.temperature.project(&q1, &q2, &heat)
    }

    /// Convection part of the velocity load alone.
    pub fn convection_load(&self, a: &[f64]) -> DVector<f64> {
        let v = self.velocity.grid_fields(a);
        let g_diff = v.v1.component_mul(&v.v1) - v.v2.component_mul(&v.v2);
        let g12 = v.v1.component_mul(&v.v2);
        self.velocity.project_symmetric(&g_diff, &g12)
    }

    /// Samples of all fields at arbitrary points of the closed square.
    pub fn evaluate_fields(&self, state: &GalerkinState, points: &[(f64, f64)]) -> Result<Vec<FieldSample>> {
        points
            .iter()
            .map(|&(x, y)| {
                if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                    return Err(Error::Domain(format!("point ({x}, {y}) outside the unit square")));
                }
                let (v, grad_v) = self.velocity.eval_at(&state.a, x, y);
                let (theta, grad_theta) = self.temperature.eval_at(&state.c, x, y)?;
                Ok(FieldSample {
                    v,
                    grad_v,
                    theta,
                    grad_theta,
                })
            })
            .collect()
    }

    /// L² projection of a velocity field onto the basis.
    pub fn project_velocity<F: Fn(f64, f64) -> [f64; 2]>(&self, v0: F) -> Result<Vec<f64>> {
        let q = self.grid.order;
        let g1 = DMatrix::from_fn(q, q, |i, j| v0(self.grid.nodes[i], self.grid.nodes[j])[0]);
        let g2 = DMatrix::from_fn(q, q, |i, j| v0(self.grid.nodes[i], self.grid.nodes[j])[1]);
        let rhs = self.velocity.project_vector(&g1, &g2);
        solve_spd(&self.velocity.mass, &rhs)
    }

    /// L² projection of `θ₀ − θ̂` onto the temperature modes.
    pub fn project_temperature<F: Fn(f64, f64) -> f64>(&self, theta0: F) -> Result<Vec<f64>> {
        let q = self.grid.order;
        let h = DMatrix::from_fn(q, q, |i, j| {
            theta0(self.grid.nodes[i], self.grid.nodes[j]) - self.temperature.theta_hat[(i, j)]
        });
        let zero = DMatrix::zeros(q, q);
        let rhs = self.temperature.project(&zero, &zero, &h);
        solve_spd(&self.temperature.mass, &rhs)
    }
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<Vec<f64>> {
    let chol = m.clone().cholesky().ok_or_else(|| Error::Solver {
        message: "mass matrix not positive definite".into(),
        residual: f64::NAN,
    })?;
    Ok(chol.solve(rhs).iter().copied().collect())
}

/// Smallest eigenvalue of the symmetric pencil `(a, m)` with `m` positive definite.
pub fn generalized_min_eigenvalue(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or_else(|| Error::Solver {
        message: "mass matrix not positive definite".into(),
        residual: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Solver { message: "singular Cholesky factor".into(), residual: f64::NAN })?;
    let c = &linv * a * linv.transpose();
    let sym = 0.5 * (&c + c.transpose());
    Ok(sym.symmetric_eigenvalues().min())
}

/// Ratio of extreme eigenvalues of a symmetric positive definite matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    ev.max() / ev.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ScalarLaw;
    use crate::steady::{solve_steady_temperature, BoundaryData};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(p: f64, mv: usize, kt: usize, boundary: BoundaryData) -> GalerkinModel {
        let params = FluidParams::new(p, 0.5, ScalarLaw::constant(1.0), ScalarLaw::Rational { base: 1.0, amp: 1.0 }).unwrap();
        let order = QuadratureGrid::default_order((2 * mv).max(kt));
        let grid = QuadratureGrid::new(order);
        let st = solve_steady_temperature(&boundary, &params, (kt, kt), &grid, (1.0, 3.0)).unwrap();
        GalerkinModel::new((mv, mv), (kt, kt), &st, &params, grid, Coupling::default()).unwrap()
    }

    fn default_model() -> GalerkinModel {
        model(1.8, 3, 6, BoundaryData::Bilinear { corners: [1.5, 2.0, 2.5, 1.8] })
    }

    fn random_state(m: &GalerkinModel, seed: u64, amp: f64) -> GalerkinState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GalerkinState {
            t: 0.0,
            a: (0..m.nv()).map(|_| rng.gen_range(-amp..amp)).collect(),
            c: (0..m.nt()).map(|_| rng.gen_range(-0.05..0.05)).collect(),
        }
    }

    #[test]
    fn single_mode_energy() {
        let grid = QuadratureGrid::new(14);
        let b = VelocityBasis::new(1, 1, &grid).unwrap();
        assert!((b.mass[(0, 0)] - 3.0 * PI * PI / 8.0).abs() < 1e-13);
        assert!(VelocityBasis::new(0, 2, &grid).is_err());
    }

    #[test]
    fn velocity_vanishes_on_boundary_and_is_solenoidal() {
        let grid = QuadratureGrid::new(20);
        let b = VelocityBasis::new(3, 2, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 0..b.len() {
            let mut a = vec![0.0; b.len()];
            a[r] = 1.0;
            for _ in 0..20 {
                let s: f64 = rng.gen();
                for (x, y) in [(s, 0.0), (s, 1.0), (0.0, s), (1.0, s)] {
                    let (v, _) = b.eval_at(&a, x, y);
                    assert!(v[0].abs() < 1e-13 && v[1].abs() < 1e-13);
                }
                let (x, y) = (rng.gen(), rng.gen());
                let (_, g) = b.eval_at(&a, x, y);
                assert!((g[0][0] + g[1][1]).abs() < 1e-13);
            }
        }
        // Centre of the (1,1) mode is a stagnation point.
        let (v, _) = b.eval_at(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5, 0.5);
        assert!(v[0].abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn grid_fields_match_point_evaluation() {
        let m = default_model();
        let s = random_state(&m, 11, 1.0);
        let f = m.fields(&s).unwrap();
        let q = m.grid.order;
        for &(i, j) in &[(0, 0), (3, 7), (q - 1, 2)] {
            let (x, y) = (m.grid.nodes[i], m.grid.nodes[j]);
            let smp = m.evaluate_fields(&s, &[(x, y)]).unwrap()[0];
            assert!((smp.v[0] - f.vel.v1[(i, j)]).abs() < 1e-12);
            assert!((smp.v[1] - f.vel.v2[(i, j)]).abs() < 1e-12);
            assert!((smp.grad_v[0][1] - f.vel.v1y[(i, j)]).abs() < 1e-11);
            assert!((smp.grad_v[1][0] - f.vel.v2x[(i, j)]).abs() < 1e-11);
            assert!((smp.theta - f.temp.theta[(i, j)]).abs() < 1e-12);
            assert!((smp.grad_theta[1] - f.temp.theta_y[(i, j)]).abs() < 1e-11);
        }
        assert!(m.evaluate_fields(&s, &[(1.2, 0.5)]).is_err());
    }

    #[test]
    fn steady_state_has_zero_rhs() {
        let m = default_model();
        let (fv, ft) = m.assemble_rhs(&GalerkinState::steady(m.nv(), m.nt())).unwrap();
        assert_eq!(fv.amax(), 0.0);
        // θ̂ solves the steady problem up to its own spectral truncation.
        assert!(ft.amax() < 1e-10, "{}", ft.amax());
    }

    #[test]
    fn zero_coefficients_reproduce_lifting() {
        let m = default_model();
        let st = GalerkinState::steady(m.nv(), m.nt());
        let f = m.fields(&st).unwrap();
        assert_eq!(f.temp.theta, m.temperature.theta_hat);
        assert!(f.vel.v1.amax() == 0.0 && f.vel.v2.amax() == 0.0);
        let smp = m.evaluate_fields(&st, &[(0.0, 0.3), (1.0, 1.0)]).unwrap();
        assert!((smp[0].theta - (1.5 + 0.3 * (2.5 - 1.5))).abs() < 1e-12);
        assert!((smp[1].theta - 1.8).abs() < 1e-12);
    }

    #[test]
    fn single_temperature_mode_peaks_at_centre() {
        let m = model(2.0, 1, 3, BoundaryData::Constant { value: 1.0 });
        let mut s = GalerkinState::steady(m.nv(), m.nt());
        s.c[0] = 1.0;
        let smp = m.evaluate_fields(&s, &[(0.5, 0.5), (0.0, 0.4)]).unwrap();
        assert!((smp[0].theta - 2.0).abs() < 1e-14);
        assert!((smp[1].theta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newtonian_load_matches_stiffness() {
        let params = FluidParams::newtonian(1.7, 1.0);
        let grid = QuadratureGrid::new(20);
        let st = solve_steady_temperature(&BoundaryData::Constant { value: 2.0 }, &params, (3, 3), &grid, (1.0, 3.0)).unwrap();
        let coupling = Coupling { convection: false, ..Coupling::default() };
        let m = GalerkinModel::new((3, 3), (3, 3), &st, &params, grid, coupling).unwrap();
        let s = random_state(&m, 5, 1.0);
        let (fv, _) = m.assemble_rhs(&s).unwrap();
        let a = DVector::from_column_slice(&s.a);
        let expected = -1.7 * &m.velocity.stiffness * a;
        assert!((fv - expected).amax() < 1e-11);
    }

    #[test]
    fn mass_and_stiffness_spd() {
        let m = default_model();
        for mat in [&m.velocity.mass, &m.velocity.stiffness, &m.temperature.mass] {
            assert!((mat - mat.transpose()).amax() < 1e-12);
            assert!(mat.clone().symmetric_eigenvalues().min() > 0.0);
            assert!(condition_number(mat).is_finite());
        }
    }

    #[test]
    fn kinetic_power_balance() {
        // d/dt ½ aᵀMa = aᵀF_v = −∫ S : Dv.
        let m = default_model();
        for seed in 0..5 {
            let s = random_state(&m, seed, 2.0);
            let f = m.fields(&s).unwrap();
            let fv = m.velocity_load(&f);
            let power: f64 = s.a.iter().zip(fv.iter()).map(|(a, f)| a * f).sum();
            let diss = m.grid.integrate(f.dissipation.transpose().as_slice());
            assert!((power + diss).abs() < 1e-10 * diss.max(1.0), "{power} {diss}");
        }
    }

    #[test]
    fn temperature_convection_duality() {
        // ∫ θ v·∇ζ_k = −∫ ζ_k v·∇θ for ζ_k vanishing on ∂Ω and div v = 0.
        let base = default_model();
        let grid = QuadratureGrid::new(32);
        let m = GalerkinModel::new((3, 3), (6, 6), &base.temperature.steady, &base.params, grid, Coupling::default()).unwrap();
        let s = random_state(&m, 9, 1.5);
        let f = m.fields(&s).unwrap();
        let t = &f.temp;
        let q = m.grid.order;
        let zero = DMatrix::zeros(q, q);
        let flux = m.temperature.project(&t.theta.component_mul(&f.vel.v1), &t.theta.component_mul(&f.vel.v2), &zero);
        let adv = f.vel.v1.component_mul(&t.theta_x) + f.vel.v2.component_mul(&t.theta_y);
        let source = m.temperature.project(&zero, &zero, &adv);
        assert!((flux + source).amax() < 1e-11);
    }

    #[test]
    fn positivity_fault_reported() {
        let m = default_model();
        let mut s = GalerkinState::steady(m.nv(), m.nt());
        s.c[0] = -10.0;
        match m.fields(&s) {
            Err(Error::Positivity { value, .. }) => assert!(value <= 0.0),
            other => panic!("expected positivity fault, got {other:?}"),
        }
    }

    #[test]
    fn projection_round_trip() {
        let m = default_model();
        let s = random_state(&m, 21, 1.0);
        let a = m.projection_velocity_of(&s);
        for (x, y) in a.iter().zip(&s.a) {
            assert!((x - y).abs() < 1e-10);
        }
        let c = m.project_temperature(|x, y| m.temperature.eval_at(&s.c, x, y).unwrap().0).unwrap();
        for (x, y) in c.iter().zip(&s.c) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    impl GalerkinModel {
        fn projection_velocity_of(&self, s: &GalerkinState) -> Vec<f64> {
            self.project_velocity(|x, y| self.velocity.eval_at(&s.a, x, y).0).unwrap()
        }
    }

    #[test]
    fn min_eigenvalue_single_mode() {
        let grid = QuadratureGrid::new(14);
        let b = VelocityBasis::new(1, 1, &grid).unwrap();
        let lam = generalized_min_eigenvalue(&b.stiffness, &b.mass).unwrap();
        assert!((lam - b.stiffness[(0, 0)] / b.mass[(0, 0)]).abs() < 1e-12);
        let big = VelocityBasis::new(3, 3, &QuadratureGrid::new(20)).unwrap();
        assert!(generalized_min_eigenvalue(&big.stiffness, &big.mass).unwrap() <= lam + 1e-10);
    }

    fn relative_change(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn quadrature_refinement() {
        // For p = 2 the velocity integrands are trigonometric polynomials and
        // the default order is accurate to near roundoff.
        // For p ≠ 2, |D| vanishes quadratically at the corners and the
        // error decays algebraically.
        for (p, tol) in [(2.0, 1e-9), (1.8, 2e-2), (2.1, 2e-2)] {
            let coarse = model(p, 3, 6, BoundaryData::Bilinear { corners: [1.5, 2.0, 2.5, 1.8] });
            let s = random_state(&coarse, 4, 1.0);
            let at = |q: usize| {
                let m = GalerkinModel::new(
                    (3, 3),
                    (6, 6),
                    &coarse.temperature.steady,
                    &coarse.params,
                    QuadratureGrid::new(q),
                    Coupling::default(),
                )
                .unwrap();
                m.assemble_rhs(&s).unwrap()
            };
            let q0 = coarse.grid.order;
            let (v0, t0) = at(q0);
            let (v1, t1) = at(2 * q0);
            let (vr, tr) = at(8 * q0);
            assert!(relative_change(&v0, &vr) <= tol, "p={p}: {:e}", relative_change(&v0, &vr));
            assert!(relative_change(&t0, &tr) <= 2e-2, "p={p}");
            assert!(relative_change(&t1, &tr) < relative_change(&t0, &tr));
            if p != 2.0 {
                assert!(relative_change(&v1, &vr) < relative_change(&v0, &vr));
            }
        }
    }

    #[test]
    fn trilinear_form_vanishes_on_symmetric_basis() {
        // Every ψ_mn is even about x = 1/2 and y = 1/2, which makes the
        // integrand of ∫ (u ⊗ v) : ∇w odd and hence zero for all basis triples.
        let grid = QuadratureGrid::new(16);
        let b = VelocityBasis::new(2, 2, &grid).unwrap();
        let unit = |k: usize| {
            let mut e = vec![0.0; 4];
            e[k] = 1.0;
            e
        };
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let t: f64 = (0..grid.len())
                        .map(|pt| {
                            let (x, y) = grid.point(pt);
                            let (u, _) = b.eval_at(&unit(i), x, y);
                            let (v, _) = b.eval_at(&unit(j), x, y);
                            let (_, gw) = b.eval_at(&unit(k), x, y);
                            let mut s = 0.0;
                            for r in 0..2 {
                                for c in 0..2 {
                                    s += u[c] * v[r] * gw[r][c];
                                }
                            }
                            grid.weight(pt) * s
                        })
                        .sum();
                    worst = worst.max(t.abs());
                }
            }
        }
        assert!(worst < 1e-11, "{worst}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn convection_is_energy_neutral(seed in 0u64..1000, amp in 0.1f64..5.0) {
            let grid = QuadratureGrid::new(QuadratureGrid::default_order(8));
            let b = VelocityBasis::new(4, 4, &grid).unwrap();
            let params = FluidParams::newtonian(1.0, 1.0);
            let st = solve_steady_temperature(&BoundaryData::Constant { value: 1.0 }, &params, (2, 2), &grid, (1.0, 1.0)).unwrap();
            let m = GalerkinModel::new((4, 4), (2, 2), &st, &params, grid, Coupling::default()).unwrap();
            prop_assert_eq!(b.len(), 16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..16).map(|_| rng.gen_range(-amp..amp)).collect();
            let conv = m.convection_load(&a);
            let t: f64 = a.iter().zip(conv.iter()).map(|(x, y)| x * y).sum();
            let scale = conv.amax() * a.iter().map(|x| x.abs()).sum::<f64>();
            let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(t.abs() <= 1e-12 * norm.powi(3), "T(v,v,v) = {} (scale {})", t, scale);
        }
    }
}
