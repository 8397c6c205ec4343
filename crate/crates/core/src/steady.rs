//! Steady temperature `θ̂` on the unit square: the Kirchhoff variable
//! `u = G(θ̂)` is harmonic, so we solve a Laplace problem for `u` with a
//! transfinite (Coons) boundary lifting plus a sine-series correction and
//! invert `G` pointwise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constitutive::FluidParams;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;

/// Dirichlet temperature data on ∂Ω, given by a closed-form extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant { value: f64 },
    /// Corner values `[θ(0,0), θ(1,0), θ(0,1), θ(1,1)]`, bilinear in between.
    Bilinear { corners: [f64; 4] },
    /// Temperature trace of `Σ c_i P_i` over the harmonic polynomials
    /// `1, x, y, x²−y², xy, x³−3xy², 3x²y−y³`.
    Harmonic { coeffs: Vec<f64> },
    /// Same polynomial, but prescribing the Kirchhoff variable: θ = G⁻¹(P) on ∂Ω.
    KirchhoffHarmonic { coeffs: Vec<f64> },
}

fn harmonic_poly(coeffs: &[f64], x: f64, y: f64) -> (f64, f64, f64) {
    let basis = [
        (1.0, 0.0, 0.0),
        (x, 1.0, 0.0),
        (y, 0.0, 1.0),
        (x * x - y * y, 2.0 * x, -2.0 * y),
        (x * y, y, x),
        (x * x * x - 3.0 * x * y * y, 3.0 * x * x - 3.0 * y * y, -6.0 * x * y),
        (3.0 * x * x * y - y * y * y, 6.0 * x * y, 3.0 * x * x - 3.0 * y * y),
    ];
    coeffs.iter().zip(basis.iter()).fold((0.0, 0.0, 0.0), |acc, (c, b)| {
        (acc.0 + c * b.0, acc.1 + c * b.1, acc.2 + c * b.2)
    })
}

impl BoundaryData {
    fn validate(&self) -> Result<()> {
        match self {
            BoundaryData::Harmonic { coeffs } | BoundaryData::KirchhoffHarmonic { coeffs } if coeffs.len() > 7 => {
                Err(Error::config("harmonic boundary data takes at most 7 coefficients"))
            }
            _ => Ok(()),
        }
    }

    /// Kirchhoff variable of the extension and its gradient at (x, y).
    fn kirchhoff(&self, x: f64, y: f64, params: &FluidParams) -> (f64, f64, f64) {
        let temp = |g: f64, gx: f64, gy: f64| {
            let k = params.kappa.eval(g);
            (params.kappa.primitive(g), k * gx, k * gy)
        };
        match self {
            BoundaryData::Constant { value } => temp(*value, 0.0, 0.0),
            BoundaryData::Bilinear { corners: [c00, c10, c01, c11] } => {
                let g = c00 * (1.0 - x) * (1.0 - y) + c10 * x * (1.0 - y) + c01 * (1.0 - x) * y + c11 * x * y;
                let gx = (c10 - c00) * (1.0 - y) + (c11 - c01) * y;
                let gy = (c01 - c00) * (1.0 - x) + (c11 - c10) * x;
                temp(g, gx, gy)
            }
            BoundaryData::Harmonic { coeffs } => {
                let (g, gx, gy) = harmonic_poly(coeffs, x, y);
                temp(g, gx, gy)
            }
            BoundaryData::KirchhoffHarmonic { coeffs } => harmonic_poly(coeffs, x, y),
        }
    }

    /// Temperature prescribed at a boundary point.
    pub fn temperature(&self, x: f64, y: f64, params: &FluidParams) -> Result<f64> {
        match self {
            BoundaryData::KirchhoffHarmonic { coeffs } => invert_G(harmonic_poly(coeffs, x, y).0, params),
            _ => {
                let (u, _, _) = self.kirchhoff(x, y, params);
                invert_G(u, params)
            }
        }
    }

    /// Samples the boundary: `n` points per edge.
    pub fn boundary_range(&self, params: &FluidParams, n: usize) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            for (x, y) in [(s, 0.0), (s, 1.0), (0.0, s), (1.0, s)] {
                let t = self.temperature(x, y, params)?;
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        Ok((lo, hi))
    }

    /// Coons patch of the Kirchhoff trace: value and gradient.
    fn lifting(&self, x: f64, y: f64, params: &FluidParams) -> (f64, f64, f64) {
        let (l, _, ly) = self.kirchhoff(0.0, y, params);
        let (r, _, ry) = self.kirchhoff(1.0, y, params);
        let (b, bx, _) = self.kirchhoff(x, 0.0, params);
        let (t, tx, _) = self.kirchhoff(x, 1.0, params);
        let c00 = self.kirchhoff(0.0, 0.0, params).0;
        let c10 = self.kirchhoff(1.0, 0.0, params).0;
        let c01 = self.kirchhoff(0.0, 1.0, params).0;
        let c11 = self.kirchhoff(1.0, 1.0, params).0;
        let corner = (1.0 - x) * (1.0 - y) * c00 + x * (1.0 - y) * c10 + (1.0 - x) * y * c01 + x * y * c11;
        let value = (1.0 - x) * l + x * r + (1.0 - y) * b + y * t - corner;
        let dx = -l + r + (1.0 - y) * bx + y * tx - (-(1.0 - y) * c00 + (1.0 - y) * c10 - y * c01 + y * c11);
        let dy = (1.0 - x) * ly + x * ry - b + t - (-(1.0 - x) * c00 - x * c10 + (1.0 - x) * c01 + x * c11);
        (value, dx, dy)
    }
}

/// Inverse of the Kirchhoff map `G(s) = ∫_0^s κ`, by safeguarded Newton on
/// the bracket `[0, u / κ_lo]`.
#[allow(non_snake_case)]
pub fn invert_G(u: f64, params: &FluidParams) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("{u} is outside the range of G")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = u / params.kappa_lo;
    let mut s = u / params.kappa.eval(u / params.kappa_lo).max(params.kappa_lo);
    for _ in 0..200 {
        let g = params.kappa.primitive(s) - u;
        if g.abs() <= 1e-15 * u {
            return Ok(s);
        }
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - g / params.kappa.eval(s);
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(s);
        }
    }
    Ok(s)
}

/// Sine tables `sin(kπx)` and `kπ cos(kπx)` at the quadrature nodes, k = 1..=K.
pub(crate) fn sine_tables(modes: usize, nodes: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = nodes.len();
    let z = DMatrix::from_fn(modes, q, |k, i| ((k + 1) as f64 * PI * nodes[i]).sin());
    let dz = DMatrix::from_fn(modes, q, |k, i| {
        let w = (k + 1) as f64 * PI;
        w * (w * nodes[i]).cos()
    });
    (z, dz)
}

/// Solved steady temperature, with tables on the quadrature grid it was solved on.
#[derive(Debug, Clone)]
pub struct SteadyTemperature {
    pub boundary: BoundaryData,
    pub params: FluidParams,
    pub modes: (usize, usize),
    /// Sine coefficients of the Kirchhoff correction, index `k * ky + l`.
    pub coeffs: Vec<f64>,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub grid: QuadratureGrid,
    /// θ̂ at grid points (flat grid order).
    pub theta: Vec<f64>,
    /// ∇θ̂ at grid points.
    pub grad: Vec<[f64; 2]>,
}

/// Solves for `u = G(θ̂)` with `Δu = 0` and the Kirchhoff trace of `boundary`.
pub fn solve_steady_temperature(
    boundary: &BoundaryData,
    params: &FluidParams,
    modes: (usize, usize),
    grid: &QuadratureGrid,
    bounds: (f64, f64),
) -> Result<SteadyTemperature> {
    boundary.validate()?;
    if modes.0 == 0 || modes.1 == 0 {
        return Err(Error::config("steady solve needs at least one mode per direction"));
    }
    let (theta_lo, theta_hi) = bounds;
    if !(theta_lo > 0.0 && theta_lo <= theta_hi) {
        return Err(Error::Domain(format!("invalid temperature bounds [{theta_lo}, {theta_hi}]")));
    }
    let (blo, bhi) = boundary.boundary_range(params, 64)?;
    let slack = 1e-12 * theta_hi;
    if blo < theta_lo - slack || bhi > theta_hi + slack {
        return Err(Error::Domain(format!(
            "boundary data range [{blo:.6}, {bhi:.6}] outside [{theta_lo}, {theta_hi}]"
        )));
    }
    let (kx, ky) = modes;
    let q = grid.order;
    let (zx, dzx) = sine_tables(kx, &grid.nodes);
    let (zy, dzy) = sine_tables(ky, &grid.nodes);
    let w = DMatrix::from_diagonal(&DVector::from_column_slice(&grid.weights));

    let gram = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * &w * b.transpose();
    let (xzz, xdd) = (gram(&zx, &zx), gram(&dzx, &dzx));
    let (yzz, ydd) = (gram(&zy, &zy), gram(&dzy, &dzy));
    let n = kx * ky;
    let stiffness = DMatrix::from_fn(n, n, |r, c| {
        let (k, l) = (r / ky, r % ky);
        let (k2, l2) = (c / ky, c % ky);
        xdd[(k, k2)] * yzz[(l, l2)] + xzz[(k, k2)] * ydd[(l, l2)]
    });

    // Weighted lifting gradients on the grid (q × q, row = x index).
    let mut lx = DMatrix::zeros(q, q);
    let mut ly = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let (_, gx, gy) = boundary.lifting(grid.nodes[i], grid.nodes[j], params);
            let wij = grid.weights[i] * grid.weights[j];
            lx[(i, j)] = wij * gx;
            ly[(i, j)] = wij * gy;
        }
    }
    let load = -(&dzx * &lx * zy.transpose() + &zx * &ly * dzy.transpose());
    let rhs = DVector::from_fn(n, |r, _| load[(r / ky, r % ky)]);
    let chol = stiffness.cholesky().ok_or_else(|| Error::Solver {
        message: "steady stiffness matrix not positive definite".into(),
        residual: f64::NAN,
    })?;
    let sol = chol.solve(&rhs);

    let mut st = SteadyTemperature {
        boundary: boundary.clone(),
        params: params.clone(),
        modes,
        coeffs: sol.iter().copied().collect(),
        theta_lo,
        theta_hi,
        grid: grid.clone(),
        theta: Vec::new(),
        grad: Vec::new(),
    };
    st.tabulate()?;
    Ok(st)
}

impl SteadyTemperature {
    fn tabulate(&mut self) -> Result<()> {
        let q = self.grid.order;
        let mut theta = Vec::with_capacity(q * q);
        let mut grad = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                let (t, g) = self.eval_at(self.grid.nodes[i], self.grid.nodes[j])?;
                theta.push(t);
                grad.push(g);
            }
        }
        self.theta = theta;
        self.grad = grad;
        Ok(())
    }

    /// Kirchhoff variable and its gradient at an arbitrary point.
    pub fn kirchhoff_at(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (mut u, mut ux, mut uy) = self.boundary.lifting(x, y, &self.params);
        let (kx, ky) = self.modes;
        for k in 0..kx {
            let wk = (k + 1) as f64 * PI;
            let (sx, cx) = (wk * x).sin_cos();
            for l in 0..ky {
                let c = self.coeffs[k * ky + l];
                if c == 0.0 {
                    continue;
                }
                let wl = (l + 1) as f64 * PI;
                let (sy, cy) = (wl * y).sin_cos();
                u += c * sx * sy;
                ux += c * wk * cx * sy;
                uy += c * sx * wl * cy;
            }
        }
        (u, ux, uy)
    }

    /// θ̂ and ∇θ̂ = ∇u / κ(θ̂) at a point of the closed square.
    pub fn eval_at(&self, x: f64, y: f64) -> Result<(f64, [f64; 2])> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::Domain(format!("point ({x}, {y}) outside the unit square")));
        }
        let (u, ux, uy) = self.kirchhoff_at(x, y);
        let t = invert_G(u, &self.params)?;
        let k = self.params.kappa.eval(t);
        Ok((t, [ux / k, uy / k]))
    }

    /// Copy with `amp · sin(πx) sin(πy)` added to the Kirchhoff variable.
    pub fn perturbed(&self, amp: f64) -> Result<Self> {
        let mut st = self.clone();
        st.coeffs[0] += amp;
        st.tabulate()?;
        Ok(st)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    pub min: f64,
    pub max: f64,
    /// max over sine test functions of |∫ κ(θ̂) ∇θ̂ · ∇ζ|.
    pub weak_residual: f64,
    pub grad_l2: f64,
    pub within_bounds: bool,
}

pub fn verify_steady(st: &SteadyTemperature, params: &FluidParams) -> SteadyReport {
    let grid = &st.grid;
    let q = grid.order;
    let (kx, ky) = st.modes;
    let (zx, dzx) = sine_tables(kx, &grid.nodes);
    let (zy, dzy) = sine_tables(ky, &grid.nodes);
    let mut fx = DMatrix::zeros(q, q);
    let mut fy = DMatrix::zeros(q, q);
    let mut grad_sq = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            let idx = i * q + j;
            let k = params.kappa.eval(st.theta[idx]);
            let wij = grid.weights[i] * grid.weights[j];
            let [gx, gy] = st.grad[idx];
            fx[(i, j)] = wij * k * gx;
            fy[(i, j)] = wij * k * gy;
            grad_sq[idx] = gx * gx + gy * gy;
        }
    }
    let res = &dzx * &fx * zy.transpose() + &zx * &fy * dzy.transpose();
    let min = st.theta.iter().copied().fold(f64::INFINITY, f64::min);
    let max = st.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SteadyReport {
        min,
        max,
        weak_residual: res.iter().fold(0.0f64, |m, r| m.max(r.abs())),
        grad_l2: grid.integrate(&grad_sq).sqrt(),
        within_bounds: min >= st.theta_lo - 1e-8 && max <= st.theta_hi + 1e-8,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::ScalarLaw;
    use proptest::prelude::*;

    fn affine() -> FluidParams {
        FluidParams::new(2.0, 0.0, ScalarLaw::constant(1.0), ScalarLaw::Affine { base: 1.0, slope: 1.0 }).unwrap()
    }

    fn bisect(u: f64, p: &FluidParams) -> f64 {
        let (mut a, mut b) = (0.0, u / p.kappa_lo);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if p.kappa.primitive(m) < u {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn invert_g_examples() {
        let unit = FluidParams::newtonian(1.0, 1.0);
        assert_eq!(invert_G(2.0, &unit).unwrap(), 2.0);
        let p = affine();
        let g3 = p.kappa.primitive(3.0);
        assert!((invert_G(g3, &p).unwrap() - 3.0).abs() < 1e-14);
        let root = invert_G(4.0, &p).unwrap();
        assert!((root - bisect(4.0, &p)).abs() < 1e-13);
        assert!((root - 2.0).abs() < 1e-13);
        assert!(invert_G(-1.0, &p).is_err());
    }

    #[test]
    fn constant_boundary_gives_constant() {
        let p = FluidParams::newtonian(1.0, 1.0);
        let grid = QuadratureGrid::new(14);
        let st = solve_steady_temperature(&BoundaryData::Constant { value: 1.7 }, &p, (4, 4), &grid, (1.0, 2.0)).unwrap();
        let rep = verify_steady(&st, &p);
        assert!((rep.min - 1.7).abs() < 1e-14 && (rep.max - 1.7).abs() < 1e-14);
        assert!(rep.weak_residual < 1e-14);
    }

    #[test]
    fn linear_data_recovered() {
        let p = FluidParams::newtonian(1.0, 1.0);
        let grid = QuadratureGrid::new(26);
        let bd = BoundaryData::Harmonic { coeffs: vec![2.0, 1.0, -1.0] };
        let st = solve_steady_temperature(&bd, &p, (8, 8), &grid, (1.0, 3.0)).unwrap();
        let rep = verify_steady(&st, &p);
        assert!(rep.weak_residual <= 1e-10, "{rep:?}");
        for k in 0..grid.len() {
            let (x, y) = grid.point(k);
            assert!((st.theta[k] - (2.0 + x - y)).abs() < 1e-12);
        }
        assert!((rep.grad_l2 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bubble_perturbation_is_detected() {
        let p = FluidParams::newtonian(1.0, 1.0);
        let grid = QuadratureGrid::new(14);
        let st = solve_steady_temperature(&BoundaryData::Constant { value: 2.0 }, &p, (3, 3), &grid, (1.0, 3.0)).unwrap();
        let bad = st.perturbed(0.1).unwrap();
        let rep = verify_steady(&bad, &p);
        // ∫∇(0.1 ζ₁₁)·∇ζ₁₁ = 0.1 · π²/2.
        assert!((rep.weak_residual - 0.1 * PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_out_of_bounds_data() {
        let p = FluidParams::newtonian(1.0, 1.0);
        let grid = QuadratureGrid::new(12);
        let bd = BoundaryData::Bilinear { corners: [1.0, 2.0, 2.0, 4.0] };
        assert!(matches!(
            solve_steady_temperature(&bd, &p, (2, 2), &grid, (1.0, 3.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kirchhoff_oracle() {
        let p = affine();
        let grid = QuadratureGrid::new(QuadratureGrid::default_order(16));
        let coeffs = vec![3.0, 0.0, 0.0, 1.0, 0.5];
        let bd = BoundaryData::KirchhoffHarmonic { coeffs: coeffs.clone() };
        let st = solve_steady_temperature(&bd, &p, (16, 16), &grid, (1.0, 3.0)).unwrap();
        let mut err = vec![0.0; grid.len()];
        for (k, e) in err.iter_mut().enumerate() {
            let (x, y) = grid.point(k);
            let exact = (-1.0 + (1.0 + 2.0 * harmonic_poly(&coeffs, x, y).0).sqrt()).max(0.0);
            *e = (st.theta[k] - exact).powi(2);
        }
        assert!(grid.integrate(&err).sqrt() <= 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn maximum_principle_and_round_trip(
            c in proptest::array::uniform4(1.2f64..2.8),
            u in 0.01f64..40.0,
        ) {
            let p = FluidParams::new(2.0, 0.0, ScalarLaw::constant(1.0), ScalarLaw::Rational { base: 1.0, amp: 0.5 }).unwrap();
            let s = invert_G(u, &p).unwrap();
            prop_assert!((p.kappa.primitive(s) - u).abs() <= 1e-12 * u);
            let grid = QuadratureGrid::new(26);
            let bd = BoundaryData::Bilinear { corners: c };
            let st = solve_steady_temperature(&bd, &p, (8, 8), &grid, (1.0, 3.0)).unwrap();
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let rep = verify_steady(&st, &p);
            prop_assert!(rep.min >= lo - 1e-8 && rep.max <= hi + 1e-8, "{rep:?}");
            prop_assert!(rep.weak_residual < 1e-10);
        }
    }
}
