//! Deterministic families of space and time test functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `φ(x, y) = c · x^{a}(1−x)^{b} · y^{c}(1−y)^{d}` scaled to unit maximum.
/// Exponents ≥ 2 make φ vanish on ∂Ω together with its gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceBump {
    pub x_exp: (i32, i32),
    pub y_exp: (i32, i32),
}

fn profile(e: (i32, i32), x: f64) -> (f64, f64) {
    let (a, b) = e;
    let (af, bf) = (a as f64, b as f64);
    let peak_at = af / (af + bf);
    let scale = 1.0 / (peak_at.powi(a) * (1.0 - peak_at).powi(b));
    let value = x.powi(a) * (1.0 - x).powi(b);
    let slope = af * x.powi(a - 1) * (1.0 - x).powi(b) - bf * x.powi(a) * (1.0 - x).powi(b - 1);
    (scale * value, scale * slope)
}

impl SpaceBump {
    pub fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (px, dpx) = profile(self.x_exp, x);
        let (py, dpy) = profile(self.y_exp, y);
        (px * py, [dpx * py, px * dpy])
    }

    pub fn label(&self) -> String {
        format!(
            "bump[{},{};{},{}]",
            self.x_exp.0, self.x_exp.1, self.y_exp.0, self.y_exp.1
        )
    }
}

/// Six boundary-vanishing bumps: centred, shifted in x, shifted in y and
/// diagonal.
pub fn space_bumps() -> Vec<SpaceBump> {
    let c = (2, 2);
    let left = (2, 3);
    let right = (3, 2);
    vec![
        SpaceBump { x_exp: c, y_exp: c },
        SpaceBump { x_exp: left, y_exp: c },
        SpaceBump { x_exp: right, y_exp: c },
        SpaceBump { x_exp: c, y_exp: left },
        SpaceBump { x_exp: c, y_exp: right },
        SpaceBump { x_exp: right, y_exp: left },
    ]
}

/// `φ = 1 − s · 16 x(1−x) y(1−y)`: equal to one on ∂Ω and nonnegative for
/// `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryWeight {
    pub depth: f64,
}

impl BoundaryWeight {
    pub fn eval(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let s = 16.0 * self.depth;
        let (gx, gy) = (x * (1.0 - x), y * (1.0 - y));
        (1.0 - s * gx * gy, [-s * (1.0 - 2.0 * x) * gy, -s * gx * (1.0 - 2.0 * y)])
    }

    pub fn label(&self) -> String {
        format!("weight[{}]", self.depth)
    }
}

pub fn boundary_one_weights() -> Vec<BoundaryWeight> {
    [0.0, 0.5, 0.9].into_iter().map(|depth| BoundaryWeight { depth }).collect()
}

/// Piecewise-linear hat on snapshot indices `lo < mid < hi`, zero at `lo`
/// and `hi`, one at `mid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeHat {
    pub lo: usize,
    pub mid: usize,
    pub hi: usize,
}

impl TimeHat {
    pub fn value(&self, times: &[f64], k: usize) -> f64 {
        if k <= self.lo || k >= self.hi {
            0.0
        } else if k <= self.mid {
            (times[k] - times[self.lo]) / (times[self.mid] - times[self.lo])
        } else {
            (times[self.hi] - times[k]) / (times[self.hi] - times[self.mid])
        }
    }

    /// Constant derivative on the interval `[t_k, t_{k+1}]`.
    pub fn slope(&self, times: &[f64], k: usize) -> f64 {
        if k < self.lo || k >= self.hi {
            0.0
        } else if k < self.mid {
            1.0 / (times[self.mid] - times[self.lo])
        } else {
            -1.0 / (times[self.hi] - times[self.mid])
        }
    }

    pub fn label(&self, times: &[f64]) -> String {
        format!("hat[{:.6},{:.6},{:.6}]", times[self.lo], times[self.mid], times[self.hi])
    }
}

/// `count` hats on `count + 1` equal segments of the snapshot index range,
/// each supported on two neighbouring segments.
pub fn time_hats(n_snapshots: usize, count: usize) -> Result<Vec<TimeHat>> {
    let segments = count + 1;
    if count == 0 || n_snapshots < 2 * segments + 1 {
        return Err(Error::Contract(format!(
            "{count} time hats need at least {} snapshots, got {n_snapshots}",
            2 * segments + 1
        )));
    }
    let last = n_snapshots - 1;
    let node = |k: usize| (k * last + segments / 2) / segments;
    Ok((1..=count)
        .map(|j| TimeHat {
            lo: node(j - 1),
            mid: node(j),
            hi: node(j + 1),
        })
        .collect())
}

/// Grid table `(φ, ∂_xφ, ∂_yφ)` of a test function.
pub(crate) fn tabulate(nodes: &[f64], f: impl Fn(f64, f64) -> (f64, [f64; 2])) -> [DMatrix<f64>; 3] {
    let q = nodes.len();
    let mut out = [DMatrix::zeros(q, q), DMatrix::zeros(q, q), DMatrix::zeros(q, q)];
    for i in 0..q {
        for j in 0..q {
            let (v, g) = f(nodes[i], nodes[j]);
            out[0][(i, j)] = v;
            out[1][(i, j)] = g[0];
            out[2][(i, j)] = g[1];
        }
    }
    out
}
