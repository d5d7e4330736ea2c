//! Benchmark problems with closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mesh::{create_lshape_mesh, create_unit_square_mesh, Mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem '{0}' (expected peak2d, corner2d, drift2d or sine2d)")]
    Unknown(String),
    #[error("drift strength must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("source term disagrees with the exact solution at ({x}, {y}): stored {stored}, finite difference {fd}")]
    SourceMismatch { x: f64, y: f64, stored: f64, fd: f64 },
}

/// `−Δu + β·∇u = f` in `Ω`, `u = u_exact` on `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    /// Unit square, solution with a sharp peak at `(0.5, 0.117)`.
    Peak,
    /// L-shaped domain `(−1, 1)² \ [0, 1]²`, `u = r^{2/3} sin((2θ + 5π)/3)`.
    Corner,
    /// Unit square with drift `(β, β)` and boundary layers at `x = 1`, `y = 1`.
    Drift { beta: f64 },
    /// Unit square, `u = sin(πx) sin(πy)`.
    Sine,
}

const PEAK_CENTRE: [f64; 2] = [0.5, 0.117];
const PEAK_DECAY: f64 = 100.0;

/// `g(t) = t(t−1) e^{−100 (t−c)²}` with first and second derivatives.
fn peak_factor(t: f64, c: f64) -> (f64, f64, f64) {
    let e = (-PEAK_DECAY * (t - c) * (t - c)).exp();
    let q = t * t - t;
    let dq = 2.0 * t - 1.0;
    let de = -2.0 * PEAK_DECAY * (t - c);
    let dde = -2.0 * PEAK_DECAY + de * de;
    (q * e, (dq + q * de) * e, (2.0 + 2.0 * dq * de + q * dde) * e)
}

/// Polar angle measured inside the L-shape, in `[π/2, 2π]`.
fn corner_angle(x: f64, y: f64) -> f64 {
    let theta = y.atan2(x);
    if theta < 0.5 * PI - 1e-12 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

impl Problem {
    pub fn drift(beta: f64) -> Result<Problem, ProblemError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ProblemError::InvalidBeta(beta));
        }
        Ok(Problem::Drift { beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Peak => "peak2d",
            Problem::Corner => "corner2d",
            Problem::Drift { .. } => "drift2d",
            Problem::Sine => "sine2d",
        }
    }

    pub fn beta(&self) -> [f64; 2] {
        match *self {
            Problem::Drift { beta } => [beta, beta],
            _ => [0.0, 0.0],
        }
    }

    pub fn exact(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match *self {
            Problem::Peak => peak_factor(x, PEAK_CENTRE[0]).0 * peak_factor(y, PEAK_CENTRE[1]).0,
            Problem::Corner => {
                let r = x.hypot(y);
                if r == 0.0 {
                    return 0.0;
                }
                r.powf(2.0 / 3.0) * ((2.0 * corner_angle(x, y) + 5.0 * PI) / 3.0).sin()
            }
            Problem::Drift { beta } => {
                // e^{βx}/(e^β − 1) written to stay finite for large β.
                let scaled = |t: f64| (beta * (t - 1.0)).exp() / (-(-beta).exp_m1());
                let tail = 1.0 / beta.exp_m1();
                x + y + tail - scaled(x) - scaled(y) + tail
            }
            Problem::Sine => (PI * x).sin() * (PI * y).sin(),
        }
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = p;
        match *self {
            Problem::Peak => {
                let (gx, dgx, _) = peak_factor(x, PEAK_CENTRE[0]);
                let (gy, dgy, _) = peak_factor(y, PEAK_CENTRE[1]);
                [dgx * gy, gx * dgy]
            }
            Problem::Corner => {
                let r = x.hypot(y);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let theta = corner_angle(x, y);
                let phi = (2.0 * theta + 5.0 * PI) / 3.0;
                let (s, c) = phi.sin_cos();
                let scale = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
                let (st, ct) = theta.sin_cos();
                [scale * (s * ct - c * st), scale * (s * st + c * ct)]
            }
            Problem::Drift { beta } => {
                let d = |t: f64| 1.0 - beta * (beta * (t - 1.0)).exp() / (-(-beta).exp_m1());
                [d(x), d(y)]
            }
            Problem::Sine => [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()],
        }
    }

    pub fn source(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match *self {
            Problem::Peak => {
                let (gx, _, ddgx) = peak_factor(x, PEAK_CENTRE[0]);
                let (gy, _, ddgy) = peak_factor(y, PEAK_CENTRE[1]);
                -(ddgx * gy + gx * ddgy)
            }
            Problem::Corner => 0.0,
            Problem::Drift { beta } => 2.0 * beta,
            Problem::Sine => 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
        }
    }

    pub fn initial_mesh(&self) -> Mesh {
        match self {
            Problem::Corner => create_lshape_mesh().refine_globally().refine_globally(),
            _ => create_unit_square_mesh(4).expect("nonzero subdivisions"),
        }
    }

    /// Points where the solution gradient is unbounded.
    pub fn singular_points(&self) -> Vec<[f64; 2]> {
        match self {
            Problem::Corner => vec![[0.0, 0.0]],
            _ => Vec::new(),
        }
    }

    /// Widest sub-square on which the data is well resolved by a 6-point rule.
    pub fn data_resolution(&self) -> f64 {
        match *self {
            Problem::Peak => 1.0 / 64.0,
            Problem::Drift { beta } => (0.5 / beta).min(0.25),
            Problem::Corner | Problem::Sine => 1.0,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x, y] = p;
        match self {
            Problem::Corner => (-1.0..=1.0).contains(&x) && (-1.0..=1.0).contains(&y) && !(x > 0.0 && y > 0.0),
            _ => (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y),
        }
    }

    fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match self {
            Problem::Corner => {
                let outer = (1.0 - x.abs()).min(1.0 - y.abs());
                // Reentrant edges: {0} × [0, 1] and [0, 1] × {0}.
                let vertical = if y >= 0.0 { x.abs() } else { x.hypot(y) };
                let horizontal = if x >= 0.0 { y.abs() } else { x.hypot(y) };
                outer.min(vertical).min(horizontal)
            }
            _ => x.min(y).min(1.0 - x).min(1.0 - y),
        }
    }

    /// Compares the stored source with a central-difference evaluation of
    /// `−Δu + β·∇u` at `count` interior points of a Halton sequence.
    pub fn check_source(&self, count: usize) -> Result<(), ProblemError> {
        const STEP: f64 = 1e-5;
        const MARGIN: f64 = 0.02;
        let (lo, size) = match self {
            Problem::Corner => (-1.0, 2.0),
            _ => (0.0, 1.0),
        };
        let beta = self.beta();
        let mut checked = 0;
        let mut k = 1u64;
        while checked < count {
            let p = [lo + size * halton(k, 2), lo + size * halton(k, 3)];
            k += 1;
            if !self.contains(p) || self.distance_to_boundary(p) < MARGIN {
                continue;
            }
            checked += 1;
            let u = |dx: f64, dy: f64| self.exact([p[0] + dx, p[1] + dy]);
            let centre = u(0.0, 0.0);
            let uxx = (u(STEP, 0.0) - 2.0 * centre + u(-STEP, 0.0)) / (STEP * STEP);
            let uyy = (u(0.0, STEP) - 2.0 * centre + u(0.0, -STEP)) / (STEP * STEP);
            let ux = (u(STEP, 0.0) - u(-STEP, 0.0)) / (2.0 * STEP);
            let uy = (u(0.0, STEP) - u(0.0, -STEP)) / (2.0 * STEP);
            let fd = -(uxx + uyy) + beta[0] * ux + beta[1] * uy;
            let stored = self.source(p);
            if (fd - stored).abs() > 1e-4 * (1.0 + stored.abs()) {
                return Err(ProblemError::SourceMismatch { x: p[0], y: p[1], stored, fd });
            }
        }
        Ok(())
    }
}

/// Radical inverse of `k` in the given base.
fn halton(mut k: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Drift { beta } => write!(f, "drift2d_beta{beta}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Problem {
    type Err = ProblemError;

    /// Parses a problem name; `drift2d` defaults to `β = 1`.
    fn from_str(s: &str) -> Result<Problem, ProblemError> {
        match s {
            "peak2d" => Ok(Problem::Peak),
            "corner2d" => Ok(Problem::Corner),
            "drift2d" => Ok(Problem::Drift { beta: 1.0 }),
            "sine2d" => Ok(Problem::Sine),
            other => Err(ProblemError::Unknown(other.to_string())),
        }
    }
}
