//! Iterative solvers and smoothers: Richardson, (Jacobi-preconditioned) CG,
//! restarted GMRES, and power-iteration spectral radius estimates.
//!
//! Every routine counts the matrix-vector products it performs in
//! [`SolveReport::matvecs`], including the initial residual.

use thiserror::Error;

use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: matrix is {rows}x{cols}, vector has length {len}")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
    #[error("breakdown at iteration {iteration}: search direction has curvature {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("GMRES stagnated: residual {residual:e} did not decrease over a full restart cycle")]
    Stagnation { residual: f64 },
    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e}, tolerance {tolerance:e})")]
    NotConverged { iterations: usize, residual: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    pub matvecs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    /// Exactly this many iterations, without a convergence test.
    FixedSteps(usize),
    /// Iterate until the l2 residual is at most `tolerance`.
    Tolerance { tolerance: f64, max_iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Identity,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonConfig {
    omega: f64,
    steps: usize,
}

impl RichardsonConfig {
    pub fn new(omega: f64, steps: usize) -> Result<Self, SolverError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("omega must be positive, got {omega}")));
        }
        if steps == 0 {
            return Err(SolverError::InvalidConfig("Richardson needs at least one step".into()));
        }
        Ok(RichardsonConfig { omega, steps })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

fn check_dims(a: &CsrMatrix, vectors: &[&[f64]]) -> Result<(), SolverError> {
    for v in vectors {
        if a.nrows() != a.ncols() || v.len() != a.nrows() {
            return Err(SolverError::DimensionMismatch { rows: a.nrows(), cols: a.ncols(), len: v.len() });
        }
    }
    Ok(())
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// `x <- x + ω (b - A x)`, repeated `steps` times. The reported residual is
/// that of the returned iterate.
pub fn richardson(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    config: RichardsonConfig,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    check_dims(a, &[b, x0])?;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; b.len()];
    for _ in 0..config.steps {
        residual(a, b, &x, &mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += config.omega * ri;
        }
    }
    residual(a, b, &x, &mut r);
    let report = SolveReport {
        iterations: config.steps,
        final_residual_norm: norm2(&r),
        converged: false,
        matvecs: config.steps + 1,
    };
    Ok((x, report))
}

/// Componentwise `r_i / A_ii`.
pub fn jacobi_apply(a: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>, SolverError> {
    check_dims(a, &[r])?;
    let inv = inverse_diagonal(a)?;
    Ok(r.iter().zip(&inv).map(|(ri, d)| ri * d).collect())
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>, SolverError> {
    a.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| if d == 0.0 { Err(SolverError::ZeroDiagonal(i)) } else { Ok(1.0 / d) })
        .collect()
}

fn preconditioner_diagonal(a: &CsrMatrix, p: Preconditioner) -> Result<Option<Vec<f64>>, SolverError> {
    match p {
        Preconditioner::Identity => Ok(None),
        Preconditioner::Jacobi => inverse_diagonal(a).map(Some),
    }
}

fn apply_diag(diag: &Option<Vec<f64>>, r: &[f64], z: &mut [f64]) {
    match diag {
        None => z.copy_from_slice(r),
        Some(d) => {
            for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                *zi = ri * di;
            }
        }
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
///
/// In tolerance mode the convergence test uses the true residual: when the
/// recursive residual drops below the tolerance, the true residual is
/// recomputed and the iteration restarts from it if needed.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    preconditioner: Preconditioner,
    mode: SolveMode,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    check_dims(a, &[b, x0])?;
    debug_assert!(a.asymmetry() <= 1e-10 * a.diagonal().iter().fold(1.0f64, |m, d| m.max(d.abs())));
    let diag = preconditioner_diagonal(a, preconditioner)?;
    let n = b.len();
    let (max_iter, tol) = match mode {
        SolveMode::FixedSteps(s) => (s, None),
        SolveMode::Tolerance { tolerance, max_iterations } => (max_iterations, Some(tolerance)),
    };
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    residual(a, b, &x, &mut r);
    let mut matvecs = 1;
    let mut res = norm2(&r);
    let mut iterations = 0;
    let mut restarts = 0;

    'outer: loop {
        if tol.is_some_and(|t| res <= t) || res == 0.0 || iterations >= max_iter {
            break;
        }
        apply_diag(&diag, &r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            a.matvec_into(&p, &mut q);
            matvecs += 1;
            let curvature = dot(&p, &q);
            if !(curvature > 0.0) {
                return Err(SolverError::Breakdown { iteration: iterations, curvature });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            iterations += 1;
            res = norm2(&r);
            if res == 0.0 {
                break 'outer;
            }
            if let Some(t) = tol {
                if res <= t {
                    residual(a, b, &x, &mut r);
                    matvecs += 1;
                    res = norm2(&r);
                    restarts += 1;
                    if res <= t || restarts > 20 {
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            apply_diag(&diag, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        break;
    }
    let converged = tol.map_or(res == 0.0, |t| res <= t);
    Ok((x, SolveReport { iterations, final_residual_norm: res, converged, matvecs }))
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if a == 0.0 {
        (0.0, b.signum())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Restarted GMRES(m) with optional right Jacobi preconditioning, so the
/// monitored residual is the true residual of the unpreconditioned system.
/// In fixed-steps mode the step count is the total number of Krylov steps
/// across restarts.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    restart: usize,
    preconditioner: Preconditioner,
    mode: SolveMode,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    check_dims(a, &[b, x0])?;
    if restart == 0 {
        return Err(SolverError::InvalidConfig("GMRES restart length must be positive".into()));
    }
    let diag = preconditioner_diagonal(a, preconditioner)?;
    let n = b.len();
    let (max_steps, tol) = match mode {
        SolveMode::FixedSteps(s) => (s, None),
        SolveMode::Tolerance { tolerance, max_iterations } => (max_iterations, Some(tolerance)),
    };
    let m = restart;
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut matvecs = 0;
    let mut steps = 0;
    let mut res;

    loop {
        residual(a, b, &x, &mut r);
        matvecs += 1;
        let beta = norm2(&r);
        res = beta;
        if tol.is_some_and(|t| beta <= t) || beta == 0.0 || steps >= max_steps {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        let mut happy = false;
        while k < m && steps < max_steps {
            apply_diag(&diag, &basis[k], &mut z);
            a.matvec_into(&z, &mut w);
            matvecs += 1;
            let w_norm_before = norm2(&w);
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hik * vj;
                }
            }
            let next = norm2(&w);
            h[k + 1][k] = next;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            cs[k] = c;
            sn[k] = s;
            h[k][k] = c * h[k][k] + s * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            k += 1;
            steps += 1;
            res = g[k].abs();
            if next <= 1e-14 * w_norm_before.max(f64::MIN_POSITIVE) {
                happy = true;
                break;
            }
            basis.push(w.iter().map(|v| v / next).collect());
            if tol.is_some_and(|t| res <= t) {
                break;
            }
        }
        // Back substitution on the k x k triangular system.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[i][j] * y[j];
            }
            if h[i][i] == 0.0 {
                return Err(SolverError::Breakdown { iteration: steps, curvature: 0.0 });
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (v, yi) in basis.iter().zip(&y) {
            for (u, vj) in update.iter_mut().zip(v) {
                *u += yi * vj;
            }
        }
        apply_diag(&diag, &update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if happy || tol.is_none() && steps >= max_steps {
            break;
        }
        if let Some(t) = tol {
            if res > t && k == m && res >= beta * (1.0 - 1e-12) {
                return Err(SolverError::Stagnation { residual: res });
            }
        }
    }
    let converged = tol.map_or(res == 0.0, |t| res <= t);
    Ok((x, SolveReport { iterations: steps, final_residual_norm: res, converged, matvecs }))
}

/// Deterministic start vector with nonzero components in every direction.
fn seed_vector(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
            0.5 + (h as f64) / (1u64 << 53) as f64
        })
        .collect()
}

/// Rayleigh-quotient estimate of the dominant eigenvalue after
/// `power_iterations` steps of the power method. Returns 0 for a matrix
/// that annihilates the start vector.
pub fn estimate_spectral_radius(a: &CsrMatrix, power_iterations: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = seed_vector(n);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..power_iterations.max(1) {
        a.matvec_into(&v, &mut w);
        lambda = dot(&v, &w) / dot(&v, &v);
        let norm = norm2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lambda.abs()
}

/// Power iterations used to choose the Richardson weight.
pub const OMEGA_POWER_ITERATIONS: usize = 20;

/// `ω = 1 / (safety · ρ̂(A))`.
pub fn richardson_omega(a: &CsrMatrix, safety: f64) -> Result<f64, SolverError> {
    let rho = estimate_spectral_radius(a, OMEGA_POWER_ITERATIONS);
    if !(rho > 0.0) {
        return Err(SolverError::InvalidConfig("spectral radius estimate is zero".into()));
    }
    Ok(1.0 / (safety * rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CsrMatrix {
        CsrMatrix::diagonal_matrix(d)
    }

    #[test]
    fn richardson_scalar() {
        let a = diag(&[2.0]);
        let (x, rep) = richardson(&a, &[2.0], &[0.0], RichardsonConfig::new(0.5, 1).unwrap()).unwrap();
        assert_eq!(x, vec![1.0]);
        assert_eq!(rep.final_residual_norm, 0.0);
        assert_eq!(rep.matvecs, 2);
    }

    #[test]
    fn richardson_damps_top_of_spectrum() {
        let a = diag(&[1.0, 3.0]);
        let cfg = RichardsonConfig::new(1.0 / 3.0, 1).unwrap();
        let (x, _) = richardson(&a, &[1.0, 3.0], &[0.0, 0.0], cfg).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0).abs() < 1e-15);
        assert!((1.0 - x[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn richardson_rejects_bad_config() {
        assert!(RichardsonConfig::new(0.0, 1).is_err());
        assert!(RichardsonConfig::new(1.0, 0).is_err());
        let a = diag(&[1.0, 2.0]);
        let err = richardson(&a, &[1.0], &[0.0, 0.0], RichardsonConfig::new(1.0, 1).unwrap()).unwrap_err();
        assert!(matches!(err, SolverError::DimensionMismatch { .. }));
    }

    #[test]
    fn cg_small() {
        let a = diag(&[1.0, 2.0]);
        let (x, rep) = cg(&a, &[1.0, 2.0], &[0.0, 0.0], Preconditioner::Identity, SolveMode::FixedSteps(1)).unwrap();
        assert!((x[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!((x[1] - 10.0 / 9.0).abs() < 1e-15);
        assert_eq!(rep.iterations, 1);
        let (x, _) = cg(&a, &[1.0, 2.0], &[0.0, 0.0], Preconditioner::Identity, SolveMode::FixedSteps(2)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cg_reports_breakdown() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let err = cg(&a, &[1.0, 1.0], &[0.0, 0.0], Preconditioner::Identity, SolveMode::FixedSteps(2)).unwrap_err();
        assert!(matches!(err, SolverError::Breakdown { .. }));
    }

    #[test]
    fn gmres_small() {
        let a = diag(&[3.0]);
        let (x, rep) = gmres(&a, &[6.0], &[0.0], 30, Preconditioner::Identity, SolveMode::FixedSteps(1)).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15);
        assert_eq!(rep.iterations, 1);
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let (x, _) =
            gmres(&a, &[1.0, 1.0], &[0.0, 0.0], 30, Preconditioner::Identity, SolveMode::FixedSteps(2)).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gmres_detects_stagnation() {
        // Cyclic shift: GMRES(1) makes no progress from x0 = 0 with b = e_1.
        let a = CsrMatrix::from_dense(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let mode = SolveMode::Tolerance { tolerance: 1e-12, max_iterations: 100 };
        let err = gmres(&a, &[1.0, 0.0, 0.0], &[0.0; 3], 1, Preconditioner::Identity, mode).unwrap_err();
        assert!(matches!(err, SolverError::Stagnation { .. }));
    }

    #[test]
    fn spectral_radius() {
        assert!((estimate_spectral_radius(&diag(&[1.0, 3.0]), 50) - 3.0).abs() < 1e-8);
        assert_eq!(estimate_spectral_radius(&CsrMatrix::identity(7), 20), 1.0);
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((estimate_spectral_radius(&a, 50) - 3.0).abs() < 1e-8);
        assert_eq!(estimate_spectral_radius(&diag(&[0.0, 0.0]), 10), 0.0);
        assert!(richardson_omega(&diag(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn jacobi() {
        assert_eq!(jacobi_apply(&diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(jacobi_apply(&CsrMatrix::identity(2), &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(jacobi_apply(&diag(&[1.0, 0.0]), &[1.0, 1.0]).unwrap_err(), SolverError::ZeroDiagonal(1));
    }
}
