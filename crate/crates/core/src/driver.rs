//! The adaptive loop: solve (or prolong and smooth), estimate, mark, refine.
//!
//! Two kinds of coefficient vectors appear here. *Algebraic* vectors are
//! iterates of the condensed system, with constrained entries equal to the
//! constraint inhomogeneities. *Function* vectors have every hanging entry
//! resolved from its masters and represent the finite element function.
//! `distribute` maps the former to the latter and `set_inhomogeneities`
//! maps back.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_system_with, gauss_rule, AssemblyError, DataQuadrature, LinearSystem, RuleCache};
use crate::estimate::{jump_estimator, EstimateError, EstimatorResult, MarkingConfig};
use crate::fespace::{reference_basis, ConstraintSet, FeSpace, SpaceError};
use crate::mesh::{Mesh, MeshError};
use crate::problems::{Problem, ProblemError};
use crate::solvers::{
    cg, gmres, richardson, richardson_omega, Preconditioner, RichardsonConfig, SolveMode, SolveReport, SolverError,
    OMEGA_POWER_ITERATIONS,
};
use crate::sparse::{norm2, CsrMatrix};
use crate::transfer::{Prolongation, TransferError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("cycle {cycle}: {source}")]
    Solver { cycle: usize, source: SolverError },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("cycle {0}: marking selected no cells before the last cycle")]
    EmptyMarking(usize),
    #[error("observer failed: {0}")]
    Observer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Afem,
    Safem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoother {
    Richardson,
    Cg,
    Gmres,
}

macro_rules! name_enum {
    ($ty:ident { $($variant:ident => $name:literal),* }) => {
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    other => Err(format!("unknown {} '{other}'", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

name_enum!(Mode { Afem => "afem", Safem => "safem" });
name_enum!(Smoother { Richardson => "richardson", Cg => "cg", Gmres => "gmres" });

/// Restart length of GMRES when used as a smoother.
pub const GMRES_SMOOTHING_RESTART: usize = 30;
/// Restart length of GMRES for tight solves.
pub const GMRES_SOLVE_RESTART: usize = 50;
/// Points per direction of the rule used for sources and error norms.
pub const DATA_QUADRATURE_POINTS: usize = 6;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub degree: usize,
    pub cycles: usize,
    pub mode: Mode,
    pub smoother: Smoother,
    pub smoothing_steps: usize,
    pub marking: MarkingConfig,
    /// Absolute l2 residual target of every tight solve.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Also solve every intermediate cycle tightly, for reporting only.
    pub diagnostic: bool,
    /// Override of the problem's initial mesh.
    pub initial_mesh: Option<Arc<Mesh>>,
}

/// Dörfler for degree 1, the largest third of the cells otherwise.
pub fn default_marking(degree: usize) -> MarkingConfig {
    if degree <= 1 {
        MarkingConfig::Dorfler { theta: 0.3 }
    } else {
        MarkingConfig::FixedFraction { fraction: 1.0 / 3.0 }
    }
}

impl RunConfig {
    pub fn new(problem: Problem, degree: usize) -> RunConfig {
        RunConfig {
            problem,
            degree,
            cycles: 10,
            mode: Mode::Afem,
            smoother: if problem.beta() == [0.0, 0.0] { Smoother::Richardson } else { Smoother::Gmres },
            smoothing_steps: 3,
            marking: default_marking(degree),
            tolerance: 1e-12,
            max_iterations: 200_000,
            diagnostic: false,
            initial_mesh: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode, smoother: Smoother, steps: usize) -> RunConfig {
        self.mode = mode;
        self.smoother = smoother;
        self.smoothing_steps = steps;
        self
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        if !(1..=3).contains(&self.degree) {
            return bad(format!("degree must be 1, 2 or 3, got {}", self.degree));
        }
        if self.cycles < 2 {
            return bad(format!("at least 2 cycles are needed, got {}", self.cycles));
        }
        if self.mode == Mode::Safem && self.smoothing_steps == 0 {
            return bad("safem needs at least one smoothing step".into());
        }
        if self.smoother == Smoother::Cg && self.problem.beta() != [0.0, 0.0] {
            return bad("the CG smoother needs a symmetric problem (beta = 0)".into());
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        self.marking.validate()?;
        Ok(())
    }

    fn data_quadrature(&self) -> DataQuadrature {
        DataQuadrature::new(DATA_QUADRATURE_POINTS, self.problem.data_resolution(), self.problem.singular_points())
            .expect("valid point count")
    }
}

/// One row of the per-cycle report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub n_cells: usize,
    pub n_dofs: usize,
    pub mode: Mode,
    pub smoother: Smoother,
    pub smoothing_steps: usize,
    pub error_h1: f64,
    #[serde(rename = "estimator_J")]
    pub estimator_j: f64,
    #[serde(rename = "estimator_J_exact")]
    pub estimator_j_exact: Option<f64>,
    pub solver_iterations: usize,
    pub matvec_count: usize,
    pub solve_seconds: f64,
    pub marked_cells: usize,
}

/// Extra quantities of a smoothed cycle, available in diagnostic mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDiagnostics {
    pub cycle: usize,
    /// `J(u_h)` for the tightly solved discrete solution.
    pub estimator_exact: f64,
    /// `|u − u_h|₁`
    pub error_exact: f64,
    /// `|u − u_h^ℓ|₁`
    pub error_smoothed: f64,
    /// `|u_h − u_h^ℓ|₁`
    pub algebraic_error: f64,
    /// `‖e^ℓ − M^ℓ (a + I e_prev)‖₂ / ‖f‖₂` for Richardson smoothing, where
    /// `M = Id − ωA`, `a = u_h − I u_{h,prev}` and `e` are algebraic errors.
    pub propagation_defect: Option<f64>,
    pub omega: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<CycleRecord>,
    pub diagnostics: Vec<CycleDiagnostics>,
    pub space: FeSpace,
    /// Function vector of the final approximation.
    pub solution: Vec<f64>,
}

/// State handed to an observer after each cycle has been estimated and marked.
pub struct CycleSnapshot<'a> {
    pub record: &'a CycleRecord,
    pub space: &'a FeSpace,
    pub solution: &'a [f64],
    pub estimator: &'a EstimatorResult,
    pub marked: &'a [usize],
}

/// `|u − u_h|₁` for the function vector `u_h`.
pub fn error_h1(space: &FeSpace, u_h: &[f64], gradient: &dyn Fn([f64; 2]) -> [f64; 2], data: &DataQuadrature) -> f64 {
    let mesh = space.mesh();
    let mut cache = RuleCache::new(space.degree());
    let mut total = 0.0;
    for &cell in mesh.active_cells() {
        let h = mesh.cell_size(cell);
        let lo = mesh.cell_origin(cell);
        let (rule, table) = cache.get(data, lo, h);
        let dofs = space.cell_dofs(cell);
        for (q, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let mut g = [0.0; 2];
            for (k, &d) in dofs.iter().enumerate() {
                g[0] += u_h[d] * table.grads[q][k][0];
                g[1] += u_h[d] * table.grads[q][k][1];
            }
            let exact = gradient([lo[0] + xi[0] * h, lo[1] + xi[1] * h]);
            let dx = exact[0] - g[0] / h;
            let dy = exact[1] - g[1] / h;
            total += w * h * h * (dx * dx + dy * dy);
        }
    }
    total.sqrt()
}

/// `|v|₁` of a function vector, integrated exactly.
pub fn seminorm_h1(space: &FeSpace, v: &[f64]) -> f64 {
    let quad = gauss_rule(space.degree() + 1).expect("degree at most 3");
    let tables: Vec<_> = quad.points.iter().map(|&p| reference_basis(space.degree(), p).1).collect();
    let mut total = 0.0;
    for &cell in space.mesh().active_cells() {
        let dofs = space.cell_dofs(cell);
        // Gradients scale by 1/h and the area by h², so h cancels.
        for (grads, w) in tables.iter().zip(&quad.weights) {
            let mut g = [0.0; 2];
            for (k, &d) in dofs.iter().enumerate() {
                g[0] += v[d] * grads[k][0];
                g[1] += v[d] * grads[k][1];
            }
            total += w * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    total.sqrt()
}

/// Everything that depends only on the mesh of one cycle.
struct Level {
    space: FeSpace,
    constraints: ConstraintSet,
    system: LinearSystem,
}

impl Level {
    fn new(config: &RunConfig, mesh: Arc<Mesh>, data: &DataQuadrature) -> Result<Level, DriverError> {
        let problem = config.problem;
        let space = FeSpace::new(mesh, config.degree)?;
        let constraints = ConstraintSet::new(&space, |p| problem.exact(p));
        let system = assemble_system_with(&space, &constraints, problem.beta(), &|p| problem.source(p), data)?;
        Ok(Level { space, constraints, system })
    }

    fn function(&self, algebraic: &[f64]) -> Vec<f64> {
        let mut u = algebraic.to_vec();
        self.constraints.distribute(&mut u);
        u
    }

    fn algebraic(&self, function: Vec<f64>) -> Vec<f64> {
        let mut u = function;
        self.constraints.set_inhomogeneities(&mut u);
        u
    }
}

fn tight_solve(
    config: &RunConfig,
    level: &Level,
    x0: &[f64],
    cycle: usize,
) -> Result<(Vec<f64>, SolveReport), DriverError> {
    let a = &level.system.matrix;
    let b = &level.system.rhs;
    let mode = SolveMode::Tolerance { tolerance: config.tolerance, max_iterations: config.max_iterations };
    let result = if config.problem.beta() == [0.0, 0.0] {
        cg(a, b, x0, Preconditioner::Jacobi, mode)
    } else {
        gmres(a, b, x0, GMRES_SOLVE_RESTART, Preconditioner::Jacobi, mode)
    };
    let (x, report) = result.map_err(|source| DriverError::Solver { cycle, source })?;
    if !report.converged {
        return Err(DriverError::Solver {
            cycle,
            source: SolverError::NotConverged {
                iterations: report.iterations,
                residual: report.final_residual_norm,
                tolerance: config.tolerance,
            },
        });
    }
    Ok((x, report))
}

/// Fixed-count smoothing from `x0`. Returns the iterate, the solver report
/// (matvecs include the spectral estimate for Richardson) and ω if used.
fn smooth(
    config: &RunConfig,
    level: &Level,
    x0: &[f64],
    steps: usize,
    cycle: usize,
) -> Result<(Vec<f64>, SolveReport, Option<f64>), DriverError> {
    let a = &level.system.matrix;
    let b = &level.system.rhs;
    let wrap = |source| DriverError::Solver { cycle, source };
    match config.smoother {
        Smoother::Richardson => {
            let omega = richardson_omega(a, 1.0).map_err(wrap)?;
            let (x, mut report) =
                richardson(a, b, x0, RichardsonConfig::new(omega, steps).map_err(wrap)?).map_err(wrap)?;
            report.matvecs += OMEGA_POWER_ITERATIONS;
            Ok((x, report, Some(omega)))
        }
        Smoother::Cg => {
            let (x, report) = cg(a, b, x0, Preconditioner::Identity, SolveMode::FixedSteps(steps)).map_err(wrap)?;
            Ok((x, report, None))
        }
        Smoother::Gmres => {
            let (x, report) =
                gmres(a, b, x0, GMRES_SMOOTHING_RESTART, Preconditioner::Identity, SolveMode::FixedSteps(steps))
                    .map_err(wrap)?;
            Ok((x, report, None))
        }
    }
}

/// `(Id − ωA)^steps v`
fn propagate(a: &CsrMatrix, omega: f64, steps: usize, v: &[f64]) -> Vec<f64> {
    let mut e = v.to_vec();
    let mut ae = vec![0.0; e.len()];
    for _ in 0..steps {
        a.matvec_into(&e, &mut ae);
        for (ei, ai) in e.iter_mut().zip(&ae) {
            *ei -= omega * ai;
        }
    }
    e
}

fn subtract(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn run(config: &RunConfig) -> Result<RunResult, DriverError> {
    run_with_observer(config, |_| Ok(()))
}

pub fn run_with_observer(
    config: &RunConfig,
    mut observer: impl FnMut(&CycleSnapshot<'_>) -> Result<(), String>,
) -> Result<RunResult, DriverError> {
    config.validate()?;
    let problem = config.problem;
    let data = config.data_quadrature();
    let edge_quad = crate::assembly::gauss_rule_1d(config.degree + 1)?;
    let mesh = config.initial_mesh.clone().unwrap_or_else(|| Arc::new(problem.initial_mesh()));

    let mut records = Vec::with_capacity(config.cycles);
    let mut diagnostics = Vec::new();
    let mut level = Level::new(config, mesh, &data)?;
    // Previous level, its final algebraic iterate and, when known, its
    // tightly solved algebraic solution.
    let mut previous: Option<(Level, Vec<f64>, Option<Vec<f64>>)> = None;

    for cycle in 1..=config.cycles {
        let first = cycle == 1;
        let last = cycle == config.cycles;
        let tight = first || last || config.mode == Mode::Afem;

        let prolongation = match &previous {
            Some((prev, _, _)) => Some(Prolongation::new(&prev.space, &level.space)?),
            None => None,
        };
        // Initial guess: the previous approximation carried to this mesh.
        let x0 = match (&previous, &prolongation) {
            (Some((prev, x_prev, _)), Some(p)) => level.algebraic(p.prolong(&prev.function(x_prev))?),
            _ => level.algebraic(vec![0.0; level.space.dof_count()]),
        };

        let start = Instant::now();
        let (x, report, omega) = if tight {
            let (x, report) = tight_solve(config, &level, &x0, cycle)?;
            (x, report, None)
        } else {
            smooth(config, &level, &x0, config.smoothing_steps, cycle)?
        };
        let solve_seconds = start.elapsed().as_secs_f64();

        let u = level.function(&x);
        let estimator = jump_estimator(&level.space, &u, &edge_quad)?;
        let error = error_h1(&level.space, &u, &|p| problem.gradient(p), &data);

        let mut exact_solution = tight.then(|| x.clone());
        let mut estimator_exact = None;
        if config.diagnostic && !tight {
            let (x_exact, _) = tight_solve(config, &level, &x0, cycle)?;
            let u_exact = level.function(&x_exact);
            let j_exact = jump_estimator(&level.space, &u_exact, &edge_quad)?.global;
            estimator_exact = Some(j_exact);

            let propagation_defect = match (omega, &previous, &prolongation) {
                (Some(omega), Some((prev, x_prev, Some(exact_prev))), Some(p)) => {
                    let a_vec = subtract(&x_exact, &level.algebraic(p.prolong(&prev.function(exact_prev))?));
                    let mut e_prev = subtract(exact_prev, x_prev);
                    prev.constraints.zero_constrained(&mut e_prev);
                    let mut lifted = e_prev;
                    // Homogeneous distribution: masters only, no inhomogeneity.
                    distribute_homogeneous(&prev.constraints, &mut lifted);
                    let mut carried = p.prolong(&lifted)?;
                    level.constraints.zero_constrained(&mut carried);
                    let start: Vec<f64> = a_vec.iter().zip(&carried).map(|(a, c)| a + c).collect();
                    let predicted = propagate(&level.system.matrix, omega, config.smoothing_steps, &start);
                    let actual = subtract(&x_exact, &x);
                    Some(norm2(&subtract(&actual, &predicted)) / norm2(&level.system.rhs))
                }
                _ => None,
            };
            diagnostics.push(CycleDiagnostics {
                cycle,
                estimator_exact: j_exact,
                error_exact: error_h1(&level.space, &u_exact, &|p| problem.gradient(p), &data),
                error_smoothed: error,
                algebraic_error: seminorm_h1(&level.space, &subtract(&u_exact, &u)),
                propagation_defect,
                omega,
            });
            exact_solution = Some(x_exact);
        }

        let marked = if last {
            Vec::new()
        } else {
            let marked = config.marking.mark(&estimator)?;
            if marked.is_empty() {
                return Err(DriverError::EmptyMarking(cycle));
            }
            marked
        };

        let record = CycleRecord {
            cycle,
            n_cells: level.space.mesh().active_cell_count(),
            n_dofs: level.space.dof_count(),
            mode: config.mode,
            smoother: config.smoother,
            smoothing_steps: if config.mode == Mode::Safem { config.smoothing_steps } else { 0 },
            error_h1: error,
            estimator_j: estimator.global,
            estimator_j_exact: if tight && config.diagnostic { Some(estimator.global) } else { estimator_exact },
            solver_iterations: report.iterations,
            matvec_count: report.matvecs,
            solve_seconds,
            marked_cells: marked.len(),
        };
        observer(&CycleSnapshot {
            record: &record,
            space: &level.space,
            solution: &u,
            estimator: &estimator,
            marked: &marked,
        })
        .map_err(DriverError::Observer)?;
        records.push(record);

        if last {
            return Ok(RunResult { records, diagnostics, space: level.space, solution: u });
        }
        let fine_mesh = Arc::new(level.space.mesh().refine(&marked)?);
        let next = Level::new(config, fine_mesh, &data)?;
        previous = Some((std::mem::replace(&mut level, next), x, exact_solution));
    }
    unreachable!("the last cycle returns")
}

/// Hanging entries from their masters, Dirichlet entries set to zero.
fn distribute_homogeneous(constraints: &ConstraintSet, u: &mut [f64]) {
    for dof in 0..u.len() {
        if let Some(c) = constraints.get(dof) {
            u[dof] = c.masters.iter().map(|&(m, w)| w * u[m]).sum();
        }
    }
}

/// One point of a stagnation study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StagnationPoint {
    pub steps: usize,
    pub residual_norm: f64,
    #[serde(rename = "estimator_J")]
    pub estimator_j: f64,
}

/// Runs tightly solved cycles up to `cycle − 1`, then applies
/// `1..=max_steps` smoothing steps on the mesh of `cycle` starting from the
/// prolonged previous solution, recording the residual and `J` after each.
pub fn stagnation(config: &RunConfig, cycle: usize, max_steps: usize) -> Result<Vec<StagnationPoint>, DriverError> {
    if cycle < 2 {
        return Err(DriverError::Config(format!("stagnation needs cycle >= 2, got {cycle}")));
    }
    if max_steps == 0 {
        return Err(DriverError::Config("max-steps must be positive".into()));
    }
    let mut runner = config.clone();
    runner.mode = Mode::Afem;
    runner.cycles = cycle;
    runner.diagnostic = false;
    let mut coarse = None;
    let mut marked = Vec::new();
    let outcome = run_with_observer(&runner, |snap| {
        if snap.record.cycle == cycle - 1 {
            coarse = Some((snap.space.clone(), snap.solution.to_vec()));
            marked = snap.marked.to_vec();
            return Err(STOP.into());
        }
        Ok(())
    });
    match outcome {
        Err(DriverError::Observer(m)) if m == STOP => {}
        Err(other) => return Err(other),
        Ok(_) => unreachable!("the observer stops the run"),
    }
    let (coarse_space, coarse_u) = coarse.ok_or_else(|| DriverError::Config("coarse cycle missing".into()))?;

    let data = config.data_quadrature();
    let edge_quad = crate::assembly::gauss_rule_1d(config.degree + 1)?;
    let fine_mesh = Arc::new(coarse_space.mesh().refine(&marked)?);
    let level = Level::new(config, fine_mesh, &data)?;
    let p = Prolongation::new(&coarse_space, &level.space)?;
    let mut x = level.algebraic(p.prolong(&coarse_u)?);
    let mut points = Vec::with_capacity(max_steps);
    for steps in 1..=max_steps {
        let (next, report, _) = smooth(config, &level, &x, 1, cycle)?;
        x = next;
        let estimator = jump_estimator(&level.space, &level.function(&x), &edge_quad)?;
        points.push(StagnationPoint {
            steps,
            residual_norm: report.final_residual_norm,
            estimator_j: estimator.global,
        });
    }
    Ok(points)
}

const STOP: &str = "stop";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::create_unit_square_mesh;

    #[test]
    fn error_of_reproduced_linear_is_zero() {
        let space = FeSpace::new(Arc::new(create_unit_square_mesh(2).unwrap()), 1).unwrap();
        let u = space.interpolate(|p| p[0]);
        let data = DataQuadrature::new(6, 1.0, vec![]).unwrap();
        assert!(error_h1(&space, &u, &|_| [1.0, 0.0], &data) < 1e-12);
    }

    #[test]
    fn error_of_bilinear_interpolant_of_square() {
        let space = FeSpace::new(Arc::new(create_unit_square_mesh(1).unwrap()), 1).unwrap();
        let u = space.interpolate(|p| p[0] * p[0]);
        let data = DataQuadrature::new(6, 1.0, vec![]).unwrap();
        let e = error_h1(&space, &u, &|p| [2.0 * p[0], 0.0], &data);
        assert!((e - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn seminorm_of_linear() {
        let space = FeSpace::new(Arc::new(create_unit_square_mesh(3).unwrap()), 2).unwrap();
        let v = space.interpolate(|p| 3.0 * p[0] - 4.0 * p[1]);
        assert!((seminorm_h1(&space, &v) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let ok = RunConfig::new(Problem::Peak, 1);
        assert!(ok.validate().is_ok());
        assert!(RunConfig { cycles: 1, ..ok.clone() }.validate().is_err());
        assert!(ok.clone().with_mode(Mode::Safem, Smoother::Richardson, 0).validate().is_err());
        assert!(RunConfig { degree: 4, ..ok.clone() }.validate().is_err());
        let drift = RunConfig::new(Problem::Drift { beta: 1.0 }, 1);
        assert_eq!(drift.smoother, Smoother::Gmres);
        assert!(drift.with_mode(Mode::Safem, Smoother::Cg, 3).validate().is_err());
        assert_eq!(RunConfig::new(Problem::Peak, 2).marking, MarkingConfig::FixedFraction { fraction: 1.0 / 3.0 });
    }

    #[test]
    fn names_parse() {
        assert_eq!("safem".parse::<Mode>().unwrap(), Mode::Safem);
        assert_eq!("gmres".parse::<Smoother>().unwrap(), Smoother::Gmres);
        assert!("sor".parse::<Smoother>().is_err());
        assert_eq!(Smoother::Cg.to_string(), "cg");
    }

    #[test]
    fn two_cycles_coincide() {
        let base = RunConfig { cycles: 2, ..RunConfig::new(Problem::Peak, 1) };
        let afem = run(&base).unwrap();
        let safem = run(&base.clone().with_mode(Mode::Safem, Smoother::Richardson, 3)).unwrap();
        for (a, s) in afem.records.iter().zip(&safem.records) {
            assert_eq!((a.n_dofs, a.error_h1, a.estimator_j), (s.n_dofs, s.error_h1, s.estimator_j));
        }
        assert_eq!(afem.records.len(), 2);
        assert!(afem.records[1].n_dofs > afem.records[0].n_dofs);
    }
}
