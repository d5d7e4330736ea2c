//! Gauss quadrature, element matrices for `-Δu + β·∇u`, and global
//! assembly with constraint condensation.
//!
//! Constrained dofs keep their place in the global system as identity rows
//! whose right-hand side is the constraint inhomogeneity; their couplings
//! are folded into the masters (hanging nodes) or into the right-hand side
//! (Dirichlet values). The system dimension therefore always equals the
//! number of dofs of the space.

use thiserror::Error;

use crate::fespace::{reference_basis, ConstraintSet, FeSpace};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("quadrature needs 1 to 6 points per direction, got {0}")]
    QuadratureOrder(usize),
    #[error("constraints were built for a different space")]
    SpaceMismatch,
    #[error("cell {0} has zero area")]
    DegenerateCell(usize),
    #[error("cell {0} is not active")]
    InactiveCell(usize),
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Tensor-product rule on the reference square `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

pub fn gauss_rule_1d(points: usize) -> Result<GaussRule1d, AssemblyError> {
    if !(1..=6).contains(&points) {
        return Err(AssemblyError::QuadratureOrder(points));
    }
    let (nodes, weights) = gauss_legendre(points);
    Ok(GaussRule1d {
        points: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
    })
}

pub fn gauss_rule(points_per_direction: usize) -> Result<QuadratureRule, AssemblyError> {
    let line = gauss_rule_1d(points_per_direction)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (y, wy) in line.points.iter().zip(&line.weights) {
        for (x, wx) in line.points.iter().zip(&line.weights) {
            points.push([*x, *y]);
            weights.push(wx * wy);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Rule that splits the reference square into `splits^2` sub-squares with
/// a Gauss rule on each. Used for data with sharp features.
pub fn composite_rule(points_per_direction: usize, splits: usize) -> Result<QuadratureRule, AssemblyError> {
    let base = gauss_rule(points_per_direction)?;
    let h = 1.0 / splits as f64;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for sy in 0..splits {
        for sx in 0..splits {
            for (p, w) in base.points.iter().zip(&base.weights) {
                points.push([(sx as f64 + p[0]) * h, (sy as f64 + p[1]) * h]);
                weights.push(w * h * h);
            }
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub degree: usize,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl BasisTable {
    pub fn new(degree: usize, quad: &QuadratureRule) -> BasisTable {
        let (values, grads) = quad.points.iter().map(|&p| reference_basis(degree, p)).unzip();
        BasisTable { degree, values, grads }
    }
}

/// Dense element matrix (row-major, test index first) and load vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSystem {
    pub size: usize,
    pub matrix: Vec<f64>,
    pub load: Vec<f64>,
}

impl LocalSystem {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.size + j]
    }
}

fn integrate_cell(
    mesh: &Mesh,
    cell: usize,
    table: &BasisTable,
    quad: &QuadratureRule,
    beta: [f64; 2],
    source: &dyn Fn([f64; 2]) -> f64,
) -> Result<LocalSystem, AssemblyError> {
    let h = mesh.cell_size(cell);
    let area = h * h;
    if !(area > 0.0) {
        return Err(AssemblyError::DegenerateCell(cell));
    }
    let inv_h = 1.0 / h;
    let lo = mesh.cell_origin(cell);
    let n = table.values[0].len();
    let mut matrix = vec![0.0; n * n];
    let mut load = vec![0.0; n];
    for (q, (xi, w)) in quad.points.iter().zip(&quad.weights).enumerate() {
        let jw = w * area;
        let phi = &table.values[q];
        let grad: Vec<[f64; 2]> = table.grads[q].iter().map(|g| [g[0] * inv_h, g[1] * inv_h]).collect();
        let x = [lo[0] + xi[0] * h, lo[1] + xi[1] * h];
        let fx = source(x);
        for i in 0..n {
            load[i] += jw * fx * phi[i];
            let row = &mut matrix[i * n..(i + 1) * n];
            for j in 0..n {
                let diffusion = grad[j][0] * grad[i][0] + grad[j][1] * grad[i][1];
                let drift = (beta[0] * grad[j][0] + beta[1] * grad[j][1]) * phi[i];
                row[j] += jw * (diffusion + drift);
            }
        }
    }
    Ok(LocalSystem { size: n, matrix, load })
}

/// Element matrix `K_ij = ∫ ∇φ_j·∇φ_i + (β·∇φ_j) φ_i` and load
/// `F_i = ∫ f φ_i` on one active cell.
pub fn local_cell_matrix(
    mesh: &Mesh,
    cell: usize,
    degree: usize,
    beta: [f64; 2],
    quad: &QuadratureRule,
    source: &dyn Fn([f64; 2]) -> f64,
) -> Result<LocalSystem, AssemblyError> {
    if cell >= mesh.cells().len() || !mesh.cell(cell).active {
        return Err(AssemblyError::InactiveCell(cell));
    }
    let table = BasisTable::new(degree, quad);
    integrate_cell(mesh, cell, &table, quad, beta, source)
}

/// `A u = f` over all dofs of a space.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Expansion of a global dof into unconstrained rows/columns.
fn expand(constraints: &ConstraintSet, dof: usize) -> (Vec<(usize, f64)>, f64) {
    match constraints.get(dof) {
        None => (vec![(dof, 1.0)], 0.0),
        Some(c) => (c.masters.clone(), c.inhomogeneity),
    }
}

pub fn assemble_system(
    space: &FeSpace,
    constraints: &ConstraintSet,
    beta: [f64; 2],
    source: &dyn Fn([f64; 2]) -> f64,
    quad: &QuadratureRule,
) -> Result<LinearSystem, AssemblyError> {
    let table = BasisTable::new(space.degree(), quad);
    let mesh = space.mesh();
    assemble_from_cells(space, constraints, |cell| integrate_cell(mesh, cell, &table, quad, beta, source))
}

/// Like [`assemble_system`], but with the stiffness integrated exactly by a
/// `(degree + 1)`-point Gauss rule and the load integrated by `data`.
pub fn assemble_system_with(
    space: &FeSpace,
    constraints: &ConstraintSet,
    beta: [f64; 2],
    source: &dyn Fn([f64; 2]) -> f64,
    data: &DataQuadrature,
) -> Result<LinearSystem, AssemblyError> {
    let mesh = space.mesh();
    let stiffness_quad = gauss_rule(space.degree() + 1)?;
    let table = BasisTable::new(space.degree(), &stiffness_quad);
    let mut cache = RuleCache::new(space.degree());
    assemble_from_cells(space, constraints, |cell| {
        let mut local = integrate_cell(mesh, cell, &table, &stiffness_quad, beta, &|_| 0.0)?;
        let h = mesh.cell_size(cell);
        let lo = mesh.cell_origin(cell);
        let (rule, basis) = cache.get(data, lo, h);
        for (q, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fx = source([lo[0] + xi[0] * h, lo[1] + xi[1] * h]) * w * h * h;
            for (l, phi) in local.load.iter_mut().zip(&basis.values[q]) {
                *l += fx * phi;
            }
        }
        Ok(local)
    })
}

fn assemble_from_cells(
    space: &FeSpace,
    constraints: &ConstraintSet,
    mut local_system: impl FnMut(usize) -> Result<LocalSystem, AssemblyError>,
) -> Result<LinearSystem, AssemblyError> {
    if constraints.space_id() != space.id() || constraints.len() != space.dof_count() {
        return Err(AssemblyError::SpaceMismatch);
    }
    let mesh = space.mesh();
    let n = space.dof_count();
    let mut triplets = Vec::with_capacity(mesh.active_cell_count() * space.dofs_per_cell().pow(2));
    let mut rhs = vec![0.0; n];

    for &cell in mesh.active_cells() {
        let local = local_system(cell)?;
        let dofs = space.cell_dofs(cell);
        let expanded: Vec<(Vec<(usize, f64)>, f64)> = dofs.iter().map(|&d| expand(constraints, d)).collect();
        for (i, (rows, _)) in expanded.iter().enumerate() {
            for &(r, wr) in rows {
                rhs[r] += wr * local.load[i];
                for (j, (cols, inhom)) in expanded.iter().enumerate() {
                    let k = local.entry(i, j);
                    if k == 0.0 {
                        continue;
                    }
                    for &(c, wc) in cols {
                        triplets.push((r, c, wr * wc * k));
                    }
                    if *inhom != 0.0 {
                        rhs[r] -= wr * k * inhom;
                    }
                }
            }
        }
    }
    for dof in 0..n {
        if let Some(c) = constraints.get(dof) {
            triplets.push((dof, dof, 1.0));
            rhs[dof] = c.inhomogeneity;
        }
    }
    Ok(LinearSystem { matrix: CsrMatrix::from_triplets(n, n, triplets), rhs })
}

/// Quadrature for non-polynomial data (sources, exact solutions): a Gauss
/// rule on sub-squares no wider than `max_subcell`, graded geometrically
/// towards each singular point.
#[derive(Debug, Clone, PartialEq)]
pub struct DataQuadrature {
    points_per_direction: usize,
    max_subcell: f64,
    singular_points: Vec<[f64; 2]>,
}

/// Sub-squares narrower than this fraction of their cell are not split further.
const MIN_RELATIVE_SUBCELL: f64 = 1e-10;
const MAX_UNIFORM_SPLITS: usize = 256;

impl DataQuadrature {
    pub fn new(
        points_per_direction: usize,
        max_subcell: f64,
        singular_points: Vec<[f64; 2]>,
    ) -> Result<DataQuadrature, AssemblyError> {
        gauss_rule_1d(points_per_direction)?;
        Ok(DataQuadrature { points_per_direction, max_subcell: max_subcell.max(0.0), singular_points })
    }

    pub fn points_per_direction(&self) -> usize {
        self.points_per_direction
    }

    fn splits(&self, h: f64) -> usize {
        if self.max_subcell > 0.0 && self.max_subcell.is_finite() {
            ((h / self.max_subcell).ceil() as usize).clamp(1, MAX_UNIFORM_SPLITS)
        } else {
            1
        }
    }

    fn near_singularity(&self, lo: [f64; 2], size: f64) -> bool {
        self.singular_points.iter().any(|s| {
            let dx = (lo[0] - s[0]).max(s[0] - lo[0] - size).max(0.0);
            let dy = (lo[1] - s[1]).max(s[1] - lo[1] - size).max(0.0);
            (dx * dx + dy * dy).sqrt() < 2.0 * size
        })
    }

    /// Rule on the reference square of the cell with lower-left corner `lo`
    /// and side `h`.
    pub fn cell_rule(&self, lo: [f64; 2], h: f64) -> QuadratureRule {
        let base = gauss_rule(self.points_per_direction).expect("validated at construction");
        let splits = self.splits(h);
        let s = 1.0 / splits as f64;
        let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new() };
        for sy in 0..splits {
            for sx in 0..splits {
                self.add_square(&base, lo, h, [sx as f64 * s, sy as f64 * s], s, &mut rule);
            }
        }
        rule
    }

    fn add_square(
        &self,
        base: &QuadratureRule,
        lo: [f64; 2],
        h: f64,
        corner: [f64; 2],
        s: f64,
        rule: &mut QuadratureRule,
    ) {
        let physical = [lo[0] + corner[0] * h, lo[1] + corner[1] * h];
        if s > MIN_RELATIVE_SUBCELL && self.near_singularity(physical, s * h) {
            let half = 0.5 * s;
            for (dx, dy) in [(0.0, 0.0), (half, 0.0), (0.0, half), (half, half)] {
                self.add_square(base, lo, h, [corner[0] + dx, corner[1] + dy], half, rule);
            }
            return;
        }
        for (p, w) in base.points.iter().zip(&base.weights) {
            rule.points.push([corner[0] + p[0] * s, corner[1] + p[1] * s]);
            rule.weights.push(w * s * s);
        }
    }
}

/// Reference rules and basis tables for cells away from singular points,
/// keyed by the number of uniform splits.
pub struct RuleCache {
    degree: usize,
    uniform: std::collections::HashMap<usize, (QuadratureRule, BasisTable)>,
    special: Option<(QuadratureRule, BasisTable)>,
}

impl RuleCache {
    pub fn new(degree: usize) -> RuleCache {
        RuleCache { degree, uniform: Default::default(), special: None }
    }

    pub fn get(&mut self, data: &DataQuadrature, lo: [f64; 2], h: f64) -> (&QuadratureRule, &BasisTable) {
        if data.near_singularity(lo, h) {
            let rule = data.cell_rule(lo, h);
            let table = BasisTable::new(self.degree, &rule);
            let (r, t) = self.special.insert((rule, table));
            return (r, t);
        }
        let degree = self.degree;
        let (r, t) = self.uniform.entry(data.splits(h)).or_insert_with(|| {
            let rule = data.cell_rule(lo, h);
            let table = BasisTable::new(degree, &rule);
            (rule, table)
        });
        (r, t)
    }
}
