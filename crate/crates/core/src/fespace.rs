//! Continuous tensor-product Lagrange spaces `Q_p` (p = 1, 2, 3) on a
//! [`Mesh`], with hanging-node and Dirichlet constraints.
//!
//! Degrees of freedom are identified with distinct nodal support points of
//! the active cells. Support points are equispaced within each cell, so they
//! sit on a lattice of spacing `1 / degree` of the mesh lattice and global
//! identification is exact integer matching.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Mesh, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("unsupported polynomial degree {0}; expected 1, 2 or 3")]
    UnsupportedDegree(usize),
    #[error("point ({0}, {1}) lies outside every active cell")]
    OutsideDomain(f64, f64),
    #[error("coefficient vector has length {got}, space has {expected} dofs")]
    LengthMismatch { expected: usize, got: usize },
}

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Values and derivatives of the 1D Lagrange basis on `[0, 1]` with nodes
/// `j / degree`, evaluated at `t`.
pub fn lagrange_1d(degree: usize, t: f64) -> ([f64; 4], [f64; 4]) {
    let mut values = [0.0; 4];
    let mut derivs = [0.0; 4];
    let node = |j: usize| j as f64 / degree as f64;
    for j in 0..=degree {
        let tj = node(j);
        let mut value = 1.0;
        let mut denom = 1.0;
        for m in (0..=degree).filter(|&m| m != j) {
            value *= t - node(m);
            denom *= tj - node(m);
        }
        let mut deriv = 0.0;
        for k in (0..=degree).filter(|&k| k != j) {
            let mut prod = 1.0;
            for m in (0..=degree).filter(|&m| m != j && m != k) {
                prod *= t - node(m);
            }
            deriv += prod;
        }
        values[j] = value / denom;
        derivs[j] = deriv / denom;
    }
    (values, derivs)
}

/// Tensor-product basis values and reference gradients at `(xi, eta)`, in
/// lexicographic local order `a + (degree + 1) * b`.
pub fn reference_basis(degree: usize, xi: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n1 = degree + 1;
    let (vx, dx) = lagrange_1d(degree, xi[0]);
    let (vy, dy) = lagrange_1d(degree, xi[1]);
    let mut values = Vec::with_capacity(n1 * n1);
    let mut grads = Vec::with_capacity(n1 * n1);
    for b in 0..n1 {
        for a in 0..n1 {
            values.push(vx[a] * vy[b]);
            grads.push([dx[a] * vy[b], vx[a] * dy[b]]);
        }
    }
    (values, grads)
}

/// Local (lexicographic) indices of the nodes on one side of the reference
/// cell, ordered by increasing coordinate along the side.
pub fn side_local_nodes(degree: usize, side: Side) -> Vec<usize> {
    let n1 = degree + 1;
    (0..n1)
        .map(|k| match side {
            Side::South => k,
            Side::North => k + n1 * degree,
            Side::West => n1 * k,
            Side::East => degree + n1 * k,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    id: u64,
    mesh: Arc<Mesh>,
    degree: usize,
    dof_count: usize,
    /// Position of each cell id in the active list, `usize::MAX` if inactive.
    active_slot: Vec<usize>,
    cell_dofs: Vec<usize>,
    support_points: Vec<[f64; 2]>,
    /// Support points on the mesh lattice scaled by `degree`.
    support_keys: Vec<[i64; 2]>,
}

pub fn build_space(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace, SpaceError> {
    FeSpace::new(mesh, degree)
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace, SpaceError> {
        if !(1..=3).contains(&degree) {
            return Err(SpaceError::UnsupportedDegree(degree));
        }
        let p = degree as i64;
        let n1 = degree + 1;
        let mut active_slot = vec![usize::MAX; mesh.cells().len()];
        let mut cell_dofs = Vec::with_capacity(mesh.active_cell_count() * n1 * n1);
        let mut lookup: HashMap<[i64; 2], usize> = HashMap::new();
        let mut support_keys = Vec::new();
        for (slot, &c) in mesh.active_cells().iter().enumerate() {
            active_slot[c] = slot;
            let (lo, s) = mesh.cell_lattice_box(c);
            for b in 0..n1 as i64 {
                for a in 0..n1 as i64 {
                    let key = [p * lo[0] + a * s, p * lo[1] + b * s];
                    let dof = *lookup.entry(key).or_insert_with(|| {
                        support_keys.push(key);
                        support_keys.len() - 1
                    });
                    cell_dofs.push(dof);
                }
            }
        }
        let support_points = support_keys.iter().map(|&k| mesh.lattice_to_point(k, p)).collect();
        Ok(FeSpace {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            dof_count: support_keys.len(),
            mesh,
            degree,
            active_slot,
            cell_dofs,
            support_points,
            support_keys,
        })
    }

    /// Identifier unique to this space instance.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn dofs_per_cell(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// Global dofs of an active cell in lexicographic local order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let slot = self.active_slot[cell];
        assert!(slot != usize::MAX, "cell {cell} is not active");
        let n = self.dofs_per_cell();
        &self.cell_dofs[slot * n..(slot + 1) * n]
    }

    pub fn support_points(&self) -> &[[f64; 2]] {
        &self.support_points
    }

    pub fn support_key(&self, dof: usize) -> [i64; 2] {
        self.support_keys[dof]
    }

    /// Active cell containing a support-lattice key (mesh lattice scaled by degree).
    pub fn locate_key(&self, key: [i64; 2]) -> Option<(usize, [f64; 2])> {
        let p = self.degree as i64;
        let cell = self.mesh.locate_lattice(key, p)?;
        let (lo, s) = self.mesh.cell_lattice_box(cell);
        let xi = [0, 1].map(|k| (key[k] - p * lo[k]) as f64 / (p * s) as f64);
        Some((cell, xi))
    }

    /// Reference coordinates of a physical point inside a cell, clamped to `[0, 1]`.
    pub fn reference_coords(&self, cell: usize, point: [f64; 2]) -> [f64; 2] {
        let lo = self.mesh.cell_origin(cell);
        let h = self.mesh.cell_size(cell);
        [0, 1].map(|k| ((point[k] - lo[k]) / h).clamp(0.0, 1.0))
    }

    /// Value and physical gradient of `u` restricted to one cell.
    pub fn evaluate_in_cell(&self, cell: usize, u: &[f64], xi: [f64; 2]) -> (f64, [f64; 2]) {
        let (values, grads) = reference_basis(self.degree, xi);
        let inv_h = 1.0 / self.mesh.cell_size(cell);
        let mut value = 0.0;
        let mut grad = [0.0; 2];
        for (k, &dof) in self.cell_dofs(cell).iter().enumerate() {
            value += u[dof] * values[k];
            grad[0] += u[dof] * grads[k][0] * inv_h;
            grad[1] += u[dof] * grads[k][1] * inv_h;
        }
        (value, grad)
    }

    /// Value and gradient of the finite element function with coefficients `u`.
    pub fn evaluate(&self, u: &[f64], point: [f64; 2]) -> Result<(f64, [f64; 2]), SpaceError> {
        self.check_len(u)?;
        let cell = self.mesh.locate(point).ok_or(SpaceError::OutsideDomain(point[0], point[1]))?;
        Ok(self.evaluate_in_cell(cell, u, self.reference_coords(cell, point)))
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.support_points.iter().map(|&p| f(p)).collect()
    }

    pub fn check_len(&self, u: &[f64]) -> Result<(), SpaceError> {
        if u.len() != self.dof_count {
            return Err(SpaceError::LengthMismatch { expected: self.dof_count, got: u.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// `(master dof, weight)`, sorted by dof. Empty for Dirichlet dofs.
    pub masters: Vec<(usize, f64)>,
    pub inhomogeneity: f64,
}

/// Affine constraints `u_i = sum_j w_ij u_j + g_i` for hanging and boundary dofs.
/// Masters are never constrained themselves.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    space_id: u64,
    entries: Vec<Option<Constraint>>,
}

pub fn build_constraints(space: &FeSpace, dirichlet: impl Fn([f64; 2]) -> f64) -> ConstraintSet {
    ConstraintSet::new(space, dirichlet)
}

impl ConstraintSet {
    pub fn new(space: &FeSpace, dirichlet: impl Fn([f64; 2]) -> f64) -> ConstraintSet {
        let mesh = space.mesh();
        let degree = space.degree();
        let n = space.dof_count();
        let mut entries: Vec<Option<Constraint>> = vec![None; n];

        for edge in mesh.boundary_edges() {
            let (cell, side) = (edge.cells[0].unwrap(), edge.sides[0].unwrap());
            let dofs = space.cell_dofs(cell);
            for local in side_local_nodes(degree, side) {
                let dof = dofs[local];
                entries[dof] =
                    Some(Constraint { masters: Vec::new(), inhomogeneity: dirichlet(space.support_points()[dof]) });
            }
        }

        for edge in mesh.edges().iter().filter(|e| e.is_hanging(mesh)) {
            let [a, b] = [edge.cells[0].unwrap(), edge.cells[1].unwrap()];
            let (fine, fine_side, coarse, coarse_side) = if mesh.cell(a).level > mesh.cell(b).level {
                (a, edge.sides[0].unwrap(), b, edge.sides[1].unwrap())
            } else {
                (b, edge.sides[1].unwrap(), a, edge.sides[0].unwrap())
            };
            let coarse_nodes: Vec<usize> =
                side_local_nodes(degree, coarse_side).into_iter().map(|l| space.cell_dofs(coarse)[l]).collect();
            let axis = if coarse_side.is_horizontal() { 0 } else { 1 };
            let (lo, s) = mesh.cell_lattice_box(coarse);
            let p = degree as i64;
            for local in side_local_nodes(degree, fine_side) {
                let dof = space.cell_dofs(fine)[local];
                if coarse_nodes.contains(&dof) || entries[dof].is_some() {
                    continue;
                }
                let key = space.support_key(dof);
                let t = (key[axis] - p * lo[axis]) as f64 / (p * s) as f64;
                let (weights, _) = lagrange_1d(degree, t);
                let masters = coarse_nodes.iter().copied().zip(weights).collect();
                entries[dof] = Some(Constraint { masters, inhomogeneity: 0.0 });
            }
        }

        // Flatten chains so that masters are always unconstrained.
        let mut resolved: Vec<Option<Constraint>> = vec![None; n];
        for dof in 0..n {
            if entries[dof].is_some() {
                resolved[dof] = Some(resolve(dof, &entries));
            }
        }
        ConstraintSet { space_id: space.id(), entries: resolved }
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, dof: usize) -> Option<&Constraint> {
        self.entries[dof].as_ref()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.entries[dof].is_some()
    }

    pub fn constrained_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        matches!(&self.entries[dof], Some(c) if c.masters.is_empty())
    }

    /// Overwrites constrained entries with the values their constraints
    /// prescribe, turning an algebraic vector into a conforming finite
    /// element function.
    pub fn distribute(&self, u: &mut [f64]) {
        for (dof, entry) in self.entries.iter().enumerate() {
            if let Some(c) = entry {
                u[dof] = c.inhomogeneity + c.masters.iter().map(|&(m, w)| w * u[m]).sum::<f64>();
            }
        }
    }

    /// Sets constrained entries to their inhomogeneities, the values the
    /// identity rows of an assembled system prescribe.
    pub fn set_inhomogeneities(&self, u: &mut [f64]) {
        for (dof, entry) in self.entries.iter().enumerate() {
            if let Some(c) = entry {
                u[dof] = c.inhomogeneity;
            }
        }
    }

    /// Zeroes constrained entries.
    pub fn zero_constrained(&self, u: &mut [f64]) {
        for (dof, entry) in self.entries.iter().enumerate() {
            if entry.is_some() {
                u[dof] = 0.0;
            }
        }
    }
}

fn resolve(dof: usize, entries: &[Option<Constraint>]) -> Constraint {
    let c = entries[dof].as_ref().expect("resolve called on a constrained dof");
    let mut acc: HashMap<usize, f64> = HashMap::new();
    let mut inhomogeneity = c.inhomogeneity;
    for &(m, w) in &c.masters {
        if entries[m].is_some() {
            let sub = resolve(m, entries);
            inhomogeneity += w * sub.inhomogeneity;
            for (mm, ww) in sub.masters {
                *acc.entry(mm).or_insert(0.0) += w * ww;
            }
        } else {
            *acc.entry(m).or_insert(0.0) += w;
        }
    }
    let mut masters: Vec<(usize, f64)> = acc.into_iter().collect();
    masters.sort_by_key(|&(m, _)| m);
    Constraint { masters, inhomogeneity }
}
