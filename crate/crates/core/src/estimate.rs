//! Gradient-jump error indicators and marking strategies.
//!
//! For an interior edge `E`, `J_E = h_E^{1/2} ‖[∂u/∂n]‖_{L²(E)}`. Boundary
//! edges contribute nothing. The cell indicator collects the edges on its
//! boundary as `η_T² = Σ_{E⊂∂T} J_E²`, so that `J² = Σ_E J_E² = ½ Σ_T η_T²`.

use thiserror::Error;

use crate::assembly::GaussRule1d;
use crate::fespace::{FeSpace, SpaceError};
use crate::mesh::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("coefficient vector is discontinuous across edge {edge} (jump {jump:e}); apply constraints first")]
    Unconstrained { edge: usize, jump: f64 },
    #[error("invalid marking parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    /// Active cell ids, increasing.
    pub cells: Vec<usize>,
    /// `η_T` for each entry of `cells`.
    pub eta: Vec<f64>,
    /// `J_E` for each mesh edge (zero on the boundary).
    pub edge_indicators: Vec<f64>,
    pub global: f64,
}

impl EstimatorResult {
    /// Builds a result directly from cell indicators; `global` follows from
    /// the pairing identity `J² = ½ Σ η_T²`.
    pub fn from_indicators(cells: Vec<usize>, eta: Vec<f64>) -> EstimatorResult {
        let global = (0.5 * eta.iter().map(|e| e * e).sum::<f64>()).sqrt();
        EstimatorResult { cells, eta, edge_indicators: Vec::new(), global }
    }

    pub fn get(&self, cell: usize) -> Option<f64> {
        self.cells.binary_search(&cell).ok().map(|k| self.eta[k])
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Physical point at parameter `t` along the given side of a cell.
fn point_on_side(space: &FeSpace, cell: usize, side: Side, t: f64) -> [f64; 2] {
    let lo = space.mesh().cell_origin(cell);
    let h = space.mesh().cell_size(cell);
    match side {
        Side::South => [lo[0] + t * h, lo[1]],
        Side::North => [lo[0] + t * h, lo[1] + h],
        Side::West => [lo[0], lo[1] + t * h],
        Side::East => [lo[0] + h, lo[1] + t * h],
    }
}

pub fn jump_estimator(space: &FeSpace, u: &[f64], edge_quad: &GaussRule1d) -> Result<EstimatorResult, EstimateError> {
    space.check_len(u)?;
    let mesh = space.mesh();
    let cells = mesh.active_cells().to_vec();
    let mut eta_sq = vec![0.0; cells.len()];
    let mut edge_indicators = vec![0.0; mesh.edges().len()];
    let mut global_sq = 0.0;
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    for edge in mesh.edges() {
        let (a, b) = match edge.cells {
            [Some(a), Some(b)] => (a, b),
            _ => continue,
        };
        // Integrate over the edge as seen from its finer (or first) cell.
        let (fine, fine_side) = if mesh.cell(b).level > mesh.cell(a).level {
            (b, edge.sides[1].unwrap())
        } else {
            (a, edge.sides[0].unwrap())
        };
        let mut integral = 0.0;
        for (t, w) in edge_quad.points.iter().zip(&edge_quad.weights) {
            let x = point_on_side(space, fine, fine_side, *t);
            let (va, ga) = space.evaluate_in_cell(a, u, space.reference_coords(a, x));
            let (vb, gb) = space.evaluate_in_cell(b, u, space.reference_coords(b, x));
            if cfg!(debug_assertions) && (va - vb).abs() > 1e-8 * scale {
                return Err(EstimateError::Unconstrained { edge: edge.id, jump: (va - vb).abs() });
            }
            let jump = (ga[0] - gb[0]) * edge.normal[0] + (ga[1] - gb[1]) * edge.normal[1];
            integral += w * jump * jump;
        }
        let je_sq = edge.length * edge.length * integral;
        edge_indicators[edge.id] = je_sq.sqrt();
        global_sq += je_sq;
        for c in [a, b] {
            let k = cells.binary_search(&c).expect("edge cells are active");
            eta_sq[k] += je_sq;
        }
    }
    Ok(EstimatorResult {
        cells,
        eta: eta_sq.into_iter().map(f64::sqrt).collect(),
        edge_indicators,
        global: global_sq.sqrt(),
    })
}

/// Cells `{T : η_T ≥ L}` for the largest threshold `L` with
/// `Σ_{marked} η_T² ≥ θ Σ_T η_T²`.
pub fn mark_dorfler(eta: &EstimatorResult, theta: f64) -> Result<Vec<usize>, EstimateError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(EstimateError::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")));
    }
    let total: f64 = eta.eta.iter().map(|e| e * e).sum();
    let target = theta * total;
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&i, &j| eta.eta[j].total_cmp(&eta.eta[i]).then(eta.cells[i].cmp(&eta.cells[j])));
    if target <= 0.0 {
        return Ok(Vec::new());
    }
    let mut sum = 0.0;
    let mut marked = Vec::new();
    let mut k = 0;
    while k < order.len() {
        // Take the whole group of equal values at once.
        let value = eta.eta[order[k]];
        while k < order.len() && eta.eta[order[k]] == value {
            sum += value * value;
            marked.push(eta.cells[order[k]]);
            k += 1;
        }
        if sum >= target {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

/// The `ceil(fraction · n)` cells with the largest indicators; ties go to
/// the smaller cell id.
pub fn mark_fixed_fraction(eta: &EstimatorResult, fraction: f64) -> Result<Vec<usize>, EstimateError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EstimateError::InvalidParameter(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let count = ((fraction * eta.len() as f64) - 1e-12).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&i, &j| eta.eta[j].total_cmp(&eta.eta[i]).then(eta.cells[i].cmp(&eta.cells[j])));
    let mut marked: Vec<usize> = order[..count.min(order.len())].iter().map(|&k| eta.cells[k]).collect();
    marked.sort_unstable();
    Ok(marked)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkingConfig {
    Dorfler { theta: f64 },
    FixedFraction { fraction: f64 },
}

impl MarkingConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        match *self {
            MarkingConfig::Dorfler { theta } if !(0.0..=1.0).contains(&theta) => {
                Err(EstimateError::InvalidParameter(format!("theta must lie in [0, 1], got {theta}")))
            }
            MarkingConfig::FixedFraction { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(EstimateError::InvalidParameter(format!("fraction must lie in (0, 1], got {fraction}")))
            }
            _ => Ok(()),
        }
    }

    pub fn mark(&self, eta: &EstimatorResult) -> Result<Vec<usize>, EstimateError> {
        match *self {
            MarkingConfig::Dorfler { theta } => mark_dorfler(eta, theta),
            MarkingConfig::FixedFraction { fraction } => mark_fixed_fraction(eta, fraction),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MarkingConfig::Dorfler { .. } => "dorfler",
            MarkingConfig::FixedFraction { .. } => "fraction",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::gauss_rule_1d;
    use crate::mesh::{create_unit_square_mesh, Mesh};
    use std::sync::Arc;

    fn result(eta: &[f64]) -> EstimatorResult {
        EstimatorResult::from_indicators((0..eta.len()).collect(), eta.to_vec())
    }

    #[test]
    fn linear_function_has_no_jumps() {
        let mesh = create_unit_square_mesh(3).unwrap();
        let mesh = Arc::new(mesh.refine(&[4]).unwrap());
        for degree in 1..=3 {
            let space = FeSpace::new(mesh.clone(), degree).unwrap();
            let u = space.interpolate(|p| 2.0 * p[0] - p[1]);
            let est = jump_estimator(&space, &u, &gauss_rule_1d(degree + 1).unwrap()).unwrap();
            assert!(est.global < 1e-12);
            assert!(est.eta.iter().all(|&e| e < 1e-12));
        }
    }

    #[test]
    fn tent_across_one_edge() {
        // Two unit cells sharing x = 1, v = x on the left and 2 - x on the right.
        let mesh = Arc::new(Mesh::from_coarse_cells([0.0, 0.0], 1.0, &[[0, 0], [1, 0]]).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        let u = space.interpolate(|p| if p[0] <= 1.0 { p[0] } else { 2.0 - p[0] });
        let est = jump_estimator(&space, &u, &gauss_rule_1d(2).unwrap()).unwrap();
        assert!((est.global - 2.0).abs() < 1e-14);
        assert!((est.eta[0] - 2.0).abs() < 1e-14 && (est.eta[1] - 2.0).abs() < 1e-14);
        let paired = (0.5 * est.eta.iter().map(|e| e * e).sum::<f64>()).sqrt();
        assert!((paired - est.global).abs() < 1e-14);
    }

    #[test]
    fn homogeneity() {
        let mesh = Arc::new(create_unit_square_mesh(3).unwrap());
        let space = FeSpace::new(mesh, 2).unwrap();
        let u = space.interpolate(|p| (3.0 * p[0]).sin() * p[1] * p[1]);
        let q = gauss_rule_1d(3).unwrap();
        let a = jump_estimator(&space, &u, &q).unwrap();
        let scaled: Vec<f64> = u.iter().map(|v| 2.5 * v).collect();
        let b = jump_estimator(&space, &scaled, &q).unwrap();
        assert!((b.global - 2.5 * a.global).abs() < 1e-12 * b.global);
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert!((y - 2.5 * x).abs() <= 1e-12 * y.max(1e-300));
        }
    }

    #[test]
    fn discontinuous_input_rejected_in_debug() {
        let mesh = Arc::new(create_unit_square_mesh(2).unwrap().refine(&[0]).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        let mut u = vec![0.0; space.dof_count()];
        let hanging = space.support_points().iter().position(|p| *p == [0.5, 0.25]).unwrap();
        u[hanging] = 1.0;
        let r = jump_estimator(&space, &u, &gauss_rule_1d(2).unwrap());
        if cfg!(debug_assertions) {
            assert!(matches!(r, Err(EstimateError::Unconstrained { .. })));
        }
    }

    #[test]
    fn dorfler_examples() {
        assert_eq!(mark_dorfler(&result(&[3.0, 2.0, 1.0]), 0.3).unwrap(), vec![0]);
        assert!(mark_dorfler(&result(&[3.0, 2.0, 1.0]), 0.0).unwrap().is_empty());
        assert_eq!(mark_dorfler(&result(&[3.0, 0.0, 1.0, 2.0]), 1.0).unwrap(), vec![0, 2, 3]);
        // Ties at the cutoff are all marked.
        assert_eq!(mark_dorfler(&result(&[2.0, 2.0, 1.0]), 0.3).unwrap(), vec![0, 1]);
        assert!(mark_dorfler(&result(&[1.0]), 1.5).is_err());
        assert!(mark_dorfler(&result(&[0.0, 0.0]), 0.5).unwrap().is_empty());
    }

    #[test]
    fn fixed_fraction_examples() {
        assert_eq!(mark_fixed_fraction(&result(&[1.0, 4.0, 2.0]), 1.0 / 3.0).unwrap(), vec![1]);
        assert_eq!(mark_fixed_fraction(&result(&[1.0, 4.0, 2.0]), 1.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(mark_fixed_fraction(&result(&[5.0, 5.0, 2.0, 1.0]), 0.5).unwrap(), vec![0, 1]);
        assert_eq!(mark_fixed_fraction(&result(&[1.0, 5.0, 5.0, 5.0]), 0.5).unwrap(), vec![1, 2]);
        assert!(mark_fixed_fraction(&result(&[1.0]), 0.0).is_err());
    }
}
