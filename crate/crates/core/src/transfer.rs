//! Nodal prolongation between nested spaces.

use std::collections::HashMap;

use thiserror::Error;

use crate::fespace::{reference_basis, FeSpace, SpaceError};
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("fine mesh is not a refinement of the coarse mesh")]
    NotNested,
    #[error("degree mismatch: coarse {coarse}, fine {fine}")]
    DegreeMismatch { coarse: usize, fine: usize },
    #[error("fine support point {0} lies outside the coarse mesh")]
    Unlocated(usize),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Interpolation matrix `I` of size `fine dofs × coarse dofs`.
#[derive(Debug, Clone)]
pub struct Prolongation {
    coarse_id: u64,
    fine_id: u64,
    coarse_dofs: usize,
    matrix: CsrMatrix,
}

const WEIGHT_CUTOFF: f64 = 1e-14;

pub fn build_prolongation(coarse: &FeSpace, fine: &FeSpace) -> Result<Prolongation, TransferError> {
    Prolongation::new(coarse, fine)
}

impl Prolongation {
    pub fn new(coarse: &FeSpace, fine: &FeSpace) -> Result<Prolongation, TransferError> {
        if coarse.degree() != fine.degree() {
            return Err(TransferError::DegreeMismatch { coarse: coarse.degree(), fine: fine.degree() });
        }
        if !fine.mesh().is_refinement_of(coarse.mesh()) {
            return Err(TransferError::NotNested);
        }
        let coarse_keys: HashMap<[i64; 2], usize> =
            (0..coarse.dof_count()).map(|d| (coarse.support_key(d), d)).collect();
        let mut triplets = Vec::with_capacity(fine.dof_count() * 4);
        for dof in 0..fine.dof_count() {
            let key = fine.support_key(dof);
            if let Some(&c) = coarse_keys.get(&key) {
                triplets.push((dof, c, 1.0));
                continue;
            }
            let (cell, xi) = coarse.locate_key(key).ok_or(TransferError::Unlocated(dof))?;
            let (values, _) = reference_basis(coarse.degree(), xi);
            for (&c, &w) in coarse.cell_dofs(cell).iter().zip(&values) {
                if w.abs() > WEIGHT_CUTOFF {
                    triplets.push((dof, c, w));
                }
            }
        }
        Ok(Prolongation {
            coarse_id: coarse.id(),
            fine_id: fine.id(),
            coarse_dofs: coarse.dof_count(),
            matrix: CsrMatrix::from_triplets(fine.dof_count(), coarse.dof_count(), triplets),
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn coarse_space_id(&self) -> u64 {
        self.coarse_id
    }

    pub fn fine_space_id(&self) -> u64 {
        self.fine_id
    }

    /// Fine coefficients of the coarse function `u_coarse`. The input must
    /// already satisfy the coarse constraints.
    pub fn prolong(&self, u_coarse: &[f64]) -> Result<Vec<f64>, TransferError> {
        if u_coarse.len() != self.coarse_dofs {
            return Err(SpaceError::LengthMismatch { expected: self.coarse_dofs, got: u_coarse.len() }.into());
        }
        Ok(self.matrix.matvec(u_coarse))
    }
}

pub fn prolong(p: &Prolongation, u_coarse: &[f64]) -> Result<Vec<f64>, TransferError> {
    p.prolong(u_coarse)
}
