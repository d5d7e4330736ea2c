use std::sync::Arc;

use proptest::prelude::*;
use safem_core::assembly::{assemble_system, gauss_rule, gauss_rule_1d};
use safem_core::estimate::jump_estimator;
use safem_core::fespace::{ConstraintSet, FeSpace};
use safem_core::mesh::{create_lshape_mesh, create_unit_square_mesh, Mesh};
use safem_core::solvers::{cg, gmres, Preconditioner, SolveMode};
use safem_core::sparse::dot;
use safem_core::transfer::Prolongation;

fn refine_rounds(mut mesh: Mesh, rounds: &[Vec<usize>]) -> Vec<Arc<Mesh>> {
    let mut out = vec![Arc::new(mesh.clone())];
    for selectors in rounds {
        let active = mesh.active_cells();
        let flags: Vec<usize> = selectors.iter().map(|s| active[s % active.len()]).collect();
        mesh = mesh.refine(&flags).unwrap();
        out.push(Arc::new(mesh.clone()));
    }
    out
}

fn meshes() -> impl Strategy<Value = Vec<Arc<Mesh>>> {
    (any::<bool>(), prop::collection::vec(prop::collection::vec(any::<usize>(), 1..4), 1..5)).prop_map(|(l, rounds)| {
        let base = if l { create_lshape_mesh() } else { create_unit_square_mesh(2).unwrap() };
        refine_rounds(base, &rounds)
    })
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Sample points along an edge, taken on the side of its finer cell.
fn edge_samples(space: &FeSpace, cells: [usize; 2]) -> Vec<[f64; 2]> {
    let mesh = space.mesh();
    let fine = if mesh.cell(cells[0]).level >= mesh.cell(cells[1]).level { cells[0] } else { cells[1] };
    let other = if fine == cells[0] { cells[1] } else { cells[0] };
    let (lo, h) = (mesh.cell_origin(fine), mesh.cell_size(fine));
    let (olo, oh) = (mesh.cell_origin(other), mesh.cell_size(other));
    let ts = [0.0, 0.21, 0.5, 0.77, 1.0];
    if (lo[0] + h - olo[0]).abs() < 1e-14 || (olo[0] + oh - lo[0]).abs() < 1e-14 {
        let x = if (lo[0] + h - olo[0]).abs() < 1e-14 { lo[0] + h } else { lo[0] };
        ts.iter().map(|t| [x, lo[1] + t * h]).collect()
    } else {
        let y = if (lo[1] + h - olo[1]).abs() < 1e-14 { lo[1] + h } else { lo[1] };
        ts.iter().map(|t| [lo[0] + t * h, y]).collect()
    }
}

fn qp(degree: usize) -> impl Fn([f64; 2]) -> f64 {
    let p = degree as i32;
    move |x: [f64; 2]| 1.0 + x[0].powi(p) * x[1] - 2.0 * x[1].powi(p) + 0.5 * x[0].powi(p) * x[1].powi(p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn distributed_functions_are_continuous(history in meshes(), degree in 1usize..=3, seed in any::<u64>()) {
        let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let cs = ConstraintSet::new(&space, |_| 0.3);
        let mut u = pseudo_random(space.dof_count(), seed);
        cs.distribute(&mut u);
        for edge in space.mesh().edges() {
            if let [Some(a), Some(b)] = edge.cells {
                for x in edge_samples(&space, [a, b]) {
                    let va = space.evaluate_in_cell(a, &u, space.reference_coords(a, x)).0;
                    let vb = space.evaluate_in_cell(b, &u, space.reference_coords(b, x)).0;
                    prop_assert!((va - vb).abs() < 1e-12, "jump {} on edge {}", va - vb, edge.id);
                }
            }
        }
        for d in (0..space.dof_count()).filter(|&d| cs.is_dirichlet(d)) {
            prop_assert_eq!(u[d], 0.3);
        }
    }

    #[test]
    fn distribute_is_idempotent(history in meshes(), degree in 1usize..=3, seed in any::<u64>()) {
        let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let cs = ConstraintSet::new(&space, |x| x[0] - x[1]);
        let mut once = pseudo_random(space.dof_count(), seed);
        cs.distribute(&mut once);
        let mut twice = once.clone();
        cs.distribute(&mut twice);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn polynomials_are_reproduced(history in meshes(), degree in 1usize..=3, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let f = qp(degree);
        let cs = ConstraintSet::new(&space, &f);
        let u = space.interpolate(&f);
        let mut v = u.clone();
        cs.distribute(&mut v);
        for (a, b) in u.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if let Ok((value, _)) = space.evaluate(&u, [x, y]) {
            prop_assert!((value - f([x, y])).abs() < 1e-11);
        }
    }

    #[test]
    fn prolongation_is_exact(history in meshes(), degree in 1usize..=3, seed in any::<u64>()) {
        let coarse = FeSpace::new(history[0].clone(), degree).unwrap();
        let fine = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let mut u = pseudo_random(coarse.dof_count(), seed);
        ConstraintSet::new(&coarse, |_| 0.0).distribute(&mut u);
        let v = Prolongation::new(&coarse, &fine).unwrap().prolong(&u).unwrap();
        let points = pseudo_random(200, seed ^ 0xabc);
        for p in points.chunks(2) {
            // Map to the bounding box of either domain and skip points outside.
            let x = [2.0 * p[0], 2.0 * p[1]];
            if let (Ok(a), Ok(b)) = (coarse.evaluate(&u, x), fine.evaluate(&v, x)) {
                prop_assert!((a.0 - b.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prolongations_compose(history in meshes(), degree in 1usize..=3) {
        let n = history.len();
        prop_assume!(n >= 3);
        let spaces: Vec<FeSpace> = [0, n / 2, n - 1].iter().map(|&k| FeSpace::new(history[k].clone(), degree).unwrap()).collect();
        let p01 = Prolongation::new(&spaces[0], &spaces[1]).unwrap();
        let p12 = Prolongation::new(&spaces[1], &spaces[2]).unwrap();
        let p02 = Prolongation::new(&spaces[0], &spaces[2]).unwrap();
        let composed = p12.matrix().matmul(p01.matrix()).to_dense();
        for (r1, r2) in composed.iter().zip(p02.matrix().to_dense()) {
            for (a, b) in r1.iter().zip(r2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimator_ignores_constrained_entries(history in meshes(), degree in 1usize..=3, seed in any::<u64>()) {
        let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let cs = ConstraintSet::new(&space, |_| 0.0);
        let mut u = pseudo_random(space.dof_count(), seed);
        let mut w = u.clone();
        let noise = pseudo_random(space.dof_count(), !seed);
        for d in (0..w.len()).filter(|&d| cs.is_constrained(d)) {
            w[d] += noise[d];
        }
        cs.distribute(&mut u);
        cs.distribute(&mut w);
        let quad = gauss_rule_1d(degree + 1).unwrap();
        prop_assert_eq!(jump_estimator(&space, &u, &quad).unwrap(), jump_estimator(&space, &w, &quad).unwrap());
    }

    #[test]
    fn laplace_matrix_is_spd(history in meshes(), degree in 1usize..=3, seed in any::<u64>()) {
        let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
        let cs = ConstraintSet::new(&space, |_| 0.0);
        let system = assemble_system(&space, &cs, [0.0, 0.0], &|_| 1.0, &gauss_rule(degree + 1).unwrap()).unwrap();
        prop_assert!(system.matrix.asymmetry() < 1e-12);
        let x = pseudo_random(space.dof_count(), seed);
        prop_assert!(dot(&x, &system.matrix.matvec(&x)) > 0.0);
    }
}

/// Linear exact solutions are reproduced on adaptive meshes, with and
/// without drift.
#[test]
fn patch_test() {
    let history = refine_rounds(create_lshape_mesh(), &[vec![0], vec![5, 9], vec![3, 14, 20]]);
    let exact = |x: [f64; 2]| 1.0 + 2.0 * x[0] - 3.0 * x[1];
    for degree in 1..=3 {
        for beta in [[0.0, 0.0], [4.0, 4.0]] {
            let space = FeSpace::new(history.last().unwrap().clone(), degree).unwrap();
            let cs = ConstraintSet::new(&space, exact);
            let source = move |_: [f64; 2]| 2.0 * beta[0] - 3.0 * beta[1];
            let system = assemble_system(&space, &cs, beta, &source, &gauss_rule(degree + 2).unwrap()).unwrap();
            let x0 = vec![0.0; space.dof_count()];
            let mode = SolveMode::Tolerance { tolerance: 1e-13, max_iterations: 10_000 };
            let (mut u, report) = if beta == [0.0, 0.0] {
                cg(&system.matrix, &system.rhs, &x0, Preconditioner::Jacobi, mode).unwrap()
            } else {
                gmres(&system.matrix, &system.rhs, &x0, 50, Preconditioner::Jacobi, mode).unwrap()
            };
            assert!(report.converged);
            cs.distribute(&mut u);
            for (a, b) in u.iter().zip(space.interpolate(exact)) {
                assert!((a - b).abs() < 1e-10, "degree {degree}, beta {beta:?}: {a} vs {b}");
            }
        }
    }
}
