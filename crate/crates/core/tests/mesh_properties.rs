use std::collections::HashMap;

use proptest::prelude::*;
use safem_core::mesh::{create_lshape_mesh, create_unit_square_mesh, Mesh};

/// A base mesh and refinement rounds; each round flags the active cells
/// picked by the selectors.
fn refined_mesh() -> impl Strategy<Value = Vec<Mesh>> {
    (0usize..4, prop::collection::vec(prop::collection::vec(any::<usize>(), 1..4), 0..5)).prop_map(|(base, rounds)| {
        let mut mesh = if base == 0 { create_lshape_mesh() } else { create_unit_square_mesh(base).unwrap() };
        let mut history = vec![mesh.clone()];
        for selectors in rounds {
            let active = mesh.active_cells();
            let flags: Vec<usize> = selectors.iter().map(|s| active[s % active.len()]).collect();
            mesh = mesh.refine(&flags).unwrap();
            history.push(mesh.clone());
        }
        history
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn area_is_preserved(history in refined_mesh()) {
        let area0 = history[0].domain_area();
        for mesh in &history {
            let sum: f64 = mesh.active_cells().iter().map(|&c| mesh.cell_area(c)).sum();
            prop_assert!((sum - area0).abs() < 1e-12);
            prop_assert!((mesh.domain_area() - area0).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_characteristic_of_a_disk(history in refined_mesh()) {
        for mesh in &history {
            prop_assert_eq!(mesh.euler_characteristic(), 1);
        }
    }

    #[test]
    fn one_irregular(history in refined_mesh()) {
        for mesh in &history {
            prop_assert!(mesh.max_level_jump() <= 1);
        }
    }

    #[test]
    fn refinements_are_nested(history in refined_mesh()) {
        for pair in history.windows(2) {
            prop_assert!(pair[1].is_refinement_of(&pair[0]));
            for &c in pair[1].active_cells() {
                let ancestor = pair[1].active_ancestor_in(&pair[0], c);
                prop_assert!(ancestor.is_some());
            }
        }
        if history.len() > 1 && history[0].active_cell_count() != history.last().unwrap().active_cell_count() {
            prop_assert!(!history[0].is_refinement_of(history.last().unwrap()));
        }
    }

    #[test]
    fn interior_edges_are_shared_consistently(history in refined_mesh()) {
        let mesh = history.last().unwrap();
        // The edges around each active cell add up to its perimeter.
        let mut covered: HashMap<usize, f64> = HashMap::new();
        for edge in mesh.edges() {
            for c in edge.cells.iter().flatten() {
                *covered.entry(*c).or_default() += edge.length;
            }
            if let [Some(a), Some(b)] = edge.cells {
                prop_assert!(a < b);
            }
        }
        for &c in mesh.active_cells() {
            prop_assert!((covered[&c] - 4.0 * mesh.cell_size(c)).abs() < 1e-12);
        }
    }

    #[test]
    fn located_points_lie_in_their_cell(history in refined_mesh(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let mesh = history.last().unwrap();
        if let Some(c) = mesh.locate([x, y]) {
            let lo = mesh.cell_origin(c);
            let h = mesh.cell_size(c);
            prop_assert!(x >= lo[0] - 1e-14 && x <= lo[0] + h + 1e-14);
            prop_assert!(y >= lo[1] - 1e-14 && y <= lo[1] + h + 1e-14);
        } else {
            // Only the removed quadrant of the L-shape is outside.
            prop_assert!(mesh.domain_area() == 3.0 && x > 0.0 && y > 0.0);
        }
    }
}

#[test]
fn closure_refines_coarse_neighbours() {
    let mesh = create_unit_square_mesh(2).unwrap();
    let once = mesh.refine(&[0]).unwrap();
    // The north-east child of cell 0 shares sides with coarse cells 1 and 2
    // and only a corner with cell 3, which stays as it is.
    let ne = once.cell(0).children.unwrap()[3];
    let twice = once.refine(&[ne]).unwrap();
    assert!(twice.max_level_jump() <= 1);
    assert!(twice.cell(1).children.is_some() && twice.cell(2).children.is_some());
    assert!(twice.cell(3).active);
    assert_eq!(twice.active_cell_count(), 16);
}

#[test]
fn uniform_refinement_counts() {
    let mut mesh = create_lshape_mesh();
    for k in 1..=3 {
        mesh = mesh.refine_globally();
        assert_eq!(mesh.active_cell_count(), 3 * 4usize.pow(k));
        assert_eq!(mesh.hanging_vertex_count(), 0);
    }
}
