//! Adaptive quadrilateral meshes built from axis-aligned squares.
//!
//! Every cell lives on an integer lattice: a cell at refinement level `l`
//! with indices `(i, j)` covers `[i, i + 1) x [j, j + 1)` in units of
//! `coarse_size / 2^l`. Positions are stored on a global lattice of spacing
//! `coarse_size / 2^MAX_LEVEL`, which makes every topology query exact.
//!
//! Refinement splits cells isotropically into four children and closes the
//! flagged set so that neighbouring active cells never differ by more than
//! one level across an edge. Cells are never removed: a refined mesh keeps
//! the full cell tree of its predecessor, so cell ids are stable across
//! refinement and nestedness can be checked structurally.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

/// Depth of the global position lattice. Cells may be refined up to
/// `MAX_LEVEL - 1` times.
pub const MAX_LEVEL: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("a mesh needs at least one subdivision per direction")]
    ZeroSubdivisions,
    #[error("cell {0} does not exist")]
    UnknownCell(usize),
    #[error("cell {0} is not active")]
    InactiveCell(usize),
    #[error("cell {0} is already at the maximum refinement level")]
    TooDeep(usize),
    #[error("coarse cells must be distinct, got duplicate ({0}, {1})")]
    DuplicateCoarseCell(i64, i64),
    #[error("a mesh needs at least one coarse cell")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    South = 0,
    East = 1,
    North = 2,
    West = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::South => [0.0, -1.0],
            Side::East => [1.0, 0.0],
            Side::North => [0.0, 1.0],
            Side::West => [-1.0, 0.0],
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::South => Side::North,
            Side::East => Side::West,
            Side::North => Side::South,
            Side::West => Side::East,
        }
    }

    /// Whether the side runs along the x axis.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::South | Side::North)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    /// Counter-clockwise starting at the lower-left corner.
    pub vertex_ids: [usize; 4],
    pub level: u32,
    pub parent: Option<usize>,
    /// Lexicographic order: lower-left, lower-right, upper-left, upper-right.
    pub children: Option<[usize; 4]>,
    pub active: bool,
    /// Lattice indices at this cell's own level.
    pub index: [i64; 2],
}

/// An edge of the active mesh. Where a hanging vertex splits a coarse side,
/// the edge is the fine sub-edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub vertex_ids: [usize; 2],
    pub boundary: bool,
    pub length: f64,
    /// Points from `cells[0]` to `cells[1]` (lower to higher id);
    /// outward for boundary edges.
    pub normal: [f64; 2],
    /// Adjacent active cells, lower id first. Boundary edges have one.
    pub cells: [Option<usize>; 2],
    /// Side of each adjacent cell the edge lies on.
    pub sides: [Option<Side>; 2],
}

impl Edge {
    pub fn is_hanging(&self, mesh: &Mesh) -> bool {
        match self.cells {
            [Some(a), Some(b)] => mesh.cells[a].level != mesh.cells[b].level,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    origin: [f64; 2],
    coarse_size: f64,
    vertices: Vec<Vertex>,
    vertex_lookup: HashMap<[i64; 2], usize>,
    vertex_keys: Vec<[i64; 2]>,
    cells: Vec<Cell>,
    cell_lookup: HashMap<(u32, i64, i64), usize>,
    active: Vec<usize>,
    edges: Vec<Edge>,
    max_level: u32,
}

pub fn create_unit_square_mesh(initial_subdivisions: usize) -> Result<Mesh, MeshError> {
    if initial_subdivisions == 0 {
        return Err(MeshError::ZeroSubdivisions);
    }
    let n = initial_subdivisions as i64;
    let coarse: Vec<[i64; 2]> = (0..n).flat_map(|j| (0..n).map(move |i| [i, j])).collect();
    Mesh::from_coarse_cells([0.0, 0.0], 1.0 / initial_subdivisions as f64, &coarse)
}

/// The L-shaped domain `(-1, 1)^2 \ [0, 1]^2` as three unit squares, with
/// the re-entrant corner at the origin.
pub fn create_lshape_mesh() -> Mesh {
    Mesh::from_coarse_cells([-1.0, -1.0], 1.0, &[[0, 0], [1, 0], [0, 1]]).expect("L-shape coarse cells are valid")
}

impl Mesh {
    /// Builds a mesh from a set of lattice squares of side `coarse_size`,
    /// square `[i, j]` covering `origin + coarse_size * ([i, i+1] x [j, j+1])`.
    pub fn from_coarse_cells(origin: [f64; 2], coarse_size: f64, coarse: &[[i64; 2]]) -> Result<Mesh, MeshError> {
        if coarse.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut mesh = Mesh {
            origin,
            coarse_size,
            vertices: Vec::new(),
            vertex_lookup: HashMap::new(),
            vertex_keys: Vec::new(),
            cells: Vec::new(),
            cell_lookup: HashMap::new(),
            active: Vec::new(),
            edges: Vec::new(),
            max_level: 0,
        };
        for &[i, j] in coarse {
            if mesh.cell_lookup.contains_key(&(0, i, j)) {
                return Err(MeshError::DuplicateCoarseCell(i, j));
            }
            mesh.push_cell(0, [i, j], None);
        }
        mesh.finalize();
        Ok(mesh)
    }

    fn push_cell(&mut self, level: u32, index: [i64; 2], parent: Option<usize>) -> usize {
        let s = 1i64 << (MAX_LEVEL - level);
        let x0 = index[0] * s;
        let y0 = index[1] * s;
        let corners = [[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]];
        let vertex_ids = corners.map(|k| self.vertex_for(k));
        let id = self.cells.len();
        self.cells.push(Cell { id, vertex_ids, level, parent, children: None, active: true, index });
        self.cell_lookup.insert((level, index[0], index[1]), id);
        id
    }

    fn vertex_for(&mut self, key: [i64; 2]) -> usize {
        if let Some(&id) = self.vertex_lookup.get(&key) {
            return id;
        }
        let id = self.vertices.len();
        let position = self.lattice_to_point(key, 1);
        self.vertices.push(Vertex { id, position });
        self.vertex_keys.push(key);
        self.vertex_lookup.insert(key, id);
        id
    }

    fn finalize(&mut self) {
        self.active = self.cells.iter().filter(|c| c.active).map(|c| c.id).collect();
        self.max_level = self.active.iter().map(|&c| self.cells[c].level).max().unwrap_or(0);
        self.edges = self.build_edges();
    }

    /// Converts a lattice position (in units of `1 / scale` lattice steps)
    /// to physical coordinates.
    pub fn lattice_to_point(&self, key: [i64; 2], scale: i64) -> [f64; 2] {
        let denom = (scale as f64) * (1u64 << MAX_LEVEL) as f64;
        [
            self.origin[0] + self.coarse_size * (key[0] as f64 / denom),
            self.origin[1] + self.coarse_size * (key[1] as f64 / denom),
        ]
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn coarse_size(&self) -> f64 {
        self.coarse_size
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Ids of the active cells in increasing order.
    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    pub fn active_cell_count(&self) -> usize {
        self.active.len()
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Lattice extent of a cell at the finest lattice: lower-left corner and side length.
    pub fn cell_lattice_box(&self, id: usize) -> ([i64; 2], i64) {
        let c = &self.cells[id];
        let s = 1i64 << (MAX_LEVEL - c.level);
        ([c.index[0] * s, c.index[1] * s], s)
    }

    pub fn cell_size(&self, id: usize) -> f64 {
        self.coarse_size / (1u64 << self.cells[id].level) as f64
    }

    pub fn cell_area(&self, id: usize) -> f64 {
        let h = self.cell_size(id);
        h * h
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, id: usize) -> [f64; 2] {
        self.vertices[self.cells[id].vertex_ids[0]].position
    }

    pub fn domain_area(&self) -> f64 {
        self.active.iter().map(|&c| self.cell_area(c)).sum()
    }

    /// Active cell containing a point of the fine lattice, if it lies inside
    /// the closure-free interior of some cell's half-open lattice box.
    fn active_at_lattice(&self, p: [i64; 2]) -> Option<usize> {
        let mut id = *self.cell_lookup.get(&(0, p[0] >> MAX_LEVEL, p[1] >> MAX_LEVEL))?;
        loop {
            let c = &self.cells[id];
            match c.children {
                None => return Some(id),
                Some(children) => {
                    let shift = MAX_LEVEL - c.level - 1;
                    let bx = ((p[0] >> shift) & 1) as usize;
                    let by = ((p[1] >> shift) & 1) as usize;
                    id = children[bx + 2 * by];
                }
            }
        }
    }

    /// Active cell whose closure contains the lattice point `key / scale`.
    /// Ties on shared boundaries are resolved towards the upper-right cell.
    pub fn locate_lattice(&self, key: [i64; 2], scale: i64) -> Option<usize> {
        let base = [key[0].div_euclid(scale), key[1].div_euclid(scale)];
        for d in [[0, 0], [-1, 0], [0, -1], [-1, -1]] {
            let p = [base[0] + d[0], base[1] + d[1]];
            if let Some(id) = self.active_at_lattice(p) {
                let (lo, s) = self.cell_lattice_box(id);
                let inside = (0..2).all(|k| key[k] >= lo[k] * scale && key[k] <= (lo[k] + s) * scale);
                if inside {
                    return Some(id);
                }
            }
        }
        None
    }

    /// Active cell whose closure contains a physical point.
    pub fn locate(&self, point: [f64; 2]) -> Option<usize> {
        let full = (1u64 << MAX_LEVEL) as f64;
        let key = [0, 1].map(|k| {
            let t = (point[k] - self.origin[k]) / self.coarse_size * full;
            t.floor() as i64
        });
        if !point.iter().all(|v| v.is_finite()) {
            return None;
        }
        let tol = 1e-12 * self.coarse_size.max(1.0);
        for d in [[0, 0], [-1, 0], [0, -1], [-1, -1], [1, 0], [0, 1], [1, 1]] {
            let p = [key[0] + d[0], key[1] + d[1]];
            if let Some(id) = self.active_at_lattice(p) {
                let lo = self.cell_origin(id);
                let h = self.cell_size(id);
                let inside = (0..2).all(|k| point[k] >= lo[k] - tol && point[k] <= lo[k] + h + tol);
                if inside {
                    return Some(id);
                }
            }
        }
        None
    }

    /// Lattice point just outside the midpoint of a cell side.
    fn probe(&self, id: usize, side: Side) -> [i64; 2] {
        let (lo, s) = self.cell_lattice_box(id);
        let h = s / 2;
        match side {
            Side::South => [lo[0] + h, lo[1] - 1],
            Side::East => [lo[0] + s, lo[1] + h],
            Side::North => [lo[0] + h, lo[1] + s],
            Side::West => [lo[0] - 1, lo[1] + h],
        }
    }

    /// Active neighbour across a side, or `None` on the domain boundary.
    /// When the neighbour side is refined, one of the finer cells is returned.
    pub fn neighbor(&self, id: usize, side: Side) -> Option<usize> {
        self.active_at_lattice(self.probe(id, side))
    }

    /// Vertex ids at the ends of a cell side, in increasing coordinate order.
    pub fn side_vertices(&self, id: usize, side: Side) -> [usize; 2] {
        let v = self.cells[id].vertex_ids;
        match side {
            Side::South => [v[0], v[1]],
            Side::East => [v[1], v[2]],
            Side::North => [v[3], v[2]],
            Side::West => [v[0], v[3]],
        }
    }

    fn build_edges(&self) -> Vec<Edge> {
        let mut edges = Vec::new();
        for &c in &self.active {
            let level = self.cells[c].level;
            for side in Side::ALL {
                let neighbor = self.neighbor(c, side);
                let other = match neighbor {
                    None => None,
                    Some(n) => {
                        let nl = self.cells[n].level;
                        if nl > level || (nl == level && n < c) {
                            // Emitted from the finer side or the lower id.
                            continue;
                        }
                        Some(n)
                    }
                };
                let vertex_ids = self.side_vertices(c, side);
                let length = self.cell_size(c);
                let mut normal = side.outward_normal();
                let (cells, sides) = match other {
                    None => ([Some(c), None], [Some(side), None]),
                    Some(n) if n > c => ([Some(c), Some(n)], [Some(side), Some(side.opposite())]),
                    Some(n) => {
                        normal = side.opposite().outward_normal();
                        ([Some(n), Some(c)], [Some(side.opposite()), Some(side)])
                    }
                };
                edges.push(Edge {
                    id: edges.len(),
                    vertex_ids,
                    boundary: other.is_none(),
                    length,
                    normal,
                    cells,
                    sides,
                });
            }
        }
        edges
    }

    pub fn interior_edges(&self) -> Vec<Edge> {
        self.edges.iter().filter(|e| !e.boundary).cloned().collect()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.boundary)
    }

    /// Returns a new mesh in which every flagged cell, plus whatever the
    /// one-irregularity closure requires, is split into four children.
    pub fn refine(&self, flags: &[usize]) -> Result<Mesh, MeshError> {
        for &id in flags {
            let cell = self.cells.get(id).ok_or(MeshError::UnknownCell(id))?;
            if !cell.active {
                return Err(MeshError::InactiveCell(id));
            }
        }
        let mut to_refine: BTreeSet<usize> = flags.iter().copied().collect();
        let mut stack: Vec<usize> = to_refine.iter().copied().collect();
        while let Some(c) = stack.pop() {
            let level = self.cells[c].level;
            for side in Side::ALL {
                if let Some(n) = self.neighbor(c, side) {
                    if self.cells[n].level < level && to_refine.insert(n) {
                        stack.push(n);
                    }
                }
            }
        }
        if let Some(&c) = to_refine.iter().find(|&&c| self.cells[c].level + 1 >= MAX_LEVEL) {
            return Err(MeshError::TooDeep(c));
        }

        let mut mesh = self.clone();
        for &c in &to_refine {
            let level = mesh.cells[c].level + 1;
            let [i, j] = mesh.cells[c].index;
            let mut children = [0usize; 4];
            for (k, child) in children.iter_mut().enumerate() {
                let (bx, by) = ((k % 2) as i64, (k / 2) as i64);
                *child = mesh.push_cell(level, [2 * i + bx, 2 * j + by], Some(c));
            }
            let cell = &mut mesh.cells[c];
            cell.children = Some(children);
            cell.active = false;
        }
        mesh.finalize();
        Ok(mesh)
    }

    /// Uniform refinement of every active cell.
    pub fn refine_globally(&self) -> Mesh {
        let flags = self.active.clone();
        self.refine(&flags).expect("active cells are valid flags")
    }

    /// True if `self` was obtained from `coarse` by refinement: the cell tree
    /// of `coarse` is a prefix of this one and no coarse-active cell has been
    /// lost.
    pub fn is_refinement_of(&self, coarse: &Mesh) -> bool {
        if self.cells.len() < coarse.cells.len()
            || self.origin != coarse.origin
            || self.coarse_size != coarse.coarse_size
        {
            return false;
        }
        coarse.cells.iter().zip(&self.cells).all(|(a, b)| {
            a.level == b.level
                && a.index == b.index
                && (!a.active || b.active || b.children.is_some())
                && (a.active || a.children == b.children)
        })
    }

    /// The ancestor-or-self of a cell of this mesh that is active in `coarse`.
    pub fn active_ancestor_in(&self, coarse: &Mesh, id: usize) -> Option<usize> {
        let mut c = id;
        loop {
            if c < coarse.cells.len() && coarse.cells[c].active {
                return Some(c);
            }
            c = self.cells[c].parent?;
        }
    }

    /// Largest level difference between active cells across an edge.
    pub fn max_level_jump(&self) -> u32 {
        self.edges
            .iter()
            .filter_map(|e| match e.cells {
                [Some(a), Some(b)] => Some(self.cells[a].level.abs_diff(self.cells[b].level)),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Euler characteristic V - E + F of the active mesh (F counts cells only).
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.active.len() as i64
    }

    /// Vertices lying in the interior of a neighbouring cell's side.
    pub fn hanging_vertex_count(&self) -> usize {
        let mut hanging = BTreeSet::new();
        for e in &self.edges {
            if e.is_hanging(self) {
                let (fine, side) = if self.cells[e.cells[0].unwrap()].level > self.cells[e.cells[1].unwrap()].level {
                    (e.cells[0].unwrap(), e.sides[0].unwrap())
                } else {
                    (e.cells[1].unwrap(), e.sides[1].unwrap())
                };
                let parent = self.cells[fine].parent.expect("finer cell has a parent");
                let [a, b] = self.side_vertices(fine, side);
                let [pa, pb] = self.side_vertices(parent, side);
                for v in [a, b] {
                    if v != pa && v != pb {
                        hanging.insert(v);
                    }
                }
            }
        }
        hanging.len()
    }
}
