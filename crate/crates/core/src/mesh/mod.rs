//! Dimension-generic simplicial meshes and their interior-point split.

mod builtin;
mod entities;
pub mod geometry;
mod io;
mod uniform;

pub use builtin::{builtin_mesh, cube_kuhn, equilateral_triangle, reference_simplex, unit_square};
pub use entities::{EdgeEntity, EntityTables, FacetEntity};
pub use io::{read_mesh, write_mesh, parse_mesh, format_mesh};
pub use uniform::uniform_refine;

use crate::error::{Error, Result};
use geometry::{bary_gradients, barycentric_coords, diameter, norm, shape_constant, signed_volume};
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

/// A simplex as indices into a vertex table, with the sign of its volume
/// in the stored vertex order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Simplex {
    pub vertices: Vec<usize>,
    pub orientation: i8,
}

/// A conforming simplicial mesh in `ℝᵈ`.
#[derive(Debug, Clone, Serialize)]
pub struct MacroMesh {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    cells: Vec<Simplex>,
    boundary_facets: BTreeSet<Vec<usize>>,
}

/// Sorted vertex ids of the facet of `cell` opposite its local vertex `i`.
pub fn facet_key(cell: &[usize], i: usize) -> Vec<usize> {
    let mut f: Vec<usize> = cell.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
    f.sort_unstable();
    f
}

impl MacroMesh {
    /// Validates and builds a mesh: ids in range and distinct, nonzero volume,
    /// conformity (every facet shared by at most two cells and no vertex
    /// hanging on a facet). Cells are re-oriented to positive volume.
    pub fn new(vertices: Vec<Vec<f64>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let dim = vertices.first().map(|v| v.len()).ok_or_else(|| Error::DimensionMismatch("no vertices".into()))?;
        if dim == 0 {
            return Err(Error::DimensionMismatch("zero-dimensional vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!("vertex {i} has {} coordinates, expected {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::DimensionMismatch(format!("vertex {i} has non-finite coordinates")));
            }
        }
        let mut oriented = Vec::with_capacity(cells.len());
        for (c, mut ids) in cells.into_iter().enumerate() {
            if ids.len() != dim + 1 {
                return Err(Error::DimensionMismatch(format!("cell {c} lists {} vertices, expected {}", ids.len(), dim + 1)));
            }
            for &v in &ids {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange { index: v, len: vertices.len() });
                }
            }
            let distinct: BTreeSet<usize> = ids.iter().copied().collect();
            if distinct.len() != ids.len() {
                return Err(Error::DegenerateCell { cell: c, volume: 0.0 });
            }
            let pts: Vec<Vec<f64>> = ids.iter().map(|&v| vertices[v].clone()).collect();
            let vol = signed_volume(&pts);
            let h = diameter(&pts);
            if !(vol.abs() > 1e-12 * h.powi(dim as i32)) {
                return Err(Error::DegenerateCell { cell: c, volume: vol });
            }
            let orientation = if vol > 0.0 { 1 } else { -1 };
            if vol < 0.0 {
                let n = ids.len();
                ids.swap(n - 2, n - 1);
            }
            oriented.push(Simplex { vertices: ids, orientation });
        }
        let mesh = Self::from_oriented(dim, vertices, oriented);
        mesh.check_conforming()?;
        Ok(mesh)
    }

    /// Builds without validation; cells keep their vertex order.
    pub(crate) fn from_oriented(dim: usize, vertices: Vec<Vec<f64>>, cells: Vec<Simplex>) -> Self {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for cell in &cells {
            for i in 0..=dim {
                *count.entry(facet_key(&cell.vertices, i)).or_default() += 1;
            }
        }
        let boundary_facets = count.into_iter().filter(|(_, n)| *n == 1).map(|(k, _)| k).collect();
        MacroMesh { dim, vertices, cells, boundary_facets }
    }

    /// Facet-sharing and hanging-vertex test.
    pub fn check_conforming(&self) -> Result<()> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for cell in &self.cells {
            for i in 0..=self.dim {
                *count.entry(facet_key(&cell.vertices, i)).or_default() += 1;
            }
        }
        if let Some((f, n)) = count.iter().find(|(_, n)| **n > 2) {
            return Err(Error::NonConforming(format!("facet {f:?} shared by {n} cells")));
        }
        for facet in count.keys() {
            let pts: Vec<&[f64]> = facet.iter().map(|&v| self.vertices[v].as_slice()).collect();
            let (lo, hi) = bbox(&pts);
            let h = pts.iter().flat_map(|a| pts.iter().map(move |b| geometry::dist(a, b))).fold(0.0, f64::max);
            let tol = 1e-10 * h.max(1e-300);
            for (v, x) in self.vertices.iter().enumerate() {
                if facet.contains(&v) || x.iter().zip(lo.iter().zip(&hi)).any(|(xi, (l, u))| *xi < l - tol || *xi > u + tol) {
                    continue;
                }
                if point_on_facet(&pts, x, tol) {
                    return Err(Error::NonConforming(format!("vertex {v} hangs on facet {facet:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
    pub fn cells(&self) -> &[Simplex] {
        &self.cells
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn boundary_facets(&self) -> &BTreeSet<Vec<usize>> {
        &self.boundary_facets
    }
    pub fn cell_points(&self, c: usize) -> Vec<Vec<f64>> {
        self.cells[c].vertices.iter().map(|&v| self.vertices[v].clone()).collect()
    }
    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_volume(&self.cell_points(c)).abs()
    }
    pub fn total_volume(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_volume(c)).sum()
    }
    pub fn h_max(&self) -> f64 {
        (0..self.num_cells()).map(|c| diameter(&self.cell_points(c))).fold(0.0, f64::max)
    }

    /// Rigid translation of every vertex.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut m = self.clone();
        for v in &mut m.vertices {
            for (x, s) in v.iter_mut().zip(shift) {
                *x += s;
            }
        }
        m
    }

    /// Applies an affine map `x ↦ Q x + t` to every vertex (cells keep their
    /// order; `Q` should be orthogonal with positive determinant).
    pub fn transformed(&self, q: &[Vec<f64>], t: &[f64]) -> Self {
        let mut m = self.clone();
        for v in &mut m.vertices {
            let y: Vec<f64> = (0..self.dim).map(|r| (0..self.dim).map(|c| q[r][c] * v[c]).sum::<f64>() + t[r]).collect();
            *v = y;
        }
        m
    }

    pub fn entities(&self) -> EntityTables {
        EntityTables::build(self)
    }
}

fn bbox(pts: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let d = pts[0].len();
    let lo = (0..d).map(|r| pts.iter().map(|p| p[r]).fold(f64::INFINITY, f64::min)).collect();
    let hi = (0..d).map(|r| pts.iter().map(|p| p[r]).fold(f64::NEG_INFINITY, f64::max)).collect();
    (lo, hi)
}

/// Whether `x` lies on the closed (d-1)-simplex spanned by `facet`.
fn point_on_facet(facet: &[&[f64]], x: &[f64], tol: f64) -> bool {
    let d = x.len();
    let m = facet.len() - 1;
    let e: Vec<Vec<f64>> = (1..=m).map(|k| (0..d).map(|r| facet[k][r] - facet[0][r]).collect()).collect();
    let rhs: Vec<f64> = (0..d).map(|r| x[r] - facet[0][r]).collect();
    let t = if m == 0 {
        vec![]
    } else {
        let gram: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum()).collect()).collect();
        let b: Vec<f64> = (0..m).map(|i| e[i].iter().zip(&rhs).map(|(a, b)| a * b).sum()).collect();
        match crate::scalar::gauss_solve(gram, b) {
            Some(t) => t,
            None => return false,
        }
    };
    let mut r = rhs.clone();
    for (k, tk) in t.iter().enumerate() {
        for i in 0..d {
            r[i] -= tk * e[k][i];
        }
    }
    let scale = e.iter().map(|v| norm(v)).fold(0.0, f64::max).max(1e-300);
    norm(&r) <= tol && t.iter().all(|&tk| tk >= -tol / scale) && t.iter().sum::<f64>() <= 1.0 + tol / scale
}

/// How to place the interior split point of each cell.
#[derive(Debug, Clone)]
pub enum SplitRule {
    Barycenter,
    Explicit(Vec<Vec<f64>>),
}

/// Geometry of facet `F_i` of a split cell.
#[derive(Debug, Clone, Serialize)]
pub struct FaceGeometry {
    pub face_vertices: Vec<usize>,
    pub unit_normal: Vec<f64>,
    pub measure: f64,
    /// Distance from the split point to the hyperplane of the facet.
    pub split_distance: f64,
}

/// A macro mesh together with its interior-point split. Child `i` of a cell
/// omits the cell's local vertex `i` and stores `[x0, x_0, .., x_d] \ {x_i}`.
#[derive(Debug, Clone)]
pub struct RefinedMesh {
    macro_mesh: MacroMesh,
    split_points: Vec<Vec<f64>>,
    fine: MacroMesh,
}

impl RefinedMesh {
    pub fn new(mesh: &MacroMesh, rule: SplitRule) -> Result<Self> {
        let d = mesh.dim();
        let split_points: Vec<Vec<f64>> = match rule {
            SplitRule::Barycenter => (0..mesh.num_cells()).map(|c| geometry::barycenter(&mesh.cell_points(c))).collect(),
            SplitRule::Explicit(pts) => {
                if pts.len() != mesh.num_cells() {
                    return Err(Error::DimensionMismatch(format!("{} split points for {} cells", pts.len(), mesh.num_cells())));
                }
                for (c, p) in pts.iter().enumerate() {
                    if p.len() != d {
                        return Err(Error::DimensionMismatch(format!("split point {c} has {} coordinates", p.len())));
                    }
                    let mu = barycentric_coords(&mesh.cell_points(c), p).ok_or(Error::DegenerateCell { cell: c, volume: 0.0 })?;
                    if mu.iter().any(|&m| m < -1e-12) {
                        return Err(Error::SplitPointOutside(c));
                    }
                    if mu.iter().any(|&m| m <= 1e-12) {
                        return Err(Error::SplitPointOnBoundary(c));
                    }
                }
                pts
            }
        };
        let nv = mesh.num_vertices();
        let mut vertices = mesh.vertices().to_vec();
        vertices.extend(split_points.iter().cloned());
        let mut cells = Vec::with_capacity(mesh.num_cells() * (d + 1));
        for (c, cell) in mesh.cells().iter().enumerate() {
            for i in 0..=d {
                let mut ids = vec![nv + c];
                ids.extend(cell.vertices.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
                // moving x0 from slot i to slot 0 costs i transpositions
                let orientation = if i % 2 == 0 { 1 } else { -1 };
                cells.push(Simplex { vertices: ids, orientation });
            }
        }
        let fine = MacroMesh::from_oriented(d, vertices, cells);
        Ok(RefinedMesh { macro_mesh: mesh.clone(), split_points, fine })
    }

    pub fn dim(&self) -> usize {
        self.macro_mesh.dim()
    }
    pub fn macro_mesh(&self) -> &MacroMesh {
        &self.macro_mesh
    }
    /// The refined triangulation as a mesh in its own right; cell
    /// `c * (d + 1) + i` is child `i` of macro cell `c`.
    pub fn fine_mesh(&self) -> &MacroMesh {
        &self.fine
    }
    pub fn num_cells(&self) -> usize {
        self.macro_mesh.num_cells()
    }
    pub fn split_point(&self, c: usize) -> &[f64] {
        &self.split_points[c]
    }
    pub fn split_vertex_id(&self, c: usize) -> usize {
        self.macro_mesh.num_vertices() + c
    }
    pub fn child(&self, c: usize, i: usize) -> &Simplex {
        &self.fine.cells()[c * (self.dim() + 1) + i]
    }
    pub fn child_points(&self, c: usize, i: usize) -> Vec<Vec<f64>> {
        self.fine.cell_points(c * (self.dim() + 1) + i)
    }
    pub fn child_volumes(&self, c: usize) -> Vec<f64> {
        (0..=self.dim()).map(|i| signed_volume(&self.child_points(c, i)).abs()).collect()
    }

    pub fn face_geometry(&self, c: usize, i: usize) -> Result<FaceGeometry> {
        let d = self.dim();
        if c >= self.num_cells() {
            return Err(Error::IndexOutOfRange { index: c, len: self.num_cells() });
        }
        if i > d {
            return Err(Error::IndexOutOfRange { index: i, len: d + 1 });
        }
        let pts = self.macro_mesh.cell_points(c);
        let grads = bary_gradients(&pts).ok_or(Error::DegenerateCell { cell: c, volume: 0.0 })?;
        let gnorm = norm(&grads[i]);
        let unit_normal: Vec<f64> = grads[i].iter().map(|g| -g / gnorm).collect();
        let vol = signed_volume(&pts).abs();
        let mu = barycentric_coords(&pts, &self.split_points[c]).ok_or(Error::DegenerateCell { cell: c, volume: 0.0 })?;
        let cell = &self.macro_mesh.cells()[c].vertices;
        Ok(FaceGeometry {
            face_vertices: cell.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect(),
            unit_normal,
            measure: d as f64 * vol * gnorm,
            split_distance: mu[i] / gnorm,
        })
    }

    pub fn shape_report(&self, threshold: f64) -> ShapeReport {
        let d = self.dim();
        let mut cells = Vec::new();
        let mut refined = Vec::new();
        let mut flagged = Vec::new();
        for c in 0..self.num_cells() {
            cells.push(CellShape::of(&self.macro_mesh.cell_points(c)));
            let children: Vec<CellShape> = (0..=d).map(|i| CellShape::of(&self.child_points(c, i))).collect();
            for (i, ch) in children.iter().enumerate() {
                if ch.shape_constant > threshold {
                    flagged.push((c, i));
                }
            }
            let max_child = children.iter().map(|s| s.shape_constant).fold(0.0, f64::max);
            refined.push(RefinedShape { children, max_child_constant: max_child });
        }
        ShapeReport { cells, refined, flagged, threshold }
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let m = self.macro_mesh.translated(shift);
        let pts = self.split_points.iter().map(|p| p.iter().zip(shift).map(|(a, b)| a + b).collect()).collect();
        RefinedMesh::new(&m, SplitRule::Explicit(pts)).expect("translation preserves validity")
    }
}

/// Threshold above which a child's shape constant is flagged (warning only).
pub const SHAPE_WARN_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, Serialize)]
pub struct CellShape {
    pub diameter: f64,
    pub inradius: f64,
    pub shape_constant: f64,
}

impl CellShape {
    fn of(pts: &[Vec<f64>]) -> Self {
        let h = diameter(pts);
        let rho = geometry::inradius(pts).unwrap_or(0.0);
        CellShape { diameter: h, inradius: rho, shape_constant: shape_constant(pts).unwrap_or(f64::INFINITY) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinedShape {
    pub children: Vec<CellShape>,
    pub max_child_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeReport {
    pub cells: Vec<CellShape>,
    pub refined: Vec<RefinedShape>,
    /// `(macro cell, child)` pairs whose shape constant exceeds the threshold.
    pub flagged: Vec<(usize, usize)>,
    pub threshold: f64,
}
