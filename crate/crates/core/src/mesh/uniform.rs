//! Uniform refinement: red refinement of triangles and Bey's eight-tetrahedron
//! refinement in 3D.

use super::MacroMesh;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

pub fn uniform_refine(mesh: &MacroMesh) -> Result<MacroMesh> {
    let d = mesh.dim();
    if d != 2 && d != 3 {
        return Err(Error::DimensionRule(format!("uniform refinement is available for d = 2, 3, not d = {d}")));
    }
    let mut vertices = mesh.vertices().to_vec();
    let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let p = vertices[a].iter().zip(&vertices[b]).map(|(x, y)| 0.5 * (x + y)).collect();
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::new();
    for cell in mesh.cells() {
        let x = &cell.vertices;
        if d == 2 {
            let m01 = midpoint(x[0], x[1], &mut vertices);
            let m02 = midpoint(x[0], x[2], &mut vertices);
            let m12 = midpoint(x[1], x[2], &mut vertices);
            cells.push(vec![x[0], m01, m02]);
            cells.push(vec![m01, x[1], m12]);
            cells.push(vec![m02, m12, x[2]]);
            cells.push(vec![m01, m12, m02]);
        } else {
            let x01 = midpoint(x[0], x[1], &mut vertices);
            let x02 = midpoint(x[0], x[2], &mut vertices);
            let x03 = midpoint(x[0], x[3], &mut vertices);
            let x12 = midpoint(x[1], x[2], &mut vertices);
            let x13 = midpoint(x[1], x[3], &mut vertices);
            let x23 = midpoint(x[2], x[3], &mut vertices);
            cells.push(vec![x[0], x01, x02, x03]);
            cells.push(vec![x01, x[1], x12, x13]);
            cells.push(vec![x02, x12, x[2], x23]);
            cells.push(vec![x03, x13, x23, x[3]]);
            cells.push(vec![x01, x02, x03, x13]);
            cells.push(vec![x01, x02, x12, x13]);
            cells.push(vec![x02, x03, x13, x23]);
            cells.push(vec![x02, x12, x13, x23]);
        }
    }
    MacroMesh::new(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cube_kuhn, reference_simplex, unit_square};

    #[test]
    fn red_refinement_quadruples() {
        let r = uniform_refine(&unit_square(2)).unwrap();
        assert_eq!(r.num_cells(), 32);
        assert_eq!(r.num_vertices(), 25);
        assert!((r.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bey_refinement_is_conforming_with_equal_volumes() {
        let t = uniform_refine(&reference_simplex(3)).unwrap();
        assert_eq!(t.num_cells(), 8);
        for c in 0..8 {
            assert!((t.cell_volume(c) - 1.0 / 48.0).abs() < 1e-15);
        }
        let r = uniform_refine(&cube_kuhn(1)).unwrap();
        assert_eq!(r.num_cells(), 48);
        assert!((r.total_volume() - 1.0).abs() < 1e-14);
    }
}
