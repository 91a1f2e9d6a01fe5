//! Bundled meshes.

use super::MacroMesh;
use crate::error::{Error, Result};

/// Reference simplex `{0, e_1, .., e_d}`.
pub fn reference_simplex(d: usize) -> MacroMesh {
    let mut v = vec![vec![0.0; d]];
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        v.push(e);
    }
    MacroMesh::new(v, vec![(0..=d).collect()]).expect("reference simplex")
}

pub fn equilateral_triangle() -> MacroMesh {
    let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]];
    MacroMesh::new(v, vec![vec![0, 1, 2]]).expect("equilateral triangle")
}

/// `n × n` grid on the unit square, every square cut along the same diagonal.
pub fn unit_square(n: usize) -> MacroMesh {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(vec![i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    MacroMesh::new(v, cells).expect("structured square")
}

/// `n³` cubes on the unit cube, each split into the six Kuhn tetrahedra.
pub fn cube_kuhn(n: usize) -> MacroMesh {
    let id = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
    let mut v = Vec::new();
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                v.push(vec![i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for p in PERMS {
                    let mut c = [i, j, k];
                    let mut cell = vec![id(c[0], c[1], c[2])];
                    for axis in p {
                        c[axis] += 1;
                        cell.push(id(c[0], c[1], c[2]));
                    }
                    cells.push(cell);
                }
            }
        }
    }
    MacroMesh::new(v, cells).expect("Kuhn cube")
}

/// Looks up a bundled mesh: `tri1`, `square2`, `squareN`, `tet1`, `cube6`,
/// `cubeN`, `simplexD`. `n` is the grid resolution for the `N` families and
/// the dimension for `simplexD`. A trailing number (`square8`, `cube2`,
/// `simplex4`) may be used instead of `n`; `square2` and `cube6` name the
/// two- and six-cell meshes.
pub fn builtin_mesh(name: &str, n: Option<usize>) -> Result<MacroMesh> {
    let unknown = || Error::UnsupportedKind(format!("unknown builtin mesh `{name}`"));
    match name {
        "tri1" => return Ok(reference_simplex(2)),
        "tet1" => return Ok(reference_simplex(3)),
        "square2" => return Ok(unit_square(1)),
        "cube6" => return Ok(cube_kuhn(1)),
        "squareN" => return Ok(unit_square(n.unwrap_or(2).max(1))),
        "cubeN" => return Ok(cube_kuhn(n.unwrap_or(1).max(1))),
        "simplexD" => {
            let d = n.ok_or_else(|| Error::DimensionRule("simplexD needs a dimension".into()))?;
            if d == 0 {
                return Err(Error::DimensionRule("dimension must be positive".into()));
            }
            return Ok(reference_simplex(d));
        }
        _ => {}
    }
    let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
    let num: usize = name[split..].parse().map_err(|_| unknown())?;
    if num == 0 {
        return Err(unknown());
    }
    match &name[..split] {
        "square" => Ok(unit_square(num)),
        "cube" => Ok(cube_kuhn(num)),
        "simplex" => Ok(reference_simplex(num)),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_volumes() {
        assert!((unit_square(4).total_volume() - 1.0).abs() < 1e-14);
        assert!((cube_kuhn(2).total_volume() - 1.0).abs() < 1e-14);
        assert_eq!(cube_kuhn(2).num_cells(), 48);
    }

    #[test]
    fn names() {
        assert_eq!(builtin_mesh("square2", None).unwrap().num_cells(), 2);
        assert_eq!(builtin_mesh("square4", None).unwrap().num_cells(), 32);
        assert_eq!(builtin_mesh("squareN", Some(3)).unwrap().num_cells(), 18);
        assert_eq!(builtin_mesh("cube6", None).unwrap().num_cells(), 6);
        assert_eq!(builtin_mesh("simplexD", Some(4)).unwrap().dim(), 4);
        assert!(builtin_mesh("donut", None).is_err());
    }
}
