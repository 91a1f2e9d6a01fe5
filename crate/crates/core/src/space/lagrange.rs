//! Equispaced Lagrange spaces on the macro mesh or on its split.

use super::{DofKey, FeSpace, LocalField};
use crate::error::{Error, Result};
use crate::mesh::RefinedMesh;
use crate::poly::{monomials, BaryPoly, Continuity, LambdaSystem, MultiIndex, SplitPoly};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub const MAX_LAGRANGE_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Macro,
    Refined,
}

/// Nodal basis function of the lattice point `alpha / k`:
/// `Π_s Π_{m<α_s} (k λ_s − m) / (m + 1)`, made homogeneous with `Σλ = 1`.
pub fn nodal_poly(alpha: &[u32], k: usize) -> BaryPoly<f64> {
    let n = alpha.len();
    let mut p = BaryPoly::constant(n, 1.0);
    for (s, &a) in alpha.iter().enumerate() {
        for m in 0..a {
            let mut c = vec![-(m as f64) / (m as f64 + 1.0); n];
            c[s] += k as f64 / (m as f64 + 1.0);
            p = p.mul(&BaryPoly::linear(c)).expect("same arity");
        }
    }
    p.elevate(k)
}

fn support_key(vertices: &[usize], alpha: &MultiIndex) -> Vec<(usize, u32)> {
    let mut s: Vec<(usize, u32)> = vertices.iter().zip(alpha).filter(|&(_, &a)| a > 0).map(|(&v, &a)| (v, a)).collect();
    s.sort_unstable();
    s
}

fn on_boundary(support: &[(usize, u32)], vertex_facets: &BTreeMap<usize, Vec<usize>>, list: &[&Vec<usize>]) -> bool {
    let Some(&(v0, _)) = support.first() else { return false };
    vertex_facets
        .get(&v0)
        .map(|ids| ids.iter().any(|&f| support.iter().all(|(v, _)| list[f].binary_search(v).is_ok())))
        .unwrap_or(false)
}

/// Lagrange space of degree `k` with `ncomp` components.
///
/// `continuous = false` gives the broken space (one node set per cell of
/// the chosen level); `dirichlet` removes nodes on the domain boundary.
pub fn lagrange(refined: &Arc<RefinedMesh>, level: Level, k: usize, continuous: bool, ncomp: usize, dirichlet: bool) -> Result<FeSpace> {
    if k > MAX_LAGRANGE_DEGREE {
        return Err(Error::DegreeTooHigh(k));
    }
    if continuous && k == 0 {
        return Err(Error::UnsupportedKind("continuous P0".into()));
    }
    let d = refined.dim();
    let mesh = refined.macro_mesh();
    let lattice = monomials(d + 1, k);
    let nodal: Vec<BaryPoly<f64>> = lattice.iter().map(|a| nodal_poly(a, k)).collect();
    let facets = mesh.boundary_facets();
    let list: Vec<&Vec<usize>> = facets.iter().collect();
    let mut vertex_facets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in list.iter().enumerate() {
        for &v in f.iter() {
            vertex_facets.entry(v).or_default().push(i);
        }
    }

    // per cell: node key -> scalar split polynomial
    let mut local: Vec<BTreeMap<DofKey, SplitPoly<f64>>> = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let mut m: BTreeMap<DofKey, SplitPoly<f64>> = BTreeMap::new();
        match level {
            Level::Macro => {
                let ls = LambdaSystem::<f64>::from_refined(refined, c)?;
                let verts = &mesh.cells()[c].vertices;
                for (a, p) in lattice.iter().zip(&nodal) {
                    let support = support_key(verts, a);
                    let owner = (!continuous).then_some(c);
                    let mut sp = ls.restrict_macro(p)?;
                    sp.continuity = Continuity::C0;
                    m.insert(DofKey::Node { support, owner, comp: 0 }, sp);
                }
            }
            Level::Refined => {
                for i in 0..=d {
                    let verts = &refined.child(c, i).vertices;
                    for (a, p) in lattice.iter().zip(&nodal) {
                        let support = support_key(verts, a);
                        let owner = (!continuous).then_some(c * (d + 1) + i);
                        let e = m.entry(DofKey::Node { support, owner, comp: 0 }).or_insert_with(|| {
                            let mut z = SplitPoly::zero(d, k);
                            z.continuity = if continuous { Continuity::C0 } else { Continuity::L2 };
                            z
                        });
                        e.pieces[i] = p.clone();
                    }
                }
            }
        }
        local.push(m);
    }

    let mut keys: BTreeSet<DofKey> = BTreeSet::new();
    for m in &local {
        for key in m.keys() {
            if let DofKey::Node { support, .. } = key {
                if dirichlet && continuous && on_boundary(support, &vertex_facets, &list) {
                    continue;
                }
            }
            keys.insert(key.clone());
        }
    }
    let mut all_keys = Vec::with_capacity(keys.len() * ncomp);
    let mut index = BTreeMap::new();
    for key in &keys {
        for r in 0..ncomp {
            let DofKey::Node { support, owner, .. } = key else { unreachable!() };
            let k2 = DofKey::Node { support: support.clone(), owner: *owner, comp: r };
            index.insert(k2.clone(), all_keys.len());
            all_keys.push((0, k2));
        }
    }
    let cells = local
        .into_iter()
        .map(|m| {
            let mut fs = Vec::new();
            for (key, p) in m {
                let DofKey::Node { support, owner, .. } = &key else { unreachable!() };
                for r in 0..ncomp {
                    let Some(&dof) = index.get(&DofKey::Node { support: support.clone(), owner: *owner, comp: r }) else { continue };
                    let mut comps = vec![SplitPoly::zero(d, k); ncomp];
                    comps[r] = p.clone();
                    fs.push(LocalField { dof, comps });
                }
            }
            fs
        })
        .collect();
    let constant = (ncomp == 1 && !dirichlet).then(|| vec![1.0; all_keys.len()]);
    let level_name = match level {
        Level::Macro => "",
        Level::Refined => "r",
    };
    let name = format!("{}P{}{}{}", if dirichlet { "o" } else { "" }, k, if continuous { "c" } else { "" }, level_name);
    Ok(FeSpace::from_cells(name, refined.clone(), ncomp, cells, all_keys, constant, continuous))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{reference_simplex, unit_square, SplitRule};

    fn split(m: &crate::mesh::MacroMesh) -> Arc<RefinedMesh> {
        Arc::new(RefinedMesh::new(m, SplitRule::Barycenter).unwrap())
    }

    #[test]
    fn nodal_polys_are_kronecker() {
        for n in 2..=4 {
            for k in 1..=3 {
                let lat = monomials(n, k);
                for a in lat.iter() {
                    let p = nodal_poly(a, k);
                    for b in lat.iter() {
                        let x: Vec<f64> = b.iter().map(|&v| v as f64 / k as f64).collect();
                        let want = if a == b { 1.0 } else { 0.0 };
                        assert!((p.eval_f64(&x) - want).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn dimensions_on_split_square() {
        // two triangles: 4 + 2 split vertices, 5 + 6 edges
        let r = split(&unit_square(1));
        assert_eq!(lagrange(&r, Level::Refined, 1, true, 1, false).unwrap().ndofs, 6);
        assert_eq!(lagrange(&r, Level::Refined, 2, true, 1, false).unwrap().ndofs, 6 + 11);
        assert_eq!(lagrange(&r, Level::Refined, 2, true, 2, true).unwrap().ndofs, 2 * (2 + 7));
        assert_eq!(lagrange(&r, Level::Refined, 1, false, 1, false).unwrap().ndofs, 18);
        assert_eq!(lagrange(&r, Level::Refined, 0, false, 1, false).unwrap().ndofs, 6);
        assert_eq!(lagrange(&r, Level::Macro, 0, false, 1, false).unwrap().ndofs, 2);
        assert_eq!(lagrange(&r, Level::Macro, 2, true, 1, true).unwrap().ndofs, 1);
        assert_eq!(lagrange(&r, Level::Macro, 1, true, 1, true).unwrap().ndofs, 0);
    }

    #[test]
    fn refined_interior_nodes_of_a_tetrahedron() {
        // P3 on the split tet: split vertex, 2 nodes on each of 4 inner
        // edges, 1 node on each of 6 inner faces
        let r = split(&reference_simplex(3));
        assert_eq!(lagrange(&r, Level::Refined, 3, true, 1, true).unwrap().ndofs, 1 + 8 + 6);
    }

    #[test]
    fn continuous_and_vanishing_on_boundary() {
        let r = split(&unit_square(2));
        let s = lagrange(&r, Level::Refined, 2, true, 2, true).unwrap();
        let (jump, bdry) = s.conformity_residual(4);
        assert!(jump < 1e-12 && bdry < 1e-12, "{jump} {bdry}");
        let s = lagrange(&r, Level::Macro, 3, true, 1, false).unwrap();
        assert!(s.conformity_residual(5).0 < 1e-12);
    }
}
