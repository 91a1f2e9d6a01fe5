//! Global finite element spaces on a split mesh.
//!
//! Every space, including the ones defined on the macro mesh, is stored per
//! macro cell as a list of local fields written on the cell's children. A
//! global basis function is the sum of all local fields carrying its id.

mod assembly;
mod catalog;
mod lagrange;
mod local;
mod tab;

pub use assembly::{assemble, divergence_image_check, AssembledOperators, DivergenceImageReport};
pub use catalog::{build_pair, PairKind, StokesPair, ALL_PAIRS};
pub use lagrange::{lagrange, Level};
pub use local::{
    check_unisolvence, div_conforming_p2_dimension, local_family, macro_element, raw_rank, Family, Functional, LocalElement,
    UnisolvenceReport,
};
pub use tab::{CellTab, ChildTab};

use crate::error::{Error, Result};
use crate::linalg::{rank, DenseMatrix};
use crate::mesh::RefinedMesh;
use crate::poly::{LambdaSystem, SplitPoly};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Identifies a global degree of freedom. Vertex ids refer to the fine mesh
/// for nodes of refined-level spaces and to the macro mesh otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DofKey {
    /// Lagrange node as sorted `(vertex, multiplicity)` pairs; `owner` is
    /// the cell for broken spaces.
    Node { support: Vec<(usize, u32)>, owner: Option<usize>, comp: usize },
    VertexValue { vertex: usize, comp: usize },
    VertexDiv { vertex: usize },
    EdgeMoment { edge: [usize; 2], comp: usize },
    FaceFlux { facet: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct LocalField {
    pub dof: usize,
    pub comps: Vec<SplitPoly<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct DofMap {
    /// `(summand, key)` for every global id.
    pub keys: Vec<(usize, DofKey)>,
    /// Global ids touching each macro cell, ascending.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Per macro cell and local face: `+1` when the canonical facet normal
    /// is the cell's outward normal.
    pub facet_signs: Vec<Vec<i8>>,
}

impl DofMap {
    pub fn index(&self) -> BTreeMap<(usize, DofKey), usize> {
        self.keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    pub name: String,
    pub refined: Arc<RefinedMesh>,
    pub ncomp: usize,
    pub ndofs: usize,
    /// Common polynomial degree of every piece.
    pub degree: usize,
    pub cells: Vec<Vec<LocalField>>,
    pub dofmap: DofMap,
    /// Coefficients of the constant function `1` when it lies in the space.
    pub constant: Option<Vec<f64>>,
    pub continuous: bool,
}

impl FeSpace {
    pub(crate) fn from_cells(
        name: String,
        refined: Arc<RefinedMesh>,
        ncomp: usize,
        cells: Vec<Vec<LocalField>>,
        keys: Vec<(usize, DofKey)>,
        constant: Option<Vec<f64>>,
        continuous: bool,
    ) -> Self {
        let degree = cells.iter().flatten().flat_map(|f| f.comps.iter().map(|c| c.degree())).max().unwrap_or(0);
        let cells: Vec<Vec<LocalField>> = cells
            .into_iter()
            .map(|fs| fs.into_iter().map(|f| LocalField { dof: f.dof, comps: f.comps.iter().map(|c| c.elevate(degree)).collect() }).collect())
            .collect();
        let cell_dofs = cells
            .iter()
            .map(|fs| {
                let mut v: Vec<usize> = fs.iter().map(|f| f.dof).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let facet_signs = facet_signs(&refined);
        FeSpace { name, ndofs: keys.len(), refined, ncomp, degree, cells, dofmap: DofMap { keys, cell_dofs, facet_signs }, constant, continuous }
    }

    pub fn dim(&self) -> usize {
        self.refined.dim()
    }

    /// Global field with coefficients `coef`, restricted to macro cell `c`.
    pub fn local_function(&self, c: usize, coef: &[f64]) -> Vec<SplitPoly<f64>> {
        let d = self.dim();
        let mut out = vec![SplitPoly::zero(d, self.degree); self.ncomp];
        for f in &self.cells[c] {
            let a = coef[f.dof];
            if a == 0.0 {
                continue;
            }
            for (o, comp) in out.iter_mut().zip(&f.comps) {
                *o = o.add(&comp.scale(&a)).expect("same cell");
            }
        }
        out
    }

    /// Largest jump of basis functions across interior macro facets and,
    /// for spaces with homogeneous boundary values, largest boundary value,
    /// sampled on a lattice of order `n` on every facet.
    pub fn conformity_residual(&self, n: usize) -> (f64, f64) {
        let d = self.dim();
        let mesh = self.refined.macro_mesh();
        let ent = mesh.entities();
        let lattice = crate::poly::monomials(d, n);
        let mut jump: f64 = 0.0;
        let mut bdry: f64 = 0.0;
        for f in &ent.facets {
            // sample points on the facet as macro barycentric weights per cell
            let pts: Vec<Vec<f64>> = lattice
                .iter()
                .map(|w| {
                    (0..d).map(|r| w.iter().zip(&f.vertices).map(|(&wi, &v)| wi as f64 * mesh.vertices()[v][r]).sum::<f64>() / n as f64).collect()
                })
                .collect();
            let values = |c: usize, i: usize| -> BTreeMap<usize, Vec<Vec<f64>>> {
                let ls = LambdaSystem::<f64>::from_refined(&self.refined, c).expect("valid cell");
                let mut m: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
                for fld in &self.cells[c] {
                    let vals: Vec<Vec<f64>> = pts.iter().map(|x| {
                        let lam = ls.child_coords(i, x);
                        fld.comps.iter().map(|p| p.pieces[i].eval_f64(&lam)).collect()
                    }).collect();
                    let e = m.entry(fld.dof).or_insert_with(|| vec![vec![0.0; self.ncomp]; pts.len()]);
                    for (a, b) in e.iter_mut().zip(vals) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                    }
                }
                m
            };
            if f.boundary {
                let (c, i) = f.cells[0];
                for v in values(c, i).values() {
                    for x in v.iter().flatten() {
                        bdry = bdry.max(x.abs());
                    }
                }
            } else {
                let (c0, i0) = f.cells[0];
                let (c1, i1) = f.cells[1];
                let a = values(c0, i0);
                let b = values(c1, i1);
                let zero = vec![vec![0.0; self.ncomp]; pts.len()];
                for dof in a.keys().chain(b.keys()) {
                    let va = a.get(dof).unwrap_or(&zero);
                    let vb = b.get(dof).unwrap_or(&zero);
                    for (x, y) in va.iter().flatten().zip(vb.iter().flatten()) {
                        jump = jump.max((x - y).abs());
                    }
                }
            }
        }
        (jump, bdry)
    }
}

fn facet_signs(refined: &RefinedMesh) -> Vec<Vec<i8>> {
    let mesh = refined.macro_mesh();
    let ent = mesh.entities();
    ent.cell_facets
        .iter()
        .enumerate()
        .map(|(c, fs)| fs.iter().map(|&f| if ent.facets[f].cells[0].0 == c { 1 } else { -1 }).collect())
        .collect()
}

/// Direct sum of spaces on the same split mesh. Fails with
/// `DirectSumDependent` when the union of local fields on some macro cell is
/// linearly dependent.
pub fn direct_sum(name: &str, parts: &[&FeSpace]) -> Result<FeSpace> {
    let space = FeSpace::union_unchecked(name, parts)?;
    for c in 0..space.cells.len() {
        if local_rank(&space, c)? < space.dofmap.cell_dofs[c].len() {
            return Err(Error::DirectSumDependent(c));
        }
    }
    Ok(space)
}

impl FeSpace {
    /// Concatenation of the bases of `parts` without an independence check.
    pub fn union_unchecked(name: &str, parts: &[&FeSpace]) -> Result<FeSpace> {
        let first = parts.first().ok_or_else(|| Error::UnsupportedKind("empty direct sum".into()))?;
        for p in parts {
            if !same_mesh(&p.refined, &first.refined) || p.ncomp != first.ncomp {
                return Err(Error::MeshMismatch);
            }
        }
        let mut cells: Vec<Vec<LocalField>> = vec![Vec::new(); first.cells.len()];
        let mut keys = Vec::new();
        let mut offset = 0;
        for (s, p) in parts.iter().enumerate() {
            for (c, fs) in p.cells.iter().enumerate() {
                cells[c].extend(fs.iter().map(|f| LocalField { dof: f.dof + offset, comps: f.comps.clone() }));
            }
            keys.extend(p.dofmap.keys.iter().map(|(_, k)| (s, k.clone())));
            offset += p.ndofs;
        }
        Ok(FeSpace::from_cells(name.to_string(), first.refined.clone(), first.ncomp, cells, keys, None, parts.iter().all(|p| p.continuous)))
    }
}

/// Rank of the restrictions to macro cell `c` of the basis functions that
/// touch it, from the column-normalized coefficient matrix.
pub fn local_rank(space: &FeSpace, c: usize) -> Result<usize> {
    let dofs = &space.dofmap.cell_dofs[c];
    let pos: BTreeMap<usize, usize> = dofs.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); dofs.len()];
    let len = space.cells[c].first().map(|f| f.comps.iter().map(|p| p.pieces.iter().map(|q| q.coeffs().len()).sum::<usize>()).sum()).unwrap_or(0);
    for col in cols.iter_mut() {
        *col = vec![0.0; len];
    }
    for f in &space.cells[c] {
        let col = &mut cols[pos[&f.dof]];
        let mut k = 0;
        for p in &f.comps {
            for q in &p.pieces {
                for v in q.coeffs() {
                    col[k] += v;
                    k += 1;
                }
            }
        }
    }
    let m = DenseMatrix::from_fn(len, dofs.len(), |i, j| {
        let n = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 { cols[j][i] / n } else { 0.0 }
    });
    rank(m.as_ref(), 1e-10)
}

pub(crate) fn same_mesh(a: &Arc<RefinedMesh>, b: &Arc<RefinedMesh>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.macro_mesh().vertices() == b.macro_mesh().vertices()
            && a.macro_mesh().cells() == b.macro_mesh().cells()
            && (0..a.num_cells()).all(|c| a.split_point(c) == b.split_point(c)))
}
