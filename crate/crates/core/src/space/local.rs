//! Macro elements defined by a raw local spanning set and DOF functionals:
//! the nodal basis is the raw set multiplied by the inverse DOF matrix.

use super::{DofKey, FeSpace, LocalField};
use crate::bubbles::{build_psi, build_theta, face_bubble, modify_bubble};
use crate::error::{Error, Result};
use crate::linalg::{rank, singular_values, DenseMatrix};
use crate::mesh::geometry::{dist, norm};
use crate::mesh::RefinedMesh;
use crate::poly::{monomials, BaryPoly, LambdaSystem, SplitPoly, VectorField};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// Modified face bubbles `β_i` with face fluxes.
    Mf,
    /// Plain face bubbles `b_i` with face fluxes.
    Br,
    /// `P₂(K)ᵈ + span{ψ_i} + span{β_i}` (d ≥ 3).
    VR,
    /// `P₂(K)ᵈ + span{ψ_i}` (d = 2).
    VRReduced,
    /// `span{θ_i} + span{β_i}`.
    VDiv,
    /// `P₁(K)ᵈ + span{θ_i} + span{β_i}`.
    Cor68,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Mf => "MF",
            Family::Br => "BR",
            Family::VR => "VR",
            Family::VRReduced => "VR2",
            Family::VDiv => "Vdiv",
            Family::Cor68 => "P1+VS+MF",
        }
    }
}

/// Local DOF functional; vertex and face indices are local to the macro cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    VertexValue { vertex: usize, comp: usize },
    VertexDiv { vertex: usize },
    /// `∫_e v_comp` over the edge between local vertices `a < b`.
    EdgeMoment { a: usize, b: usize, comp: usize },
    /// `∫_{F_i} v·n_i` with the outward unit normal.
    FaceFlux { face: usize },
}

#[derive(Debug, Clone)]
pub struct LocalElement {
    pub family: Family,
    pub raw: Vec<VectorField<f64>>,
    pub functionals: Vec<Functional>,
    /// `D[b][a] = ℓ_b(φ_a)`.
    pub dof_matrix: DenseMatrix<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Integral of a child polynomial over the sub-face spanned by `slots`
/// (all other coordinates zero) of measure `measure`.
fn face_integral(p: &BaryPoly<f64>, slots: &[usize], measure: f64) -> f64 {
    let m = slots.len() - 1;
    let mut acc = 0.0;
    for (alpha, c) in p.terms() {
        if alpha.iter().enumerate().any(|(s, &a)| a > 0 && !slots.contains(&s)) {
            continue;
        }
        let num: f64 = slots.iter().map(|&s| factorial(alpha[s] as usize)).product();
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        acc += c * num * factorial(m) / factorial(total + m);
    }
    acc * measure
}

fn vertex_eval(ls: &LambdaSystem<f64>, p: &SplitPoly<f64>, j: usize) -> f64 {
    let child = if j == 0 { 1 } else { 0 };
    let slot = ls.slot_of(child, j + 1).expect("vertex lies on child");
    let mut lam = vec![0.0; ls.nvars()];
    lam[slot] = 1.0;
    p.pieces[child].eval_f64(&lam)
}

pub fn outward_normal(ls: &LambdaSystem<f64>, i: usize) -> (Vec<f64>, f64) {
    let g = &ls.mu_grads[i];
    let n = norm(g);
    (g.iter().map(|x| -x / n).collect(), ls.d as f64 * ls.volume * n)
}

fn apply(ls: &LambdaSystem<f64>, f: &Functional, v: &[SplitPoly<f64>], div: &SplitPoly<f64>) -> f64 {
    let d = ls.d;
    match *f {
        Functional::VertexValue { vertex, comp } => vertex_eval(ls, &v[comp], vertex),
        Functional::VertexDiv { vertex } => vertex_eval(ls, div, vertex),
        Functional::EdgeMoment { a, b, comp } => {
            let child = (0..=d).find(|i| *i != a && *i != b).expect("d ≥ 2");
            let slots = [ls.slot_of(child, a + 1).unwrap(), ls.slot_of(child, b + 1).unwrap()];
            let len = dist(&ls.macro_points[a], &ls.macro_points[b]);
            face_integral(&v[comp].pieces[child], &slots, len)
        }
        Functional::FaceFlux { face } => {
            let (n, measure) = outward_normal(ls, face);
            let slots: Vec<usize> = (1..=d).collect();
            (0..d).map(|r| n[r] * face_integral(&v[r].pieces[face], &slots, measure)).sum()
        }
    }
}

fn p_k_vector(ls: &LambdaSystem<f64>, k: usize) -> Result<Vec<VectorField<f64>>> {
    let d = ls.d;
    let mut out = Vec::new();
    for r in 0..d {
        for a in monomials(d + 1, k).iter() {
            let s = ls.restrict_macro(&BaryPoly::monomial(a, 1.0))?;
            let mut v = vec![SplitPoly::zero(d, k); d];
            v[r] = s;
            out.push(v);
        }
    }
    Ok(out)
}

fn vertex_values(d: usize) -> Vec<Functional> {
    (0..=d).flat_map(|v| (0..d).map(move |comp| Functional::VertexValue { vertex: v, comp })).collect()
}

fn vertex_divs(d: usize) -> Vec<Functional> {
    (0..=d).map(|vertex| Functional::VertexDiv { vertex }).collect()
}

fn edge_moments(d: usize) -> Vec<Functional> {
    let mut out = Vec::new();
    for a in 0..=d {
        for b in a + 1..=d {
            out.extend((0..d).map(|comp| Functional::EdgeMoment { a, b, comp }));
        }
    }
    out
}

fn fluxes(d: usize) -> Vec<Functional> {
    (0..=d).map(|face| Functional::FaceFlux { face }).collect()
}

/// Raw spanning fields and DOF functionals of a family on one split cell.
pub fn local_family(family: Family, ls: &LambdaSystem<f64>) -> Result<LocalElement> {
    let d = ls.d;
    match family {
        Family::VR if d < 3 => return Err(Error::DimensionRule("d ≥ 3 for VR; use the reduced variant in 2D".into())),
        Family::VRReduced if d != 2 => return Err(Error::DimensionRule("d = 2 for the reduced VR variant".into())),
        _ => {}
    }
    let betas = || -> Result<Vec<VectorField<f64>>> { (0..=d).map(|i| Ok(modify_bubble(ls, i)?.field)).collect() };
    let psis = || -> Result<Vec<VectorField<f64>>> { (0..=d).map(|i| Ok(build_psi(ls, i)?.field)).collect() };
    let thetas = || -> Result<Vec<VectorField<f64>>> { (0..=d).map(|i| Ok(build_theta(ls, i)?.field)).collect() };
    let (raw, functionals) = match family {
        Family::Mf => (betas()?, fluxes(d)),
        Family::Br => ((0..=d).map(|i| Ok(face_bubble(ls, i)?.field)).collect::<Result<_>>()?, fluxes(d)),
        Family::VR => {
            let mut raw = p_k_vector(ls, 2)?;
            raw.extend(psis()?);
            raw.extend(betas()?);
            let mut f = vertex_values(d);
            f.extend(vertex_divs(d));
            f.extend(edge_moments(d));
            f.extend(fluxes(d));
            (raw, f)
        }
        Family::VRReduced => {
            let mut raw = p_k_vector(ls, 2)?;
            raw.extend(psis()?);
            let mut f = vertex_values(d);
            f.extend(vertex_divs(d));
            f.extend(edge_moments(d));
            (raw, f)
        }
        Family::VDiv => {
            let mut raw = thetas()?;
            raw.extend(betas()?);
            let mut f = vertex_divs(d);
            f.extend(fluxes(d));
            (raw, f)
        }
        Family::Cor68 => {
            let mut raw = p_k_vector(ls, 1)?;
            raw.extend(thetas()?);
            raw.extend(betas()?);
            let mut f = vertex_values(d);
            f.extend(vertex_divs(d));
            f.extend(fluxes(d));
            (raw, f)
        }
    };
    let divs: Vec<SplitPoly<f64>> = raw.iter().map(|v| ls.divergence(v)).collect::<Result<_>>()?;
    let dof_matrix = DenseMatrix::from_fn(functionals.len(), raw.len(), |b, a| apply(ls, &functionals[b], &raw[a], &divs[a]));
    Ok(LocalElement { family, raw, functionals, dof_matrix })
}

#[derive(Debug, Clone, Serialize)]
pub struct UnisolvenceReport {
    pub family: Family,
    pub size: usize,
    /// Smallest singular value after row and column equilibration.
    pub sigma_min_scaled: f64,
    pub condition: f64,
}

/// Rows then columns scaled to unit max-norm.
fn equilibrate(m: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        let s = (0..a.ncols()).map(|j| a[(i, j)].abs()).fold(0.0, f64::max);
        if s > 0.0 {
            for j in 0..a.ncols() {
                a[(i, j)] /= s;
            }
        }
    }
    for j in 0..a.ncols() {
        let s = (0..a.nrows()).map(|i| a[(i, j)].abs()).fold(0.0, f64::max);
        if s > 0.0 {
            for i in 0..a.nrows() {
                a[(i, j)] /= s;
            }
        }
    }
    a
}

pub fn check_unisolvence(family: Family, ls: &LambdaSystem<f64>) -> Result<UnisolvenceReport> {
    let el = local_family(family, ls)?;
    unisolvence_of(&el)
}

fn unisolvence_of(el: &LocalElement) -> Result<UnisolvenceReport> {
    let (r, c) = (el.dof_matrix.nrows(), el.dof_matrix.ncols());
    if r != c {
        return Err(Error::SingularDofMatrix(0.0));
    }
    let s = singular_values(equilibrate(&el.dof_matrix).as_ref())?;
    let smin = s.last().copied().unwrap_or(0.0);
    let smax = s.first().copied().unwrap_or(0.0);
    let report = UnisolvenceReport { family: el.family, size: r, sigma_min_scaled: smin, condition: smax / smin };
    if !(smin >= 1e-10) {
        return Err(Error::SingularDofMatrix(smin));
    }
    Ok(report)
}

impl LocalElement {
    /// Fields dual to the functionals: `ℓ_b(ψ_a) = δ_ab`.
    pub fn nodal_basis(&self) -> Result<Vec<VectorField<f64>>> {
        unisolvence_of(self)?;
        let n = self.raw.len();
        let lu = self.dof_matrix.partial_piv_lu();
        let inv = faer::linalg::solvers::Solve::solve(&lu, DenseMatrix::<f64>::identity(n, n));
        let d = self.raw[0].len();
        let deg = self.raw.iter().flatten().map(|p| p.degree()).max().unwrap_or(0);
        let dim = self.raw[0][0].dim();
        (0..n)
            .map(|b| {
                let mut v = vec![SplitPoly::zero(dim, deg); d];
                for a in 0..n {
                    let x = inv[(a, b)];
                    if x == 0.0 {
                        continue;
                    }
                    for (o, comp) in v.iter_mut().zip(&self.raw[a]) {
                        *o = o.add(&comp.scale(&x))?;
                    }
                }
                Ok(v)
            })
            .collect()
    }
}

/// Numerical rank of a set of local fields from their stacked coefficients.
pub fn raw_rank(fields: &[VectorField<f64>]) -> Result<usize> {
    if fields.is_empty() {
        return Ok(0);
    }
    let deg = fields.iter().flatten().map(|p| p.degree()).max().unwrap_or(0);
    let cols: Vec<Vec<f64>> = fields
        .iter()
        .map(|v| v.iter().flat_map(|p| p.elevate(deg).pieces.into_iter().flat_map(|q| q.coeffs().to_vec())).collect())
        .collect();
    let m = DenseMatrix::from_fn(cols[0].len(), cols.len(), |i, j| {
        let n = norm(&cols[j]);
        if n > 0.0 { cols[j][i] / n } else { 0.0 }
    });
    rank(m.as_ref(), 1e-10)
}

/// Dimension of `P₂(Kʳ) ∩ H¹(div; K)` by two independent routes: the kernel
/// of the divergence-jump matrix on continuous piecewise quadratics, and the
/// rank of `P₂(K)ᵈ ∪ {ψ_i}`.
pub fn div_conforming_p2_dimension(ls: &LambdaSystem<f64>) -> Result<(usize, usize)> {
    let d = ls.d;
    // continuous piecewise quadratic vector fields on the split cell
    let lattice = monomials(d + 1, 2);
    let mut nodes: BTreeMap<Vec<(usize, u32)>, SplitPoly<f64>> = BTreeMap::new();
    for i in 0..=d {
        for a in lattice.iter() {
            let mut key: Vec<(usize, u32)> = a.iter().enumerate().filter(|&(_, &x)| x > 0).map(|(s, &x)| (ls.lambda_of_slot(i, s), x)).collect();
            key.sort_unstable();
            let e = nodes.entry(key).or_insert_with(|| SplitPoly::zero(d, 2));
            e.pieces[i] = super::lagrange::nodal_poly(a, 2);
        }
    }
    let mut fields: Vec<VectorField<f64>> = Vec::new();
    for p in nodes.values() {
        for r in 0..d {
            let mut v = vec![SplitPoly::zero(d, 2); d];
            v[r] = p.clone();
            fields.push(v);
        }
    }
    // divergence jumps at the vertices of every interior interface
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let divs: Vec<SplitPoly<f64>> = fields.iter().map(|v| ls.divergence(v)).collect::<Result<_>>()?;
    for a in 0..=d {
        for b in a + 1..=d {
            let mut verts = vec![0usize];
            verts.extend((0..=d).filter(|&j| j != a && j != b).map(|j| j + 1));
            for &lam in &verts {
                let at = |child: usize, p: &SplitPoly<f64>| {
                    let mut x = vec![0.0; d + 1];
                    x[ls.slot_of(child, lam).unwrap()] = 1.0;
                    p.pieces[child].eval_f64(&x)
                };
                rows.push(divs.iter().map(|p| at(a, p) - at(b, p)).collect());
            }
        }
    }
    let j = DenseMatrix::from_fn(rows.len(), fields.len(), |r, c| rows[r][c]);
    let kernel = fields.len() - rank(j.as_ref(), 1e-10)?;
    let mut span = p_k_vector(ls, 2)?;
    span.extend((0..=d).map(|i| build_psi(ls, i).map(|p| p.field)).collect::<Result<Vec<_>>>()?);
    Ok((kernel, raw_rank(&span)?))
}

/// Global space of a macro-element family with homogeneous Dirichlet
/// conditions when `dirichlet` is set (boundary values, boundary edge
/// moments and boundary fluxes removed; vertex divergences kept).
pub fn macro_element(refined: &Arc<RefinedMesh>, family: Family, dirichlet: bool) -> Result<FeSpace> {
    let d = refined.dim();
    let mesh = refined.macro_mesh();
    let ent = mesh.entities();
    let locals: Vec<(Vec<Functional>, Vec<VectorField<f64>>)> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let ls = LambdaSystem::<f64>::from_refined(refined, c)?;
            let el = local_family(family, &ls)?;
            Ok((el.functionals.clone(), el.nodal_basis()?))
        })
        .collect::<Result<_>>()?;
    let signs = super::facet_signs(refined);
    // global keys
    let mut keyed: Vec<Vec<Option<(DofKey, f64)>>> = Vec::with_capacity(locals.len());
    for (c, (funcs, _)) in locals.iter().enumerate() {
        let verts = &mesh.cells()[c].vertices;
        keyed.push(
            funcs
                .iter()
                .map(|f| match *f {
                    Functional::VertexValue { vertex, comp } => {
                        let v = verts[vertex];
                        (!(dirichlet && ent.vertex_boundary[v])).then_some((DofKey::VertexValue { vertex: v, comp }, 1.0))
                    }
                    Functional::VertexDiv { vertex } => Some((DofKey::VertexDiv { vertex: verts[vertex] }, 1.0)),
                    Functional::EdgeMoment { a, b, comp } => {
                        let (x, y) = (verts[a], verts[b]);
                        let e = ent.edge_id(x, y).expect("cell edge");
                        (!(dirichlet && ent.edges[e].boundary)).then_some((DofKey::EdgeMoment { edge: [x.min(y), x.max(y)], comp }, 1.0))
                    }
                    Functional::FaceFlux { face } => {
                        let f = &ent.facets[ent.cell_facets[c][face]];
                        (!(dirichlet && f.boundary)).then_some((DofKey::FaceFlux { facet: f.vertices.clone() }, signs[c][face] as f64))
                    }
                })
                .collect(),
        );
    }
    let mut index: BTreeMap<DofKey, usize> = keyed.iter().flatten().flatten().map(|(k, _)| (k.clone(), 0)).collect();
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let keys: Vec<(usize, DofKey)> = index.keys().map(|k| (0, k.clone())).collect();
    let cells = locals
        .into_iter()
        .zip(keyed)
        .map(|((_, basis), ks)| {
            basis
                .into_iter()
                .zip(ks)
                .filter_map(|(v, k)| k.map(|(key, s)| LocalField { dof: index[&key], comps: v.iter().map(|p| p.scale(&s)).collect() }))
                .collect()
        })
        .collect();
    let name = format!("V{}{}", family.name(), if dirichlet { "0" } else { "" });
    let _ = d;
    Ok(FeSpace::from_cells(name, refined.clone(), refined.dim(), cells, keys, None, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{reference_simplex, unit_square, SplitRule};
    use crate::rng::{random_simplex, rng};

    fn split_ref(d: usize) -> LambdaSystem<f64> {
        let m = reference_simplex(d);
        let pts = m.cell_points(0);
        let x0: Vec<f64> = (0..d).map(|_| 1.0 / (d as f64 + 1.0)).collect();
        LambdaSystem::new(&pts, &x0).unwrap()
    }

    #[test]
    fn mf_dof_matrix_is_diagonal_with_face_integrals() {
        for d in 2..=3 {
            let ls = split_ref(d);
            let el = local_family(Family::Mf, &ls).unwrap();
            for i in 0..=d {
                for j in 0..=d {
                    let want = if i == j { face_bubble(&ls, i).unwrap().face_integral } else { 0.0 };
                    assert!((el.dof_matrix[(i, j)] - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn vr_counts_in_three_dimensions() {
        let ls = split_ref(3);
        let el = local_family(Family::VR, &ls).unwrap();
        assert_eq!(el.raw.len(), 38);
        assert_eq!(raw_rank(&el.raw).unwrap(), 38);
        let count = |p: fn(&Functional) -> bool| el.functionals.iter().filter(|f| p(f)).count();
        assert_eq!(count(|f| matches!(f, Functional::VertexValue { .. })), 12);
        assert_eq!(count(|f| matches!(f, Functional::VertexDiv { .. })), 4);
        assert_eq!(count(|f| matches!(f, Functional::EdgeMoment { .. })), 18);
        assert_eq!(count(|f| matches!(f, Functional::FaceFlux { .. })), 4);
        assert!(check_unisolvence(Family::VR, &ls).is_ok());
    }

    #[test]
    fn div_conforming_quadratics() {
        assert_eq!(div_conforming_p2_dimension(&split_ref(3)).unwrap(), (34, 34));
        assert_eq!(div_conforming_p2_dimension(&split_ref(2)).unwrap(), (15, 15));
    }

    #[test]
    fn vr_requires_three_dimensions() {
        assert!(matches!(local_family(Family::VR, &split_ref(2)), Err(Error::DimensionRule(_))));
    }

    #[test]
    fn families_unisolvent_on_random_cells() {
        let mut g = rng(7, 0);
        for d in 2..=3 {
            for _ in 0..5 {
                let pts = random_simplex(d, &mut g);
                let x0 = crate::mesh::geometry::barycenter(&pts);
                let ls = LambdaSystem::new(&pts, &x0).unwrap();
                let fams: &[Family] = if d == 2 { &[Family::Mf, Family::Br, Family::VRReduced, Family::VDiv, Family::Cor68] } else { &[Family::Mf, Family::Br, Family::VR, Family::VDiv, Family::Cor68] };
                for &f in fams {
                    let r = check_unisolvence(f, &ls).unwrap();
                    assert!(r.sigma_min_scaled > 1e-8, "{f:?} {r:?}");
                }
            }
        }
    }

    #[test]
    fn nodal_basis_is_dual() {
        let ls = split_ref(2);
        let el = local_family(Family::Cor68, &ls).unwrap();
        let basis = el.nodal_basis().unwrap();
        for (a, v) in basis.iter().enumerate() {
            let div = ls.divergence(v).unwrap();
            for (b, f) in el.functionals.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((apply(&ls, f, v, &div) - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn global_mf_on_two_triangles_has_one_dof() {
        let r = Arc::new(RefinedMesh::new(&unit_square(1), SplitRule::Barycenter).unwrap());
        let s = macro_element(&r, Family::Mf, true).unwrap();
        assert_eq!(s.ndofs, 1);
        let (jump, bdry) = s.conformity_residual(6);
        assert!(jump < 1e-11 && bdry < 1e-11);
    }

    #[test]
    fn global_spaces_are_conforming() {
        let r = Arc::new(RefinedMesh::new(&unit_square(2), SplitRule::Barycenter).unwrap());
        for f in [Family::VRReduced, Family::VDiv, Family::Cor68] {
            let s = macro_element(&r, f, true).unwrap();
            let (jump, bdry) = s.conformity_residual(5);
            assert!(jump < 1e-11 && bdry < 1e-11, "{f:?} {jump} {bdry}");
        }
    }
}
