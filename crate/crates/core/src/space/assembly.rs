//! Stiffness, mass and divergence operators.

use super::{same_mesh, CellTab, FeSpace};
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, SparseSpd};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// `∫ ∇u : ∇v`.
    pub a: SparseMatrix,
    /// `A` plus the vector mass matrix.
    pub m_u: SparseMatrix,
    /// `B[q, v] = ∫ q div v`.
    pub b: SparseMatrix,
    pub m_p: SparseMatrix,
    pub quadrature_degree: usize,
}

struct LocalOps {
    vdofs: Vec<usize>,
    pdofs: Vec<usize>,
    a: Vec<f64>,
    m: Vec<f64>,
    b: Vec<f64>,
    mp: Vec<f64>,
}

pub fn assemble(vel: &FeSpace, pres: &FeSpace) -> Result<AssembledOperators> {
    if !same_mesh(&vel.refined, &pres.refined) {
        return Err(Error::MeshMismatch);
    }
    let deg = (2 * vel.degree).max(vel.degree + pres.degree).max(2 * pres.degree).max(1);
    let locals: Vec<LocalOps> = (0..vel.cells.len())
        .into_par_iter()
        .map(|c| {
            let tv = CellTab::new(vel, c, deg, true)?;
            let tp = CellTab::new(pres, c, deg, false)?;
            let (nv, np) = (tv.dofs.len(), tp.dofs.len());
            let (nc, d) = (vel.ncomp, vel.dim());
            let mut a = vec![0.0; nv * nv];
            let mut m = vec![0.0; nv * nv];
            let mut b = vec![0.0; np * nv];
            let mut mp = vec![0.0; np * np];
            for (i, ch) in tv.children.iter().enumerate() {
                for (q, &w) in ch.weights.iter().enumerate() {
                    let divs: Vec<f64> = (0..nv).map(|f| tv.div(f, i, q)).collect();
                    for f in 0..nv {
                        let gf = &tv.grads[f][i][q * nc * d..(q + 1) * nc * d];
                        let vf = &tv.values[f][i][q * nc..(q + 1) * nc];
                        for g in f..nv {
                            let gg = &tv.grads[g][i][q * nc * d..(q + 1) * nc * d];
                            let vg = &tv.values[g][i][q * nc..(q + 1) * nc];
                            let s: f64 = gf.iter().zip(gg).map(|(x, y)| x * y).sum();
                            let t: f64 = vf.iter().zip(vg).map(|(x, y)| x * y).sum();
                            a[f * nv + g] += w * s;
                            m[f * nv + g] += w * t;
                        }
                    }
                    for p in 0..np {
                        let qv = tp.values[p][i][q];
                        if qv == 0.0 {
                            continue;
                        }
                        for f in 0..nv {
                            b[p * nv + f] += w * qv * divs[f];
                        }
                        for p2 in p..np {
                            mp[p * np + p2] += w * qv * tp.values[p2][i][q];
                        }
                    }
                }
            }
            for f in 0..nv {
                for g in 0..f {
                    a[f * nv + g] = a[g * nv + f];
                    m[f * nv + g] = m[g * nv + f];
                }
            }
            for p in 0..np {
                for p2 in 0..p {
                    mp[p * np + p2] = mp[p2 * np + p];
                }
            }
            Ok(LocalOps { vdofs: tv.dofs, pdofs: tp.dofs, a, m, b, mp })
        })
        .collect::<Result<_>>()?;
    let (nu, np) = (vel.ndofs, pres.ndofs);
    let mut a = SparseMatrix::new(nu, nu);
    let mut m_u = SparseMatrix::new(nu, nu);
    let mut b = SparseMatrix::new(np, nu);
    let mut m_p = SparseMatrix::new(np, np);
    for l in &locals {
        let nv = l.vdofs.len();
        let npl = l.pdofs.len();
        for (f, &gf) in l.vdofs.iter().enumerate() {
            for (g, &gg) in l.vdofs.iter().enumerate() {
                a.add(gf, gg, l.a[f * nv + g]);
                m_u.add(gf, gg, l.a[f * nv + g] + l.m[f * nv + g]);
            }
        }
        for (p, &gp) in l.pdofs.iter().enumerate() {
            for (f, &gf) in l.vdofs.iter().enumerate() {
                b.add(gp, gf, l.b[p * nv + f]);
            }
            for (p2, &gp2) in l.pdofs.iter().enumerate() {
                m_p.add(gp, gp2, l.mp[p * npl + p2]);
            }
        }
    }
    Ok(AssembledOperators { a, m_u, b, m_p, quadrature_degree: deg })
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceImageReport {
    /// Largest `‖div v − Π div v‖ / ‖div v‖` over velocity basis fields.
    pub max_relative_residual: f64,
    pub worst_dof: Option<usize>,
    /// Basis fields whose divergence vanishes identically.
    pub divergence_free_fields: usize,
}

/// L² distance of `div v` from the pressure space for every velocity basis
/// field, evaluated pointwise by quadrature.
pub fn divergence_image_check(vel: &FeSpace, pres: &FeSpace) -> Result<DivergenceImageReport> {
    let ops = assemble(vel, pres)?;
    let deg = ops.quadrature_degree;
    let chol = SparseSpd::new(&ops.m_p)?;
    let ncells = vel.cells.len();
    // per cell: div of each velocity field and values of each pressure field
    let tabs: Vec<(CellTab, CellTab)> = (0..ncells)
        .into_par_iter()
        .map(|c| Ok((CellTab::new(vel, c, deg, true)?, CellTab::new(pres, c, deg, false)?)))
        .collect::<Result<_>>()?;
    let mut vel_cells: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vel.ndofs];
    for (c, (tv, _)) in tabs.iter().enumerate() {
        for (f, &g) in tv.dofs.iter().enumerate() {
            vel_cells[g].push((c, f));
        }
    }
    let mut pres_cells: Vec<Vec<usize>> = vec![Vec::new(); pres.ndofs];
    for (c, (_, tp)) in tabs.iter().enumerate() {
        for &g in &tp.dofs {
            pres_cells[g].push(c);
        }
    }
    let bt = ops.b.transpose();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vel.ndofs];
    for (j, i, v) in bt.iter() {
        cols[j].push((i, v));
    }
    let results: Vec<(f64, bool)> = (0..vel.ndofs)
        .into_par_iter()
        .map(|j| {
            let mut rhs = vec![0.0; pres.ndofs];
            for &(i, v) in &cols[j] {
                rhs[i] = v;
            }
            let coef = chol.solve(&rhs);
            let cmax = coef.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            let mut cells: BTreeSet<usize> = vel_cells[j].iter().map(|&(c, _)| c).collect();
            for (i, x) in coef.iter().enumerate() {
                if x.abs() > 1e-13 * cmax {
                    cells.extend(pres_cells[i].iter().copied());
                }
            }
            let (mut res, mut norm) = (0.0, 0.0);
            for &c in &cells {
                let (tv, tp) = &tabs[c];
                let f = vel_cells[j].iter().find(|&&(cc, _)| cc == c).map(|&(_, f)| f);
                for (i, ch) in tv.children.iter().enumerate() {
                    for (q, &w) in ch.weights.iter().enumerate() {
                        let dv = f.map(|f| tv.div(f, i, q)).unwrap_or(0.0);
                        let pv: f64 = tp.dofs.iter().enumerate().map(|(p, &g)| coef[g] * tp.values[p][i][q]).sum();
                        res += w * (dv - pv).powi(2);
                        norm += w * dv * dv;
                    }
                }
            }
            let scale = vel_cells[j].iter().map(|&(c, f)| {
                let tv = &tabs[c].0;
                tv.children.iter().enumerate().map(|(i, ch)| ch.weights.iter().enumerate().map(|(q, w)| w * tv.grads[f][i][q * tv.ncomp * tv.dim..(q + 1) * tv.ncomp * tv.dim].iter().map(|g| g * g).sum::<f64>()).sum::<f64>()).sum::<f64>()
            }).sum::<f64>();
            if norm <= 1e-24 * scale.max(f64::MIN_POSITIVE) {
                (0.0, true)
            } else {
                ((res / norm).sqrt(), false)
            }
        })
        .collect();
    let mut report = DivergenceImageReport { max_relative_residual: 0.0, worst_dof: None, divergence_free_fields: 0 };
    for (j, (r, free)) in results.into_iter().enumerate() {
        if free {
            report.divergence_free_fields += 1;
        }
        if r > report.max_relative_residual || report.worst_dof.is_none() {
            report.max_relative_residual = report.max_relative_residual.max(r);
            report.worst_dof = Some(j);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseSpd;
    use crate::mesh::{unit_square, RefinedMesh, SplitRule};
    use crate::space::{build_pair, PairKind};
    use std::sync::Arc;

    fn square(n: usize) -> Arc<RefinedMesh> {
        Arc::new(RefinedMesh::new(&unit_square(n), SplitRule::Barycenter).unwrap())
    }

    #[test]
    fn constants_annihilate_divergence_of_h10_fields() {
        let r = square(2);
        for kind in [PairKind::PkPk1r, PairKind::Cor52, PairKind::Cor68] {
            let pair = build_pair(kind, &r, 2).unwrap();
            let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
            let ones = pair.pressure.constant.clone().unwrap();
            let bt = ops.b.transpose();
            let s = bt.matvec(&ones);
            assert!(s.iter().all(|x| x.abs() < 1e-12), "{kind}");
            assert!(SparseSpd::new(&ops.a).is_ok());
            assert!(ops.a.symmetry_defect() < 1e-13 && ops.m_p.symmetry_defect() < 1e-13);
        }
    }

    #[test]
    fn flux_dof_divergence_by_cell() {
        // the only MF field has unit flux through the diagonal; by the
        // divergence theorem its cell integrals of div are ±1
        let pair = build_pair(PairKind::Cor52, &square(1), 1).unwrap();
        let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
        assert_eq!(pair.velocity.ndofs, 1);
        assert!((ops.b.get(0, 0) - 1.0).abs() < 1e-13);
        assert!((ops.b.get(1, 0) + 1.0).abs() < 1e-13);
    }

    #[test]
    fn divergence_images() {
        let r = square(2);
        for (kind, k) in [
            (PairKind::MfP0, 1),
            (PairKind::Cor52, 1),
            (PairKind::PkPk1r, 2),
            (PairKind::Cor64, 1),
            (PairKind::VdivWr, 1),
            (PairKind::Cor68, 1),
            (PairKind::VrWr, 1),
        ] {
            let pair = build_pair(kind, &r, k).unwrap();
            let rep = divergence_image_check(&pair.velocity, &pair.pressure).unwrap();
            assert!(rep.max_relative_residual < 1e-10, "{kind}: {rep:?}");
        }
        let pair = build_pair(PairKind::PkP0, &r, 2).unwrap();
        assert!(divergence_image_check(&pair.velocity, &pair.pressure).unwrap().max_relative_residual > 1e-3);
    }
}
