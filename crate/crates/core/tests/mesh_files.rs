use alfeld::mesh::{builtin_mesh, read_mesh, uniform_refine, write_mesh, RefinedMesh, SplitRule};
use alfeld::space::{assemble, build_pair, PairKind};
use alfeld::linalg::SparseMatrix;
use std::sync::Arc;

#[test]
fn mesh_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["tri1", "square4", "tet1", "cube6"] {
        let m = builtin_mesh(name, None).unwrap();
        let path = dir.path().join(format!("{name}.mesh"));
        write_mesh(&m, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.num_cells(), m.num_cells());
        assert_eq!(back.vertices(), m.vertices());
        assert!((back.total_volume() - m.total_volume()).abs() < 1e-14);
    }
}

#[test]
fn split_of_uniform_refinement_keeps_volume() {
    for name in ["square2", "cube6"] {
        let m = uniform_refine(&builtin_mesh(name, None).unwrap()).unwrap();
        let r = RefinedMesh::new(&m, SplitRule::Barycenter).unwrap();
        assert_eq!(r.fine_mesh().num_cells(), m.num_cells() * (m.dim() + 1));
        assert!((r.fine_mesh().total_volume() - 1.0).abs() < 1e-13);
        r.fine_mesh().check_conforming().unwrap();
    }
}

#[test]
fn operators_survive_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let r = Arc::new(RefinedMesh::new(&builtin_mesh("square2", None).unwrap(), SplitRule::Barycenter).unwrap());
    let pair = build_pair(PairKind::PkPk1r, &r, 2).unwrap();
    let ops = assemble(&pair.velocity, &pair.pressure).unwrap();
    for (tag, m) in [("A", &ops.a), ("B", &ops.b), ("Mp", &ops.m_p)] {
        let path = dir.path().join(format!("{tag}.mtx"));
        m.write_matrix_market(&path).unwrap();
        let back = SparseMatrix::read_matrix_market(&path).unwrap();
        assert_eq!((back.nrows, back.ncols, back.nnz()), (m.nrows, m.ncols, m.nnz()));
        assert!(back.iter().all(|(i, j, v)| v == m.get(i, j)), "{tag}");
    }
    assert!(ops.a.symmetry_defect() < 1e-13 && ops.m_p.symmetry_defect() < 1e-13);
}
