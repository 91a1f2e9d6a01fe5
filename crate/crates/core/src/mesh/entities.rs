//! Global numbering of vertices, edges and facets.

use super::{facet_key, MacroMesh};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Serialize)]
pub struct EdgeEntity {
    pub vertices: [usize; 2],
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FacetEntity {
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    /// Adjacent `(cell, local opposite vertex)` pairs, lowest cell first.
    pub cells: Vec<(usize, usize)>,
    pub boundary: bool,
    /// Canonical unit normal: outward from the lowest adjacent cell.
    pub normal: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntityTables {
    pub vertex_boundary: Vec<bool>,
    pub edges: Vec<EdgeEntity>,
    pub facets: Vec<FacetEntity>,
    #[serde(skip)]
    pub edge_index: HashMap<[usize; 2], usize>,
    #[serde(skip)]
    pub facet_index: HashMap<Vec<usize>, usize>,
    /// `cell_facets[c][i]` is the facet opposite local vertex `i`.
    pub cell_facets: Vec<Vec<usize>>,
}

impl EntityTables {
    pub fn build(mesh: &MacroMesh) -> Self {
        let d = mesh.dim();
        let mut facet_map: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        let mut edge_set: BTreeMap<[usize; 2], ()> = BTreeMap::new();
        for (c, cell) in mesh.cells().iter().enumerate() {
            for i in 0..=d {
                facet_map.entry(facet_key(&cell.vertices, i)).or_default().push((c, i));
            }
            for a in 0..=d {
                for b in a + 1..=d {
                    let (x, y) = (cell.vertices[a], cell.vertices[b]);
                    edge_set.insert([x.min(y), x.max(y)], ());
                }
            }
        }
        let mut vertex_boundary = vec![false; mesh.num_vertices()];
        let mut facets = Vec::with_capacity(facet_map.len());
        let mut facet_index = HashMap::new();
        for (key, mut cells) in facet_map {
            cells.sort_unstable();
            let boundary = cells.len() == 1;
            if boundary {
                for &v in &key {
                    vertex_boundary[v] = true;
                }
            }
            let (c, i) = cells[0];
            let g = super::geometry::bary_gradients(&mesh.cell_points(c)).expect("validated cell");
            let n = super::geometry::norm(&g[i]);
            let normal = g[i].iter().map(|x| -x / n).collect();
            facet_index.insert(key.clone(), facets.len());
            facets.push(FacetEntity { vertices: key, cells, boundary, normal });
        }
        let boundary_facets = mesh.boundary_facets();
        let mut edges = Vec::with_capacity(edge_set.len());
        let mut edge_index = HashMap::new();
        for (e, _) in edge_set {
            // an edge is on the boundary iff it lies in some boundary facet
            let boundary = if d == 1 {
                false
            } else if d == 2 {
                boundary_facets.contains(&e.to_vec())
            } else {
                vertex_boundary[e[0]]
                    && vertex_boundary[e[1]]
                    && boundary_facets.iter().any(|f| f.contains(&e[0]) && f.contains(&e[1]))
            };
            edge_index.insert(e, edges.len());
            edges.push(EdgeEntity { vertices: e, boundary });
        }
        let cell_facets = mesh
            .cells()
            .iter()
            .map(|cell| (0..=d).map(|i| facet_index[&facet_key(&cell.vertices, i)]).collect())
            .collect();
        EntityTables { vertex_boundary, edges, facets, edge_index, facet_index, cell_facets }
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&[a.min(b), a.max(b)]).copied()
    }

    pub fn interior_facets(&self) -> impl Iterator<Item = (usize, &FacetEntity)> {
        self.facets.iter().enumerate().filter(|(_, f)| !f.boundary)
    }
}
