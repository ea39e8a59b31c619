//! Uniform right-triangle mesh of the unit square.
//!
//! Vertex `(i, j)` sits at `(i/n, j/n)` and has index `j*(n+1) + i`. Square
//! `(i, j)` is visited row-major (`j` outer) and split along its
//! lower-left/upper-right diagonal into a lower triangle (cell `2*(j*n+i)`)
//! and an upper triangle (cell `2*(j*n+i)+1`), both counterclockwise.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    cell_area: f64,
    boundary: Vec<bool>,
    /// Interior degree of freedom for each vertex, `None` on the boundary.
    dof: Vec<Option<usize>>,
    interior: Vec<usize>,
}

impl Mesh {
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMesh);
        }
        let side = n + 1;
        let step = 1.0 / n as f64;

        let mut vertices = Vec::with_capacity(side * side);
        let mut boundary = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                vertices.push([i as f64 * step, j as f64 * step]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }

        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * side + i;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut dof = vec![None; vertices.len()];
        let mut interior = Vec::with_capacity((n - 1).pow(2));
        for (v, on_boundary) in boundary.iter().enumerate() {
            if !on_boundary {
                dof[v] = Some(interior.len());
                interior.push(v);
            }
        }

        Ok(Self {
            n,
            vertices,
            cells,
            cell_area: 0.5 * step * step,
            boundary,
            dof,
            interior,
        })
    }

    /// Subdivisions per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Longest edge, `√2/n`.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    /// Measure of the domain (sum of cell areas).
    pub fn area(&self) -> f64 {
        self.cell_area * self.cells.len() as f64
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.boundary[vertex]
    }

    /// Vertex indices of the interior degrees of freedom, in dof order.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_dof(&self, vertex: usize) -> Option<usize> {
        self.dof[vertex]
    }

    pub fn cell_vertex_indices(&self, cell: usize) -> Result<[usize; 3]> {
        self.cells.get(cell).copied().ok_or(Error::CellOutOfRange {
            index: cell,
            count: self.cells.len(),
        })
    }

    pub fn cell_coordinates(&self, cell: usize) -> Result<[[f64; 2]; 3]> {
        let [a, b, c] = self.cell_vertex_indices(cell)?;
        Ok([self.vertices[a], self.vertices[b], self.vertices[c]])
    }
}

/// Builds the uniform mesh with `n` subdivisions per side.
pub fn build_unit_square_mesh(n: usize) -> Result<Mesh> {
    Mesh::unit_square(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_area(p: [[f64; 2]; 3]) -> f64 {
        0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
            - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
    }

    #[test]
    fn smallest_mesh() {
        let mesh = build_unit_square_mesh(1).unwrap();
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_cells(), 2);
        assert_eq!(mesh.cell_area(), 0.5);
        assert_eq!(mesh.cell_vertex_indices(0).unwrap(), [0, 1, 3]);
        assert_eq!(mesh.num_interior(), 0);
    }

    #[test]
    fn rejects_zero_subdivisions() {
        assert!(matches!(build_unit_square_mesh(0), Err(Error::EmptyMesh)));
    }

    #[test]
    fn cell_index_range_check() {
        let mesh = build_unit_square_mesh(1).unwrap();
        assert!(matches!(
            mesh.cell_vertex_indices(2),
            Err(Error::CellOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn documented_ordering_n2() {
        // square (i=0, j=1) is the third square; its upper triangle is cell 5
        let mesh = build_unit_square_mesh(2).unwrap();
        assert_eq!(mesh.cell_vertex_indices(4).unwrap(), [3, 4, 7]);
        assert_eq!(mesh.cell_vertex_indices(5).unwrap(), [3, 7, 6]);
        assert_eq!(mesh.num_interior(), 1);
        assert_eq!(mesh.interior_vertices(), &[4]);
    }

    #[test]
    fn mesh_size_matches_coarsest_table_row() {
        let mesh = build_unit_square_mesh(32).unwrap();
        assert!((mesh.h() - 4.419_417_382_415_922e-2).abs() < 1e-15);
        assert_eq!(format!("{:.2e}", mesh.h()), "4.42e-2");
    }

    #[test]
    fn finest_mesh_cell_count() {
        let mesh = build_unit_square_mesh(1024).unwrap();
        assert_eq!(mesh.num_cells(), 2_097_152);
    }

    #[test]
    fn structural_invariants() {
        for n in [1, 2, 3, 7, 16] {
            let mesh = build_unit_square_mesh(n).unwrap();
            assert_eq!(mesh.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(mesh.num_cells(), 2 * n * n);
            assert!((mesh.area() - 1.0).abs() < 1e-14);

            let mut incidence = vec![0usize; mesh.num_vertices()];
            for c in 0..mesh.num_cells() {
                let [a, b, d] = mesh.cell_vertex_indices(c).unwrap();
                assert!(a != b && b != d && a != d);
                let area = signed_area(mesh.cell_coordinates(c).unwrap());
                assert!((area - mesh.cell_area()).abs() < 1e-15);
                for v in [a, b, d] {
                    incidence[v] += 1;
                }
            }
            for (v, x) in mesh.vertices().iter().enumerate() {
                let on_edge = x.iter().any(|&c| c == 0.0 || c == 1.0);
                assert_eq!(mesh.is_boundary(v), on_edge);
                if !mesh.is_boundary(v) {
                    assert_eq!(incidence[v], 6);
                }
                let corner = x.iter().all(|&c| c == 0.0 || c == 1.0);
                if corner {
                    assert!(incidence[v] == 1 || incidence[v] == 2);
                }
            }
        }
    }

    #[test]
    fn construction_is_pure() {
        assert_eq!(
            build_unit_square_mesh(5).unwrap(),
            build_unit_square_mesh(5).unwrap()
        );
    }
}
