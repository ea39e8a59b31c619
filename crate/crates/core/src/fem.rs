//! P1 discretization of `−Δy = u`, `−Δp = y − y_d` with homogeneous
//! Dirichlet data, piecewise-constant controls, and the discrete objective.

use crate::error::{Error, Result};
use crate::integrand::CostIntegrand;
use crate::linalg::{cg_solve_from, spmv, SolverParams, SparseSymMatrix};
use crate::mesh::Mesh;

/// Piecewise-linear function given by its vertex values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    n: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            n: mesh.n(),
            values: vec![0.0; mesh.num_vertices()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_vertices(),
                found: values.len(),
            });
        }
        Ok(Self {
            n: mesh.n(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        check_n(mesh, self.n)
    }

    fn interior_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_vertices()
            .iter()
            .map(|&v| self.values[v])
            .collect()
    }

    pub fn sub(&self, other: &NodalField) -> NodalField {
        NodalField {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &NodalField) -> NodalField {
        NodalField {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Piecewise-constant function given by one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    n: usize,
    values: Vec<f64>,
}

impl ControlField {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self {
            n: mesh.n(),
            values: vec![value; mesh.num_cells()],
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_cells() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_cells(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control values"));
        }
        Ok(Self {
            n: mesh.n(),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        check_n(mesh, self.n)
    }

    /// First cell whose value lies outside `dom g`.
    pub fn first_infeasible(&self, g: &dyn CostIntegrand) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .find(|(_, &v)| !g.is_feasible(v))
            .map(|(c, &v)| (c, v))
    }

    pub fn check_feasible(&self, g: &dyn CostIntegrand) -> Result<()> {
        match self.first_infeasible(g) {
            Some((cell, value)) => Err(Error::Infeasible { cell, value }),
            None => Ok(()),
        }
    }
}

fn check_n(mesh: &Mesh, n: usize) -> Result<()> {
    if mesh.n() == n {
        Ok(())
    } else {
        Err(Error::MeshMismatch {
            expected: mesh.n(),
            found: n,
        })
    }
}

/// Quadratic form used for the tracking term `½‖y − y_d‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    /// Row-sum lumped mass on interior vertices; boundary vertices carry no weight.
    #[default]
    LumpedInterior,
    /// Full P1 mass matrix on all vertices.
    Consistent,
}

/// Element stiffness `K_ij = (e_i · e_j) / (4|T|)`, `e_i` the edge opposite vertex `i`.
fn element_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let edge = |i: usize| {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        [b[0] - a[0], b[1] - a[1]]
    };
    let e = [edge(0), edge(1), edge(2)];
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
            .abs();
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
        }
    }
    k
}

/// Interior-dof stiffness matrix (boundary rows and columns eliminated).
pub fn assemble_stiffness(mesh: &Mesh) -> SparseSymMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let verts = mesh.cells()[c];
        let ke = element_stiffness(mesh.cell_coordinates(c).expect("cell in range"));
        for (a, &va) in verts.iter().enumerate() {
            let Some(row) = mesh.interior_dof(va) else {
                continue;
            };
            for (b, &vb) in verts.iter().enumerate() {
                if let Some(col) = mesh.interior_dof(vb) {
                    triplets.push((row, col, ke[a][b]));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.num_interior(), triplets)
        .expect("indices within interior dofs")
}

/// Full (all-vertex) consistent P1 mass matrix.
pub fn assemble_mass(mesh: &Mesh) -> SparseSymMatrix {
    let area = mesh.cell_area();
    let mut triplets = Vec::with_capacity(9 * mesh.num_cells());
    for verts in mesh.cells() {
        for (a, &va) in verts.iter().enumerate() {
            for (b, &vb) in verts.iter().enumerate() {
                let w = if a == b { 2.0 } else { 1.0 };
                triplets.push((va, vb, w * area / 12.0));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.num_vertices(), triplets).expect("indices within vertices")
}

/// Diagonal row-sum lumped mass, zero on boundary vertices.
pub fn assemble_lumped_interior_mass(mesh: &Mesh) -> SparseSymMatrix {
    let mut diag = vec![0.0; mesh.num_vertices()];
    for verts in mesh.cells() {
        for &v in verts {
            diag[v] += mesh.cell_area() / 3.0;
        }
    }
    let triplets = mesh
        .interior_vertices()
        .iter()
        .map(|&v| (v, v, diag[v]))
        .collect();
    SparseSymMatrix::from_triplets(mesh.num_vertices(), triplets).expect("indices within vertices")
}

pub fn assemble_tracking_mass(mesh: &Mesh, kind: MassKind) -> SparseSymMatrix {
    match kind {
        MassKind::LumpedInterior => assemble_lumped_interior_mass(mesh),
        MassKind::Consistent => assemble_mass(mesh),
    }
}

/// Full-vertex load `b_i = Σ_{T∋i} u_T |T| / 3`.
pub fn control_load(mesh: &Mesh, u: &ControlField) -> Result<Vec<f64>> {
    u.check_mesh(mesh)?;
    let mut load = vec![0.0; mesh.num_vertices()];
    let third = mesh.cell_area() / 3.0;
    for (verts, &value) in mesh.cells().iter().zip(u.values()) {
        for &v in verts {
            load[v] += value * third;
        }
    }
    Ok(load)
}

fn solve_interior(
    k: &SparseSymMatrix,
    mesh: &Mesh,
    full_rhs: &[f64],
    guess: Option<&NodalField>,
    params: &SolverParams,
) -> Result<NodalField> {
    if k.dim() != mesh.num_interior() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_interior(),
            found: k.dim(),
        });
    }
    let rhs: Vec<f64> = mesh
        .interior_vertices()
        .iter()
        .map(|&v| full_rhs[v])
        .collect();
    let x0 = guess.map(|g| g.interior_values(mesh));
    let max_iter = params.max_iter.unwrap_or(10 * k.dim().max(1));
    let sol = cg_solve_from(k, &rhs, x0.as_deref(), params.rel_tol, max_iter)?;
    let mut values = vec![0.0; mesh.num_vertices()];
    for (&v, x) in mesh.interior_vertices().iter().zip(sol.x) {
        values[v] = x;
    }
    log::trace!(
        "cg: {} iterations, residual {:e}",
        sol.iterations,
        sol.relative_residual
    );
    Ok(NodalField {
        n: mesh.n(),
        values,
    })
}

/// State `y` with `K y_int = load(u)_int` and zero boundary values.
pub fn solve_state(
    k: &SparseSymMatrix,
    mesh: &Mesh,
    u: &ControlField,
    params: &SolverParams,
) -> Result<NodalField> {
    solve_state_from(k, mesh, u, None, params)
}

pub fn solve_state_from(
    k: &SparseSymMatrix,
    mesh: &Mesh,
    u: &ControlField,
    guess: Option<&NodalField>,
    params: &SolverParams,
) -> Result<NodalField> {
    let load = control_load(mesh, u)?;
    solve_interior(k, mesh, &load, guess, params)
}

/// Adjoint `p` with `K p_int = (M (y − y_d))_int` and zero boundary values.
pub fn solve_adjoint(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    mesh: &Mesh,
    y: &NodalField,
    y_d: &NodalField,
    params: &SolverParams,
) -> Result<NodalField> {
    y.check_mesh(mesh)?;
    y_d.check_mesh(mesh)?;
    let rhs = spmv(m, y.sub(y_d).values())?;
    solve_interior(k, mesh, &rhs, None, params)
}

/// Nodal interpolant of `f`; boundary values are kept as given.
pub fn interpolate_target(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Result<NodalField> {
    let values: Vec<f64> = mesh.vertices().iter().map(|&x| f(x)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target function"));
    }
    Ok(NodalField {
        n: mesh.n(),
        values,
    })
}

/// Mean of the three vertex values per cell; `|T|` times it is `∫_T v` for P1 `v`.
pub fn cell_average(mesh: &Mesh, v: &NodalField) -> Result<Vec<f64>> {
    v.check_mesh(mesh)?;
    let vals = v.values();
    Ok(mesh
        .cells()
        .iter()
        .map(|&[a, b, c]| (vals[a] + vals[b] + vals[c]) / 3.0)
        .collect())
}

/// `∫_Ω g(u) dx` for piecewise-constant `u`.
pub fn control_cost(mesh: &Mesh, u: &ControlField, g: &dyn CostIntegrand) -> Result<f64> {
    u.check_mesh(mesh)?;
    u.check_feasible(g)?;
    Ok(mesh.cell_area() * u.values().iter().map(|&v| g.eval(v)).sum::<f64>())
}

/// `½ (y − y_d)ᵀ M (y − y_d)`.
pub fn tracking_term(m: &SparseSymMatrix, y: &NodalField, y_d: &NodalField) -> Result<f64> {
    if y.n() != y_d.n() {
        return Err(Error::MeshMismatch {
            expected: y_d.n(),
            found: y.n(),
        });
    }
    Ok(0.5 * m.quadratic_form(y.sub(y_d).values())?)
}

/// `J = ½ (y − y_d)ᵀ M (y − y_d) + Σ_T |T| g(u_T)`.
pub fn eval_objective(
    m: &SparseSymMatrix,
    mesh: &Mesh,
    y: &NodalField,
    y_d: &NodalField,
    u: &ControlField,
    g: &dyn CostIntegrand,
) -> Result<f64> {
    let cost = control_cost(mesh, u, g)?;
    Ok(tracking_term(m, y, y_d)? + cost)
}

// 7-point degree-5 rule on the reference triangle (barycentric, weight)
const QUADRATURE: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [
            0.059_715_871_789_770,
            0.470_142_064_105_115,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.059_715_871_789_770,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.470_142_064_105_115,
            0.059_715_871_789_770,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.797_426_985_353_087,
            0.101_286_507_323_456,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.797_426_985_353_087,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.101_286_507_323_456,
            0.797_426_985_353_087,
        ],
        0.125_939_180_544_827,
    ),
];

/// `‖v_h − f‖_{L²}` by cellwise degree-5 quadrature.
pub fn l2_error(mesh: &Mesh, v: &NodalField, f: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    v.check_mesh(mesh)?;
    let vals = v.values();
    let mut total = 0.0;
    for verts in mesh.cells() {
        let p = verts.map(|i| mesh.vertices()[i]);
        for (bary, w) in QUADRATURE {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let vh = bary[0] * vals[verts[0]] + bary[1] * vals[verts[1]] + bary[2] * vals[verts[2]];
            total += w * mesh.cell_area() * (vh - f(x)).powi(2);
        }
    }
    Ok(total.sqrt())
}

/// Built-in desired states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Target {
    /// `10 x₁ sin(5x₁) cos(7x₂)`.
    #[default]
    Oscillating,
    /// `sin(πx₁) sin(πx₂)`.
    Bump,
    Zero,
}

impl Target {
    pub fn eval(self, x: [f64; 2]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Target::Oscillating => 10.0 * x[0] * (5.0 * x[0]).sin() * (7.0 * x[1]).cos(),
            Target::Bump => (PI * x[0]).sin() * (PI * x[1]).sin(),
            Target::Zero => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Oscillating => "oscillating",
            Target::Bump => "bump",
            Target::Zero => "zero",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oscillating" => Ok(Target::Oscillating),
            "bump" => Ok(Target::Bump),
            "zero" => Ok(Target::Zero),
            other => Err(format!(
                "unknown target `{other}` (expected oscillating, bump or zero)"
            )),
        }
    }
}

/// A discretized control problem: mesh, operators, target, integrand.
#[derive(Debug)]
pub struct Problem {
    mesh: Mesh,
    stiffness: SparseSymMatrix,
    mass: SparseSymMatrix,
    mass_kind: MassKind,
    target: NodalField,
    integrand: Box<dyn CostIntegrand>,
    solver: SolverParams,
}

impl Problem {
    pub fn new(
        mesh: Mesh,
        target: NodalField,
        integrand: Box<dyn CostIntegrand>,
        mass_kind: MassKind,
        solver: SolverParams,
    ) -> Result<Self> {
        target.check_mesh(&mesh)?;
        Ok(Self {
            stiffness: assemble_stiffness(&mesh),
            mass: assemble_tracking_mass(&mesh, mass_kind),
            mesh,
            mass_kind,
            target,
            integrand,
            solver,
        })
    }

    /// Oscillating target with `g = 0.005 v² + I_{ℤ∩[−10,10]}` on an `n × n` mesh.
    pub fn reference(n: usize) -> Result<Self> {
        let mesh = Mesh::unit_square(n)?;
        let target = interpolate_target(&mesh, |x| Target::Oscillating.eval(x))?;
        let g = crate::integrand::IntegerQuadratic::new(0.01, 10)?;
        Self::new(
            mesh,
            target,
            Box::new(g),
            MassKind::default(),
            SolverParams::default(),
        )
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    pub fn mass_kind(&self) -> MassKind {
        self.mass_kind
    }

    pub fn target(&self) -> &NodalField {
        &self.target
    }

    pub fn integrand(&self) -> &dyn CostIntegrand {
        self.integrand.as_ref()
    }

    pub fn solver(&self) -> &SolverParams {
        &self.solver
    }

    pub fn state(&self, u: &ControlField) -> Result<NodalField> {
        solve_state(&self.stiffness, &self.mesh, u, &self.solver)
    }

    /// State solve warm-started from `guess`.
    pub fn state_from(&self, u: &ControlField, guess: &NodalField) -> Result<NodalField> {
        solve_state_from(&self.stiffness, &self.mesh, u, Some(guess), &self.solver)
    }

    pub fn adjoint(&self, y: &NodalField) -> Result<NodalField> {
        solve_adjoint(
            &self.stiffness,
            &self.mass,
            &self.mesh,
            y,
            &self.target,
            &self.solver,
        )
    }

    pub fn objective(&self, y: &NodalField, u: &ControlField) -> Result<f64> {
        eval_objective(&self.mass, &self.mesh, y, &self.target, u, self.integrand())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::IntegerQuadratic;
    use std::f64::consts::PI;

    fn params() -> SolverParams {
        SolverParams::default()
    }

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn stiffness_single_interior_vertex() {
        let mesh = Mesh::unit_square(2).unwrap();
        let k = assemble_stiffness(&mesh);
        assert_eq!(k.dim(), 1);
        assert!((k.get(0, 0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_is_five_point_stencil() {
        let mesh = Mesh::unit_square(4).unwrap();
        let k = assemble_stiffness(&mesh);
        // centre vertex (2,2)
        let centre = mesh.interior_dof(2 * 5 + 2).unwrap();
        let row: Vec<(usize, f64)> = k.row(centre).filter(|(_, v)| v.abs() > 1e-14).collect();
        assert_eq!(row.len(), 5);
        for (c, v) in row {
            let expected = if c == centre { 4.0 } else { -1.0 };
            assert!((v - expected).abs() < 1e-14);
        }
        assert!(k.is_symmetric(0.0));
        assert!(k.diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn mass_matrix_properties() {
        for n in [1, 3, 8] {
            let mesh = Mesh::unit_square(n).unwrap();
            let m = assemble_mass(&mesh);
            assert!((m.total() - 1.0).abs() < 1e-13);
            assert!(m.is_symmetric(0.0));
        }
        let mesh = Mesh::unit_square(1).unwrap();
        let m = assemble_mass(&mesh);
        // vertex 1 only touches the lower triangle
        assert!((m.get(1, 1) - 0.5 / 12.0 * 2.0).abs() < 1e-16);
        assert!((m.get(1, 0) - 0.5 / 12.0).abs() < 1e-16);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn element_mass_matches_quadrature() {
        // the degree-5 rule integrates the quadratic products λ_a λ_b exactly
        let area = 0.5;
        for a in 0..3 {
            for b in 0..3 {
                let exact: f64 = QUADRATURE.iter().map(|(l, w)| w * area * l[a] * l[b]).sum();
                let formula = if a == b { 2.0 } else { 1.0 } * area / 12.0;
                assert!((exact - formula).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lumped_interior_mass_drops_boundary() {
        let mesh = Mesh::unit_square(4).unwrap();
        let m = assemble_lumped_interior_mass(&mesh);
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) {
                assert_eq!(m.get(v, v), 0.0);
            } else {
                assert!((m.get(v, v) - 6.0 * mesh.cell_area() / 3.0).abs() < 1e-16);
            }
        }
        assert!((m.total() - 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn load_examples() {
        let mesh = Mesh::unit_square(2).unwrap();
        assert_eq!(
            control_load(&mesh, &ControlField::zeros(&mesh)).unwrap(),
            vec![0.0; 9]
        );
        let ones = control_load(&mesh, &ControlField::constant(&mesh, 1.0)).unwrap();
        assert!((ones.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let mut single = ControlField::zeros(&mesh);
        single.values_mut()[5] = 1.0;
        let load = control_load(&mesh, &single).unwrap();
        let nonzero: Vec<usize> = (0..9).filter(|&i| load[i] != 0.0).collect();
        assert_eq!(nonzero, vec![3, 6, 7]);
        for i in nonzero {
            assert!((load[i] - 1.0 / 24.0).abs() < 1e-16);
        }
    }

    #[test]
    fn load_rejects_other_mesh() {
        let mesh = Mesh::unit_square(2).unwrap();
        let other = Mesh::unit_square(3).unwrap();
        assert!(matches!(
            control_load(&mesh, &ControlField::zeros(&other)),
            Err(Error::MeshMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn state_examples() {
        let mesh = Mesh::unit_square(2).unwrap();
        let k = assemble_stiffness(&mesh);
        let zero = solve_state(&k, &mesh, &ControlField::zeros(&mesh), &params()).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let y = solve_state(&k, &mesh, &ControlField::constant(&mesh, 1.0), &params()).unwrap();
        assert!((y.values()[4] - 1.0 / 16.0).abs() < 1e-15);
        for v in 0..9 {
            if v != 4 {
                assert_eq!(y.values()[v], 0.0);
            }
        }
    }

    #[test]
    fn cg_matches_dense_oracle_on_small_laplacian() {
        let mesh = Mesh::unit_square(4).unwrap();
        let k = assemble_stiffness(&mesh);
        let load = control_load(&mesh, &ControlField::constant(&mesh, 1.0)).unwrap();
        let rhs: Vec<f64> = mesh.interior_vertices().iter().map(|&v| load[v]).collect();
        let dense: Vec<Vec<f64>> = (0..k.dim())
            .map(|r| (0..k.dim()).map(|c| k.get(r, c)).collect())
            .collect();
        let oracle = dense_solve(dense, rhs);
        let y = solve_state(&k, &mesh, &ControlField::constant(&mesh, 1.0), &params()).unwrap();
        for (dof, &v) in mesh.interior_vertices().iter().enumerate() {
            assert!((y.values()[v] - oracle[dof]).abs() < 1e-10);
        }
    }

    fn manufactured_error(n: usize, adjoint: bool) -> f64 {
        let exact = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        let mesh = Mesh::unit_square(n).unwrap();
        let k = assemble_stiffness(&mesh);
        let y = if adjoint {
            // y − y_d = P1 interpolant of the forcing, mass applied consistently
            let m = assemble_mass(&mesh);
            let forcing = interpolate_target(&mesh, |x| 2.0 * PI * PI * exact(x)).unwrap();
            solve_adjoint(
                &k,
                &m,
                &mesh,
                &forcing,
                &NodalField::zeros(&mesh),
                &params(),
            )
            .unwrap()
        } else {
            let u: Vec<f64> = (0..mesh.num_cells())
                .map(|c| {
                    let p = mesh.cell_coordinates(c).unwrap();
                    let centroid = [
                        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                    ];
                    2.0 * PI * PI * exact(centroid)
                })
                .collect();
            let u = ControlField::from_values(&mesh, u).unwrap();
            solve_state(&k, &mesh, &u, &params()).unwrap()
        };
        l2_error(&mesh, &y, exact).unwrap()
    }

    #[test]
    fn manufactured_state_converges_second_order() {
        for n in [8, 16] {
            let ratio = manufactured_error(n, false) / manufactured_error(2 * n, false);
            assert!((3.6..=4.4).contains(&ratio), "n={n}: ratio {ratio}");
        }
    }

    #[test]
    fn manufactured_adjoint_converges_second_order() {
        let ratio = manufactured_error(8, true) / manufactured_error(16, true);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn adjoint_vanishes_on_target() {
        let problem = Problem::reference(6).unwrap();
        let p = problem.adjoint(problem.target()).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_superposition() {
        let problem = Problem::reference(8).unwrap();
        let mesh = problem.mesh();
        let y1 = problem.state(&ControlField::constant(mesh, 3.0)).unwrap();
        let mut u2 = ControlField::zeros(mesh);
        for (c, v) in u2.values_mut().iter_mut().enumerate() {
            *v = ((c % 7) as f64) - 3.0;
        }
        let y2 = problem.state(&u2).unwrap();
        let zero = NodalField::zeros(mesh);
        let (k, m, sp) = (problem.stiffness(), problem.mass(), problem.solver());
        let both = solve_adjoint(k, m, mesh, &y1.add(&y2), problem.target(), sp).unwrap();
        let first = solve_adjoint(k, m, mesh, &y1, problem.target(), sp).unwrap();
        let second = solve_adjoint(k, m, mesh, &y2, &zero, sp).unwrap();
        let scale = second.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for v in 0..mesh.num_vertices() {
            let diff = both.values()[v] - first.values()[v] - second.values()[v];
            assert!(diff.abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn target_interpolation() {
        let mesh = Mesh::unit_square(4).unwrap();
        let yd = interpolate_target(&mesh, |x| Target::Oscillating.eval(x)).unwrap();
        // vertex (1, 0)
        assert!((yd.values()[4] - 10.0 * 5f64.sin()).abs() < 1e-14);
        assert!((yd.values()[4] + 9.589_242_746_631_385).abs() < 1e-12);
        let x1 = interpolate_target(&mesh, |x| x[0]).unwrap();
        for (v, x) in mesh.vertices().iter().enumerate() {
            assert_eq!(x1.values()[v], x[0]);
        }
        let zero = interpolate_target(&mesh, |_| 0.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            interpolate_target(&mesh, |_| f64::NAN),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn cell_average_examples() {
        let mesh = Mesh::unit_square(3).unwrap();
        let c = interpolate_target(&mesh, |_| 2.5).unwrap();
        assert!(cell_average(&mesh, &c)
            .unwrap()
            .iter()
            .all(|&v| (v - 2.5).abs() < 1e-15));

        let mut vals = vec![0.0; mesh.num_vertices()];
        let [a, b, d] = mesh.cells()[0];
        vals[a] = 0.0;
        vals[b] = 1.0;
        vals[d] = 2.0;
        let v = NodalField::from_values(&mesh, vals).unwrap();
        assert_eq!(cell_average(&mesh, &v).unwrap()[0], 1.0);

        let v = interpolate_target(&mesh, |x| x[0] * x[0] - 3.0 * x[1]).unwrap();
        let lhs: f64 = cell_average(&mesh, &v)
            .unwrap()
            .iter()
            .map(|a| a * mesh.cell_area())
            .sum();
        let load = control_load(&mesh, &ControlField::constant(&mesh, 1.0)).unwrap();
        let rhs: f64 = load.iter().zip(v.values()).map(|(l, v)| l * v).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn objective_examples() {
        let mesh = Mesh::unit_square(4).unwrap();
        let g = IntegerQuadratic::new(0.01, 10).unwrap();
        let yd = interpolate_target(&mesh, |x| Target::Oscillating.eval(x)).unwrap();
        for kind in [MassKind::LumpedInterior, MassKind::Consistent] {
            let m = assemble_tracking_mass(&mesh, kind);
            let zero =
                eval_objective(&m, &mesh, &yd, &yd, &ControlField::zeros(&mesh), &g).unwrap();
            assert_eq!(zero, 0.0);
            let two = eval_objective(&m, &mesh, &yd, &yd, &ControlField::constant(&mesh, 2.0), &g)
                .unwrap();
            assert!((two - 0.02).abs() < 1e-15);
        }
        let m = assemble_mass(&mesh);
        assert!(matches!(
            eval_objective(&m, &mesh, &yd, &yd, &ControlField::constant(&mesh, 0.5), &g),
            Err(Error::Infeasible { cell: 0, value }) if value == 0.5
        ));
    }

    #[test]
    fn objective_is_additive() {
        let problem = Problem::reference(8).unwrap();
        let mesh = problem.mesh();
        let u = ControlField::constant(mesh, -4.0);
        let y = problem.state(&u).unwrap();
        let j = problem.objective(&y, &u).unwrap();
        let track = tracking_term(problem.mass(), &y, problem.target()).unwrap();
        let cost = control_cost(mesh, &u, problem.integrand()).unwrap();
        assert_eq!(j, track + cost);
        assert!((cost - 0.08).abs() < 1e-14);
    }
}
