//! P1 stiffness and mass assembly with Dirichlet vertices eliminated.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, Point};

/// Vertex → free-dof numbering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofMap {
    /// `None` for constrained vertices.
    pub free_index: Vec<Option<usize>>,
    /// Vertex id of each free dof.
    pub free_vertices: Vec<usize>,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        self.free_vertices.len()
    }

    /// Scatters a free-dof vector onto all vertices (zero on constrained ones).
    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        self.free_index
            .iter()
            .map(|f| f.map_or(0.0, |i| values[i]))
            .collect()
    }
}

/// Every vertex touching an edge with a tag in `dirichlet` is constrained.
pub fn build_dofmap(mesh: &Mesh, dirichlet: &[BoundaryTag]) -> Result<DofMap> {
    let mut constrained = vec![false; mesh.n_vertices()];
    for e in &mesh.boundary_edges {
        if dirichlet.contains(&e.tag) {
            constrained[e.v[0]] = true;
            constrained[e.v[1]] = true;
        }
    }
    let mut free_index = vec![None; mesh.n_vertices()];
    let mut free_vertices = Vec::new();
    for (v, &c) in constrained.iter().enumerate() {
        if !c {
            free_index[v] = Some(free_vertices.len());
            free_vertices.push(v);
        }
    }
    if free_vertices.is_empty() {
        return Err(Error::EmptyFreeSet);
    }
    Ok(DofMap {
        free_index,
        free_vertices,
    })
}

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; the result is independent of triplet order
    /// only up to floating-point summation order, which is fixed here by a
    /// stable sort.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(Error::Dimension(format!(
                "entry ({i}, {j}) outside {n}x{n}"
            )));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} values for {n}x{n}",
                dense.len()
            )));
        }
        let triplets = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| dense[i * n + j] != 0.0)
            .map(|(i, j)| (i, j, dense[i * n + j]))
            .collect();
        Self::from_triplets(n, triplets)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Coordinate dump of the lower triangle, one `i j value` per line.
    pub fn write_lower_coo<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j <= i {
                    s.push_str(&format!("{i} {j} {v:.17e}\n"));
                }
            }
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn element_geometry(mesh: &Mesh, index: usize) -> Result<([Point; 3], f64)> {
    let p = mesh.triangles[index].map(|v| mesh.vertices[v]);
    let area = mesh.triangle_area(index);
    if !(area > 0.0) {
        return Err(Error::DegenerateTriangle { index, area });
    }
    Ok((p, area))
}

fn scatter(
    dofs: &DofMap,
    tri: &[usize; 3],
    local: &[[f64; 3]; 3],
    triplets: &mut Vec<(usize, usize, f64)>,
) {
    for a in 0..3 {
        let Some(i) = dofs.free_index[tri[a]] else {
            continue;
        };
        for b in 0..3 {
            if let Some(j) = dofs.free_index[tri[b]] {
                triplets.push((i, j, local[a][b]));
            }
        }
    }
}

/// `K_ij = ∫ ∇φ_i · ∇φ_j` over free dofs.
pub fn assemble_stiffness(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix> {
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (index, tri) in mesh.triangles.iter().enumerate() {
        let (p, area) = element_geometry(mesh, index)?;
        // edge opposite vertex a, rotated gradients share the 1/(2A) factor
        let edge = |a: usize| {
            let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
            [r[0] - q[0], r[1] - q[1]]
        };
        let e = [edge(0), edge(1), edge(2)];
        let mut local = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] = (e[a][0] * e[b][0] + e[a][1] * e[b][1]) / (4.0 * area);
            }
        }
        scatter(dofs, tri, &local, &mut triplets);
    }
    CsrMatrix::from_triplets(dofs.n_free(), triplets)
}

/// `M_ij = ∫ w φ_i φ_j`. With no weight the exact P1 mass matrix is used;
/// otherwise the symmetric 3-point rule (degree 2).
pub fn assemble_mass(
    mesh: &Mesh,
    dofs: &DofMap,
    weight: Option<&dyn Fn(Point) -> f64>,
) -> Result<CsrMatrix> {
    const BARY: [[f64; 3]; 3] = [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ];
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (index, tri) in mesh.triangles.iter().enumerate() {
        let (p, area) = element_geometry(mesh, index)?;
        let mut local = [[0.0; 3]; 3];
        match weight {
            None => {
                for (a, row) in local.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    }
                }
            }
            Some(w) => {
                let mut volume = 0.0;
                for l in &BARY {
                    let x = [
                        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                    ];
                    let wq = w(x) * area / 3.0;
                    volume += wq;
                    for a in 0..3 {
                        for b in 0..3 {
                            local[a][b] += wq * l[a] * l[b];
                        }
                    }
                }
                if !(volume > 0.0) {
                    return Err(Error::Mesh(format!(
                        "weighted volume {volume} of triangle {index} is not positive"
                    )));
                }
            }
        }
        scatter(dofs, tri, &local, &mut triplets);
    }
    CsrMatrix::from_triplets(dofs.n_free(), triplets)
}

/// The double-cover weight `4|y|²`.
pub fn double_cover_weight(y: Point) -> f64 {
    4.0 * (y[0] * y[0] + y[1] * y[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_full_disk_mesh, build_half_disk_mesh, unit_square_mesh, Domain};

    fn reference_triangle() -> Mesh {
        Mesh {
            domain: Domain::UnitSquare,
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![],
            split_point: None,
            tip: None,
            symmetry_pairing: None,
        }
    }

    fn all_free(mesh: &Mesh) -> DofMap {
        build_dofmap(mesh, &[]).unwrap()
    }

    #[test]
    fn reference_element_matrices() {
        let m = reference_triangle();
        let d = all_free(&m);
        let k = assemble_stiffness(&m, &d).unwrap().to_dense();
        let expect_k = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (a, b) in k.iter().zip(expect_k) {
            assert!((a - b).abs() < 1e-15);
        }
        let mm = assemble_mass(&m, &d, None).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((mm[i * 3 + j] - e).abs() < 1e-16);
            }
        }
        let one = |_: Point| 1.0;
        let mq = assemble_mass(&m, &d, Some(&one)).unwrap().to_dense();
        for (a, b) in mq.iter().zip(&mm) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn constants_in_stiffness_kernel() {
        let m = build_half_disk_mesh(0.3, 3, 2).unwrap();
        let d = all_free(&m);
        let k = assemble_stiffness(&m, &d).unwrap();
        let ones = vec![1.0; d.n_free()];
        let r = k.mul_vec(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn mass_total_is_area() {
        for m in [
            build_half_disk_mesh(-0.4, 3, 3).unwrap(),
            build_full_disk_mesh(3, true).unwrap(),
            unit_square_mesh(5).unwrap(),
        ] {
            let d = all_free(&m);
            let mass = assemble_mass(&m, &d, None).unwrap();
            let ones = vec![1.0; d.n_free()];
            assert!((mass.bilinear(&ones, &ones) - m.area()).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_mass_integrates_weight() {
        let mut errs = Vec::new();
        for level in 3..=5 {
            let m = build_full_disk_mesh(level, true).unwrap();
            let d = all_free(&m);
            let mass = assemble_mass(&m, &d, Some(&double_cover_weight)).unwrap();
            let ones = vec![1.0; d.n_free()];
            errs.push((mass.bilinear(&ones, &ones) - 2.0 * std::f64::consts::PI).abs());
        }
        assert!(errs[2] < 2e-3);
        // polygonal domain error is O(h²)
        assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0);
    }

    #[test]
    fn dofmap_variants() {
        let m = build_half_disk_mesh(0.9, 4, 0).unwrap();
        let dn = build_dofmap(&m, &[BoundaryTag::Arc, BoundaryTag::DiamLeft]).unwrap();
        for (v, p) in m.vertices.iter().enumerate() {
            if p[1] == 0.0 && p[0] > 0.9 && p[0] < 1.0 {
                assert!(dn.free_index[v].is_some());
            }
            if p[1] == 0.0 && (p[0] == 0.9 || p[0] == 1.0) {
                assert!(dn.free_index[v].is_none());
            }
        }
        let full = build_full_disk_mesh(3, false).unwrap();
        let d = build_dofmap(&full, &[BoundaryTag::Arc]).unwrap();
        let interior = full
            .vertices
            .iter()
            .filter(|p| p[0].hypot(p[1]) < 1.0 - 1e-9)
            .count();
        assert_eq!(d.n_free(), interior);

        let nd = build_dofmap(
            &build_half_disk_mesh(-0.9, 4, 0).unwrap(),
            &[BoundaryTag::Arc, BoundaryTag::DiamRight],
        )
        .unwrap();
        let m = build_half_disk_mesh(-0.9, 4, 0).unwrap();
        let free_on_diameter = m
            .vertices
            .iter()
            .enumerate()
            .filter(|(v, p)| p[1] == 0.0 && nd.free_index[*v].is_some())
            .count();
        assert!(free_on_diameter <= 1);

        let tiny = reference_triangle();
        let mut tiny = tiny;
        tiny.boundary_edges = vec![
            crate::mesh::BoundaryEdge {
                v: [0, 1],
                tag: BoundaryTag::Wall,
            },
            crate::mesh::BoundaryEdge {
                v: [1, 2],
                tag: BoundaryTag::Wall,
            },
            crate::mesh::BoundaryEdge {
                v: [2, 0],
                tag: BoundaryTag::Wall,
            },
        ];
        assert_eq!(
            build_dofmap(&tiny, &[BoundaryTag::Wall]),
            Err(Error::EmptyFreeSet)
        );
    }

    #[test]
    fn matrices_are_symmetric() {
        let m = build_half_disk_mesh(0.2, 3, 3).unwrap();
        let d = build_dofmap(&m, &[BoundaryTag::Arc, BoundaryTag::DiamRight]).unwrap();
        assert!(assemble_stiffness(&m, &d).unwrap().symmetry_defect() < 1e-14);
        let w = |p: Point| 1.0 + p[0] * p[0];
        assert!(assemble_mass(&m, &d, Some(&w)).unwrap().symmetry_defect() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mut m = reference_triangle();
        m.vertices[2] = [2.0, 0.0];
        let d = all_free(&m);
        assert!(matches!(
            assemble_stiffness(&m, &d),
            Err(Error::DegenerateTriangle { .. })
        ));
        let neg = |_: Point| -1.0;
        let ok = reference_triangle();
        assert!(assemble_mass(&ok, &all_free(&ok), Some(&neg)).is_err());
    }

    #[test]
    fn coo_dump_lower_triangle() {
        let m = reference_triangle();
        let k = assemble_stiffness(&m, &all_free(&m)).unwrap();
        let mut buf = Vec::new();
        k.write_lower_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // (1,0), (2,0) and the diagonal; (2,1) is structurally zero but stored
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().all(|l| {
            let f: Vec<usize> = l.split(' ').take(2).map(|s| s.parse().unwrap()).collect();
            f[1] <= f[0]
        }));
    }
}
