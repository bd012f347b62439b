//! Triangulations of the upper half-disk and of the unit disk.
//!
//! The half-disk background mesh is a ring-structured triangulation of the
//! right quarter mirrored onto the left one, so the mesh at `t = 0` is
//! exactly symmetric under `x ↦ -x`. To put the split point `(t, 0)` on a
//! vertex, the whole mesh is pushed through the disk automorphism
//! `z ↦ (z + s)/(1 + s z)` with `s` chosen so that a nearby diameter vertex
//! lands on `t`. The map keeps the arc on the circle and the diameter on the
//! real axis and preserves angles, so no triangle degrades. Tip grading is
//! longest-edge bisection with conforming closure.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Radius of the first grading pass.
pub const GRADING_RADIUS: f64 = 0.25;

/// Below this `|t|` the centre vertex is the one moved onto the split point.
const CENTRE_SHIFT_LIMIT: f64 = 0.05;

const TAG_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BoundaryTag {
    Arc,
    DiamLeft,
    DiamRight,
    /// Straight outer walls of validation domains.
    Wall,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Arc => "ARC",
            BoundaryTag::DiamLeft => "DIAM_LEFT",
            BoundaryTag::DiamRight => "DIAM_RIGHT",
            BoundaryTag::Wall => "WALL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ARC" => Some(BoundaryTag::Arc),
            "DIAM_LEFT" => Some(BoundaryTag::DiamLeft),
            "DIAM_RIGHT" => Some(BoundaryTag::DiamRight),
            "WALL" => Some(BoundaryTag::Wall),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryEdge {
    /// Endpoints in counterclockwise boundary order.
    pub v: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    HalfDisk,
    FullDisk,
    UnitSquare,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub domain: Domain,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Where the diameter switches from `DIAM_LEFT` to `DIAM_RIGHT`.
    pub split_point: Option<f64>,
    /// Vertex sitting at `(split_point, 0)`.
    pub tip: Option<usize>,
    /// Central-symmetry involution `v ↦ v'` with `coords(v') = -coords(v)`.
    pub symmetry_pairing: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshStatistics {
    pub h_max: f64,
    pub h_min: f64,
    /// Degrees.
    pub min_angle: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub area: f64,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn point_segment_dist2(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist2(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

fn point_triangle_dist(p: Point, a: Point, b: Point, c: Point) -> f64 {
    let s1 = signed_area(p, a, b);
    let s2 = signed_area(p, b, c);
    let s3 = signed_area(p, c, a);
    let inside = (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0);
    if inside {
        return 0.0;
    }
    point_segment_dist2(p, a, b)
        .min(point_segment_dist2(p, b, c))
        .min(point_segment_dist2(p, c, a))
        .sqrt()
}

/// Number of segments on the quarter ring `i`.
fn quarter_segments(i: usize) -> usize {
    (FRAC_PI_2 * i as f64).ceil() as usize
}

/// Ring-structured triangulation of the half-disk, symmetric about `x = 0`.
/// Returns vertices, triangles and the ids of the right-hand diameter
/// vertices indexed by ring.
fn structured_half_disk(rings: usize) -> (Vec<Point>, Vec<[usize; 3]>, Vec<usize>) {
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    // right[i][j]: ring i, angle j·(π/2)/m_i;  left[i][j] the mirror image
    let mut right: Vec<Vec<usize>> = vec![vec![0]];
    let mut left: Vec<Vec<usize>> = vec![vec![0]];
    for i in 1..=rings {
        let m = quarter_segments(i);
        let r = i as f64 / rings as f64;
        let mut rr = Vec::with_capacity(m + 1);
        let mut ll = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let theta = j as f64 * FRAC_PI_2 / m as f64;
            let (x, y) = if j == 0 {
                (r, 0.0)
            } else if j == m {
                (0.0, r)
            } else {
                (r * theta.cos(), r * theta.sin())
            };
            let id = vertices.len();
            vertices.push([x, y]);
            rr.push(id);
            if j == m {
                ll.push(id);
            } else {
                vertices.push([-x, y]);
                ll.push(id + 1);
            }
        }
        right.push(rr);
        left.push(ll);
    }

    let mut quarter: Vec<[usize; 3]> = Vec::new();
    for i in 1..=rings {
        let outer = &right[i];
        let mo = outer.len() - 1;
        if i == 1 {
            for q in 0..mo {
                quarter.push([0, outer[q], outer[q + 1]]);
            }
            continue;
        }
        let inner = &right[i - 1];
        let mi = inner.len() - 1;
        let (mut p, mut q) = (0usize, 0usize);
        while p < mi || q < mo {
            let advance_outer = if p == mi {
                true
            } else if q == mo {
                false
            } else {
                let a_next = (p + 1) as f64 / mi as f64;
                let b_next = (q + 1) as f64 / mo as f64;
                b_next <= a_next
            };
            if advance_outer {
                quarter.push([inner[p], outer[q], outer[q + 1]]);
                q += 1;
            } else {
                quarter.push([inner[p], outer[q], inner[p + 1]]);
                p += 1;
            }
        }
    }
    // ring/index lookup for the mirror map
    let mut mirror = vec![0usize; vertices.len()];
    for i in 0..=rings {
        for (a, b) in right[i].iter().zip(&left[i]) {
            mirror[*a] = *b;
            mirror[*b] = *a;
        }
    }
    let mut triangles = Vec::with_capacity(2 * quarter.len());
    for t in &quarter {
        let mut tri = *t;
        if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
        triangles.push(tri);
        // reflection reverses orientation
        triangles.push([mirror[tri[0]], mirror[tri[2]], mirror[tri[1]]]);
    }
    let diameter_right = right.iter().map(|ring| ring[0]).collect();
    (vertices, triangles, diameter_right)
}

/// Boundary edges (counterclockwise) of a triangle list.
fn boundary_of(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            *count.entry(edge_key(t[e], t[(e + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if count[&edge_key(a, b)] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

fn classify_half_disk_edge(vertices: &[Point], e: [usize; 2], t: f64) -> BoundaryTag {
    let (p, q) = (vertices[e[0]], vertices[e[1]]);
    if p[1] == 0.0 && q[1] == 0.0 {
        if p[0].max(q[0]) <= t + TAG_TOL {
            BoundaryTag::DiamLeft
        } else {
            BoundaryTag::DiamRight
        }
    } else {
        BoundaryTag::Arc
    }
}

/// Disk automorphism `z ↦ (z + s)/(1 + s z)`; exact on the real axis.
fn shift_point(p: Point, s: f64) -> Point {
    let (x, y) = (p[0], p[1]);
    let nr = x + s;
    let dr = 1.0 + s * x;
    let di = s * y;
    let d = dr * dr + di * di;
    let re = (nr * dr + y * di) / d;
    let im = if y == 0.0 {
        0.0
    } else {
        (y * dr - nr * di) / d
    };
    [re, im]
}

fn check_level(base_level: u32) -> Result<usize> {
    if base_level == 0 || base_level > 12 {
        return Err(Error::Mesh(format!(
            "base_level must be in 1..=12, got {base_level}"
        )));
    }
    Ok(1usize << base_level)
}

/// Half-disk mesh with the diameter split at `(t, 0)` and `grade_rounds`
/// passes of bisection toward the split point.
///
/// `t = ±1` gives the unsplit half-disk whose whole diameter is tagged
/// `DIAM_LEFT` (`t = 1`) or `DIAM_RIGHT` (`t = -1`); no grading is applied
/// there since the boundary condition does not switch inside the diameter.
pub fn build_half_disk_mesh(t: f64, base_level: u32, grade_rounds: u32) -> Result<Mesh> {
    let rings = check_level(base_level)?;
    if !t.is_finite() || t.abs() > 1.0 {
        return Err(Error::Mesh(format!("split point {t} outside [-1, 1]")));
    }
    let (mut vertices, mut triangles, diameter_right) = structured_half_disk(rings);

    if t.abs() == 1.0 {
        let tip = if t > 0.0 {
            diameter_right[rings]
        } else {
            vertices
                .iter()
                .position(|p| p[0] == -1.0 && p[1] == 0.0)
                .expect("arc endpoint")
        };
        let mut mesh = Mesh {
            domain: Domain::HalfDisk,
            vertices,
            triangles,
            boundary_edges: Vec::new(),
            split_point: Some(t),
            tip: Some(tip),
            symmetry_pairing: None,
        };
        mesh.retag_half_disk(t);
        mesh.validate()?;
        return Ok(mesh);
    }

    let h0 = 1.0 / rings as f64;
    if t.abs() >= 1.0 - 0.5 * h0 {
        return Err(Error::Mesh(format!(
            "split point {t} collides with the arc at base level {base_level} (need |t| < {})",
            1.0 - 0.5 * h0
        )));
    }

    let a = t.abs();
    let (anchor, s) = if a <= CENTRE_SHIFT_LIMIT {
        (0usize, a)
    } else {
        let i = ((a * rings as f64).round() as usize).clamp(1, rings - 1);
        let xi = i as f64 / rings as f64;
        (i, (a - xi) / (1.0 - a * xi))
    };
    let tip = diameter_right[anchor];
    if s != 0.0 {
        for p in vertices.iter_mut() {
            let on_arc = (p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-12;
            let mut q = shift_point(*p, s);
            if on_arc {
                let r = (q[0] * q[0] + q[1] * q[1]).sqrt();
                q = [q[0] / r, q[1] / r];
                if p[1] == 0.0 {
                    q = [p[0], 0.0];
                }
            }
            *p = q;
        }
    }
    vertices[tip] = [a, 0.0];

    if t < 0.0 {
        for p in vertices.iter_mut() {
            p[0] = -p[0];
        }
        for tri in triangles.iter_mut() {
            tri.swap(1, 2);
        }
        vertices[tip] = [t, 0.0];
    }
    for p in vertices.iter_mut() {
        // normalise -0.0 so mirrored meshes compare bitwise
        if p[0] == 0.0 {
            p[0] = 0.0;
        }
    }

    let mut mesh = Mesh {
        domain: Domain::HalfDisk,
        vertices,
        triangles,
        boundary_edges: Vec::new(),
        split_point: Some(t),
        tip: Some(tip),
        symmetry_pairing: None,
    };
    mesh.retag_half_disk(t);

    for pass in 0..grade_rounds {
        let radius = GRADING_RADIUS * 0.5f64.powi(pass as i32);
        let centre = [t, 0.0];
        let marked: Vec<bool> = mesh
            .triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|v| mesh.vertices[v]);
                point_triangle_dist(centre, a, b, c) <= radius
            })
            .collect();
        mesh.refine(&marked)?;
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Triangulation of the unit disk. With `symmetric`, the vertex set is
/// closed under `y ↦ -y` (central inversion) and the pairing is recorded.
pub fn build_full_disk_mesh(base_level: u32, symmetric: bool) -> Result<Mesh> {
    let rings = check_level(base_level)?;
    let (upper_v, upper_t, _) = structured_half_disk(rings);
    let mut vertices = upper_v.clone();
    let mut image = vec![usize::MAX; upper_v.len()];
    let mut on_diameter: HashMap<u64, usize> = HashMap::new();
    for (i, p) in upper_v.iter().enumerate() {
        if p[1] == 0.0 {
            on_diameter.insert(p[0].to_bits(), i);
        }
    }
    for (i, p) in upper_v.iter().enumerate() {
        if p[1] == 0.0 {
            let neg = if p[0] == 0.0 { 0.0 } else { -p[0] };
            image[i] = *on_diameter
                .get(&neg.to_bits())
                .ok_or_else(|| Error::Mesh("diameter vertices are not symmetric".into()))?;
        } else {
            image[i] = vertices.len();
            vertices.push([-p[0], -p[1]]);
        }
    }
    let mut triangles = upper_t.clone();
    triangles.extend(upper_t.iter().map(|t| t.map(|v| image[v])));

    let mut pairing = vec![usize::MAX; vertices.len()];
    for (i, &j) in image.iter().enumerate() {
        pairing[i] = j;
        pairing[j] = i;
    }
    let boundary_edges = boundary_of(&triangles)
        .into_iter()
        .map(|v| BoundaryEdge {
            v,
            tag: BoundaryTag::Arc,
        })
        .collect();
    let mesh = Mesh {
        domain: Domain::FullDisk,
        vertices,
        triangles,
        boundary_edges,
        split_point: None,
        tip: None,
        symmetry_pairing: symmetric.then_some(pairing),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Unit square `[0,1]²` split into `n × n` cells, each cut along its
/// diagonal; all walls tagged `WALL`.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Mesh("unit square needs at least one cell".into()));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let boundary_edges = boundary_of(&triangles)
        .into_iter()
        .map(|v| BoundaryEdge {
            v,
            tag: BoundaryTag::Wall,
        })
        .collect();
    let mesh = Mesh {
        domain: Domain::UnitSquare,
        vertices,
        triangles,
        boundary_edges,
        split_point: None,
        tip: None,
        symmetry_pairing: None,
    };
    mesh.validate()?;
    Ok(mesh)
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, index: usize) -> f64 {
        let [a, b, c] = self.triangles[index].map(|v| self.vertices[v]);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| self.triangle_area(i))
            .sum()
    }

    fn retag_half_disk(&mut self, t: f64) {
        self.boundary_edges = boundary_of(&self.triangles)
            .into_iter()
            .map(|v| BoundaryEdge {
                v,
                tag: classify_half_disk_edge(&self.vertices, v, t),
            })
            .collect();
        self.split_point = Some(t);
    }

    /// Same half-disk triangulation with the split moved to `t`, which must
    /// already be the abscissa of a diameter vertex.
    pub fn with_split(&self, t: f64) -> Result<Mesh> {
        if self.domain != Domain::HalfDisk {
            return Err(Error::Mesh(
                "only half-disk meshes carry a split point".into(),
            ));
        }
        let tip = self
            .vertices
            .iter()
            .position(|p| p[1] == 0.0 && p[0] == t)
            .ok_or_else(|| Error::Mesh(format!("no diameter vertex at x = {t}")))?;
        let mut out = self.clone();
        out.retag_half_disk(t);
        out.tip = Some(tip);
        Ok(out)
    }

    /// Mirror image under `x ↦ -x`; DIAM_LEFT and DIAM_RIGHT swap.
    pub fn mirrored(&self) -> Mesh {
        let mut out = self.clone();
        for p in out.vertices.iter_mut() {
            p[0] = if p[0] == 0.0 { 0.0 } else { -p[0] };
        }
        for tri in out.triangles.iter_mut() {
            tri.swap(1, 2);
        }
        for e in out.boundary_edges.iter_mut() {
            e.v.swap(0, 1);
            e.tag = match e.tag {
                BoundaryTag::DiamLeft => BoundaryTag::DiamRight,
                BoundaryTag::DiamRight => BoundaryTag::DiamLeft,
                other => other,
            };
        }
        out.split_point = self.split_point.map(|t| -t);
        out
    }

    /// Length of the longest edge touching the tip vertex.
    pub fn tip_size(&self) -> Option<f64> {
        let tip = self.tip?;
        let p = self.vertices[tip];
        self.triangles
            .iter()
            .filter(|t| t.contains(&tip))
            .flat_map(|t| t.iter().map(|&v| dist2(p, self.vertices[v]).sqrt()))
            .reduce(f64::max)
    }

    /// One round of longest-edge bisection of the marked triangles with
    /// conforming closure. New midpoints on arc edges are projected onto
    /// the unit circle.
    pub fn refine(&mut self, marked: &[bool]) -> Result<()> {
        if marked.len() != self.triangles.len() {
            return Err(Error::Dimension(format!(
                "{} marks for {} triangles",
                marked.len(),
                self.triangles.len()
            )));
        }
        let longest: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .map(|t| self.longest_edge(t))
            .collect();
        let mut split: HashMap<(usize, usize), usize> = HashMap::new();
        let mut flagged = std::collections::HashSet::new();
        for (i, &m) in marked.iter().enumerate() {
            if m {
                flagged.insert(longest[i]);
            }
        }
        loop {
            let mut changed = false;
            for (i, t) in self.triangles.iter().enumerate() {
                if flagged.contains(&longest[i]) {
                    continue;
                }
                let touched = (0..3).any(|e| flagged.contains(&edge_key(t[e], t[(e + 1) % 3])));
                if touched {
                    flagged.insert(longest[i]);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if flagged.is_empty() {
            return Ok(());
        }

        let tags: HashMap<(usize, usize), BoundaryTag> = self
            .boundary_edges
            .iter()
            .map(|e| (edge_key(e.v[0], e.v[1]), e.tag))
            .collect();
        // midpoints numbered in triangle order for determinism
        for t in &self.triangles {
            for e in 0..3 {
                let key = edge_key(t[e], t[(e + 1) % 3]);
                if flagged.contains(&key) && !split.contains_key(&key) {
                    let (a, b) = (self.vertices[key.0], self.vertices[key.1]);
                    let mut m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    if tags.get(&key) == Some(&BoundaryTag::Arc) {
                        let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
                        m = [m[0] / r, m[1] / r];
                    }
                    if m[0] == 0.0 {
                        m[0] = 0.0;
                    }
                    split.insert(key, self.vertices.len());
                    self.vertices.push(m);
                }
            }
        }

        let mut out = Vec::with_capacity(self.triangles.len() + 2 * split.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let Some(&m) = split.get(&longest[i]) else {
                out.push(*t);
                continue;
            };
            // rotate so the longest edge is (a, b)
            let k = (0..3)
                .find(|&e| edge_key(t[e], t[(e + 1) % 3]) == longest[i])
                .expect("longest edge belongs to its triangle");
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            for child in [[a, m, c], [m, b, c]] {
                // at most one original edge of the child can still be split
                let hit = [(child[1], child[2]), (child[2], child[0])]
                    .into_iter()
                    .enumerate()
                    .find_map(|(j, (p, q))| split.get(&edge_key(p, q)).map(|&mid| (j, mid)));
                match hit {
                    None => out.push(child),
                    Some((0, mid)) => {
                        out.push([child[0], child[1], mid]);
                        out.push([child[0], mid, child[2]]);
                    }
                    Some((_, mid)) => {
                        out.push([child[0], child[1], mid]);
                        out.push([mid, child[1], child[2]]);
                    }
                }
            }
        }
        self.triangles = out;

        let mut new_boundary = Vec::with_capacity(self.boundary_edges.len() + 8);
        for e in &self.boundary_edges {
            match split.get(&edge_key(e.v[0], e.v[1])) {
                Some(&m) => {
                    new_boundary.push(BoundaryEdge {
                        v: [e.v[0], m],
                        tag: e.tag,
                    });
                    new_boundary.push(BoundaryEdge {
                        v: [m, e.v[1]],
                        tag: e.tag,
                    });
                }
                None => new_boundary.push(*e),
            }
        }
        self.boundary_edges = new_boundary;
        for (i, _) in self.triangles.iter().enumerate() {
            let area = self.triangle_area(i);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: i, area });
            }
        }
        Ok(())
    }

    /// Longest edge of a triangle. Exact length ties are broken by the
    /// midpoint's `(|x|, y)`, which keeps refinement mirror-equivariant.
    fn longest_edge(&self, t: &[usize; 3]) -> (usize, usize) {
        let mut best: Option<((usize, usize), f64, [f64; 2])> = None;
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len = dist2(pa, pb);
            let mid = [(0.5 * (pa[0] + pb[0])).abs(), 0.5 * (pa[1] + pb[1])];
            let better = match &best {
                None => true,
                Some((_, l, m)) => len > *l || (len == *l && (mid[0], mid[1]) > (m[0], m[1])),
            };
            if better {
                best = Some((edge_key(a, b), len, mid));
            }
        }
        best.expect("three edges").0
    }

    /// Checks conformity, orientation, closed boundary loops, tag placement
    /// and the symmetry pairing.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!(
                    "triangle {i} references a missing vertex"
                )));
            }
            let area = self.triangle_area(i);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: i, area });
            }
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *count.entry(edge_key(t[e], t[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        if let Some((e, _)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!(
                "edge {e:?} shared by more than two triangles"
            )));
        }
        let boundary: Vec<_> = count
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(e, _)| *e)
            .collect();
        if boundary.len() != self.boundary_edges.len() {
            return Err(Error::Mesh(format!(
                "{} boundary edges recorded, {} found",
                self.boundary_edges.len(),
                boundary.len()
            )));
        }
        let mut out_deg = vec![0usize; n];
        let mut in_deg = vec![0usize; n];
        for e in &self.boundary_edges {
            if count.get(&edge_key(e.v[0], e.v[1])) != Some(&1) {
                return Err(Error::Mesh(format!(
                    "recorded boundary edge {:?} is interior",
                    e.v
                )));
            }
            out_deg[e.v[0]] += 1;
            in_deg[e.v[1]] += 1;
        }
        if (0..n).any(|v| out_deg[v] != in_deg[v] || out_deg[v] > 1) {
            return Err(Error::Mesh(
                "boundary edges do not form closed loops".into(),
            ));
        }
        for e in &self.boundary_edges {
            let (p, q) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
            let ok = match e.tag {
                BoundaryTag::Arc => [p, q]
                    .iter()
                    .all(|v| (v[0].hypot(v[1]) - 1.0).abs() <= 1e-12),
                BoundaryTag::DiamLeft => {
                    let t = self.split_point.unwrap_or(f64::NAN);
                    p[1] == 0.0 && q[1] == 0.0 && p[0].max(q[0]) <= t + TAG_TOL
                }
                BoundaryTag::DiamRight => {
                    let t = self.split_point.unwrap_or(f64::NAN);
                    p[1] == 0.0 && q[1] == 0.0 && p[0].min(q[0]) >= t - TAG_TOL
                }
                BoundaryTag::Wall => true,
            };
            if !ok {
                return Err(Error::Mesh(format!(
                    "boundary edge {:?} carries the wrong tag",
                    e.v
                )));
            }
        }
        if let Some(pairing) = &self.symmetry_pairing {
            if pairing.len() != n {
                return Err(Error::Mesh(
                    "pairing length differs from vertex count".into(),
                ));
            }
            for (v, &w) in pairing.iter().enumerate() {
                if w >= n || pairing[w] != v {
                    return Err(Error::Mesh(format!("pairing is not an involution at {v}")));
                }
                let (p, q) = (self.vertices[v], self.vertices[w]);
                if (p[0] + q[0]).abs() > 1e-12 || (p[1] + q[1]).abs() > 1e-12 {
                    return Err(Error::Mesh(format!(
                        "paired vertices {v}, {w} are not opposite"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the plain-text dump: `nv nt ne`, then vertices, triangles and
    /// tagged boundary edges.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.v[0], e.v[1], e.tag.as_str());
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads a dump written by [`Mesh::write_dump`]. Split point, tip and
    /// pairing are not part of the format and come back empty.
    pub fn read_dump<R: BufRead>(input: R, domain: Domain) -> Result<Mesh> {
        let bad = |msg: &str| Error::Mesh(format!("malformed dump: {msg}"));
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("unexpected end"))?
                .map_err(Error::from)
        };
        let header = next()?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("header")))
            .collect::<Result<_>>()?;
        let [nv, nt, ne] = counts[..] else {
            return Err(bad("header needs three counts"));
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next()?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("vertex")))
                .collect::<Result<_>>()?;
            let [x, y] = v[..] else {
                return Err(bad("vertex"));
            };
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next()?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("triangle")))
                .collect::<Result<_>>()?;
            let [a, b, c] = v[..] else {
                return Err(bad("triangle"));
            };
            triangles.push([a, b, c]);
        }
        let mut boundary_edges = Vec::with_capacity(ne);
        for _ in 0..ne {
            let l = next()?;
            let f: Vec<&str> = l.split_whitespace().collect();
            let [a, b, tag] = f[..] else {
                return Err(bad("boundary edge"));
            };
            boundary_edges.push(BoundaryEdge {
                v: [
                    a.parse().map_err(|_| bad("boundary edge"))?,
                    b.parse().map_err(|_| bad("boundary edge"))?,
                ],
                tag: BoundaryTag::parse(tag).ok_or_else(|| bad("unknown tag"))?,
            });
        }
        Ok(Mesh {
            domain,
            vertices,
            triangles,
            boundary_edges,
            split_point: None,
            tip: None,
            symmetry_pairing: None,
        })
    }
}

pub fn mesh_statistics(mesh: &Mesh) -> MeshStatistics {
    let mut h_max = 0.0_f64;
    let mut h_min = f64::INFINITY;
    let mut min_angle = PI;
    for t in &mesh.triangles {
        let p = t.map(|v| mesh.vertices[v]);
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let c = p[(k + 2) % 3];
            let len = dist2(a, b).sqrt();
            h_max = h_max.max(len);
            h_min = h_min.min(len);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (dist2(a, b) * dist2(a, c)).sqrt();
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos());
        }
    }
    MeshStatistics {
        h_max,
        h_min,
        min_angle: min_angle.to_degrees(),
        n_vertices: mesh.vertices.len(),
        n_triangles: mesh.triangles.len(),
        area: mesh.area(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_half_disk_area() {
        let m = build_half_disk_mesh(0.0, 3, 0).unwrap();
        assert!((m.area() - FRAC_PI_2).abs() < 0.02);
        assert!(m.area() < FRAC_PI_2);
        assert_eq!(m.n_triangles() % 2, 0);
    }

    #[test]
    fn split_vertex_is_unique_and_tags_consistent() {
        for level in 2..=5 {
            let m = build_half_disk_mesh(0.5, level, 2).unwrap();
            let at_tip = m
                .vertices
                .iter()
                .filter(|p| p[0] == 0.5 && p[1] == 0.0)
                .count();
            assert_eq!(at_tip, 1);
            assert_eq!(m.vertices[m.tip.unwrap()], [0.5, 0.0]);
            for e in &m.boundary_edges {
                let (p, q) = (m.vertices[e.v[0]], m.vertices[e.v[1]]);
                match e.tag {
                    BoundaryTag::DiamLeft => assert!(p[0] <= 0.5 && q[0] <= 0.5),
                    BoundaryTag::DiamRight => assert!(p[0] >= 0.5 && q[0] >= 0.5),
                    BoundaryTag::Arc => {}
                    BoundaryTag::Wall => panic!("no walls on the half-disk"),
                }
            }
        }
    }

    #[test]
    fn graded_mesh_quality() {
        let coarse = build_half_disk_mesh(0.0, 3, 0).unwrap();
        let m = build_half_disk_mesh(0.0, 3, 4).unwrap();
        let tip = m.vertices[m.tip.unwrap()];
        let nearest = m
            .vertices
            .iter()
            .filter(|p| **p != tip)
            .map(|p| dist2(*p, tip).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= GRADING_RADIUS / 16.0, "nearest {nearest}");
        let stats = mesh_statistics(&m);
        assert!(stats.min_angle >= 20.0, "min angle {}", stats.min_angle);
        assert!(stats.h_min < mesh_statistics(&coarse).h_min);
    }

    #[test]
    fn collision_with_arc_is_rejected() {
        assert!(build_half_disk_mesh(0.95, 3, 0).is_err());
        assert!(build_half_disk_mesh(0.95, 4, 0).is_ok());
        assert!(build_half_disk_mesh(1.5, 4, 0).is_err());
    }

    #[test]
    fn endpoint_meshes_are_unsplit() {
        let m = build_half_disk_mesh(1.0, 3, 4).unwrap();
        assert!(m
            .boundary_edges
            .iter()
            .all(|e| e.tag != BoundaryTag::DiamRight));
        let m = build_half_disk_mesh(-1.0, 3, 4).unwrap();
        assert!(m
            .boundary_edges
            .iter()
            .all(|e| e.tag != BoundaryTag::DiamLeft));
    }

    #[test]
    fn full_disk_pairing() {
        let m = build_full_disk_mesh(3, true).unwrap();
        let pairing = m.symmetry_pairing.as_ref().unwrap();
        for (v, &w) in pairing.iter().enumerate() {
            assert_eq!(pairing[w], v);
            assert!((m.vertices[v][0] + m.vertices[w][0]).abs() <= 1e-12);
            assert!((m.vertices[v][1] + m.vertices[w][1]).abs() <= 1e-12);
        }
        let m4 = build_full_disk_mesh(4, false).unwrap();
        assert!((m4.area() - PI).abs() < 0.006);
        assert!(m4.symmetry_pairing.is_none());
        let m1 = build_full_disk_mesh(1, true).unwrap();
        m1.validate().unwrap();
    }

    #[test]
    fn statistics_are_positive() {
        for m in [
            build_half_disk_mesh(0.3, 2, 3).unwrap(),
            build_full_disk_mesh(2, true).unwrap(),
            unit_square_mesh(4).unwrap(),
        ] {
            let s = mesh_statistics(&m);
            assert!(s.min_angle > 0.0);
            assert!(s.h_min > 0.0 && s.h_max >= s.h_min);
        }
        assert!((unit_square_mesh(3).unwrap().area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dump_round_trip() {
        let m = build_half_disk_mesh(0.25, 2, 1).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            format!(
                "{} {} {}",
                m.n_vertices(),
                m.n_triangles(),
                m.boundary_edges.len()
            )
        );
        let back = Mesh::read_dump(std::io::Cursor::new(buf), Domain::HalfDisk).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert!(Mesh::read_dump(std::io::Cursor::new("3 1\n"), Domain::HalfDisk).is_err());
    }

    #[test]
    fn retagging_requires_a_vertex() {
        let m = build_half_disk_mesh(0.0, 3, 0).unwrap();
        let moved = m.with_split(0.25).unwrap();
        assert_eq!(moved.vertices[moved.tip.unwrap()], [0.25, 0.0]);
        moved.validate().unwrap();
        assert!(m.with_split(0.3).is_err());
    }
}
