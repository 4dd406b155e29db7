//! Structured quadratic triangulation of the rounded square, the triangular
//! subdomain partition carrying the Lamé perturbation basis, and the region of
//! interest mask derived from it.
//!
//! The mesh maps a uniform `n × n` grid over the bounding box onto the domain.
//! The four grid corners are snapped onto the corner arcs; every other boundary
//! vertex already lies on a straight edge. Elements are straight-sided P2
//! triangles whose edge nodes sit at chord midpoints.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;

/// Half length of each clamped segment centred on the top and bottom edges.
pub const DIRICHLET_HALF_SPAN: f64 = 0.1;

/// Grid sizes are preferably multiples of this so that the mesh nests inside
/// the default 5 × 5 subdomain grid.
const GRID_ALIGN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// How each grid cell is cut into triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPattern {
    /// Two triangles per cell split by the lower-left to upper-right diagonal.
    Diagonal,
    /// Four triangles per cell meeting at the cell centre. Symmetric under all
    /// reflections of the square.
    CrissCross,
}

impl GridPattern {
    fn per_cell(self) -> usize {
        match self {
            GridPattern::Diagonal => 2,
            GridPattern::CrissCross => 4,
        }
    }
}

/// A quadratic boundary edge. `t_start < t_end`, with `t_end` possibly
/// exceeding `L` for the edge that wraps through `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Start vertex, end vertex (counter-clockwise) and midpoint node.
    pub nodes: [usize; 3],
    pub tag: BoundaryTag,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    num_vertices: usize,
    triangles: Vec<[usize; 6]>,
    boundary: Vec<BoundaryEdge>,
    dirichlet: Vec<bool>,
    cells: usize,
    pattern: GridPattern,
    half_width: f64,
}

impl Mesh {
    /// All P2 nodes; the first [`Self::num_vertices`] are triangle vertices.
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Triangles as `[v0, v1, v2, m01, m12, m20]`, vertices counter-clockwise.
    pub fn triangles(&self) -> &[[usize; 6]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Whether node `i` is clamped (`u = 0`).
    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn pattern(&self) -> GridPattern {
        self.pattern
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn triangle_vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let t = &self.triangles[e];
        [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]
    }

    pub fn triangle_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.triangle_vertices(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|e| self.triangle_area(e)).sum()
    }

    /// Longest triangle edge.
    pub fn max_edge_length(&self) -> f64 {
        (0..self.triangles.len())
            .flat_map(|e| {
                let [a, b, c] = self.triangle_vertices(e);
                [(a, b), (b, c), (c, a)]
            })
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(0.0, f64::max)
    }

    /// Total length of the Dirichlet edges.
    pub fn dirichlet_length(&self) -> f64 {
        self.boundary.iter().filter(|e| e.tag == BoundaryTag::Dirichlet).map(|e| e.t_end - e.t_start).sum()
    }

    /// Writes the columnar text format read by the plotting tools.
    ///
    /// ```text
    /// # elastoed mesh v1
    /// nodes <count>
    /// <x> <y>
    /// triangles <count>
    /// <v0> <v1> <v2> <m01> <m12> <m20>
    /// boundary <count>
    /// <start> <end> <mid> <D|N> <t_start> <t_end>
    /// ```
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# elastoed mesh v1")?;
        writeln!(out, "nodes {}", self.nodes.len())?;
        for [x, y] in &self.nodes {
            writeln!(out, "{x:.17e} {y:.17e}")?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5])?;
        }
        writeln!(out, "boundary {}", self.boundary.len())?;
        for e in &self.boundary {
            let tag = match e.tag {
                BoundaryTag::Dirichlet => 'D',
                BoundaryTag::Neumann => 'N',
            };
            writeln!(out, "{} {} {} {tag} {:.17e} {:.17e}", e.nodes[0], e.nodes[1], e.nodes[2], e.t_start, e.t_end)?;
        }
        Ok(())
    }
}

/// Builds a mesh with roughly `target_elements` triangles.
///
/// The grid size is chosen as a multiple of five whenever that lands within
/// 25% of the target, preferring the reflection-symmetric criss-cross pattern.
pub fn build_mesh(geom: &BoundaryGeometry, target_elements: usize) -> Result<Mesh> {
    if target_elements < 50 {
        return Err(Error::Mesh(format!("target element count must be >= 50, got {target_elements}")));
    }
    let within = |count: usize| (count as f64 - target_elements as f64).abs() <= 0.25 * target_elements as f64;
    for pattern in [GridPattern::CrissCross, GridPattern::Diagonal] {
        let ideal = (target_elements as f64 / pattern.per_cell() as f64).sqrt();
        let n = ((ideal / GRID_ALIGN as f64).round() as usize).max(1) * GRID_ALIGN;
        if within(pattern.per_cell() * n * n) {
            return build_mesh_with(geom, n, pattern);
        }
    }
    let n = ((target_elements as f64 / 4.0).sqrt().round() as usize).max(2);
    build_mesh_with(geom, n, GridPattern::CrissCross)
}

/// Builds a mesh from an explicit `cells × cells` grid.
pub fn build_mesh_with(geom: &BoundaryGeometry, cells: usize, pattern: GridPattern) -> Result<Mesh> {
    let n = cells;
    let a = geom.half_width();
    let h = 2.0 * a / n as f64;
    if n < 2 || h <= geom.radius() {
        return Err(Error::Mesh(format!("grid of {n} cells is incompatible with corner radius")));
    }

    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let corner = 0.5 + geom.radius() * FRAC_1_SQRT_2;
    for j in 0..=n {
        for i in 0..=n {
            let coord = |k: usize| if k == n { a } else { -a + k as f64 * h };
            let mut p = [coord(i), coord(j)];
            if (i == 0 || i == n) && (j == 0 || j == n) {
                p = [corner * p[0].signum(), corner * p[1].signum()];
            }
            nodes.push(p);
        }
    }
    let centre_base = nodes.len();
    if pattern == GridPattern::CrissCross {
        for j in 0..n {
            for i in 0..n {
                nodes.push([-a + (i as f64 + 0.5) * h, -a + (j as f64 + 0.5) * h]);
            }
        }
    }
    let num_vertices = nodes.len();

    let mut corners = Vec::with_capacity(pattern.per_cell() * n * n);
    for j in 0..n {
        for i in 0..n {
            let (p00, p10, p11, p01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            match pattern {
                GridPattern::Diagonal => {
                    corners.push([p00, p10, p11]);
                    corners.push([p00, p11, p01]);
                }
                GridPattern::CrissCross => {
                    let c = centre_base + j * n + i;
                    corners.push([p00, p10, c]);
                    corners.push([p10, p11, c]);
                    corners.push([p11, p01, c]);
                    corners.push([p01, p00, c]);
                }
            }
        }
    }

    let mut edge_nodes: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |nodes: &mut Vec<[f64; 2]>, p: usize, q: usize| -> usize {
        let key = (p.min(q), p.max(q));
        *edge_nodes.entry(key).or_insert_with(|| {
            let (u, v) = (nodes[p], nodes[q]);
            nodes.push([0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])]);
            nodes.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(corners.len());
    for [p, q, r] in corners {
        let m0 = midpoint(&mut nodes, p, q);
        let m1 = midpoint(&mut nodes, q, r);
        let m2 = midpoint(&mut nodes, r, p);
        triangles.push([p, q, r, m0, m1, m2]);
    }

    // Boundary edges in counter-clockwise order starting on the bottom edge.
    let mut chain = Vec::with_capacity(4 * n);
    for i in 0..n {
        chain.push((vid(i, 0), vid(i + 1, 0), true));
    }
    for j in 0..n {
        chain.push((vid(n, j), vid(n, j + 1), false));
    }
    for i in (0..n).rev() {
        chain.push((vid(i + 1, n), vid(i, n), true));
    }
    for j in (0..n).rev() {
        chain.push((vid(0, j + 1), vid(0, j), false));
    }

    let l = geom.length();
    let mut boundary = Vec::with_capacity(chain.len());
    let mut dirichlet = vec![false; nodes.len()];
    let is_corner = |v: usize| {
        let (i, j) = (v % (n + 1), v / (n + 1));
        (i == 0 || i == n) && (j == 0 || j == n)
    };
    for (p, q, horizontal) in chain {
        let mid = edge_nodes[&(p.min(q), p.max(q))];
        let t_start = geom.gamma_inv_with_tol(nodes[p], 1e-12)?;
        let mut t_end = geom.gamma_inv_with_tol(nodes[q], 1e-12)?;
        if t_end <= t_start {
            t_end += l;
        }
        let xm = nodes[mid][0];
        let tag = if horizontal && !is_corner(p) && !is_corner(q) && xm.abs() <= DIRICHLET_HALF_SPAN + 1e-12 {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Neumann
        };
        if tag == BoundaryTag::Dirichlet {
            for v in [p, q, mid] {
                dirichlet[v] = true;
            }
        }
        boundary.push(BoundaryEdge { nodes: [p, q, mid], tag, t_start, t_end });
    }

    Ok(Mesh { nodes, num_vertices, triangles, boundary, dirichlet, cells: n, pattern, half_width: a })
}

/// Partition of the mesh elements into `N = 2k²` triangular subdomains: a
/// `k × k` grid of squares over the bounding box, each cut by its lower-left
/// to upper-right diagonal.
///
/// Subdomain `2 (J k + I)` is the lower-right half of square `(I, J)` and
/// `2 (J k + I) + 1` its upper-left half.
#[derive(Debug, Clone)]
pub struct SubdomainPartition {
    k: usize,
    half_width: f64,
    element_subdomain: Vec<usize>,
    elements: Vec<Vec<usize>>,
    midpoints: Vec<[f64; 2]>,
    areas: Vec<f64>,
}

impl SubdomainPartition {
    pub fn count(&self) -> usize {
        self.elements.len()
    }

    pub fn grid_size(&self) -> usize {
        self.k
    }

    pub fn subdomain_of(&self, element: usize) -> usize {
        self.element_subdomain[element]
    }

    pub fn element_subdomains(&self) -> &[usize] {
        &self.element_subdomain
    }

    pub fn elements(&self, subdomain: usize) -> &[usize] {
        &self.elements[subdomain]
    }

    /// Centroids of the subdomain triangles.
    pub fn midpoints(&self) -> &[[f64; 2]] {
        &self.midpoints
    }

    /// Sum of the areas of the elements assigned to each subdomain.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Grid square `(I, J)` that subdomain `n` belongs to.
    pub fn cell_of(&self, subdomain: usize) -> (usize, usize) {
        let c = subdomain / 2;
        (c % self.k, c / self.k)
    }

    /// Corner points of the subdomain triangle, counter-clockwise.
    pub fn triangle(&self, subdomain: usize) -> [[f64; 2]; 3] {
        let (i, j) = self.cell_of(subdomain);
        let s = 2.0 * self.half_width / self.k as f64;
        let x0 = -self.half_width + i as f64 * s;
        let y0 = -self.half_width + j as f64 * s;
        if subdomain.is_multiple_of(2) {
            [[x0, y0], [x0 + s, y0], [x0 + s, y0 + s]]
        } else {
            [[x0, y0], [x0 + s, y0 + s], [x0, y0 + s]]
        }
    }
}

pub fn build_subdomains(mesh: &Mesh, n: usize) -> Result<SubdomainPartition> {
    let k = ((n / 2) as f64).sqrt().round() as usize;
    if n == 0 || 2 * k * k != n {
        return Err(Error::Mesh(format!("subdomain count must be 2k² for integer k, got {n}")));
    }
    let a = mesh.half_width();
    let s = 2.0 * a / k as f64;
    let mut element_subdomain = Vec::with_capacity(mesh.triangles().len());
    let mut elements = vec![Vec::new(); n];
    let mut areas = vec![0.0; n];
    for e in 0..mesh.triangles().len() {
        let [cx, cy] = mesh.centroid(e);
        let fi = ((cx + a) / s).clamp(0.0, k as f64 - 1e-9);
        let fj = ((cy + a) / s).clamp(0.0, k as f64 - 1e-9);
        let (i, j) = (fi.floor() as usize, fj.floor() as usize);
        let upper = fj - j as f64 > fi - i as f64;
        let id = 2 * (j * k + i) + usize::from(upper);
        element_subdomain.push(id);
        elements[id].push(e);
        areas[id] += mesh.triangle_area(e);
    }
    if let Some(empty) = elements.iter().position(Vec::is_empty) {
        return Err(Error::Mesh(format!("mesh too coarse: subdomain {empty} received no elements")));
    }
    let mut partition =
        SubdomainPartition { k, half_width: a, element_subdomain, elements, midpoints: Vec::new(), areas };
    partition.midpoints = (0..n)
        .map(|id| {
            let [p, q, r] = partition.triangle(id);
            [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
        })
        .collect();
    Ok(partition)
}

/// Per-subdomain 0/1 weights selecting the region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask(Vec<f64>);

impl RoiMask {
    pub fn all(count: usize) -> Self {
        RoiMask(vec![1.0; count])
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        RoiMask(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn excluded(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &w)| w == 0.0).map(|(i, _)| i).collect()
    }

    /// Multiplies a per-subdomain vector by the mask.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().zip(&self.0).map(|(v, w)| v * w).collect()
    }
}

/// Excludes the subdomains closest to the clamped segments: both halves of
/// every grid square whose boundary side overlaps a Dirichlet edge.
pub fn roi_mask(partition: &SubdomainPartition, mesh: &Mesh) -> RoiMask {
    let a = mesh.half_width();
    let k = partition.grid_size();
    let s = 2.0 * a / k as f64;
    let mut weights = vec![1.0; partition.count()];
    for edge in mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Dirichlet) {
        let p = mesh.nodes()[edge.nodes[0]];
        let q = mesh.nodes()[edge.nodes[1]];
        let (lo, hi) = (p[0].min(q[0]), p[0].max(q[0]));
        let j = if p[1] < 0.0 { 0 } else { k - 1 };
        for i in 0..k {
            let x0 = -a + i as f64 * s;
            let overlap = hi.min(x0 + s) - lo.max(x0);
            if overlap > 1e-12 {
                let c = j * k + i;
                weights[2 * c] = 0.0;
                weights[2 * c + 1] = 0.0;
            }
        }
    }
    RoiMask(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> BoundaryGeometry {
        BoundaryGeometry::new(1e-3).unwrap()
    }

    #[test]
    fn default_mesh_size_and_orientation() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        let count = m.triangles().len();
        assert!((1200..=2000).contains(&count), "{count}");
        assert!((count as f64 - 1632.0).abs() <= 0.25 * 1632.0);
        for e in 0..count {
            assert!(m.triangle_area(e) > 0.0);
        }
        assert_eq!(m.pattern(), GridPattern::CrissCross);
    }

    #[test]
    fn area_matches_domain() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        let rel = (m.total_area() - g.area()).abs() / g.area();
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn boundary_vertices_on_curve() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        for e in m.boundary_edges() {
            for v in &e.nodes[..2] {
                assert!(g.distance_to_boundary(m.nodes()[*v]) < 1e-6);
            }
        }
        let total: f64 = m.boundary_edges().iter().map(|e| e.t_end - e.t_start).sum();
        assert!((total - g.length()).abs() < 1e-12);
    }

    #[test]
    fn conforming_every_interior_edge_shared_twice() {
        let g = geom();
        let m = build_mesh(&g, 400).unwrap();
        let mut count: HashMap<usize, usize> = HashMap::new();
        for t in m.triangles() {
            for mid in &t[3..] {
                *count.entry(*mid).or_default() += 1;
            }
        }
        let boundary_mids: Vec<usize> = m.boundary_edges().iter().map(|e| e.nodes[2]).collect();
        for (mid, c) in count {
            if boundary_mids.contains(&mid) {
                assert_eq!(c, 1);
            } else {
                assert_eq!(c, 2, "edge node {mid} has a hanging side");
            }
        }
    }

    #[test]
    fn dirichlet_segments() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        let h = m.max_edge_length();
        let len = m.dirichlet_length();
        assert!((len - 0.4).abs() <= h, "{len}");
        let a = g.half_width();
        let mut any = false;
        for (i, p) in m.nodes().iter().enumerate() {
            if m.is_dirichlet(i) {
                any = true;
                assert!((p[1].abs() - a).abs() < 1e-12);
                assert!(p[0].abs() <= 0.1 + h);
            }
        }
        assert!(any);
        let centred: f64 = m
            .boundary_edges()
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .map(|e| m.nodes()[e.nodes[2]][0])
            .sum();
        assert!(centred.abs() < 1e-12);
    }

    #[test]
    fn coarse_mesh_covers_all_subdomains() {
        let g = geom();
        let m = build_mesh(&g, 50).unwrap();
        let part = build_subdomains(&m, 50).unwrap();
        assert_eq!(part.count(), 50);
        assert!((0..50).all(|n| !part.elements(n).is_empty()));
    }

    #[test]
    fn default_partition_is_balanced() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        let part = build_subdomains(&m, 50).unwrap();
        let target = m.total_area() / 50.0;
        for &a in part.areas() {
            assert!((a - target).abs() <= 0.1 * target, "{a} vs {target}");
        }
        let sum: f64 = part.areas().iter().sum();
        assert!((sum - m.total_area()).abs() <= 1e-12 * m.total_area());
    }

    #[test]
    fn two_subdomains() {
        let g = geom();
        let m = build_mesh(&g, 200).unwrap();
        let part = build_subdomains(&m, 2).unwrap();
        let [p, q] = [part.midpoints()[0], part.midpoints()[1]];
        assert!((p[0] + q[0]).abs() < 1e-15 && (p[1] + q[1]).abs() < 1e-15);
        assert!(build_subdomains(&m, 3).is_err());
    }

    #[test]
    fn too_coarse_rejected() {
        let g = geom();
        let m = build_mesh_with(&g, 3, GridPattern::Diagonal).unwrap();
        assert!(build_subdomains(&m, 50).is_err());
        assert!(build_mesh(&g, 10).is_err());
    }

    #[test]
    fn roi_excludes_four_next_to_dirichlet() {
        let g = geom();
        let m = build_mesh(&g, 1632).unwrap();
        let part = build_subdomains(&m, 50).unwrap();
        let mask = roi_mask(&part, &m);
        let ones = mask.weights().iter().filter(|&&w| w == 1.0).count();
        assert_eq!(ones, 46);
        let excluded = mask.excluded();
        assert_eq!(excluded.len(), 4);
        let a = g.half_width();
        for id in excluded {
            let tri = part.triangle(id);
            // Every excluded subdomain has a vertex on the clamped side's line
            // and lies in the square straddling the clamped segment.
            assert!(tri.iter().any(|p| (p[1].abs() - a).abs() < 1e-12));
            let xs: Vec<f64> = tri.iter().map(|p| p[0]).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= -DIRICHLET_HALF_SPAN && hi >= DIRICHLET_HALF_SPAN);
        }
        let twice = RoiMask::from_weights(mask.apply(mask.weights()));
        assert_eq!(twice, mask);
    }

    #[test]
    fn export_format_header() {
        let g = geom();
        let m = build_mesh(&g, 50).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# elastoed mesh v1"));
        assert_eq!(lines.next(), Some(format!("nodes {}", m.num_nodes()).as_str()));
        assert!(text.contains(&format!("triangles {}", m.triangles().len())));
    }
}
