//! Vector P2 finite elements for plane linear elasticity.
//!
//! The bilinear form is `B_τ(w, v) = ∫ 2μ ε(w):ε(v) + λ (∇·w)(∇·v)`. Dirichlet
//! degrees of freedom are eliminated; the remaining system is factorized once
//! and reused for every load.

use crate::error::{Error, Result};
use crate::geometry::BoundaryGeometry;
use crate::mesh::{BoundaryTag, Mesh, SubdomainPartition};
use crate::skyline::{reverse_cuthill_mckee, EnvelopeCholesky, EnvelopeMatrix};

const NOT_FREE: usize = usize::MAX;

/// Degree-5 seven-point rule on the reference triangle (barycentric
/// coordinates, weights summing to one).
const TRI_RULE: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const W1: f64 = 0.132_394_152_788_506_2;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W2: f64 = 0.125_939_180_544_827_1;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Four-point Gauss-Legendre rule on `[-1, 1]`.
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Subintervals per smooth boundary piece in the load quadrature.
const EDGE_SUBDIVISIONS: usize = 4;

const NQ: usize = TRI_RULE.len();

/// Spatially constant background Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameBackground {
    pub lambda: f64,
    pub mu: f64,
}

impl LameBackground {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite() && lambda > 0.0 && mu > 0.0) {
            return Err(Error::Config(format!("Lamé parameters must be positive, got λ={lambda}, μ={mu}")));
        }
        Ok(Self { lambda, mu })
    }
}

/// Which coefficient a subdomain perturbation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    /// `B_{(ψ,0)}(u, v) = ∫ ψ (∇·u)(∇·v)`.
    Lambda,
    /// `B_{(0,ψ)}(u, v) = ∫ ψ 2 ε(u):ε(v)`.
    Mu,
}

/// Coefficient vector over the vector P2 space, `2 * nodes` entries with the
/// x and y components of node `i` at `2i` and `2i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField(Vec<f64>);

impl DisplacementField {
    pub fn zeros(dofs: usize) -> Self {
        Self(vec![0.0; dofs])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Load vector `∫_{Γ_N} g·v ds` over the test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct TractionLoad(Vec<f64>);

impl TractionLoad {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sum of the x and y entries separately.
    pub fn resultant(&self) -> [f64; 2] {
        let mut r = [0.0; 2];
        for (i, v) in self.0.iter().enumerate() {
            r[i % 2] += v;
        }
        r
    }

    /// `Σ f_i u_i`, the work of this load on a displacement.
    pub fn dot(&self, u: &DisplacementField) -> f64 {
        self.0.iter().zip(u.values()).map(|(a, b)| a * b).sum()
    }
}

/// Strain tensor `(ε_xx, ε_yy, ε_xy)` of a field at every element quadrature point.
#[derive(Debug, Clone)]
pub struct StrainTable(Vec<[f64; 3]>);

#[derive(Debug, Clone)]
struct ElementQuad {
    /// Quadrature weights scaled by the element area.
    weights: [f64; NQ],
    /// Gradients of the six shape functions at each quadrature point.
    grads: [[[f64; 2]; 6]; NQ],
}

impl ElementQuad {
    fn new(v: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = v;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det;
        let dl = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        let mut weights = [0.0; NQ];
        let mut grads = [[[0.0; 2]; 6]; NQ];
        for (q, (l, w)) in TRI_RULE.iter().enumerate() {
            weights[q] = w * area;
            let g = &mut grads[q];
            for i in 0..3 {
                for c in 0..2 {
                    g[i][c] = (4.0 * l[i] - 1.0) * dl[i][c];
                }
            }
            for (slot, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                for c in 0..2 {
                    g[3 + slot][c] = 4.0 * (l[j] * dl[i][c] + l[i] * dl[j][c]);
                }
            }
        }
        Self { weights, grads }
    }

    /// 12 × 12 element stiffness for constant `(λ, μ)`.
    fn stiffness(&self, lambda: f64, mu: f64) -> [[f64; 12]; 12] {
        let mut k = [[0.0; 12]; 12];
        for q in 0..NQ {
            let w = self.weights[q];
            let g = &self.grads[q];
            for a in 0..6 {
                for b in 0..6 {
                    let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                    for c in 0..2 {
                        for d in 0..2 {
                            let delta = if c == d { dot } else { 0.0 };
                            let v = mu * (delta + g[a][d] * g[b][c]) + lambda * g[a][c] * g[b][d];
                            k[2 * a + c][2 * b + d] += w * v;
                        }
                    }
                }
            }
        }
        k
    }
}

/// Finite element space on a fixed mesh together with its quadrature data.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    geom: BoundaryGeometry,
    elements: Vec<ElementQuad>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, geom: BoundaryGeometry) -> Self {
        let elements = (0..mesh.triangles().len()).map(|e| ElementQuad::new(mesh.triangle_vertices(e))).collect();
        Self { mesh, geom, elements }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn geometry(&self) -> &BoundaryGeometry {
        &self.geom
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.mesh.num_nodes()
    }

    fn element_dofs(&self, e: usize) -> [usize; 12] {
        let t = &self.mesh.triangles()[e];
        let mut d = [0; 12];
        for a in 0..6 {
            d[2 * a] = 2 * t[a];
            d[2 * a + 1] = 2 * t[a] + 1;
        }
        d
    }

    /// Assembles and factorizes the stiffness matrix for constant background
    /// parameters.
    pub fn assemble_stiffness(&self, tau0: &LameBackground) -> Result<StiffnessOperator> {
        self.assemble_stiffness_with(|_| (tau0.lambda, tau0.mu))
    }

    /// Assembles with element-wise constant `(λ_e, μ_e)`.
    pub fn assemble_stiffness_with<F: Fn(usize) -> (f64, f64)>(&self, coefficients: F) -> Result<StiffnessOperator> {
        let mesh = &self.mesh;
        let n_nodes = mesh.num_nodes();
        let mut adjacency = vec![Vec::new(); n_nodes];
        for t in mesh.triangles() {
            for &a in t {
                for &b in t {
                    if a != b && !mesh.is_dirichlet(a) && !mesh.is_dirichlet(b) {
                        adjacency[a].push(b);
                    }
                }
            }
        }
        let free_nodes: Vec<usize> = (0..n_nodes).filter(|&v| !mesh.is_dirichlet(v)).collect();
        if free_nodes.len() == n_nodes {
            return Err(Error::Config("no Dirichlet nodes: the stiffness matrix would be singular".into()));
        }
        let mut compact = vec![NOT_FREE; n_nodes];
        for (i, &v) in free_nodes.iter().enumerate() {
            compact[v] = i;
        }
        let graph: Vec<Vec<usize>> = free_nodes
            .iter()
            .map(|&v| {
                let mut nb: Vec<usize> = adjacency[v].iter().map(|&w| compact[w]).collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        let order = reverse_cuthill_mckee(&graph);

        let mut dof_to_free = vec![NOT_FREE; 2 * n_nodes];
        let mut free_to_dof = Vec::with_capacity(2 * free_nodes.len());
        for &c in &order {
            let v = free_nodes[c];
            for comp in 0..2 {
                dof_to_free[2 * v + comp] = free_to_dof.len();
                free_to_dof.push(2 * v + comp);
            }
        }

        let nfree = free_to_dof.len();
        let mut first: Vec<usize> = (0..nfree).collect();
        for e in 0..mesh.triangles().len() {
            let free: Vec<usize> =
                self.element_dofs(e).iter().map(|&d| dof_to_free[d]).filter(|&f| f != NOT_FREE).collect();
            let lo = *free.iter().min().unwrap_or(&0);
            for &f in &free {
                first[f] = first[f].min(lo);
            }
        }
        let mut matrix = EnvelopeMatrix::with_profile(first);
        for (e, quad) in self.elements.iter().enumerate() {
            let (lambda, mu) = coefficients(e);
            let ke = quad.stiffness(lambda, mu);
            let dofs = self.element_dofs(e);
            for a in 0..12 {
                let fa = dof_to_free[dofs[a]];
                if fa == NOT_FREE {
                    continue;
                }
                for b in 0..12 {
                    let fb = dof_to_free[dofs[b]];
                    if fb != NOT_FREE && fb <= fa {
                        matrix.add(fa, fb, ke[a][b]);
                    }
                }
            }
        }
        let factor = matrix.cholesky()?;
        Ok(StiffnessOperator { dof_to_free, free_to_dof, matrix, factor })
    }

    /// Load vector of a boundary traction given as a function of arclength.
    ///
    /// Only Neumann edges contribute; the part of `g` lying on the clamped
    /// segments is ignored. Each edge is integrated along the true boundary,
    /// split at the corner-arc seams.
    pub fn assemble_load<G: Fn(f64) -> [f64; 2]>(&self, g: G) -> TractionLoad {
        let mut f = vec![0.0; self.num_dofs()];
        let l = self.geom.length();
        let seams = self.geom.seams();
        for edge in self.mesh.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Neumann) {
            let (t0, t1) = (edge.t_start, edge.t_end);
            let mut breaks = vec![t0];
            for shift in [0.0, l] {
                breaks.extend(seams.iter().map(|s| s + shift).filter(|&s| s > t0 + 1e-14 && s < t1 - 1e-14));
            }
            breaks.push(t1);
            breaks.sort_by(f64::total_cmp);
            let span = t1 - t0;
            let [n_start, n_end, n_mid] = edge.nodes;
            for piece in breaks.windows(2) {
                let h = (piece[1] - piece[0]) / EDGE_SUBDIVISIONS as f64;
                for s in 0..EDGE_SUBDIVISIONS {
                    let a = piece[0] + s as f64 * h;
                    for (x, w) in GAUSS4 {
                        let t = a + 0.5 * h * (x + 1.0);
                        let wt = 0.5 * h * w;
                        let xi = (t - t0) / span;
                        let shape = [(1.0 - xi) * (1.0 - 2.0 * xi), xi * (2.0 * xi - 1.0), 4.0 * xi * (1.0 - xi)];
                        let gv = g(t);
                        for (node, phi) in [n_start, n_end, n_mid].into_iter().zip(shape) {
                            for c in 0..2 {
                                f[2 * node + c] += wt * phi * gv[c];
                            }
                        }
                    }
                }
            }
        }
        for (node, &clamped) in self.mesh.dirichlet_mask().iter().enumerate() {
            if clamped {
                f[2 * node] = 0.0;
                f[2 * node + 1] = 0.0;
            }
        }
        TractionLoad(f)
    }

    /// Strains of `u` at every quadrature point of every element.
    pub fn strains(&self, u: &DisplacementField) -> StrainTable {
        let vals = u.values();
        let mut out = Vec::with_capacity(self.elements.len() * NQ);
        for (e, quad) in self.elements.iter().enumerate() {
            let t = &self.mesh.triangles()[e];
            for g in &quad.grads {
                let mut du = [[0.0; 2]; 2];
                for a in 0..6 {
                    for c in 0..2 {
                        let coeff = vals[2 * t[a] + c];
                        du[c][0] += coeff * g[a][0];
                        du[c][1] += coeff * g[a][1];
                    }
                }
                out.push([du[0][0], du[1][1], 0.5 * (du[0][1] + du[1][0])]);
            }
        }
        StrainTable(out)
    }

    /// Per-element integrals `(∫ (∇·u)(∇·v), ∫ 2 ε(u):ε(v))`.
    pub fn element_forms(&self, su: &StrainTable, sv: &StrainTable) -> Vec<(f64, f64)> {
        self.elements
            .iter()
            .enumerate()
            .map(|(e, quad)| {
                let mut lam = 0.0;
                let mut mu = 0.0;
                for q in 0..NQ {
                    let a = su.0[e * NQ + q];
                    let b = sv.0[e * NQ + q];
                    let w = quad.weights[q];
                    lam += w * (a[0] + a[1]) * (b[0] + b[1]);
                    mu += w * 2.0 * (a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]);
                }
                (lam, mu)
            })
            .collect()
    }

    /// `B_{(ψ_n,0)}(u, v)` and `B_{(0,ψ_n)}(u, v)` for every subdomain `n`.
    pub fn subdomain_forms(
        &self,
        partition: &SubdomainPartition,
        su: &StrainTable,
        sv: &StrainTable,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut lam = vec![0.0; partition.count()];
        let mut mu = vec![0.0; partition.count()];
        for (e, (l, m)) in self.element_forms(su, sv).into_iter().enumerate() {
            let n = partition.subdomain_of(e);
            lam[n] += l;
            mu[n] += m;
        }
        (lam, mu)
    }

    /// `B_η(u, v)` for `η` the indicator of one subdomain in one coefficient.
    pub fn bilinear_eval(
        &self,
        partition: &SubdomainPartition,
        subdomain: usize,
        which: Coefficient,
        u: &DisplacementField,
        v: &DisplacementField,
    ) -> f64 {
        let (su, sv) = (self.strains(u), self.strains(v));
        let forms = self.element_forms(&su, &sv);
        partition
            .elements(subdomain)
            .iter()
            .map(|&e| match which {
                Coefficient::Lambda => forms[e].0,
                Coefficient::Mu => forms[e].1,
            })
            .sum()
    }
}

/// Factorized stiffness matrix on the unconstrained degrees of freedom.
#[derive(Debug, Clone)]
pub struct StiffnessOperator {
    dof_to_free: Vec<usize>,
    free_to_dof: Vec<usize>,
    matrix: EnvelopeMatrix,
    factor: EnvelopeCholesky,
}

impl StiffnessOperator {
    pub fn num_free(&self) -> usize {
        self.free_to_dof.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_to_free.len()
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.dof_to_free[dof] != NOT_FREE
    }

    /// Cholesky pivots of the constrained system.
    pub fn pivots(&self) -> Vec<f64> {
        self.factor.pivots()
    }

    /// Stored matrix entry between two global dofs (zero if either is clamped).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.dof_to_free[i], self.dof_to_free[j]);
        if a == NOT_FREE || b == NOT_FREE {
            0.0
        } else {
            self.matrix.get(a, b)
        }
    }

    pub fn solve(&self, f: &TractionLoad) -> DisplacementField {
        let mut rhs: Vec<f64> = self.free_to_dof.iter().map(|&d| f.0[d]).collect();
        self.factor.solve_in_place(&mut rhs);
        let mut u = vec![0.0; self.num_dofs()];
        for (&d, v) in self.free_to_dof.iter().zip(rhs) {
            u[d] = v;
        }
        DisplacementField(u)
    }

    /// `K u` restricted to the free dofs (zero entries at clamped dofs).
    pub fn apply(&self, u: &DisplacementField) -> Vec<f64> {
        let x: Vec<f64> = self.free_to_dof.iter().map(|&d| u.0[d]).collect();
        let y = self.matrix.mul_vec(&x);
        let mut out = vec![0.0; self.num_dofs()];
        for (&d, v) in self.free_to_dof.iter().zip(y) {
            out[d] = v;
        }
        out
    }

    /// `‖K u − f‖` over the free dofs.
    pub fn residual_norm(&self, u: &DisplacementField, f: &TractionLoad) -> f64 {
        let ku = self.apply(u);
        self.free_to_dof.iter().map(|&d| (ku[d] - f.0[d]).powi(2)).sum::<f64>().sqrt()
    }

    /// `uᵀ K v` over the free dofs.
    pub fn energy(&self, u: &DisplacementField, v: &DisplacementField) -> f64 {
        self.apply(v).iter().zip(&u.0).map(|(a, b)| a * b).sum()
    }
}
