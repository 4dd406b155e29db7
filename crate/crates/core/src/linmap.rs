//! Linearized forward map `F(p)` and its position derivative, assembled with
//! the adjoint sampling identities
//!
//! ```text
//! F_{m,n}(p)   = −B_{(ψ_n,0)}(u_p,  u_{s_m}),   F_{m,N+n}(p)  = −B_{(0,ψ_n)}(u_p,  u_{s_m})
//! F′_{m,n}(p)  = −B_{(ψ_n,0)}(u′_p, u_{s_m}),   F′_{m,N+n}(p) = −B_{(0,ψ_n)}(u′_p, u_{s_m})
//! ```
//!
//! where `u_p` solves the background problem with load `g_p` and `u′_p` the one
//! with load `∂g_p/∂p`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{DisplacementField, FeSpace, StiffnessOperator, StrainTable, TractionLoad};
use crate::geometry::{activation, activation_p_derivative, ActivationShape};
use crate::mesh::SubdomainPartition;

/// Relative tolerance (in units of `L`) for reusing a sensor solution as `u_p`.
pub const SENSOR_REUSE_TOL: f64 = 1e-12;

/// Sensor functions `s_m = g_{p_m}` at equidistant positions and their
/// background solutions.
#[derive(Debug, Clone)]
pub struct SensorSet {
    positions: Vec<f64>,
    loads: Vec<TractionLoad>,
    fields: Vec<DisplacementField>,
    strains: Vec<StrainTable>,
}

impl SensorSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn fields(&self) -> &[DisplacementField] {
        &self.fields
    }

    /// Readings `∫ s_m · u ds` of a displacement field.
    pub fn readings(&self, u: &DisplacementField) -> Vec<f64> {
        self.loads.iter().map(|s| s.dot(u)).collect()
    }
}

/// Solves for the `M` sensor fields at `p_m = (m−1)L/M`; `amplitude` is the
/// peak pressure of every activation.
pub fn precompute_sensors(
    space: &FeSpace,
    stiffness: &StiffnessOperator,
    m: usize,
    shape: &ActivationShape,
    amplitude: f64,
) -> Result<SensorSet> {
    if m == 0 {
        return Err(Error::Config("at least one sensor is required".into()));
    }
    let geom = *space.geometry();
    let positions: Vec<f64> = (0..m).map(|i| i as f64 * geom.length() / m as f64).collect();
    let solved: Vec<_> = positions
        .par_iter()
        .map(|&p| {
            let load = space.assemble_load(|t| activation(&geom, shape, p, t).map(|v| amplitude * v));
            let field = stiffness.solve(&load);
            let strains = space.strains(&field);
            (load, field, strains)
        })
        .collect();
    let mut set = SensorSet { positions, loads: Vec::new(), fields: Vec::new(), strains: Vec::new() };
    for (load, field, strains) in solved {
        set.loads.push(load);
        set.fields.push(field);
        set.strains.push(strains);
    }
    Ok(set)
}

/// Everything needed to map activation positions to `F(p)` and `F′(p)`:
/// the finite element space, the factorized background operator, the
/// perturbation basis and the cached sensor solutions.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    space: FeSpace,
    stiffness: StiffnessOperator,
    partition: SubdomainPartition,
    shape: ActivationShape,
    amplitude: f64,
    sensors: SensorSet,
}

impl ForwardModel {
    pub fn new(
        space: FeSpace,
        stiffness: StiffnessOperator,
        partition: SubdomainPartition,
        shape: ActivationShape,
        amplitude: f64,
        num_sensors: usize,
    ) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("activation amplitude must be positive, got {amplitude}")));
        }
        let sensors = precompute_sensors(&space, &stiffness, num_sensors, &shape, amplitude)?;
        Ok(Self { space, stiffness, partition, shape, amplitude, sensors })
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn stiffness(&self) -> &StiffnessOperator {
        &self.stiffness
    }

    pub fn partition(&self) -> &SubdomainPartition {
        &self.partition
    }

    pub fn shape(&self) -> &ActivationShape {
        &self.shape
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sensors(&self) -> &SensorSet {
        &self.sensors
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Number of unknown coefficients, `2N`.
    pub fn num_parameters(&self) -> usize {
        2 * self.partition.count()
    }

    pub fn length(&self) -> f64 {
        self.space.geometry().length()
    }

    /// Load of the activation centred at `p`.
    pub fn activation_load(&self, p: f64) -> TractionLoad {
        let geom = *self.space.geometry();
        self.space.assemble_load(|t| activation(&geom, &self.shape, p, t).map(|v| self.amplitude * v))
    }

    /// Load of `∂g_p/∂p`.
    pub fn activation_derivative_load(&self, p: f64) -> TractionLoad {
        let geom = *self.space.geometry();
        self.space.assemble_load(|t| activation_p_derivative(&geom, &self.shape, p, t).map(|v| self.amplitude * v))
    }

    fn coinciding_sensor(&self, p: f64) -> Option<usize> {
        let l = self.length();
        let p = p.rem_euclid(l);
        self.sensors.positions.iter().position(|&s| {
            let d = (p - s).abs();
            d.min(l - d) <= SENSOR_REUSE_TOL * l
        })
    }

    /// Background solution `u_p`, reusing a sensor field when `p` coincides
    /// with a sensor position.
    pub fn activation_field(&self, p: f64) -> DisplacementField {
        match self.coinciding_sensor(p) {
            Some(m) => self.sensors.fields[m].clone(),
            None => self.stiffness.solve(&self.activation_load(p)),
        }
    }

    fn sampled_block(&self, strains: &StrainTable) -> DMatrix<f64> {
        let n = self.partition.count();
        let mut block = DMatrix::zeros(self.num_sensors(), 2 * n);
        for (m, sensor) in self.sensors.strains.iter().enumerate() {
            let (lam, mu) = self.space.subdomain_forms(&self.partition, strains, sensor);
            for j in 0..n {
                block[(m, j)] = -lam[j];
                block[(m, n + j)] = -mu[j];
            }
        }
        block
    }

    /// `F(p_k)`, an `M × 2N` block.
    pub fn assemble_block(&self, p: f64) -> DMatrix<f64> {
        let strains = match self.coinciding_sensor(p) {
            Some(m) => self.sensors.strains[m].clone(),
            None => self.space.strains(&self.activation_field(p)),
        };
        self.sampled_block(&strains)
    }

    /// `F′(p_k) = ∂F(p_k)/∂p_k`.
    pub fn assemble_deriv_block(&self, p: f64) -> DMatrix<f64> {
        let u = self.stiffness.solve(&self.activation_derivative_load(p));
        self.sampled_block(&self.space.strains(&u))
    }

    /// Stacked map for a whole design; blocks are assembled in parallel.
    pub fn linearized_map(&self, design: &[f64], with_derivatives: bool) -> Result<LinearizedMap> {
        let blocks: Vec<(DMatrix<f64>, Option<DMatrix<f64>>)> = design
            .par_iter()
            .map(|&p| (self.assemble_block(p), with_derivatives.then(|| self.assemble_deriv_block(p))))
            .collect();
        let (f, d): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
        let map = stack(&f, design)?;
        Ok(match d.into_iter().collect::<Option<Vec<_>>>() {
            Some(deriv) if with_derivatives => map.with_derivatives(deriv)?,
            _ => map,
        })
    }

    /// Readings of all sensors for the displacement produced by `p` under
    /// element-wise Lamé parameters; used for checking the linearization.
    pub fn nonlinear_readings<C: Fn(usize) -> (f64, f64)>(&self, p: f64, coefficients: C) -> Result<Vec<f64>> {
        let op = self.space.assemble_stiffness_with(coefficients)?;
        let u = op.solve(&self.activation_load(p));
        Ok(self.sensors.readings(&u))
    }
}

/// `F(p) ∈ ℝ^{KM×2N}` together with optional derivative blocks `F′_k`.
#[derive(Debug, Clone)]
pub struct LinearizedMap {
    design: Vec<f64>,
    sensors: usize,
    matrix: DMatrix<f64>,
    derivatives: Option<Vec<DMatrix<f64>>>,
}

impl LinearizedMap {
    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn sensors_per_block(&self) -> usize {
        self.sensors
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn derivatives(&self) -> Option<&[DMatrix<f64>]> {
        self.derivatives.as_deref()
    }

    /// Row block belonging to activation `k`.
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        self.matrix.rows(k * self.sensors, self.sensors).into_owned()
    }

    pub fn with_derivatives(mut self, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != self.design.len() {
            return Err(Error::Dimension(format!(
                "{} derivative blocks for {} activations",
                blocks.len(),
                self.design.len()
            )));
        }
        for b in &blocks {
            if b.shape() != (self.sensors, self.matrix.ncols()) {
                return Err(Error::Dimension(format!("derivative block of shape {:?}", b.shape())));
            }
        }
        self.derivatives = Some(blocks);
        Ok(self)
    }
}

/// Stacks per-activation blocks `F(p_1), …, F(p_K)` vertically.
pub fn stack(blocks: &[DMatrix<f64>], design: &[f64]) -> Result<LinearizedMap> {
    if blocks.is_empty() || blocks.len() != design.len() {
        return Err(Error::Dimension(format!("{} blocks for a design of length {}", blocks.len(), design.len())));
    }
    let (m, cols) = blocks[0].shape();
    if blocks.iter().any(|b| b.shape() != (m, cols)) {
        return Err(Error::Dimension("blocks differ in shape".into()));
    }
    let mut matrix = DMatrix::zeros(m * blocks.len(), cols);
    for (k, b) in blocks.iter().enumerate() {
        matrix.rows_mut(k * m, m).copy_from(b);
    }
    Ok(LinearizedMap { design: design.to_vec(), sensors: m, matrix, derivatives: None })
}

/// Synthetic measurement `y = Fα + ω` with i.i.d. Gaussian noise.
pub fn synth_measure(map: &LinearizedMap, alpha: &DVector<f64>, noise_std: f64, seed: u64) -> Result<DVector<f64>> {
    if alpha.len() != map.matrix.ncols() {
        return Err(Error::Dimension(format!("α has {} entries, F has {} columns", alpha.len(), map.matrix.ncols())));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Config(format!("noise standard deviation must be non-negative, got {noise_std}")));
    }
    let mut y = &map.matrix * alpha;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::LameBackground;
    use crate::geometry::BoundaryGeometry;
    use crate::mesh::{build_mesh, build_subdomains};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    const R: f64 = 1e-3;

    fn model() -> &'static ForwardModel {
        static M: OnceLock<ForwardModel> = OnceLock::new();
        M.get_or_init(|| {
            let geom = BoundaryGeometry::new(R).unwrap();
            let mesh = build_mesh(&geom, 400).unwrap();
            let partition = build_subdomains(&mesh, 50).unwrap();
            let space = FeSpace::new(mesh, geom);
            let stiffness = space.assemble_stiffness(&LameBackground::new(2.7654, 1.1852).unwrap()).unwrap();
            ForwardModel::new(space, stiffness, partition, ActivationShape::new(0.01).unwrap(), 1.0, 20).unwrap()
        })
    }

    fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max() / b.abs().max()
    }

    #[test]
    fn dimensions() {
        let fm = model();
        assert_eq!(fm.sensors().len(), 20);
        let design: Vec<f64> = (0..10).map(|k| 0.3 + 0.4 * k as f64).collect();
        let map = fm.linearized_map(&design, false).unwrap();
        assert_eq!(map.matrix().shape(), (200, 100));
        assert!(map.derivatives().is_none());
    }

    #[test]
    fn single_sensor_field_is_plain_solve() {
        let fm = model();
        let s = precompute_sensors(fm.space(), fm.stiffness(), 1, fm.shape(), 1.0).unwrap();
        let direct = fm.stiffness().solve(&fm.activation_load(0.0));
        assert_eq!(s.fields()[0], direct);
        assert!(precompute_sensors(fm.space(), fm.stiffness(), 0, fm.shape(), 1.0).is_err());
    }

    #[test]
    fn sensor_reuse_matches_fresh_solve() {
        let fm = model();
        let p = fm.sensors().positions()[3];
        let reused = fm.assemble_block(p);
        let fresh = fm.sampled_block(&fm.space().strains(&fm.stiffness().solve(&fm.activation_load(p))));
        assert!(rel_diff(&reused, &fresh) < 1e-12);
    }

    #[test]
    fn reciprocity_at_sensor_position() {
        let fm = model();
        let m = 5;
        let p = fm.sensors().positions()[m];
        let block = fm.assemble_block(p);
        // Row m pairs u_{s_m} with itself; row j pairs u_p with u_{s_j}, and
        // block(p_j) row m pairs u_{p_j} = u_{s_j} with u_{s_m}.
        let other = fm.assemble_block(fm.sensors().positions()[2]);
        for c in 0..block.ncols() {
            assert!((block[(2, c)] - other[(m, c)]).abs() <= 1e-12 * block.abs().max());
        }
    }

    #[test]
    fn periodic_in_position() {
        let fm = model();
        let l = fm.length();
        for p in [0.37, 2.9] {
            let a = fm.assemble_block(p);
            let b = fm.assemble_block(p + l);
            assert!(rel_diff(&b, &a) <= 1e-12);
            let a = fm.assemble_deriv_block(p);
            let b = fm.assemble_deriv_block(p - l);
            assert!(rel_diff(&b, &a) <= 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let fm = model();
        let h = 1e-4;
        for p in [0.55, 1.7, 3.3] {
            let d = fm.assemble_deriv_block(p);
            let fd = (fm.assemble_block(p + h) - fm.assemble_block(p - h)) / (2.0 * h);
            assert!(rel_diff(&fd, &d) < 1e-3, "p={p}: {}", rel_diff(&fd, &d));
        }
    }

    #[test]
    fn blocks_are_local_to_their_activation() {
        let fm = model();
        let a = fm.linearized_map(&[0.4, 1.2, 2.8], true).unwrap();
        let b = fm.linearized_map(&[0.4, 1.25, 2.8], true).unwrap();
        assert_eq!(a.block(0), b.block(0));
        assert_eq!(a.block(2), b.block(2));
        assert_ne!(a.block(1), b.block(1));
        let (da, db) = (a.derivatives().unwrap(), b.derivatives().unwrap());
        assert_eq!(da[0], db[0]);
        assert_eq!(da[2], db[2]);
    }

    #[test]
    fn permuting_design_permutes_blocks() {
        let fm = model();
        let a = fm.linearized_map(&[0.4, 1.2, 2.8], false).unwrap();
        let b = fm.linearized_map(&[2.8, 0.4, 1.2], false).unwrap();
        assert_eq!(a.block(0), b.block(1));
        assert_eq!(a.block(1), b.block(2));
        assert_eq!(a.block(2), b.block(0));
        let single = stack(&[a.block(1)], &[1.2]).unwrap();
        assert_eq!(single.matrix(), &a.block(1));
    }

    #[test]
    fn mirrored_sensors_have_mirrored_fields() {
        let fm = model();
        let mesh = fm.space().mesh();
        let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let index: std::collections::HashMap<_, _> =
            mesh.nodes().iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
        let fields = fm.sensors().fields();
        let m = fields.len();
        for i in 1..m {
            let j = m - i;
            let (u, v) = (fields[i].values(), fields[j].values());
            let scale = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (a, &p) in mesh.nodes().iter().enumerate() {
                let b = index[&key([-p[0], p[1]])];
                assert!((u[2 * a] + v[2 * b]).abs() <= 1e-8 * scale);
                assert!((u[2 * a + 1] - v[2 * b + 1]).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn derivative_is_odd_under_reflection() {
        // The right-edge midpoint is fixed by y -> -y, which maps t to L/2 - t
        // and sensor m to sensor M/2 - m. Whole-domain sums of a row do not
        // depend on the partition.
        let fm = model();
        let p = 1.0 + PI * R / 2.0;
        let d = fm.assemble_deriv_block(p);
        let f = fm.assemble_block(p);
        let n = fm.partition().count();
        let m = fm.num_sensors();
        let sums = |b: &DMatrix<f64>, row: usize| (b.view((row, 0), (1, n)).sum(), b.view((row, n), (1, n)).sum());
        let scale = d.abs().max() * n as f64;
        for i in 0..m {
            let j = (m / 2 + m - i) % m;
            let (a, b) = (sums(&d, i), sums(&d, j));
            assert!((a.0 + b.0).abs() <= 1e-8 * scale && (a.1 + b.1).abs() <= 1e-8 * scale, "{i}: {a:?} {b:?}");
            let (a, b) = (sums(&f, i), sums(&f, j));
            assert!((a.0 - b.0).abs() <= 1e-8 * scale && (a.1 - b.1).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn amplitude_scales_map_quadratically() {
        let fm = model();
        let scaled = ForwardModel::new(
            fm.space().clone(),
            fm.stiffness().clone(),
            fm.partition().clone(),
            *fm.shape(),
            3.0,
            fm.num_sensors(),
        )
        .unwrap();
        assert!(rel_diff(&scaled.assemble_block(1.9), &(fm.assemble_block(1.9) * 9.0)) < 1e-12);
        assert!(rel_diff(&scaled.assemble_deriv_block(1.9), &(fm.assemble_deriv_block(1.9) * 9.0)) < 1e-12);
    }

    #[test]
    fn derivative_scales_with_load() {
        let fm = model();
        let p = 2.1;
        let load = fm.activation_derivative_load(p);
        let scaled = TractionLoad::from_vec(load.values().iter().map(|v| 3.0 * v).collect());
        let u = fm.stiffness().solve(&scaled);
        let block = fm.sampled_block(&fm.space().strains(&u));
        assert!(rel_diff(&block, &(fm.assemble_deriv_block(p) * 3.0)) < 1e-12);
    }

    #[test]
    fn linearization_matches_forward_difference() {
        let fm = model();
        let p = 2.2;
        let block = fm.assemble_block(p);
        let n = fm.partition().count();
        let alpha = DVector::from_fn(2 * n, |i, _| ((i * 37 % 11) as f64 - 5.0) / 5.0).normalize();
        let predicted = &block * &alpha;
        assert_eq!(&block * DVector::zeros(2 * n), DVector::zeros(fm.num_sensors()));
        let base = fm.nonlinear_readings(p, |_| (2.7654, 1.1852)).unwrap();
        let mut errors = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let perturbed = fm
                .nonlinear_readings(p, |e| {
                    let s = fm.partition().subdomain_of(e);
                    (2.7654 + eps * alpha[s], 1.1852 + eps * alpha[n + s])
                })
                .unwrap();
            let fd = DVector::from_iterator(base.len(), perturbed.iter().zip(&base).map(|(a, b)| (a - b) / eps));
            errors.push((&fd - &predicted).norm() / predicted.norm());
        }
        assert!(errors[1] < errors[0] && errors[1] < 1e-3, "{errors:?}");
    }

    #[test]
    fn synthetic_measurements() {
        let fm = model();
        let map = fm.linearized_map(&[0.7, 2.0], false).unwrap();
        let alpha = DVector::from_element(100, 0.1);
        let exact = map.matrix() * &alpha;
        assert_eq!(synth_measure(&map, &alpha, 0.0, 1).unwrap(), exact);
        let a = synth_measure(&map, &alpha, 0.5, 42).unwrap();
        assert_eq!(a, synth_measure(&map, &alpha, 0.5, 42).unwrap());
        assert_ne!(a, synth_measure(&map, &alpha, 0.5, 43).unwrap());
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..250 {
            let y = synth_measure(&map, &alpha, 0.5, seed).unwrap();
            sum_sq += (y - &exact).norm_squared();
            count += exact.len();
        }
        assert!(count >= 10_000);
        let var = sum_sq / count as f64;
        assert!((var - 0.25).abs() < 0.05 * 0.25, "{var}");
        assert!(synth_measure(&map, &DVector::zeros(3), 0.1, 0).is_err());
    }
}
