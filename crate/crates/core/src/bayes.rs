//! Gaussian prior and noise model, posterior covariance, and the A-optimal
//! design objective `Φ_A(p) = tr(A Γ_post(p) Aᵀ)` with its gradient.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linmap::LinearizedMap;
use crate::mesh::RoiMask;

/// Relative diagonal jitter added to `Γ₀` whenever it has to be factorized.
pub const PRIOR_JITTER: f64 = 1e-12;

/// Block-diagonal prior `diag(γ_λ² Γ₀, γ_μ² Γ₀)` with a squared-exponential `Γ₀`.
#[derive(Debug, Clone)]
pub struct PriorCovariance {
    matrix: DMatrix<f64>,
    ell: f64,
    gamma_lambda: f64,
    gamma_mu: f64,
}

impl PriorCovariance {
    /// Builds the prior over `N = midpoints.len()` subdomains.
    pub fn new(midpoints: &[[f64; 2]], ell: f64, gamma_lambda: f64, gamma_mu: f64) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::Config(format!("correlation length must be positive, got {ell}")));
        }
        if !(gamma_lambda > 0.0 && gamma_mu > 0.0) {
            return Err(Error::Config("prior scales must be positive".into()));
        }
        let n = midpoints.len();
        if n == 0 {
            return Err(Error::Dimension("prior over zero subdomains".into()));
        }
        let base = DMatrix::from_fn(n, n, |i, j| {
            let dx = midpoints[i][0] - midpoints[j][0];
            let dy = midpoints[i][1] - midpoints[j][1];
            (-(dx * dx + dy * dy) / (2.0 * ell * ell)).exp()
        });
        let mut matrix = DMatrix::zeros(2 * n, 2 * n);
        matrix.view_mut((0, 0), (n, n)).copy_from(&(&base * (gamma_lambda * gamma_lambda)));
        matrix.view_mut((n, n), (n, n)).copy_from(&(&base * (gamma_mu * gamma_mu)));
        let prior = Self { matrix, ell, gamma_lambda, gamma_mu };
        prior.jittered_cholesky()?;
        Ok(prior)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn gammas(&self) -> (f64, f64) {
        (self.gamma_lambda, self.gamma_mu)
    }

    /// Cholesky factor of `Γ_pr` with each block's diagonal raised by
    /// `1e−12 · tr(block)/N`.
    pub fn jittered_cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        let n = self.dim() / 2;
        let mut m = self.matrix.clone();
        for block in 0..2 {
            let r = block * n..(block + 1) * n;
            let jitter = PRIOR_JITTER * r.clone().map(|i| m[(i, i)]).sum::<f64>() / n as f64;
            for i in r {
                m[(i, i)] += jitter;
            }
        }
        m.clone().cholesky().ok_or_else(|| not_pd("jittered prior covariance", m))
    }
}

fn not_pd(context: &str, m: DMatrix<f64>) -> Error {
    let min_eigenvalue = SymmetricEigen::new(m).eigenvalues.min();
    Error::NotPositiveDefinite { context: context.into(), min_eigenvalue }
}

/// `Γ_noise = σ² I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCovariance {
    variance: f64,
}

impl NoiseCovariance {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config(format!("noise variance must be positive, got {variance}")));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Diagonal weight matrix `A`; the ROI indicator applied to both parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    diagonal: Vec<f64>,
}

impl WeightMatrix {
    pub fn identity(dim: usize) -> Self {
        Self { diagonal: vec![1.0; dim] }
    }

    pub fn from_roi(roi: &RoiMask) -> Self {
        let w = roi.weights();
        Self { diagonal: w.iter().chain(w).copied().collect() }
    }

    pub fn from_diagonal(diagonal: Vec<f64>) -> Self {
        Self { diagonal }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diagonal))
    }
}

/// Posterior covariance, and the mean when data were supplied.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub covariance: DMatrix<f64>,
    pub mean: Option<DVector<f64>>,
}

/// Prior, noise and weights of the linear-Gaussian model.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    prior: PriorCovariance,
    noise: NoiseCovariance,
    weights: WeightMatrix,
    /// Symmetric square root `Γ_pr^{1/2}`.
    sqrt_prior: DMatrix<f64>,
    /// `Γ_pr^{1/2} Aᵀ`.
    weighted_sqrt: DMatrix<f64>,
    prior_trace: f64,
}

impl GaussianModel {
    pub fn new(prior: PriorCovariance, noise: NoiseCovariance, weights: WeightMatrix) -> Result<Self> {
        if weights.dim() != prior.dim() {
            return Err(Error::Dimension(format!("A has {} entries, prior is {}", weights.dim(), prior.dim())));
        }
        let prior_trace = weights.diagonal.iter().enumerate().map(|(i, w)| w * w * prior.matrix[(i, i)]).sum();
        let eig = SymmetricEigen::new(prior.matrix.clone());
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_prior = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let sqrt_prior = (&sqrt_prior + sqrt_prior.transpose()) * 0.5;
        let mut weighted_sqrt = sqrt_prior.clone();
        for (mut col, &w) in weighted_sqrt.column_iter_mut().zip(&weights.diagonal) {
            col *= w;
        }
        Ok(Self { prior, noise, weights, sqrt_prior, weighted_sqrt, prior_trace })
    }

    pub fn prior(&self) -> &PriorCovariance {
        &self.prior
    }

    pub fn noise(&self) -> &NoiseCovariance {
        &self.noise
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    /// `tr(A Γ_pr Aᵀ)`, the value of `Φ_A` without data.
    pub fn prior_trace(&self) -> f64 {
        self.prior_trace
    }

    fn check(&self, f: &DMatrix<f64>) -> Result<()> {
        if f.ncols() != self.prior.dim() {
            return Err(Error::Dimension(format!("F has {} columns, prior is {}", f.ncols(), self.prior.dim())));
        }
        Ok(())
    }

    /// Cholesky factor of `S = F Γ_pr Fᵀ + σ² I`, together with `W = F Γ_pr`.
    fn inner(&self, f: &DMatrix<f64>) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
        self.check(f)?;
        let w = f * &self.prior.matrix;
        let mut s = &w * f.transpose();
        s = (&s + s.transpose()) * 0.5;
        for i in 0..s.nrows() {
            s[(i, i)] += self.noise.variance;
        }
        let chol = s.clone().cholesky().ok_or_else(|| not_pd("F Γ_pr Fᵀ + Γ_noise", s))?;
        Ok((w, chol))
    }

    /// `Γ_post = Γ_pr − Γ_pr Fᵀ S⁻¹ F Γ_pr`, and the mean `Γ_pr Fᵀ S⁻¹ y` if `y` is given.
    pub fn posterior(&self, f: &DMatrix<f64>, y: Option<&DVector<f64>>) -> Result<PosteriorSummary> {
        let (w, chol) = self.inner(f)?;
        let x = chol.solve(&w);
        let mut covariance = &self.prior.matrix - w.transpose() * &x;
        covariance = (&covariance + covariance.transpose()) * 0.5;
        let mean = match y {
            Some(y) => {
                if y.len() != f.nrows() {
                    return Err(Error::Dimension(format!("y has {} entries, F has {} rows", y.len(), f.nrows())));
                }
                Some(w.transpose() * chol.solve(y))
            }
            None => None,
        };
        Ok(PosteriorSummary { covariance, mean })
    }

    /// `(Γ_pr⁻¹ + Fᵀ Γ_noise⁻¹ F)⁻¹`, using the jittered prior factor.
    pub fn posterior_woodbury(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(f)?;
        let mut precision = self.prior.jittered_cholesky()?.inverse();
        precision += f.transpose() * f / self.noise.variance;
        precision = (&precision + precision.transpose()) * 0.5;
        let chol = precision.clone().cholesky().ok_or_else(|| not_pd("posterior precision", precision))?;
        Ok(chol.inverse())
    }

    /// Posterior mean `α̂ = Γ_pr Fᵀ S⁻¹ y`.
    pub fn posterior_mean(&self, f: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.posterior(f, Some(y))?.mean.expect("mean requested"))
    }

    /// Upper factor `R` with `RᵀR = I + B̃ᵀB̃`, where `B̃ = F Γ_pr^{1/2} / σ`,
    /// obtained from a QR factorization of `[B̃; I]`. Then
    /// `Γ_post = Γ_pr^{1/2} (RᵀR)⁻¹ Γ_pr^{1/2}` without any cancellation.
    fn information_factor(&self, f: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check(f)?;
        let sigma = self.noise.variance.sqrt();
        let b = f * &self.sqrt_prior / sigma;
        let (rows, n) = b.shape();
        let mut stacked = DMatrix::zeros(rows + n, n);
        stacked.rows_mut(0, rows).copy_from(&b);
        stacked.rows_mut(rows, n).fill_with_identity();
        Ok((b, stacked.qr().r()))
    }

    /// `E = R⁻ᵀ Γ_pr^{1/2} Aᵀ`, so that `Φ_A = ‖E‖²_F`.
    fn weighted_factor(&self, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        r.tr_solve_upper_triangular(&self.weighted_sqrt).ok_or_else(|| not_pd("I + B̃ᵀB̃", r.transpose() * r))
    }

    /// `Φ_A = tr(A Γ_post Aᵀ)`.
    pub fn phi_a(&self, f: &DMatrix<f64>) -> Result<f64> {
        self.check(f)?;
        if f.iter().all(|&v| v == 0.0) {
            // No information: the posterior is the prior.
            return Ok(self.prior_trace);
        }
        let (_, r) = self.information_factor(f)?;
        Ok(self.weighted_factor(&r)?.norm_squared())
    }

    /// `Φ_A` of a stacked map.
    pub fn phi_a_map(&self, map: &LinearizedMap) -> Result<f64> {
        self.phi_a(map.matrix())
    }

    /// `Φ_A` and `∂Φ_A/∂p_k` for every activation `k`.
    ///
    /// With `H = Γ_pr^{1/2}`, `M = RᵀR` and `V = M⁻¹ H Aᵀ`, the derivative along
    /// a change `Ḟ` of block `k` is `−2⟨Ḟ, B̃ V Vᵀ H⟩ / σ`, restricted to the
    /// rows of block `k`.
    pub fn phi_a_with_gradient(&self, map: &LinearizedMap) -> Result<(f64, Vec<f64>)> {
        let derivatives =
            map.derivatives().ok_or_else(|| Error::Dimension("gradient requires derivative blocks".into()))?;
        let (b, r) = self.information_factor(map.matrix())?;
        let e = self.weighted_factor(&r)?;
        let phi = e.norm_squared();
        let v = r.solve_upper_triangular(&e).ok_or_else(|| not_pd("I + B̃ᵀB̃", r.transpose() * &r))?;
        let z = (&b * &v) * (v.transpose() * &self.sqrt_prior) / self.noise.variance.sqrt();
        let m = map.sensors_per_block();
        let grad =
            derivatives.iter().enumerate().map(|(k, d)| -2.0 * z.rows(k * m, m).component_mul(d).sum()).collect();
        Ok((phi, grad))
    }

    /// Gradient only; see [`GaussianModel::phi_a_with_gradient`].
    pub fn grad_phi_a(&self, map: &LinearizedMap) -> Result<Vec<f64>> {
        Ok(self.phi_a_with_gradient(map)?.1)
    }
}
