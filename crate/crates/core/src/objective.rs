//! `Φ_A` as a function of activation positions.

use std::borrow::Cow;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bayes::GaussianModel;
use crate::error::{Error, Result};
use crate::linmap::{stack, ForwardModel, LinearizedMap};
use crate::optim::{search_grid, Objective};

/// Relative distance (in units of `L`) under which a position is served from
/// the grid cache.
const GRID_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct GridCache {
    points: usize,
    blocks: Vec<DMatrix<f64>>,
}

/// A-optimality criterion for a fixed forward model and Gaussian model.
#[derive(Debug, Clone)]
pub struct DesignObjective {
    model: ForwardModel,
    gaussian: GaussianModel,
    grid: Option<GridCache>,
}

impl DesignObjective {
    pub fn new(model: ForwardModel, gaussian: GaussianModel) -> Result<Self> {
        if model.num_parameters() != gaussian.prior().dim() {
            return Err(Error::Dimension(format!(
                "forward model has {} parameters, prior has {}",
                model.num_parameters(),
                gaussian.prior().dim()
            )));
        }
        Ok(Self { model, gaussian, grid: None })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn gaussian(&self) -> &GaussianModel {
        &self.gaussian
    }

    /// Precomputes `F(p)` at the `j` search grid points; later evaluations at
    /// those points reuse the blocks. Repeated calls with the same `j` keep
    /// the existing cache.
    pub fn cache_grid(&mut self, j: usize) {
        if self.grid.as_ref().is_some_and(|g| g.points == j) {
            return;
        }
        let grid = search_grid(self.model.length(), j);
        let blocks = grid.par_iter().map(|&p| self.model.assemble_block(p)).collect();
        self.grid = Some(GridCache { points: j, blocks });
    }

    fn block(&self, p: f64) -> Cow<'_, DMatrix<f64>> {
        if let Some(cache) = &self.grid {
            let l = self.model.length();
            let x = p.rem_euclid(l) / l * cache.points as f64;
            let i = x.round();
            if (x - i).abs() <= GRID_MATCH_TOL * cache.points as f64 {
                return Cow::Borrowed(&cache.blocks[i as usize % cache.points]);
            }
        }
        Cow::Owned(self.model.assemble_block(p))
    }

    /// Stacked `F(p)`, with derivative blocks if requested.
    pub fn map(&self, design: &[f64], with_derivatives: bool) -> Result<LinearizedMap> {
        let blocks: Vec<DMatrix<f64>> = design.iter().map(|&p| self.block(p).into_owned()).collect();
        let map = stack(&blocks, design)?;
        if with_derivatives {
            map.with_derivatives(design.iter().map(|&p| self.model.assemble_deriv_block(p)).collect())
        } else {
            Ok(map)
        }
    }
}

impl Objective for DesignObjective {
    fn length(&self) -> f64 {
        self.model.length()
    }

    fn value(&self, design: &[f64]) -> Result<f64> {
        self.gaussian.phi_a_map(&self.map(design, false)?)
    }

    fn value_and_gradient(&self, design: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.gaussian.phi_a_with_gradient(&self.map(design, true)?)
    }
}
