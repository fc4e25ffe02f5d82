//! Centered least-squares problems built from an ensemble and a dataset.

use crate::dataset::Dataset;
use crate::ensemble::TreeEnsemble;
use crate::error::{Error, Result};
use crate::mapping::MappingMatrix;
use crate::solver::Validation;

/// Mapping matrix plus a target centered by its training mean.
///
/// The mean is kept as `intercept` and restored when rules are extracted.
#[derive(Debug, Clone)]
pub struct FitProblem {
    pub matrix: MappingMatrix,
    pub target: Vec<f64>,
    pub intercept: f64,
}

impl FitProblem {
    pub fn new(ensemble: &TreeEnsemble, data: &Dataset) -> Result<Self> {
        let matrix = MappingMatrix::build(ensemble, data)?;
        let intercept = data.target_mean();
        let target = data.target().iter().map(|y| y - intercept).collect();
        Ok(Self {
            matrix,
            target,
            intercept,
        })
    }

    /// Held-out rows mapped through the same ensemble and centered with the
    /// training mean.
    pub fn held_out(&self, ensemble: &TreeEnsemble, data: &Dataset) -> Result<HeldOut> {
        let matrix = MappingMatrix::build(ensemble, data)?;
        if matrix.n_columns() != self.matrix.n_columns() {
            return Err(Error::dims(
                "held-out columns",
                self.matrix.n_columns(),
                matrix.n_columns(),
            ));
        }
        let target = data.target().iter().map(|y| y - self.intercept).collect();
        Ok(HeldOut { matrix, target })
    }
}

#[derive(Debug, Clone)]
pub struct HeldOut {
    pub matrix: MappingMatrix,
    pub target: Vec<f64>,
}

impl HeldOut {
    pub fn as_validation(&self) -> Validation<'_> {
        Validation {
            matrix: &self.matrix,
            target: &self.target,
        }
    }

    /// Mean squared error of `intercept + M w` on the held-out rows, in
    /// uncentered units.
    pub fn mse(&self, w: &[f64]) -> Result<f64> {
        self.as_validation().mse(w)
    }
}
