//! Deterministic numerical kernels of the co-kriging model.
//!
//! Everything the sampler and emulator evaluate lives here: the separable
//! squared-exponential correlation, basis expansions for means and scale
//! discrepancies, the Normal-inverse-gamma conjugate bookkeeping (the
//! "hatted" quantities), the factorized augmented likelihood, the collapsed
//! marginal density of `(tree, phi)`, the missing-data full conditional,
//! and the directly samplable conditionals for `(sigma^2, gamma, beta)`.
//!
//! All inverses go through Cholesky solves and all determinants through
//! Cholesky log-diagonals; densities are evaluated in log space.

mod basis;
mod conditionals;
mod density;
mod hat;
mod interp;
mod kernel;
mod prior;
pub mod spd;

pub use basis::BasisSpec;
pub use conditionals::{draw_leaf_level_params, gibbs_conditionals, GibbsConditionals};
pub use density::{augmented_loglik, marginal_level_density};
pub use hat::{hat_bundle, HatBundle, LevelData};
pub use interp::{
    interp_same_level, interp_upper_level, missing_conditional, InterpMoments,
    MissingConditional,
};
pub use kernel::{cross_corr, self_corr, DEFAULT_NUGGET};
pub use prior::{LevelPrior, NIGPrior, PhiPrior};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Per-leaf, per-level parameter block.
///
/// Levels are zero-based: `beta[t]`, `sigma2[t]`, `phi[t]` exist for every
/// level `t = 0..S`, while `gamma[t]` is the scale-discrepancy coefficient
/// linking level `t` to level `t+1` (so it has length `S-1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafParams {
    pub beta: Vec<DVector<f64>>,
    pub gamma: Vec<DVector<f64>>,
    pub sigma2: Vec<f64>,
    pub phi: Vec<DVector<f64>>,
}

impl LeafParams {
    pub fn n_levels(&self) -> usize {
        self.sigma2.len()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let s = self.n_levels();
        if self.beta.len() != s || self.phi.len() != s || self.gamma.len() + 1 != s {
            return Err(crate::Error::Config(
                "leaf parameter block has inconsistent level counts".into(),
            ));
        }
        if self.sigma2.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(crate::Error::Config("sigma^2 must be finite and positive".into()));
        }
        if self
            .phi
            .iter()
            .any(|p| p.iter().any(|v| !(v.is_finite() && *v >= 0.0)))
        {
            return Err(crate::Error::Config(
                "phi components must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}
