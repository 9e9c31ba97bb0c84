//! Adaptive color deconvolution.
//!
//! A slide's stain appearance is a 3×3 matrix `M` whose columns are the unit
//! optical-density directions of hematoxylin, eosin and a residual component,
//! together with positive stain weights `W = diag(wh, we, 1)`. Stain densities
//! are recovered per pixel as `s = W · M⁻¹ · od`. The matrix and weights are
//! fitted per image by minimizing an objective that penalizes the residual
//! component, pixels that mix both stains, imbalance between the stains and
//! deviation from a target overall intensity.

mod fit;
mod gradcheck;
mod objective;
mod profile;

pub use self::fit::{fit, fit_samples, sample_tissue, FitOutcome, MIN_TISSUE_PIXELS};
pub use self::gradcheck::{
    check_gradient, finite_difference_gradient, GradCheckConfig, GradCheckReport,
};
pub use self::objective::{
    gradient, objective, objective_and_gradient, saturation, AcdHyperparams, ObjectiveBreakdown,
};
pub use self::profile::{
    build_matrix, separate, AcdParams, StainDensityMap, StainProfile, MAX_CONDITION, MAX_WEIGHT,
    MIN_STAIN_ANGLE_DEG, MIN_WEIGHT, RUIFROK_EOSIN, RUIFROK_HEMATOXYLIN,
};
