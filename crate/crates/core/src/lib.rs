//! Statistical-parity post-processing of model predictions through
//! Wasserstein barycenters.
//!
//! The crate is organised around the pipeline a practitioner runs:
//!
//! - [`empirical`]: grouped prediction samples, CSV ingestion, seeded
//!   Gaussian generators.
//! - [`transport`]: per-group optimal transport maps onto the barycenter,
//!   either exact 1-D quantile matching or the affine (Bures) estimator.
//! - [`disparity`]: pairwise `W2` distances, the Wasserstein disparity `D`
//!   and the independence projection loss `V`.
//! - [`pareto`]: McCann interpolation between the identity and the
//!   barycenter maps, indexed by a disparity tolerance `d`.
//! - [`certify`]: individual-fairness certificates for the frontier and for
//!   compositions with trained models, plus empirical probe checks.
//!
//! Numerical helpers for symmetric matrices live in [`linalg`]; the shared
//! empirical-quantile convention lives in [`quantile`].

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod disparity;
pub mod empirical;
pub mod error;
pub mod linalg;
pub mod pareto;
pub mod quantile;
pub mod transport;

pub use certify::{
    certify_composition_ed, certify_composition_lip, certify_frontier,
    certify_lipschitz_barycenter, certify_optimal, displacement_sup, empirical_if_check,
    Certificate, CompositionMode, DisplacementChoice, DisplacementStats, IfBudget, IfCheckReport, Probe, TheoremTag,
    Verdict,
};
pub use disparity::{
    projection_loss, w2_1d, w2_bures, w2_exact_small, wasserstein_disparity, DisparityMethod,
    DisparityReport,
};
pub use empirical::{
    group_weights, load_csv, sorted_quantiles, synth_gaussian, GaussianGroup, GroupedDataset,
    SyntheticSpec,
};
pub use error::{Error, Result};
pub use pareto::{frontier, t_for_tolerance, transform, ParetoMap, ParetoPoint};
pub use transport::{
    apply_map, bures_fixed_point, fit_affine_barycenter, fit_quantile_barycenter, sqrtm_psd,
    AffineMap, BarycenterModel, FixedPointOptions, GroupMap, QuantileMap1D, Variant,
};
